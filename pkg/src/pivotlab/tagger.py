"""Boolean keyword tagging and title-word relative-frequency scoring.

Query grammar (AND binds tighter than OR; parentheses group):

    expr   := term (OR term)*
    term   := factor (AND factor)*
    factor := "quoted phrase" | bareword | ( expr )

Matching is case-insensitive and token-boundary-aware: a phrase matches only
where it is not directly adjacent to another alphanumeric character, so
``hcov`` matches "HCoV-19" but not "hcovid".
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .corpus import Corpus

_TOKEN_RE = re.compile(r"[a-z0-9]+")
_WS_RE = re.compile(r"\s+")


# Boolean query used to identify COVID-19 papers by title and abstract.
COVID_QUERY = (
    '"2019-nCoV" OR "COVID-19" OR "SARS-CoV-2" OR "HCoV-2019" OR "hcov" OR '
    '"NCOVID-19" OR "severe acute respiratory syndrome coronavirus 2" OR '
    '"severe acute respiratory syndrome corona virus 2" OR '
    '(("coronavirus" OR "corona virus") AND (Wuhan OR China OR novel))'
)


class QueryParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class Phrase:
    text: str


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


TopicQuery = Phrase | And | Or


def _normalize(text: str) -> str:
    return _WS_RE.sub(" ", text.lower()).strip()


def _scan(query: str):
    """Yield (kind, value, position) tokens; kinds: phrase, word, and, or, lparen, rparen."""
    i, n = 0, len(query)
    while i < n:
        ch = query[i]
        if ch.isspace():
            i += 1
            continue
        if ch == '"':
            end = query.find('"', i + 1)
            if end < 0:
                raise QueryParseError("unbalanced quote", i)
            yield ("phrase", query[i + 1 : end], i)
            i = end + 1
        elif ch == "(":
            yield ("lparen", ch, i)
            i += 1
        elif ch == ")":
            yield ("rparen", ch, i)
            i += 1
        else:
            m = re.match(r'[^\s()"]+', query[i:])
            word = m.group(0)
            kind = word.upper() if word.upper() in ("AND", "OR") else None
            yield (kind.lower() if kind else "word", word, i)
            i += len(word)


def parse_query(text: str) -> TopicQuery:
    """Parse a boolean phrase query into its expression tree."""
    tokens = list(_scan(text))
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else ("end", "", len(text))

    def advance():
        nonlocal pos
        tok = peek()
        pos += 1
        return tok

    def parse_factor():
        kind, value, at = advance()
        if kind in ("phrase", "word"):
            normalized = _normalize(value)
            if not normalized:
                raise QueryParseError("empty phrase", at)
            return Phrase(normalized)
        if kind == "lparen":
            inner = parse_expr()
            kind2, _, at2 = advance()
            if kind2 != "rparen":
                raise QueryParseError("unbalanced parenthesis", at2)
            return inner
        raise QueryParseError(f"expected a phrase, word or '(', found {value!r}" if value else "unexpected end of query", at)

    def parse_term():
        children = [parse_factor()]
        while peek()[0] == "and":
            advance()
            children.append(parse_factor())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_expr():
        children = [parse_term()]
        while peek()[0] == "or":
            advance()
            children.append(parse_term())
        return children[0] if len(children) == 1 else Or(tuple(children))

    tree = parse_expr()
    kind, value, at = peek()
    if kind != "end":
        raise QueryParseError(f"unexpected {value!r} after end of expression", at)
    return tree


_PHRASE_PATTERNS: dict[str, re.Pattern] = {}


def _phrase_pattern(phrase: str) -> re.Pattern:
    pat = _PHRASE_PATTERNS.get(phrase)
    if pat is None:
        pat = re.compile(r"(?<![a-z0-9])" + re.escape(phrase) + r"(?![a-z0-9])")
        _PHRASE_PATTERNS[phrase] = pat
    return pat


def evaluate(query: TopicQuery, text: str) -> bool:
    """Evaluate a query against raw text (normalized internally)."""
    return _evaluate(query, _normalize(text))


def _evaluate(query: TopicQuery, normalized: str) -> bool:
    if isinstance(query, Phrase):
        return bool(_phrase_pattern(query.text).search(normalized))
    if isinstance(query, And):
        return all(_evaluate(c, normalized) for c in query.children)
    return any(_evaluate(c, normalized) for c in query.children)


def tag(corpus: Corpus, query: TopicQuery, year_filter: tuple[int, int] | None = None) -> set[str]:
    """Paper ids whose title+abstract match the query, optionally within a year range."""
    tagged = set()
    for rec in corpus.papers():
        if year_filter is not None and not (year_filter[0] <= rec.year <= year_filter[1]):
            continue
        text = rec.title if rec.abstract is None else f"{rec.title} {rec.abstract}"
        if evaluate(query, text):
            tagged.add(rec.paper_id)
    return tagged


def tokenize_title(title: str) -> list[str]:
    """Lowercase, split on non-alphanumeric runs, drop tokens shorter than 2."""
    return [t for t in _TOKEN_RE.findall(title.lower()) if len(t) >= 2]


@dataclass
class WordScoreTable:
    """Topic-indicative title words with their relative-frequency scores.

    ``scores`` is ordered by score descending, ties by word. A word's score is
    the smoothed ratio of its document frequency inside the topic set versus
    outside: ((n_topic+1)/N_topic) / ((n_nontopic+1)/N_nontopic), counting each
    paper at most once per word.
    """

    scores: dict[str, float]
    min_topic_papers: int
    top_k: int
    exclusions: tuple[str, ...]

    def __contains__(self, word: str) -> bool:
        return word in self.scores

    def __len__(self) -> int:
        return len(self.scores)

    def get(self, word: str) -> float | None:
        return self.scores.get(word)

    def rows(self) -> list[tuple[str, float]]:
        return list(self.scores.items())


def build_relfreq(
    corpus: Corpus,
    topic: set[str],
    min_topic_papers: int = 20,
    top_k: int = 500,
    exclusions: Iterable[str] = (),
    year: int | None = None,
) -> WordScoreTable:
    """Score title words by topic vs non-topic document frequency.

    ``topic`` must be a subset of one analysis year's papers; the non-topic
    side is every other paper published that year. Words must appear in at
    least ``min_topic_papers`` topic titles; the table keeps the ``top_k``
    highest scores (ties broken by word) and then removes ``exclusions``.
    """
    if not topic:
        raise ValueError("topic set is empty")
    topic_years = {corpus.paper(p).year for p in topic}
    if year is None:
        if len(topic_years) != 1:
            raise ValueError(f"topic papers span multiple years {sorted(topic_years)}; pass year explicitly")
        year = topic_years.pop()
    elif topic_years - {year}:
        raise ValueError(f"topic contains papers outside analysis year {year}")

    topic_ids = set(topic)
    n_topic_papers = 0
    n_nontopic_papers = 0
    topic_counts: dict[str, int] = {}
    nontopic_counts: dict[str, int] = {}
    for rec in corpus.papers():
        if rec.year != year:
            continue
        words = set(tokenize_title(rec.title))
        if rec.paper_id in topic_ids:
            n_topic_papers += 1
            counts = topic_counts
        else:
            n_nontopic_papers += 1
            counts = nontopic_counts
        for w in words:
            counts[w] = counts.get(w, 0) + 1
    if n_nontopic_papers == 0:
        raise ValueError("no non-topic papers in the analysis year")

    scored = []
    for word, n_topic in topic_counts.items():
        if n_topic < min_topic_papers:
            continue
        n_non = nontopic_counts.get(word, 0)
        score = ((n_topic + 1) / n_topic_papers) / ((n_non + 1) / n_nontopic_papers)
        scored.append((word, score))
    scored.sort(key=lambda ws: (-ws[1], ws[0]))
    excluded = {_normalize(w) for w in exclusions}
    table = {w: s for w, s in scored[:top_k] if w not in excluded}
    return WordScoreTable(
        scores=table,
        min_topic_papers=min_topic_papers,
        top_k=top_k,
        exclusions=tuple(sorted(excluded)),
    )


class TitleScore(NamedTuple):
    value: float
    covered: bool  # False when no title token appears in the table


def score_title(title: str, table: WordScoreTable) -> TitleScore:
    """Mean table score over the title's scored tokens, occurrences counted."""
    scores = [table.scores[t] for t in tokenize_title(title) if t in table.scores]
    if not scores:
        return TitleScore(0.0, False)
    return TitleScore(sum(scores) / len(scores), True)


def author_title_proximity(
    corpus: Corpus, author_id: str, table: WordScoreTable, cutoff_year: int
) -> float | None:
    """Mean title score over the author's papers published before ``cutoff_year``.

    Returns None (undefined) when the author has no pre-cutoff papers; titles
    with no scored tokens contribute 0.
    """
    papers = corpus.author_papers(author_id)  # raises KeyError for unknown authors
    values = [score_title(corpus.paper(p).title, table).value for p in papers if corpus.paper(p).year < cutoff_year]
    if not values:
        return None
    return sum(values) / len(values)
