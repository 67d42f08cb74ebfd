"""Author careers: established-author sets, profiles, matched controls, and
new-collaborator tracking.

All orderings are by explicit keys (publication date, then paper id; author
ids ascending), so outputs never depend on input record order.
"""

from __future__ import annotations

import datetime
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field

from .corpus import Corpus, citation_count

UNMATCHED_NO_CANDIDATE = "no-eligible-control"

FIELD_SAME = "same"
FIELD_DIFFERENT = "different"
FIELD_UNKNOWN = "unknown"


def established_authors(corpus: Corpus, min_pubs: int = 5, cutoff_year: int = 2019) -> set[str]:
    """Authors with at least ``min_pubs`` papers published by ``cutoff_year``."""
    out = set()
    for author in corpus.author_ids():
        n = sum(1 for pid in corpus.author_papers(author) if corpus.paper(pid).year <= cutoff_year)
        if n >= min_pubs:
            out.add(author)
    return out


def _modal(counts: Counter) -> str | None:
    if not counts:
        return None
    best = max(counts.values())
    return min(code for code, n in counts.items() if n == best)


@dataclass(frozen=True)
class CareerProfile:
    author_id: str
    first_pub_year: int
    last_pub_year: int
    modal_l0_field: str | None
    modal_l1_field: str | None
    pub_count_window: int
    prior_impact: int
    window: tuple[int, int]


def career_profile(corpus: Corpus, author_id: str, window: tuple[int, int] = (2015, 2019)) -> CareerProfile:
    """Career summary; modal field ties break to the lexicographically smallest code.

    ``prior_impact`` is the citation total of the author's papers published in
    the window, counting citers dated through the end of the window.
    """
    papers = corpus.author_papers(author_id)  # raises KeyError for unknown authors
    years = [corpus.paper(p).year for p in papers]
    l0: Counter = Counter()
    l1: Counter = Counter()
    pub_count = 0
    impact = 0
    horizon = datetime.date(window[1], 12, 31)
    for pid in papers:
        rec = corpus.paper(pid)
        for code in rec.fields_l0:
            l0[code] += 1
        for code in rec.fields_l1:
            l1[code] += 1
        if window[0] <= rec.year <= window[1]:
            pub_count += 1
            impact += citation_count(corpus, pid, horizon)
    return CareerProfile(
        author_id=author_id,
        first_pub_year=min(years),
        last_pub_year=max(years),
        modal_l0_field=_modal(l0),
        modal_l1_field=_modal(l1),
        pub_count_window=pub_count,
        prior_impact=impact,
        window=window,
    )


PROFILE_HEADER = (
    "author_id",
    "first_pub_year",
    "last_pub_year",
    "modal_l0_field",
    "modal_l1_field",
    "pub_count_window",
    "prior_impact",
)


def profile_rows(corpus: Corpus, authors, window: tuple[int, int] = (2015, 2019)) -> list[tuple]:
    rows = []
    for author in sorted(authors):
        p = career_profile(corpus, author, window)
        rows.append(
            (p.author_id, p.first_pub_year, p.last_pub_year, p.modal_l0_field, p.modal_l1_field,
             p.pub_count_window, p.prior_impact)
        )
    return rows


@dataclass
class Matching:
    pairs: dict[str, str]
    distances: dict[str, int]
    unmatched: list[tuple[str, str]] = field(default_factory=list)

    def rows(self) -> list[tuple]:
        return [(t, self.pairs[t], self.distances[t]) for t in sorted(self.pairs)]

    def unmatched_rows(self) -> list[tuple]:
        return sorted(self.unmatched)


MATCHING_HEADER = ("treated_id", "control_id", "pub_count_distance")
UNMATCHED_HEADER = ("treated_id", "reason")


def match_controls(treated: set[str], pool: set[str], profiles: dict[str, CareerProfile]) -> Matching:
    """Greedy nearest-neighbor matching on windowed publication count, without replacement.

    Treated authors are processed in ascending id order. Candidates must share
    the treated author's (first publication year, modal level-1 field) exactly;
    among them the smallest |publication count difference| wins, ties broken by
    the smaller candidate id. Matched controls leave the pool.
    """
    overlap = treated & pool
    if overlap:
        raise ValueError(f"treated and pool overlap: {sorted(overlap)[:5]}")
    missing = [a for a in sorted(treated | pool) if a not in profiles]
    if missing:
        raise ValueError(f"profiles missing for: {missing[:5]}")

    # (cohort year, field) -> sorted list of (pub_count, author_id)
    buckets: dict[tuple, list[tuple[int, str]]] = {}
    for author in sorted(pool):
        p = profiles[author]
        buckets.setdefault((p.first_pub_year, p.modal_l1_field), []).append((p.pub_count_window, author))
    for bucket in buckets.values():
        bucket.sort()

    matching = Matching(pairs={}, distances={})
    for author in sorted(treated):
        p = profiles[author]
        bucket = buckets.get((p.first_pub_year, p.modal_l1_field))
        if not bucket:
            matching.unmatched.append((author, UNMATCHED_NO_CANDIDATE))
            continue
        target = p.pub_count_window
        i = bisect_left(bucket, (target, ""))
        # Walk outward from the insertion point. Distance grows monotonically on
        # each side (except inside equal-count runs, where smaller ids appear
        # later on the left), so stop once a side exceeds the best distance.
        best: tuple[int, str] | None = None
        for j in range(i - 1, -1, -1):
            count, cand = bucket[j]
            dist = target - count
            if best is not None and dist > best[0]:
                break
            if best is None or (dist, cand) < best:
                best = (dist, cand)
        for j in range(i, len(bucket)):
            count, cand = bucket[j]
            dist = count - target
            if best is not None and dist > best[0]:
                break
            if best is None or (dist, cand) < best:
                best = (dist, cand)
        assert best is not None
        dist, chosen = best
        matching.pairs[author] = chosen
        matching.distances[author] = dist
        bucket.remove((profiles[chosen].pub_count_window, chosen))
    return matching


AFFIL_SAME = "same"
AFFIL_DIFFERENT = "different"
AFFIL_UNKNOWN = "unknown"


@dataclass(frozen=True)
class CollaboratorLink:
    collaborator_id: str
    field_category: str  # same | different | unknown
    affiliation_category: str  # same | different | unknown
    affiliation_fallback: bool  # True when a latest-known affiliation stood in


@dataclass(frozen=True)
class CollaboratorEvent:
    author_id: str
    paper_id: str
    pub_date: datetime.date
    new_collaborators: tuple[CollaboratorLink, ...]

    @property
    def new_count(self) -> int:
        return len(self.new_collaborators)


COLLAB_HEADER = (
    "author_id",
    "paper_id",
    "pub_date",
    "collaborator_id",
    "field_category",
    "affiliation_category",
    "affiliation_fallback",
)


def _modal_l1_before(corpus: Corpus, author_id: str, before_year: int) -> tuple[str | None, int]:
    """(modal level-1 field, paper count) over the author's papers before a year."""
    counts: Counter = Counter()
    n = 0
    for pid in corpus.author_papers(author_id):
        rec = corpus.paper(pid)
        if rec.year < before_year:
            n += 1
            for code in rec.fields_l1:
                counts[code] += 1
    return _modal(counts), n


def _affiliation_on_paper(
    corpus: Corpus, author_id: str, focal_pid: str
) -> tuple[frozenset[str], bool]:
    """Affiliation ids for the author on the focal paper, falling back to the
    latest paper (career order, up to the focal one) that carries any."""
    focal = corpus.paper(focal_pid)
    direct = focal.affiliations.get(author_id)
    if direct:
        return frozenset(direct), False
    focal_key = (focal.pub_date, corpus.resolve(focal_pid))
    for pid in reversed(corpus.author_papers(author_id)):
        rec = corpus.paper(pid)
        if (rec.pub_date, pid) > focal_key:
            continue
        ids = rec.affiliations.get(author_id)
        if ids:
            return frozenset(ids), True
    return frozenset(), False


def new_collaborator_series(
    corpus: Corpus, author_id: str, established: set[str], min_prior_pubs: int = 5
) -> list[CollaboratorEvent]:
    """Per paper in career order, the author's never-seen-before established coauthors.

    Field categorization compares both parties' modal level-1 fields over their
    pre-publication-year records and requires ``min_prior_pubs`` prior papers
    on both sides; otherwise the pair is unknown. Affiliation categorization
    compares paper-level affiliation ids, with a flagged fallback to the latest
    known affiliation.
    """
    if author_id not in established:
        raise ValueError(f"author {author_id} is not in the established set")
    events = []
    seen: set[str] = set()
    for pid in corpus.author_papers(author_id):
        rec = corpus.paper(pid)
        coauthors = [a for a in rec.author_ids if a != author_id and a in established]
        links = []
        for collab in coauthors:
            if collab in seen:
                continue
            seen.add(collab)
            own_field, own_n = _modal_l1_before(corpus, author_id, rec.year)
            their_field, their_n = _modal_l1_before(corpus, collab, rec.year)
            if own_n < min_prior_pubs or their_n < min_prior_pubs or own_field is None or their_field is None:
                field_cat = FIELD_UNKNOWN
            else:
                field_cat = FIELD_SAME if own_field == their_field else FIELD_DIFFERENT
            own_affil, own_fb = _affiliation_on_paper(corpus, author_id, pid)
            their_affil, their_fb = _affiliation_on_paper(corpus, collab, pid)
            if not own_affil or not their_affil:
                affil_cat = AFFIL_UNKNOWN
            else:
                affil_cat = AFFIL_SAME if own_affil & their_affil else AFFIL_DIFFERENT
            links.append(CollaboratorLink(collab, field_cat, affil_cat, own_fb or their_fb))
        events.append(CollaboratorEvent(author_id, pid, rec.pub_date, tuple(links)))
    return events


def collaborator_rows(corpus: Corpus, authors, established: set[str], min_prior_pubs: int = 5) -> list[tuple]:
    rows = []
    for author in sorted(authors):
        for event in new_collaborator_series(corpus, author, established, min_prior_pubs):
            for link in event.new_collaborators:
                rows.append(
                    (author, event.paper_id, event.pub_date.isoformat(), link.collaborator_id,
                     link.field_category, link.affiliation_category, link.affiliation_fallback)
                )
    return rows
