"""Pivot size: how far a paper departs from its author's prior reference sources.

For author i and focal paper j, build a sparse vector of venue counts over
j's references and another over the references of i's prior papers (either
the three calendar years before j, or the full career). The pivot size is

    1 - cos(focal venue vector, prior venue vector)

clamped into [0, 1]: 0 means the paper draws on exactly the author's usual
distribution of venues, 1 means an entirely disjoint set. References whose
targets have no known venue are dropped from both vectors.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

from .corpus import Corpus

REASON_NO_PRIOR = "no-prior-papers"
REASON_NO_VENUES_FOCAL = "no-resolvable-venues-focal"
REASON_NO_VENUES_PRIOR = "no-resolvable-venues-prior"
REASON_NO_DEFINED_AUTHORS = "no-defined-authors"  # paper-level aggregate only


class PivotWindow(Enum):
    THREE_YEAR = "three-year"
    FULL_CAREER = "full-career"

    @classmethod
    def from_flag(cls, flag: str) -> "PivotWindow":
        for member in cls:
            if member.value == flag:
                return member
        raise ValueError(f"unknown window {flag!r}; expected one of {[m.value for m in cls]}")


@dataclass(frozen=True)
class Undefined:
    reason: str


class VenueVector:
    """Sparse nonnegative vector over venue ids with a cached Euclidean norm."""

    __slots__ = ("weights", "_norm_sq")

    def __init__(self, weights: dict[str, float]):
        self.weights = {v: float(w) for v, w in weights.items() if w != 0}
        self._norm_sq: float | None = None

    @property
    def norm_sq(self) -> float:
        if self._norm_sq is None:
            self._norm_sq = sum(w * w for w in self.weights.values())
        return self._norm_sq

    @property
    def norm(self) -> float:
        return math.sqrt(self.norm_sq)

    def dot(self, other: "VenueVector") -> float:
        a, b = self.weights, other.weights
        if len(a) > len(b):
            a, b = b, a
        return sum(w * b[v] for v, w in a.items() if v in b)

    def cosine(self, other: "VenueVector") -> float:
        # sqrt of the product (not product of sqrts) keeps integer count
        # vectors exact: identical vectors give cosine 1.0, not 1 - 1ulp.
        return self.dot(other) / math.sqrt(self.norm_sq * other.norm_sq)

    def __len__(self) -> int:
        return len(self.weights)

    def __eq__(self, other) -> bool:
        return isinstance(other, VenueVector) and self.weights == other.weights


@dataclass(frozen=True)
class PivotResult:
    value: float | None
    reason: str | None

    def __post_init__(self):
        if (self.value is None) == (self.reason is None):
            raise ValueError("exactly one of value and reason must be set")

    @property
    def defined(self) -> bool:
        return self.value is not None

    @classmethod
    def of(cls, value: float) -> "PivotResult":
        return cls(value=value, reason=None)

    @classmethod
    def undefined(cls, reason: str) -> "PivotResult":
        return cls(value=None, reason=reason)


def _reference_venue_counts(corpus: Corpus, paper_id: str) -> dict[str, int]:
    counts: dict[str, int] = {}
    for ref in corpus.paper(paper_id).references:
        if ref not in corpus:
            continue
        venue = corpus.paper(ref).venue_id
        if venue is not None:
            counts[venue] = counts.get(venue, 0) + 1
    return counts


def focal_vector(corpus: Corpus, paper_id: str) -> VenueVector | Undefined:
    """Venue counts over the paper's resolvable references."""
    counts = _reference_venue_counts(corpus, paper_id)
    if not counts:
        return Undefined(REASON_NO_VENUES_FOCAL)
    return VenueVector(counts)


def prior_papers(corpus: Corpus, author_id: str, focal_paper_id: str, window: PivotWindow) -> list[str]:
    """The author's papers inside the window of the focal paper, focal excluded."""
    focal = corpus.paper(focal_paper_id)
    if author_id not in focal.author_ids:
        raise ValueError(f"author {author_id} is not listed on paper {focal_paper_id}")
    y = focal.year
    if window is PivotWindow.THREE_YEAR:
        in_window = lambda year: y - 3 <= year <= y - 1
    else:
        in_window = lambda year: year < y
    return [
        pid
        for pid in corpus.author_papers(author_id)
        if pid != corpus.resolve(focal_paper_id) and in_window(corpus.paper(pid).year)
    ]


def prior_vector(
    corpus: Corpus,
    author_id: str,
    focal_paper_id: str,
    window: PivotWindow,
    cache: dict | None = None,
) -> VenueVector | Undefined:
    """Venue counts over the union of references of the author's prior work.

    The optional ``cache`` memoizes by (author, focal year, window); the prior
    window never contains same-year papers, so the focal paper id does not
    enter the key.
    """
    if cache is not None:
        key = (author_id, corpus.paper(focal_paper_id).year, window)
        hit = cache.get(key)
        if hit is not None:
            # still validate the author-on-paper precondition
            if author_id not in corpus.paper(focal_paper_id).author_ids:
                raise ValueError(f"author {author_id} is not listed on paper {focal_paper_id}")
            return hit
    papers = prior_papers(corpus, author_id, focal_paper_id, window)
    if not papers:
        result: VenueVector | Undefined = Undefined(REASON_NO_PRIOR)
    else:
        counts: dict[str, int] = {}
        for pid in papers:
            for venue, n in _reference_venue_counts(corpus, pid).items():
                counts[venue] = counts.get(venue, 0) + n
        result = VenueVector(counts) if counts else Undefined(REASON_NO_VENUES_PRIOR)
    if cache is not None:
        cache[key] = result
    return result


def pivot_from_vectors(focal: VenueVector, prior: VenueVector) -> float:
    """1 - cosine, clamped into [0, 1] against floating-point drift."""
    return min(1.0, max(0.0, 1.0 - focal.cosine(prior)))


def pivot_size(
    corpus: Corpus,
    author_id: str,
    paper_id: str,
    window: PivotWindow = PivotWindow.THREE_YEAR,
    cache: dict | None = None,
) -> PivotResult:
    focal = focal_vector(corpus, paper_id)
    if isinstance(focal, Undefined):
        # evaluate prior anyway for its precondition check (author on paper)
        prior_papers(corpus, author_id, paper_id, window)
        return PivotResult.undefined(focal.reason)
    prior = prior_vector(corpus, author_id, paper_id, window, cache)
    if isinstance(prior, Undefined):
        return PivotResult.undefined(prior.reason)
    return PivotResult.of(pivot_from_vectors(focal, prior))


def paper_pivot(
    corpus: Corpus,
    paper_id: str,
    window: PivotWindow = PivotWindow.THREE_YEAR,
    cache: dict | None = None,
) -> PivotResult:
    """Unweighted mean pivot size over the paper's authors with defined pivots."""
    rec = corpus.paper(paper_id)
    values = []
    first_reason = REASON_NO_DEFINED_AUTHORS
    for i, author in enumerate(rec.author_ids):
        result = pivot_size(corpus, author, paper_id, window, cache)
        if result.defined:
            values.append(result.value)
        elif i == 0:
            first_reason = result.reason
    if not values:
        return PivotResult.undefined(first_reason if rec.author_ids else REASON_NO_DEFINED_AUTHORS)
    return PivotResult.of(sum(values) / len(values))


AUTHOR_TABLE_HEADER = ("author_id", "paper_id", "window", "pivot_size", "reason")
PAPER_TABLE_HEADER = ("paper_id", "window", "n_authors", "n_defined", "pivot_size", "reason")


def _chunks(items: tuple, n: int) -> list[tuple]:
    size, rem = divmod(len(items), n)
    out, start = [], 0
    for i in range(n):
        end = start + size + (1 if i < rem else 0)
        out.append(items[start:end])
        start = end
    return [c for c in out if c]


def author_pivot_rows(corpus: Corpus, window: PivotWindow, threads: int = 1) -> list[tuple]:
    """One row per (author, paper) pair, sorted by (author_id, paper_id).

    Rows are computed per paper in parallel when ``threads`` > 1; results are
    merged in input order, so output is independent of the thread count.
    """
    cache: dict = {}

    def rows_for(paper_ids):
        rows = []
        for pid in paper_ids:
            for author in corpus.paper(pid).author_ids:
                result = pivot_size(corpus, author, pid, window, cache)
                rows.append((author, pid, window.value, result.value, result.reason))
        return rows

    all_rows = _run_chunked(corpus.paper_ids(), rows_for, threads)
    all_rows.sort(key=lambda r: (r[0], r[1]))
    return all_rows


def paper_pivot_rows(corpus: Corpus, window: PivotWindow, threads: int = 1) -> list[tuple]:
    """One row per paper with the author-mean pivot, sorted by paper_id."""
    cache: dict = {}

    def rows_for(paper_ids):
        rows = []
        for pid in paper_ids:
            rec = corpus.paper(pid)
            results = [pivot_size(corpus, a, pid, window, cache) for a in rec.author_ids]
            defined = [r.value for r in results if r.defined]
            agg = paper_pivot(corpus, pid, window, cache)
            rows.append((pid, window.value, len(rec.author_ids), len(defined), agg.value, agg.reason))
        return rows

    all_rows = _run_chunked(corpus.paper_ids(), rows_for, threads)
    all_rows.sort(key=lambda r: r[0])
    return all_rows


def _run_chunked(items: tuple, worker, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return worker(items)
    chunks = _chunks(items, threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(worker, chunks))
    merged: list = []
    for part in parts:
        merged.extend(part)
    return merged
