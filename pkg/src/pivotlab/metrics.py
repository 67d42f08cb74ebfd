"""Impact measures: field-year citation hit rates, journal placement, and
citation-based proximity of authors to a topic corpus.

A paper is a "hit" when its citation count sits at or above the 95th
percentile of its field-year group, where groups collect papers sharing a
publication year and the same distinct combination of level-1 fields.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass

from .corpus import Corpus, citation_count

UNDEFINED_SMALL_GROUP = "small-group"

FieldYearKey = tuple[tuple[str, ...], int]


def field_year_key(fields_l1: frozenset[str], year: int) -> FieldYearKey:
    return (tuple(sorted(fields_l1)), year)


def field_key_label(fields: tuple[str, ...]) -> str:
    return "+".join(fields) if fields else "unfielded"


def quantile_rank(p: float, n: int) -> int:
    """1-based rank of the threshold observation for the p-quantile of n values.

    floor(p*n)+1, snapping p*n to an integer when within 1e-9 of one: 0.95 is
    not exactly representable, and 0.95*100 must rank as 96, not 95.
    """
    k = p * n
    kf = math.floor(k)
    if k - kf > 1 - 1e-9:
        kf += 1
    return min(kf + 1, n)


@dataclass(frozen=True)
class HitFlag:
    hit: bool
    threshold: int
    group_size: int


@dataclass(frozen=True)
class GroupDiagnostic:
    fields: tuple[str, ...]
    year: int
    size: int
    threshold: int | None  # None when the group is below min_group
    n_flagged: int
    flagged_share: float
    tie_inflated: bool  # share exceeds (1-p) + 1/size


@dataclass
class HitTable:
    """Hit flag per paper; papers in groups below ``min_group`` are undefined."""

    entries: dict[str, HitFlag | None]
    groups: list[GroupDiagnostic]
    percentile: float
    min_group: int
    horizon: datetime.date | None

    def hit(self, paper_id: str) -> bool | None:
        flag = self.entries[paper_id]
        return None if flag is None else flag.hit

    def rows(self) -> list[tuple]:
        out = []
        for pid in sorted(self.entries):
            flag = self.entries[pid]
            if flag is None:
                out.append((pid, None, None, None, UNDEFINED_SMALL_GROUP))
            else:
                out.append((pid, flag.hit, flag.threshold, flag.group_size, None))
        return out

    def group_rows(self) -> list[tuple]:
        return [
            (field_key_label(g.fields), g.year, g.size, g.threshold, g.n_flagged, g.flagged_share, g.tie_inflated)
            for g in self.groups
        ]


HIT_TABLE_HEADER = ("paper_id", "hit", "threshold", "group_size", "reason")
GROUP_TABLE_HEADER = ("fields_l1", "year", "size", "threshold", "n_flagged", "flagged_share", "tie_inflated")


def hit_flags(
    corpus: Corpus,
    citation_horizon: datetime.date | None = None,
    p: float = 0.95,
    min_group: int = 20,
) -> HitTable:
    """Flag papers at or above the p-quantile of citations in their field-year group.

    The threshold is the nearest-rank quantile of the group's citation counts;
    every paper with a count >= threshold is flagged, so ties can inflate the
    flagged share above 1-p (reported per group).
    """
    entries: dict[str, HitFlag | None] = {}
    diagnostics: list[GroupDiagnostic] = []
    for key in sorted(corpus.field_year_groups()):
        fields, year = key
        members = corpus.field_year_groups()[key]
        size = len(members)
        if size < min_group:
            for pid in members:
                entries[pid] = None
            diagnostics.append(GroupDiagnostic(fields, year, size, None, 0, 0.0, False))
            continue
        counts = {pid: citation_count(corpus, pid, citation_horizon) for pid in members}
        ordered = sorted(counts.values())
        threshold = ordered[quantile_rank(p, size) - 1]
        n_flagged = 0
        for pid in members:
            is_hit = counts[pid] >= threshold
            n_flagged += is_hit
            entries[pid] = HitFlag(is_hit, threshold, size)
        share = n_flagged / size
        diagnostics.append(
            GroupDiagnostic(fields, year, size, threshold, n_flagged, share, share > (1 - p) + 1 / size)
        )
    return HitTable(entries, diagnostics, p, min_group, citation_horizon)


@dataclass(frozen=True)
class PlacementEntry:
    venue_id: str
    score: float | None  # None when no year meets the sample minimum
    years_used: int
    papers_used: int


def journal_hit_rate(
    corpus: Corpus,
    venue_id: str,
    hits: HitTable,
    years: tuple[int, int] = (2000, 2019),
    min_year_papers: int = 10,
) -> float | None:
    """Unweighted mean over qualifying years of the venue's yearly hit share.

    A year qualifies when the venue published at least ``min_year_papers``
    papers with defined hit flags that year; papers with undefined flags are
    excluded from both numerator and denominator.
    """
    shares = []
    by_year: dict[int, list[bool]] = {}
    for pid in corpus.venue_papers(venue_id):  # raises KeyError for unknown venues
        year = corpus.paper(pid).year
        if years[0] <= year <= years[1]:
            flag = hits.hit(pid)
            if flag is not None:
                by_year.setdefault(year, []).append(flag)
    for year in sorted(by_year):
        flags = by_year[year]
        if len(flags) >= min_year_papers:
            shares.append(sum(flags) / len(flags))
    if not shares:
        return None
    return sum(shares) / len(shares)


def journal_placement(
    corpus: Corpus,
    hits: HitTable,
    years: tuple[int, int] = (2000, 2019),
    min_year_papers: int = 10,
) -> list[PlacementEntry]:
    """Placement scores for every venue, sorted by venue id."""
    out = []
    for venue in corpus.venue_ids():
        by_year: dict[int, list[bool]] = {}
        for pid in corpus.venue_papers(venue):
            year = corpus.paper(pid).year
            if years[0] <= year <= years[1]:
                flag = hits.hit(pid)
                if flag is not None:
                    by_year.setdefault(year, []).append(flag)
        shares = [sum(f) / len(f) for _, f in sorted(by_year.items()) if len(f) >= min_year_papers]
        used = [f for f in by_year.values() if len(f) >= min_year_papers]
        score = sum(shares) / len(shares) if shares else None
        out.append(PlacementEntry(venue, score, len(shares), sum(len(f) for f in used)))
    return out


PLACEMENT_HEADER = ("venue_id", "placement", "years_used", "papers_used")

MODE_TOTAL = "total-citations"
MODE_DISTINCT = "distinct-papers"


def citation_proximity(
    corpus: Corpus,
    author_id: str,
    topic: set[str],
    cutoff_year: int,
    mode: str = MODE_TOTAL,
) -> int:
    """Citations from topic papers to the author's pre-cutoff work, self-citations excluded.

    ``total-citations`` counts (topic paper -> cited paper) reference edges;
    ``distinct-papers`` counts distinct cited papers with at least one such
    edge. An edge is a self-citation when the citing and cited papers share
    any author id.
    """
    if mode not in (MODE_TOTAL, MODE_DISTINCT):
        raise ValueError(f"unknown proximity mode {mode!r}")
    pre: dict[str, frozenset[str]] = {}
    for pid in corpus.author_papers(author_id):  # raises KeyError for unknown authors
        rec = corpus.paper(pid)
        if rec.year < cutoff_year:
            pre[pid] = frozenset(rec.author_ids)
    if not pre:
        return 0
    total = 0
    cited: set[str] = set()
    for tid in topic:
        citing_authors = set(corpus.paper(tid).author_ids)
        for ref in corpus.paper(tid).references:
            if ref not in corpus:
                continue
            target = corpus.resolve(ref)
            if target in pre and not (citing_authors & pre[target]):
                total += 1
                cited.add(target)
    return total if mode == MODE_TOTAL else len(cited)


def proximity_rows(corpus: Corpus, topic: set[str], cutoff_year: int) -> list[tuple]:
    """Both proximity modes for every author, in one pass over the topic set."""
    totals: dict[str, int] = {}
    distinct: dict[str, set[str]] = {}
    for tid in sorted(topic):
        citing_authors = set(corpus.paper(tid).author_ids)
        for ref in corpus.paper(tid).references:
            if ref not in corpus:
                continue
            rec = corpus.paper(ref)
            if rec.year >= cutoff_year:
                continue
            if citing_authors & set(rec.author_ids):
                continue
            target = corpus.resolve(ref)
            for author in rec.author_ids:
                totals[author] = totals.get(author, 0) + 1
                distinct.setdefault(author, set()).add(target)
    rows = []
    for author in corpus.author_ids():
        if any(corpus.paper(p).year < cutoff_year for p in corpus.author_papers(author)):
            rows.append((author, totals.get(author, 0), len(distinct.get(author, ()))))
        else:
            rows.append((author, 0, 0))
    return rows


PROXIMITY_HEADER = ("author_id", "total_citations", "distinct_papers")
