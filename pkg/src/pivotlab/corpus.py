"""Bibliographic corpus: ingest, preprint merging, validation, and indexes.

Input is line-delimited JSON, one record per line. Recognized keys match
:class:`PaperRecord`: ``paper_id``, ``title``, ``abstract``, ``venue_id``,
``pub_date`` (ISO-8601 ``YYYY[-MM[-DD]]``), ``fields_l0``, ``fields_l1``,
``author_ids``, ``references``, ``grant_ids``, ``affiliations`` (object
mapping author id to a list of affiliation ids for this paper),
``is_preprint`` and ``published_version_of``.

A built :class:`Corpus` is immutable: ingestion is the single writer and all
downstream analysis reads a frozen snapshot. Citation counts are derived from
in-corpus reference edges only.
"""

from __future__ import annotations

import datetime
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

# Drop reason codes used in validation reports.
DROP_MALFORMED = "malformed-record"
DROP_BAD_DATE = "unparseable-date"
DROP_DATE_RANGE = "out-of-range-date"
DROP_DUPLICATE = "duplicate-id"
DROP_FEW_REFS = "too-few-references"

_DATE_RE = re.compile(r"^(\d{4})(?:-(\d{2}))?(?:-(\d{2}))?$")


class CorpusError(ValueError):
    """Raised for unusable input sources or invalid corpus operations."""


def parse_pub_date(text: str) -> tuple[datetime.date, str]:
    """Parse ``YYYY``, ``YYYY-MM`` or ``YYYY-MM-DD``.

    Partial dates are normalized to the first day of the period; the returned
    precision ("year", "month" or "day") preserves what the input carried.
    """
    m = _DATE_RE.match(text.strip()) if isinstance(text, str) else None
    if not m:
        raise ValueError(f"unparseable date: {text!r}")
    year, month, day = m.group(1), m.group(2), m.group(3)
    precision = "day" if day else ("month" if month else "year")
    return datetime.date(int(year), int(month or 1), int(day or 1)), precision


@dataclass
class PaperRecord:
    paper_id: str
    pub_date: datetime.date
    title: str = ""
    abstract: str | None = None
    venue_id: str | None = None
    date_precision: str = "day"
    fields_l0: frozenset[str] = frozenset()
    fields_l1: frozenset[str] = frozenset()
    author_ids: tuple[str, ...] = ()
    references: frozenset[str] = frozenset()
    grant_ids: frozenset[str] = frozenset()
    affiliations: dict[str, tuple[str, ...]] = field(default_factory=dict)
    is_preprint: bool = False
    published_version_of: str | None = None

    @property
    def year(self) -> int:
        return self.pub_date.year

    def date_string(self) -> str:
        if self.date_precision == "year":
            return f"{self.pub_date.year:04d}"
        if self.date_precision == "month":
            return f"{self.pub_date.year:04d}-{self.pub_date.month:02d}"
        return self.pub_date.isoformat()

    def to_json_dict(self) -> dict:
        obj: dict = {
            "paper_id": self.paper_id,
            "title": self.title,
            "pub_date": self.date_string(),
        }
        if self.abstract is not None:
            obj["abstract"] = self.abstract
        if self.venue_id is not None:
            obj["venue_id"] = self.venue_id
        obj["fields_l0"] = sorted(self.fields_l0)
        obj["fields_l1"] = sorted(self.fields_l1)
        obj["author_ids"] = list(self.author_ids)
        obj["references"] = sorted(self.references)
        obj["grant_ids"] = sorted(self.grant_ids)
        if self.affiliations:
            obj["affiliations"] = {a: list(v) for a, v in sorted(self.affiliations.items())}
        obj["is_preprint"] = self.is_preprint
        if self.published_version_of is not None:
            obj["published_version_of"] = self.published_version_of
        return obj

    def to_line(self) -> str:
        return json.dumps(self.to_json_dict(), ensure_ascii=False, separators=(",", ":"))


def _string_list(value, key: str) -> list[str]:
    if value is None:
        return []
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ValueError(f"{key} must be a list of strings")
    return value


def record_from_json(obj: dict) -> PaperRecord:
    """Build a record from a parsed JSON object. Raises ValueError when malformed."""
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    paper_id = obj.get("paper_id")
    if not isinstance(paper_id, str) or not paper_id:
        raise ValueError("missing or empty paper_id")
    if "pub_date" not in obj:
        raise ValueError("missing pub_date")
    pub_date, precision = parse_pub_date(obj["pub_date"])

    title = obj.get("title", "")
    if not isinstance(title, str):
        raise ValueError("title must be a string")
    abstract = obj.get("abstract")
    if abstract is not None and not isinstance(abstract, str):
        raise ValueError("abstract must be a string")
    venue_id = obj.get("venue_id")
    if venue_id is not None and (not isinstance(venue_id, str) or not venue_id):
        raise ValueError("venue_id must be a non-empty string")

    # Author order matters downstream; keep first occurrence of any repeat.
    author_ids: list[str] = []
    for a in _string_list(obj.get("author_ids"), "author_ids"):
        if a and a not in author_ids:
            author_ids.append(a)

    affiliations: dict[str, tuple[str, ...]] = {}
    raw_affil = obj.get("affiliations") or {}
    if not isinstance(raw_affil, dict):
        raise ValueError("affiliations must be an object")
    for author, ids in raw_affil.items():
        if author in author_ids:
            ids = _string_list(ids, "affiliations")
            if ids:
                affiliations[author] = tuple(ids)

    pvo = obj.get("published_version_of")
    if pvo is not None and (not isinstance(pvo, str) or not pvo):
        raise ValueError("published_version_of must be a non-empty string")

    return PaperRecord(
        paper_id=paper_id,
        pub_date=pub_date,
        date_precision=precision,
        title=title,
        abstract=abstract,
        venue_id=venue_id,
        fields_l0=frozenset(_string_list(obj.get("fields_l0"), "fields_l0")),
        fields_l1=frozenset(_string_list(obj.get("fields_l1"), "fields_l1")),
        author_ids=tuple(author_ids),
        references=frozenset(r for r in _string_list(obj.get("references"), "references") if r),
        grant_ids=frozenset(g for g in _string_list(obj.get("grant_ids"), "grant_ids") if g),
        affiliations=affiliations,
        is_preprint=bool(obj.get("is_preprint", False)),
        published_version_of=pvo,
    )


@dataclass(frozen=True)
class IngestConfig:
    min_year: int = 1500
    max_year: int = 2100
    min_references: int = 0  # 0 disables the reference-count filter at ingest


@dataclass
class ValidationReport:
    records_read: int = 0
    records_kept: int = 0
    records_merged: int = 0
    dropped: Counter = field(default_factory=Counter)
    dangling_references: int = 0
    self_references_removed: int = 0
    partial_dates: int = 0
    cleared_publication_links: int = 0

    @property
    def records_dropped(self) -> int:
        return sum(self.dropped.values())

    def reconciles(self) -> bool:
        counts = [self.records_read, self.records_kept, self.records_merged,
                  self.dangling_references, self.self_references_removed,
                  self.partial_dates, self.cleared_publication_links]
        if any(c < 0 for c in counts) or any(c < 0 for c in self.dropped.values()):
            return False
        return self.records_read == self.records_kept + self.records_merged + self.records_dropped

    def rows(self) -> list[tuple[str, int]]:
        out = [
            ("records_read", self.records_read),
            ("records_kept", self.records_kept),
            ("records_merged", self.records_merged),
            ("records_dropped", self.records_dropped),
        ]
        for reason in sorted(self.dropped):
            out.append((f"dropped_{reason}", self.dropped[reason]))
        out += [
            ("dangling_references", self.dangling_references),
            ("self_references_removed", self.self_references_removed),
            ("partial_dates", self.partial_dates),
            ("cleared_publication_links", self.cleared_publication_links),
        ]
        return out


class Corpus:
    """Frozen, indexed collection of paper records.

    Indexes: forward references (stored on each record), an inverted
    citation index restricted to in-corpus targets, author and venue
    indexes ordered by (pub_date, paper_id), and field-year groups keyed
    by (sorted level-1 field combination, year).
    """

    def __init__(self, papers: dict[str, PaperRecord], alias: dict[str, str] | None = None):
        self._papers = papers
        self._alias = {k: v for k, v in (alias or {}).items() if v in papers}
        self._sorted_ids = tuple(sorted(papers))
        self.dangling_references = 0

        citers: dict[str, set[str]] = {}
        author_papers: dict[str, list[str]] = {}
        venue_papers: dict[str, list[str]] = {}
        groups: dict[tuple[tuple[str, ...], int], list[str]] = {}
        for pid in self._sorted_ids:
            rec = papers[pid]
            for ref in rec.references:
                if ref in papers:
                    citers.setdefault(ref, set()).add(pid)
                else:
                    self.dangling_references += 1
            for a in rec.author_ids:
                author_papers.setdefault(a, []).append(pid)
            if rec.venue_id is not None:
                venue_papers.setdefault(rec.venue_id, []).append(pid)
            key = (tuple(sorted(rec.fields_l1)), rec.year)
            groups.setdefault(key, []).append(pid)

        date_key = lambda pid: (papers[pid].pub_date, pid)
        self._citers = {pid: frozenset(c) for pid, c in citers.items()}
        self._author_papers = {a: tuple(sorted(ps, key=date_key)) for a, ps in author_papers.items()}
        self._venue_papers = {v: tuple(sorted(ps, key=date_key)) for v, ps in venue_papers.items()}
        self._field_year_groups = {k: tuple(sorted(ps)) for k, ps in groups.items()}

    def __len__(self) -> int:
        return len(self._papers)

    def __contains__(self, paper_id: str) -> bool:
        return paper_id in self._papers or paper_id in self._alias

    def resolve(self, paper_id: str) -> str:
        """Canonical id for a paper, following preprint-merge aliases."""
        if paper_id in self._papers:
            return paper_id
        if paper_id in self._alias:
            return self._alias[paper_id]
        raise KeyError(f"unknown paper: {paper_id}")

    def paper(self, paper_id: str) -> PaperRecord:
        return self._papers[self.resolve(paper_id)]

    def paper_ids(self) -> tuple[str, ...]:
        return self._sorted_ids

    def papers(self) -> Iterator[PaperRecord]:
        for pid in self._sorted_ids:
            yield self._papers[pid]

    def citers(self, paper_id: str) -> frozenset[str]:
        return self._citers.get(self.resolve(paper_id), frozenset())

    def author_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._author_papers))

    def has_author(self, author_id: str) -> bool:
        return author_id in self._author_papers

    def author_papers(self, author_id: str) -> tuple[str, ...]:
        """The author's papers ordered by (pub_date, paper_id)."""
        try:
            return self._author_papers[author_id]
        except KeyError:
            raise KeyError(f"unknown author: {author_id}") from None

    def venue_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self._venue_papers))

    def venue_papers(self, venue_id: str) -> tuple[str, ...]:
        try:
            return self._venue_papers[venue_id]
        except KeyError:
            raise KeyError(f"unknown venue: {venue_id}") from None

    def field_year_groups(self) -> dict[tuple[tuple[str, ...], int], tuple[str, ...]]:
        return self._field_year_groups

    def aliases(self) -> dict[str, str]:
        return dict(self._alias)

    def to_lines(self) -> Iterator[str]:
        """Canonical serialization: merged records, sorted by paper id."""
        for pid in self._sorted_ids:
            yield self._papers[pid].to_line()

    def save(self, path: str | Path) -> None:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            for line in self.to_lines():
                fh.write(line + "\n")


def _resolve_merge_targets(kept: dict[str, PaperRecord]) -> tuple[dict[str, str], int]:
    """Map each preprint id to the terminal record of its published-version chain.

    Chains are followed through intermediate preprints; any cycle breaks all
    links on it. Returns (preprint id -> terminal id, cleared link count).
    """
    resolved: dict[str, str | None] = {}
    cleared = 0

    def resolve(pid: str, stack: set[str]) -> str | None:
        if pid in resolved:
            return resolved[pid]
        rec = kept[pid]
        target = rec.published_version_of
        if target is None:
            resolved[pid] = pid
            return pid
        if target not in kept or target in stack:
            resolved[pid] = None  # dangling or cyclic link
            return None
        stack.add(pid)
        terminal = resolve(target, stack)
        stack.discard(pid)
        resolved[pid] = terminal
        return terminal

    targets: dict[str, str] = {}
    for pid in list(kept):
        if kept[pid].published_version_of is None:
            continue
        terminal = resolve(pid, set())
        if terminal is None or terminal == pid:
            cleared += 1
            kept[pid].published_version_of = None
        else:
            targets[pid] = terminal
    return targets, cleared


def ingest(record_stream: Iterable[str | dict], config: IngestConfig = IngestConfig()) -> tuple[Corpus, ValidationReport]:
    """Read records, merge preprints into their published versions, and index.

    The stream yields JSON lines or already-parsed objects. Malformed records
    are dropped with a reason and never abort the stream. Duplicate paper ids
    resolve first-record-wins in input order. A preprint with a live
    ``published_version_of`` link is absorbed into the published record: the
    merged record keeps the published metadata, takes the union of references
    and grant ids, and receives citations addressed to either id.
    """
    report = ValidationReport()
    kept: dict[str, PaperRecord] = {}

    for item in record_stream:
        report.records_read += 1
        try:
            if isinstance(item, str):
                item = json.loads(item)
            rec = record_from_json(item)
        except (ValueError, TypeError) as exc:
            reason = DROP_BAD_DATE if "unparseable date" in str(exc) else DROP_MALFORMED
            report.dropped[reason] += 1
            continue
        if not (config.min_year <= rec.year <= config.max_year):
            report.dropped[DROP_DATE_RANGE] += 1
            continue
        if rec.paper_id in kept:
            report.dropped[DROP_DUPLICATE] += 1
            continue
        if rec.date_precision != "day":
            report.partial_dates += 1
        kept[rec.paper_id] = rec

    # Merge preprints into their published versions.
    targets, cleared = _resolve_merge_targets(kept)
    report.cleared_publication_links = cleared
    for pid, terminal in targets.items():
        preprint = kept.pop(pid)
        target = kept[terminal]
        target.references = target.references | preprint.references
        target.grant_ids = target.grant_ids | preprint.grant_ids
        report.records_merged += 1
    alias = dict(targets)

    # Canonicalize references through the alias map and strip self-references,
    # so a serialized corpus re-ingests to the identical corpus.
    for rec in kept.values():
        refs = frozenset(alias.get(r, r) for r in rec.references)
        if rec.paper_id in refs:
            refs = refs - {rec.paper_id}
            report.self_references_removed += 1
        rec.references = refs
        rec.published_version_of = None

    if config.min_references > 0:
        for pid in [p for p, r in kept.items() if len(r.references) < config.min_references]:
            del kept[pid]
            report.dropped[DROP_FEW_REFS] += 1
        alias = {k: v for k, v in alias.items() if v in kept}

    report.records_kept = len(kept)
    corpus = Corpus(kept, alias)
    report.dangling_references = corpus.dangling_references
    return corpus, report


def ingest_path(path: str | Path, config: IngestConfig = IngestConfig()) -> tuple[Corpus, ValidationReport]:
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            return ingest((line for line in fh if line.strip()), config)
    except OSError as exc:
        raise CorpusError(f"cannot read input source {path}: {exc}") from exc


def filter_min_references(corpus: Corpus, k: int = 5) -> Corpus:
    """Corpus restricted to papers with at least ``k`` references.

    Reference counts include targets outside the corpus. Indexes are rebuilt,
    so citation edges from dropped papers disappear.
    """
    if k < 0:
        raise ValueError("minimum reference count must be nonnegative")
    kept = {pid: rec for pid, rec in corpus._papers.items() if len(rec.references) >= k}
    alias = {a: t for a, t in corpus.aliases().items() if t in kept}
    return Corpus(kept, alias)


def citation_count(corpus: Corpus, paper_id: str, as_of: datetime.date | None = None) -> int:
    """Distinct in-corpus papers citing ``paper_id`` with pub_date <= ``as_of``.

    ``None`` counts every citer. Citers dated before the cited paper are
    counted whenever they fall within the horizon; inconsistent dates are the
    input's problem, not silently patched here.
    """
    citers = corpus.citers(paper_id)  # raises KeyError for unknown papers
    if as_of is None:
        return len(citers)
    return sum(1 for c in citers if corpus.paper(c).pub_date <= as_of)


def summary_rows(corpus: Corpus, report: ValidationReport) -> list[tuple[str, int]]:
    """Corpus summary plus validation counts, for the tabular report file."""
    edges = sum(len(r.references) for r in corpus.papers())
    in_edges = sum(len(c) for c in corpus._citers.values())
    rows = [
        ("papers", len(corpus)),
        ("authors", len(corpus._author_papers)),
        ("venues", len(corpus._venue_papers)),
        ("reference_edges", edges),
        ("in_corpus_citation_edges", in_edges),
        ("field_year_groups", len(corpus.field_year_groups())),
    ]
    return rows + report.rows()
