"""Deterministic synthetic-corpus generator with planted ground truth.

The generator emits records in the corpus input format, layered so the
analysis pipeline has clean planted relationships to recover:

  seed layer     one early year of venue-anchored papers (no authors) that
                 later papers reference; they pin every reference to a venue.
  warmup years   authors publish from their home venue mix, building the
                 prior work that pivot measurement needs.
  cohort years   the analysis sample: each paper draws references from a
                 convex mix of the author's home venues and a fresh random
                 mix, with a per-paper fresh weight controlling expected
                 pivot size.
  final year     a topic shock (authors adopt topic title words with
                 probability increasing in their planted proximity, citing
                 proximate authors' early work) plus citing papers that
                 realize the planted citation counts.

Impact is planted on the *measured* pivot: within each field-year cohort
group, exactly the top-5%-count of papers becomes hits, selected by
systematic probability-proportional sampling with inclusion probabilities
linear in pivot size (slope = the configured ``beta``). Hits receive one
citation from the citing layer and non-hits none, so the pipeline's
percentile rule flags exactly the planted hit set and an impact-on-pivot
regression recovers ``beta``.

Randomness comes from a single PCG64 stream consumed strictly in generation
order, so output is byte-identical for a given seed.
"""

from __future__ import annotations

import datetime
import math
from bisect import bisect_right
from dataclasses import dataclass, field, fields as dataclass_fields
from itertools import accumulate

import numpy as np

from .metrics import quantile_rank

GLOBAL_WORDS = (
    "analysis", "model", "dynamics", "systems", "methods",
    "effects", "evidence", "networks", "patterns", "measures",
)

LAYER_SEED = "seed"
LAYER_WARMUP = "warmup"
LAYER_COHORT = "cohort"
LAYER_FINAL = "final"
LAYER_CITING = "citing"


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    n_authors: int = 400
    n_venues: int = 40
    n_l1_fields: int = 8
    start_year: int = 2000
    warmup_years: int = 3
    cohort_years: int = 6
    papers_per_author_year: float = 1.0
    ref_count_min: int = 5
    ref_count_mean: float = 9.0
    seed_papers_per_venue: int = 25
    home_venues: int = 4
    fresh_venues: int = 3
    home_mix_prob: float = 0.3  # per-paper home weight drawn from [home_mix_prob, 1]
    beta: float = -0.05  # planted slope of hit propensity on measured pivot size
    hit_percentile: float = 0.95
    topic_base_prob: float = 0.05
    topic_prox_weight: float = 0.5
    topic_tokens: tuple[str, ...] = ("zoonex", "pandemiq")
    topic_citations_per_paper: int = 2
    funded_base: float = 0.7
    funded_pivot_slope: float = -0.5

    @property
    def final_year(self) -> int:
        return self.start_year + self.warmup_years + self.cohort_years + 1

    @property
    def cohort_year_range(self) -> tuple[int, int]:
        first = self.start_year + self.warmup_years + 1
        return (first, first + self.cohort_years - 1)


def validate_config(config: SynthConfig) -> list[str]:
    problems = []
    for name in ("n_authors", "n_venues", "n_l1_fields", "warmup_years", "cohort_years",
                 "seed_papers_per_venue", "home_venues", "fresh_venues", "ref_count_min"):
        if getattr(config, name) <= 0:
            problems.append(f"{name} must be positive")
    if config.papers_per_author_year <= 0:
        problems.append("papers_per_author_year must be positive")
    if config.n_venues < config.n_l1_fields:
        problems.append("need at least one venue per field")
    elif config.home_venues > config.n_venues // config.n_l1_fields:
        problems.append("home_venues exceeds the smallest per-field venue pool")
    if config.fresh_venues > config.n_venues:
        problems.append("fresh_venues exceeds the venue pool")
    if config.ref_count_mean < config.ref_count_min:
        problems.append("ref_count_mean must be at least ref_count_min")
    for name in ("home_mix_prob", "hit_percentile", "topic_base_prob"):
        value = getattr(config, name)
        if not 0.0 <= value <= 1.0:
            problems.append(f"{name} must lie in [0, 1]")
    if not 0.0 < config.hit_percentile < 1.0:
        problems.append("hit_percentile must lie strictly between 0 and 1")
    if config.seed_papers_per_venue < config.ref_count_min:
        problems.append("seed_papers_per_venue must cover ref_count_min distinct targets")
    if not config.topic_tokens:
        problems.append("topic_tokens must not be empty")
    return problems


@dataclass
class PaperTruth:
    paper_id: str
    author_id: str | None
    year: int
    field_code: str | None
    layer: str
    topical: bool = False
    fresh_weight: float | None = None
    measured_phi: float | None = None
    hit_propensity: float | None = None
    planted_hit: bool | None = None


@dataclass
class GroundTruth:
    beta: float
    cohort_year_range: tuple[int, int]
    papers: dict[str, PaperTruth] = field(default_factory=dict)
    author_proximity: dict[str, float] = field(default_factory=dict)
    author_field: dict[str, str] = field(default_factory=dict)

    PAPER_HEADER = (
        "paper_id", "author_id", "pub_year", "field", "layer", "topical",
        "fresh_weight", "measured_phi", "hit_propensity", "planted_hit", "beta",
    )
    AUTHOR_HEADER = ("author_id", "field", "proximity")

    def paper_rows(self) -> list[tuple]:
        rows = []
        for pid in sorted(self.papers):
            t = self.papers[pid]
            rows.append(
                (t.paper_id, t.author_id, t.year, t.field_code, t.layer, t.topical,
                 t.fresh_weight, t.measured_phi, t.hit_propensity, t.planted_hit, self.beta)
            )
        return rows

    def author_rows(self) -> list[tuple]:
        return [
            (a, self.author_field[a], self.author_proximity[a]) for a in sorted(self.author_proximity)
        ]

    def cohort_ids(self) -> list[str]:
        return [pid for pid, t in sorted(self.papers.items()) if t.layer == LAYER_COHORT]


class _Uniforms:
    """Buffered uniform stream over PCG64; consumption order defines the output."""

    def __init__(self, seed: int, block: int = 1 << 15):
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._block = block
        self._buf = self._rng.random(block)
        self._i = 0

    def take(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self._rng.random(self._block)
            self._i = 0
        v = self._buf[self._i]
        self._i += 1
        return float(v)


def _poisson(u: float, lam: float) -> int:
    """Inverse-transform Poisson draw from one uniform (small rates only)."""
    p = math.exp(-lam)
    cdf = p
    k = 0
    while u > cdf and k < 10_000:
        k += 1
        p *= lam / k
        cdf += p
    return k


def _pick_index(u: float, n: int) -> int:
    return min(int(u * n), n - 1)


def _pick_weighted(u: float, cum: list[float]) -> int:
    return min(bisect_right(cum, u * cum[-1]), len(cum) - 1)


def _sample_distinct(n: int, k: int, uniforms: _Uniforms) -> list[int]:
    """k distinct indices from range(n) via Floyd's algorithm (k draws)."""
    k = min(k, n)
    chosen: set[int] = set()
    for i in range(n - k, n):
        j = _pick_index(uniforms.take(), i + 1)
        chosen.add(i if j in chosen else j)
    return sorted(chosen)


def _cosine_counts(a: dict[str, int], b: dict[str, int]) -> float:
    if len(a) > len(b):
        a, b = b, a
    dot = sum(w * b[v] for v, w in a.items() if v in b)
    na = sum(w * w for w in a.values())
    nb = sum(w * w for w in b.values())
    return dot / math.sqrt(na * nb)


@dataclass
class _Author:
    author_id: str
    field_idx: int
    home_venue_idx: list[int]
    home_cum: list[float]
    proximity: float
    papers: list[tuple[str, int, dict[str, int]]] = field(default_factory=list)  # (paper_id, year, venue counts)


def _json_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _record_line(
    paper_id: str,
    title: str,
    pub_date: str,
    field_l0: str | None,
    field_l1: str | None,
    author_ids: list[str],
    references: list[str],
    venue_id: str | None,
    grant_ids: list[str],
    abstract: str | None = None,
) -> str:
    # hand-assembled JSON with a fixed key order; all content is ASCII
    parts = [f'"paper_id":"{paper_id}"', f'"title":"{_json_escape(title)}"']
    if abstract is not None:
        parts.append(f'"abstract":"{_json_escape(abstract)}"')
    parts.append(f'"pub_date":"{pub_date}"')
    if venue_id is not None:
        parts.append(f'"venue_id":"{venue_id}"')
    parts.append('"fields_l0":[' + (f'"{field_l0}"' if field_l0 else "") + "]")
    parts.append('"fields_l1":[' + (f'"{field_l1}"' if field_l1 else "") + "]")
    parts.append('"author_ids":[' + ",".join(f'"{a}"' for a in author_ids) + "]")
    parts.append('"references":[' + ",".join(f'"{r}"' for r in sorted(references)) + "]")
    parts.append('"grant_ids":[' + ",".join(f'"{g}"' for g in sorted(grant_ids)) + "]")
    parts.append('"is_preprint":false')
    return "{" + ",".join(parts) + "}"


class _Generator:
    def __init__(self, config: SynthConfig):
        self.config = config
        self.uniforms = _Uniforms(config.seed)
        self.lines: list[str] = []
        self.truth = GroundTruth(beta=config.beta, cohort_year_range=config.cohort_year_range)
        self.seq = 0
        self.fields = [f"F{i:02d}" for i in range(config.n_l1_fields)]
        self.venues = [f"V{i:04d}" for i in range(config.n_venues)]
        self.venue_field = [i % config.n_l1_fields for i in range(config.n_venues)]
        self.field_venues: list[list[int]] = [[] for _ in self.fields]
        for v, f in enumerate(self.venue_field):
            self.field_venues[f].append(v)
        self.seed_papers: list[list[str]] = [[] for _ in self.venues]
        self.field_words = [
            [f"{code.lower()}term{k}" for k in range(8)] for code in self.fields
        ]
        self.authors: list[_Author] = []
        self._date_cache: dict[int, list[str]] = {}
        self._prox_pool: tuple[list[int], list[float], dict[int, list[tuple[str, str]]]] | None = None

    def next_id(self) -> str:
        pid = f"P{self.seq:07d}"
        self.seq += 1
        return pid

    def date_in_year(self, year: int) -> str:
        table = self._date_cache.get(year)
        if table is None:
            base = datetime.date(year, 1, 1)
            table = [(base + datetime.timedelta(days=d)).isoformat() for d in range(360)]
            self._date_cache[year] = table
        return table[_pick_index(self.uniforms.take(), 360)]

    def title_for(self, field_idx: int, topic_tokens: tuple[str, ...] = ()) -> str:
        n_words = 5 + _pick_index(self.uniforms.take(), 3)
        words = []
        pool = self.field_words[field_idx]
        for _ in range(n_words):
            # one uniform decides vocabulary and word: given u < 0.5, 2u is
            # again uniform on [0, 1), likewise 2(u - 0.5) on the other branch
            u = self.uniforms.take()
            if u < 0.5:
                words.append(GLOBAL_WORDS[_pick_index(2.0 * u, len(GLOBAL_WORDS))])
            else:
                words.append(pool[_pick_index(2.0 * (u - 0.5), len(pool))])
        return " ".join(list(topic_tokens) + words)

    def emit_seed_layer(self) -> None:
        year = self.config.start_year
        for v, venue in enumerate(self.venues):
            field_idx = self.venue_field[v]
            for k in range(self.config.seed_papers_per_venue):
                pid = self.next_id()
                self.seed_papers[v].append(pid)
                refs = [f"X{venue}N{k}R{j}" for j in range(self.config.ref_count_min)]
                line = _record_line(
                    pid,
                    title=self.title_for(field_idx),
                    pub_date=self.date_in_year(year),
                    field_l0=f"D{field_idx // 5}",
                    field_l1=self.fields[field_idx],
                    author_ids=[],
                    references=refs,
                    venue_id=venue,
                    grant_ids=[],
                )
                self.lines.append(line)
                self.truth.papers[pid] = PaperTruth(pid, None, year, self.fields[field_idx], LAYER_SEED)

    def make_authors(self) -> None:
        for a in range(self.config.n_authors):
            field_idx = a % self.config.n_l1_fields
            pool = self.field_venues[field_idx]
            home = [pool[i] for i in _sample_distinct(len(pool), self.config.home_venues, self.uniforms)]
            weights = [0.2 + self.uniforms.take() for _ in home]
            cum = list(accumulate(weights))
            author = _Author(
                author_id=f"A{a:05d}",
                field_idx=field_idx,
                home_venue_idx=home,
                home_cum=cum,
                proximity=self.uniforms.take(),
            )
            self.authors.append(author)
            self.truth.author_proximity[author.author_id] = author.proximity
            self.truth.author_field[author.author_id] = self.fields[field_idx]

    def draw_fresh_mix(self) -> tuple[list[int], list[float]]:
        venues = _sample_distinct(len(self.venues), self.config.fresh_venues, self.uniforms)
        weights = [0.2 + self.uniforms.take() for _ in venues]
        return venues, list(accumulate(weights))

    def venue_counts_for_refs(self, author: _Author, fresh_weight: float, n_refs: int):
        """Venue multiplicities for a paper's references under the home/fresh mix."""
        fresh_idx, fresh_cum = self.draw_fresh_mix()
        counts: dict[int, int] = {}
        home_span = 1.0 - fresh_weight
        for _ in range(n_refs):
            # reuse the branch uniform for the within-mix venue pick
            u = self.uniforms.take()
            if u < fresh_weight:
                v = fresh_idx[_pick_weighted(u / fresh_weight, fresh_cum)]
            else:
                v = author.home_venue_idx[_pick_weighted((u - fresh_weight) / home_span, author.home_cum)]
            counts[v] = counts.get(v, 0) + 1
        return counts

    def refs_for_counts(self, venue_counts: dict[int, int]) -> tuple[list[str], dict[str, int]]:
        """Distinct seed-paper references realizing the requested venue counts."""
        refs: list[str] = []
        realized: dict[str, int] = {}
        for v in sorted(venue_counts):
            pool = self.seed_papers[v]
            k = min(venue_counts[v], len(pool))
            for i in _sample_distinct(len(pool), k, self.uniforms):
                refs.append(pool[i])
            realized[self.venues[v]] = k
        return refs, realized

    def proximity_pool(self):
        """Authors weighted by planted proximity, with their pre-cohort papers.

        Built once when the final year starts; earlier layers are complete by
        then, so the pool is stable.
        """
        if self._prox_pool is None:
            cutoff = self.config.start_year + self.config.warmup_years
            pool_idx: list[int] = []
            weights: list[float] = []
            early: dict[int, list[tuple[str, str]]] = {}
            for i, author in enumerate(self.authors):
                papers = [
                    (pid, self.venues[author.home_venue_idx[0]])
                    for (pid, y, _) in author.papers
                    if y <= cutoff
                ]
                if papers:
                    pool_idx.append(i)
                    weights.append(max(author.proximity, 1e-9))
                    early[i] = papers
            self._prox_pool = (pool_idx, list(accumulate(weights)), early)
        return self._prox_pool

    def prior_counts(self, author: _Author, year: int) -> dict[str, int] | None:
        """Three-calendar-year window sum of the author's reference venue counts."""
        window = [c for (_, y, c) in author.papers if year - 3 <= y <= year - 1]
        if not window:
            return None
        merged: dict[str, int] = {}
        for counts in window:
            for venue, n in counts.items():
                merged[venue] = merged.get(venue, 0) + n
        return merged

    def author_paper(self, author: _Author, year: int, layer: str, topical: bool) -> str:
        config = self.config
        pid = self.next_id()
        n_refs = config.ref_count_min + _poisson(
            self.uniforms.take(), config.ref_count_mean - config.ref_count_min
        )
        fresh_weight = (1.0 - config.home_mix_prob) * self.uniforms.take()
        venue_counts = self.venue_counts_for_refs(author, fresh_weight, n_refs)
        refs, realized = self.refs_for_counts(venue_counts)

        topic_tokens: tuple[str, ...] = ()
        abstract = None
        if topical:
            n_tok = 1 + (1 if self.uniforms.take() < 0.3 and len(config.topic_tokens) > 1 else 0)
            tokens = config.topic_tokens[:n_tok]
            if self.uniforms.take() < 0.25:
                # the marker appears only in the abstract
                abstract = " ".join(tokens) + " " + GLOBAL_WORDS[_pick_index(self.uniforms.take(), len(GLOBAL_WORDS))]
            else:
                topic_tokens = tokens
            # cite the early work of proximate other authors
            pool_idx, pool_cum, early = self.proximity_pool()
            if pool_idx:
                for _ in range(config.topic_citations_per_paper):
                    other_idx = pool_idx[_pick_weighted(self.uniforms.take(), pool_cum)]
                    other = self.authors[other_idx]
                    candidates = early[other_idx]
                    if other is not author and candidates:
                        target, target_venue = candidates[_pick_index(self.uniforms.take(), len(candidates))]
                        if target not in refs:
                            refs.append(target)
                            realized[target_venue] = realized.get(target_venue, 0) + 1

        prior = self.prior_counts(author, year)
        phi = None
        if prior is not None and realized:
            phi = min(1.0, max(0.0, 1.0 - _cosine_counts(realized, prior)))

        funded = self.uniforms.take() < min(
            1.0, max(0.0, config.funded_base + config.funded_pivot_slope * fresh_weight)
        )
        grants = [f"G{_pick_index(self.uniforms.take(), 500):04d}"] if funded else []
        # publish in the author's modal home venue
        venue_idx = author.home_venue_idx[0]
        line = _record_line(
            pid,
            title=self.title_for(author.field_idx, topic_tokens),
            pub_date=self.date_in_year(year),
            field_l0=f"D{author.field_idx // 5}",
            field_l1=self.fields[author.field_idx],
            author_ids=[author.author_id],
            references=refs,
            venue_id=self.venues[venue_idx],
            grant_ids=grants,
            abstract=abstract,
        )
        self.lines.append(line)
        author.papers.append((pid, year, realized))
        self.truth.papers[pid] = PaperTruth(
            pid, author.author_id, year, self.fields[author.field_idx], layer,
            topical=topical, fresh_weight=fresh_weight, measured_phi=phi,
        )
        return pid

    def emit_author_years(self) -> None:
        config = self.config
        first_cohort, last_cohort = config.cohort_year_range
        for year in range(config.start_year + 1, config.final_year + 1):
            if year < first_cohort:
                layer = LAYER_WARMUP
            elif year <= last_cohort:
                layer = LAYER_COHORT
            else:
                layer = LAYER_FINAL
            for author in self.authors:
                n_papers = _poisson(self.uniforms.take(), config.papers_per_author_year)
                if layer == LAYER_WARMUP and not author.papers:
                    # guarantee at least one warmup paper so priors exist
                    n_papers = max(n_papers, 1)
                for _ in range(n_papers):
                    topical = False
                    if layer == LAYER_FINAL:
                        p_adopt = min(
                            1.0,
                            max(0.0, config.topic_base_prob + config.topic_prox_weight * author.proximity),
                        )
                        topical = self.uniforms.take() < p_adopt
                    self.author_paper(author, year, layer, topical)

    def plant_hits(self) -> list[str]:
        """Select cohort hits with inclusion probability linear in measured pivot.

        Within each (field, year) group of size n, exactly m = n - rank + 1
        papers become hits (the count the percentile rule will flag). Hits are
        drawn by systematic PPS over the pivot-sorted group, which makes each
        paper's inclusion probability exactly its planted propensity.
        """
        config = self.config
        groups: dict[tuple[str, int], list[str]] = {}
        for pid, t in self.truth.papers.items():
            if t.layer == LAYER_COHORT:
                groups.setdefault((t.field_code, t.year), []).append(pid)
        hit_ids: list[str] = []
        for key in sorted(groups):
            members = sorted(groups[key])
            n = len(members)
            m = n - quantile_rank(config.hit_percentile, n) + 1
            defined = [self.truth.papers[p].measured_phi for p in members]
            mean_phi = float(np.mean([v for v in defined if v is not None])) if any(
                v is not None for v in defined
            ) else 0.5
            phi = np.array([v if v is not None else mean_phi for v in defined])
            order = sorted(range(n), key=lambda i: (phi[i], members[i]))
            phi_sorted = phi[order]
            c = (m - config.beta * phi_sorted.sum()) / n
            pi = c + config.beta * phi_sorted
            # clipping only bites under extreme configs; redistribute to keep sum m
            for _ in range(50):
                clipped = np.clip(pi, 1e-9, 1 - 1e-9)
                deficit = m - clipped.sum()
                pi = clipped
                if abs(deficit) < 1e-12:
                    break
                free = (clipped > 1e-9) & (clipped < 1 - 1e-9)
                if not free.any():
                    break
                pi = clipped.copy()
                pi[free] += deficit / free.sum()
            cum = np.cumsum(pi)
            u = self.uniforms.take()
            targets = u + np.arange(m)
            chosen = np.minimum(np.searchsorted(cum, targets, side="right"), n - 1)
            for rank, i in enumerate(order):
                truth = self.truth.papers[members[i]]
                truth.hit_propensity = float(pi[rank])
                truth.planted_hit = False
            for idx in chosen:
                self.truth.papers[members[order[int(idx)]]].planted_hit = True
                hit_ids.append(members[order[int(idx)]])
        return hit_ids

    def emit_citing_layer(self, hit_ids: list[str]) -> None:
        config = self.config
        year = config.final_year
        queue = list(hit_ids)
        pos = 0
        while pos < len(queue):
            n_refs = config.ref_count_min + _poisson(
                self.uniforms.take(), config.ref_count_mean - config.ref_count_min
            )
            batch = queue[pos : pos + n_refs]
            pos += len(batch)
            refs = list(batch)
            if len(refs) < config.ref_count_min:
                # pad with seed papers to clear the reference minimum
                v = _pick_index(self.uniforms.take(), len(self.venues))
                pool = self.seed_papers[v]
                need = config.ref_count_min - len(refs)
                refs += [pool[i] for i in _sample_distinct(len(pool), need, self.uniforms)]
            pid = self.next_id()
            v = _pick_index(self.uniforms.take(), len(self.venues))
            field_idx = self.venue_field[v]
            line = _record_line(
                pid,
                title=self.title_for(field_idx),
                pub_date=self.date_in_year(year),
                field_l0=f"D{field_idx // 5}",
                field_l1=self.fields[field_idx],
                author_ids=[],
                references=refs,
                venue_id=self.venues[v],
                grant_ids=[],
            )
            self.lines.append(line)
            self.truth.papers[pid] = PaperTruth(pid, None, year, self.fields[field_idx], LAYER_CITING)

    def run(self) -> tuple[list[str], GroundTruth]:
        self.emit_seed_layer()
        self.make_authors()
        self.emit_author_years()
        hit_ids = self.plant_hits()
        self.emit_citing_layer(hit_ids)
        return self.lines, self.truth


def generate(config: SynthConfig) -> tuple[list[str], GroundTruth]:
    """Generate (record lines in the corpus input format, ground truth).

    Byte-identical output for identical configs: all randomness flows from one
    seeded PCG64 uniform stream consumed in a fixed order.
    """
    problems = validate_config(config)
    if problems:
        raise ValueError("invalid generator config: " + "; ".join(problems))
    return _Generator(config).run()


def config_from_dict(obj: dict, seed: int | None = None) -> SynthConfig:
    """Build a config from a JSON-style dict; unknown keys are rejected."""
    known = {f.name for f in dataclass_fields(SynthConfig)}
    unknown = set(obj) - known
    if unknown:
        raise ValueError(f"unknown generator config keys: {sorted(unknown)}")
    merged = dict(obj)
    if seed is not None:
        merged["seed"] = seed
    if "topic_tokens" in merged:
        merged["topic_tokens"] = tuple(merged["topic_tokens"])
    if "seed" not in merged:
        raise ValueError("generator config needs a seed")
    return SynthConfig(**merged)
