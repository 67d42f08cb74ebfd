"""Hit rates, journal placement, and citation proximity."""

import datetime
import random

import pytest

from pivotlab.metrics import (
    MODE_DISTINCT,
    MODE_TOTAL,
    HitFlag,
    HitTable,
    citation_proximity,
    hit_flags,
    journal_hit_rate,
    journal_placement,
    proximity_rows,
    quantile_rank,
)

from conftest import build_corpus, record


def corpus_with_counts(counts, fields=("F1",), year=2015):
    """Papers P0..Pn-1 in one field-year group with the given citation counts."""
    n = len(counts)
    records = [
        record(f"P{i:03d}", pub_date=f"{year}-06-01", fields_l1=list(fields)) for i in range(n)
    ]
    # Citer Cj cites every paper needing at least j+1 citations.
    for j in range(max(counts, default=0)):
        targets = [f"P{i:03d}" for i in range(n) if counts[i] > j]
        records.append(record(f"C{j:03d}", pub_date=f"{year + 1}-06-01", fields_l1=["G1"], references=targets))
    return build_corpus(records)


class TestQuantileRank:
    def test_snaps_inexact_products(self):
        # 0.95*100 is 94.999... in floats; the rank must still be 96.
        assert quantile_rank(0.95, 100) == 96
        assert quantile_rank(0.95, 20) == 20
        assert quantile_rank(0.95, 40) == 39
        assert quantile_rank(0.5, 10) == 6


class TestHitFlags:
    def test_hundred_distinct_counts_flags_exactly_five(self):
        counts = list(range(100))
        corpus = corpus_with_counts(counts)
        table = hit_flags(corpus, min_group=20)
        flagged = {pid for pid in corpus.paper_ids() if pid.startswith("P") and table.hit(pid)}
        # brute force: sort and take the nearest-rank 95th percentile
        ordered = sorted(counts)
        threshold = ordered[95]  # rank 96, 1-based
        expected = {f"P{i:03d}" for i in range(100) if counts[i] >= threshold}
        assert threshold == 95
        assert flagged == expected
        assert len(flagged) == 5

    def test_all_zero_counts_flags_everyone_with_tie_note(self):
        corpus = corpus_with_counts([0] * 25)
        table = hit_flags(corpus, min_group=20)
        assert all(table.hit(f"P{i:03d}") for i in range(25))
        diag = [g for g in table.groups if g.fields == ("F1",)][0]
        assert diag.threshold == 0
        assert diag.tie_inflated

    def test_small_group_is_undefined(self):
        corpus = corpus_with_counts(list(range(10)))
        table = hit_flags(corpus, min_group=20)
        assert all(table.hit(f"P{i:03d}") is None for i in range(10))

    def test_exact_share_when_divisible_by_twenty(self):
        rng = random.Random(3)
        for n in (20, 40, 60):
            counts = rng.sample(range(1000), n)
            corpus = corpus_with_counts(counts)
            table = hit_flags(corpus, min_group=20)
            diag = [g for g in table.groups if g.fields == ("F1",)][0]
            assert diag.n_flagged == n // 20
            assert diag.flagged_share == pytest.approx(0.05)

    def test_groups_split_by_field_combination(self):
        records = [record(f"A{i}", pub_date="2015-01-01", fields_l1=["F1"]) for i in range(20)]
        records += [record(f"B{i}", pub_date="2015-01-01", fields_l1=["F1", "F2"]) for i in range(20)]
        records += [record(f"U{i}", pub_date="2015-01-01") for i in range(20)]
        table = hit_flags(build_corpus(records), min_group=20)
        keys = {(g.fields, g.year) for g in table.groups}
        assert keys == {(("F1",), 2015), (("F1", "F2"), 2015), ((), 2015)}

    def test_horizon_limits_counted_citations(self):
        records = [record(f"P{i}", pub_date="2015-01-01", fields_l1=["F1"]) for i in range(20)]
        records.append(record("LATE", pub_date="2019-01-01", fields_l1=["G"], references=["P0"]))
        corpus = build_corpus(records)
        before = hit_flags(corpus, citation_horizon=datetime.date(2016, 1, 1), min_group=20)
        after = hit_flags(corpus, min_group=20)
        assert before.entries["P0"].threshold == 0
        assert after.entries["P0"].hit  # the late citation makes P0 the unique top paper


def placement_table(entries):
    return HitTable(entries=entries, groups=[], percentile=0.95, min_group=20, horizon=None)


class TestJournalHitRate:
    def venue_corpus(self, per_year):
        records = []
        for year, n in per_year.items():
            for i in range(n):
                records.append(record(f"P{year}_{i}", pub_date=f"{year}-01-01", venue_id="J1"))
        return build_corpus(records)

    def flags(self, corpus, hit_ids):
        entries = {
            pid: HitFlag(pid in hit_ids, 0, 100) for pid in corpus.paper_ids()
        }
        return placement_table(entries)

    def test_mean_of_yearly_shares(self):
        corpus = self.venue_corpus({2000: 10, 2001: 10})
        hits = self.flags(corpus, {"P2000_0", "P2001_0", "P2001_1"})
        assert journal_hit_rate(corpus, "J1", hits) == pytest.approx(0.15)

    def test_all_hits_every_year(self):
        corpus = self.venue_corpus({2000: 10, 2001: 12})
        hits = self.flags(corpus, set(corpus.paper_ids()))
        assert journal_hit_rate(corpus, "J1", hits) == 1.0

    def test_undefined_when_no_year_qualifies(self):
        corpus = self.venue_corpus({2000: 9, 2001: 5})
        hits = self.flags(corpus, set())
        assert journal_hit_rate(corpus, "J1", hits) is None

    def test_years_range_applied(self):
        corpus = self.venue_corpus({1999: 10, 2000: 10})
        hits = self.flags(corpus, {f"P1999_{i}" for i in range(10)})
        assert journal_hit_rate(corpus, "J1", hits, years=(2000, 2019)) == 0.0

    def test_undefined_flags_excluded(self):
        corpus = self.venue_corpus({2000: 12})
        entries = {pid: (HitFlag(False, 0, 100) if i < 9 else None) for i, pid in enumerate(sorted(corpus.paper_ids()))}
        hits = placement_table(entries)
        # only 9 defined papers -> below the 10-paper minimum
        assert journal_hit_rate(corpus, "J1", hits) is None

    def test_unknown_venue_raises(self):
        corpus = self.venue_corpus({2000: 1})
        with pytest.raises(KeyError):
            journal_hit_rate(corpus, "nope", self.flags(corpus, set()))

    def test_placement_covers_all_venues(self):
        corpus = build_corpus(
            [record(f"P{i}", pub_date="2001-01-01", venue_id="J1") for i in range(10)]
            + [record("Q", pub_date="2001-01-01", venue_id="J2")]
        )
        hits = self.flags(corpus, {"P0"})
        entries = {e.venue_id: e for e in journal_placement(corpus, hits)}
        assert entries["J1"].score == pytest.approx(0.1)
        assert entries["J2"].score is None


class TestCitationProximity:
    def base_records(self):
        return [
            record("P1", pub_date="2018-01-01", author_ids=["A", "Z"]),
            record("P2", pub_date="2019-01-01", author_ids=["A"]),
            record("NEW", pub_date="2020-05-01", author_ids=["A"]),
        ]

    def test_no_pre_cutoff_papers(self):
        corpus = build_corpus([record("ONLY", pub_date="2020-01-01", author_ids=["B"])])
        assert citation_proximity(corpus, "B", set(), 2020, MODE_TOTAL) == 0
        assert citation_proximity(corpus, "B", set(), 2020, MODE_DISTINCT) == 0

    def test_self_citation_excluded(self):
        records = self.base_records() + [
            record("T1", pub_date="2020-06-01", author_ids=["Z"], references=["P1"]),
            record("T2", pub_date="2020-06-01", author_ids=["Q"], references=["P1"]),
        ]
        corpus = build_corpus(records)
        topic = {"T1", "T2"}
        assert citation_proximity(corpus, "A", topic, 2020, MODE_TOTAL) == 1
        assert citation_proximity(corpus, "A", topic, 2020, MODE_DISTINCT) == 1

    def test_edge_and_distinct_counting(self):
        records = self.base_records() + [
            record(f"T{i}", pub_date="2020-06-01", author_ids=["Q"], references=["P1", "P2"])
            for i in range(3)
        ]
        corpus = build_corpus(records)
        topic = {"T0", "T1", "T2"}
        assert citation_proximity(corpus, "A", topic, 2020, MODE_TOTAL) == 6
        assert citation_proximity(corpus, "A", topic, 2020, MODE_DISTINCT) == 2

    def test_bulk_rows_match_per_author_calls(self):
        rng = random.Random(17)
        records = []
        for i in range(40):
            year = rng.choice([2018, 2019, 2020])
            records.append(
                record(
                    f"P{i}",
                    pub_date=f"{year}-06-01",
                    author_ids=[f"A{rng.randint(0, 5)}"],
                    references=[f"P{j}" for j in rng.sample(range(40), k=4) if j != i],
                )
            )
        corpus = build_corpus(records)
        topic = {f"P{i}" for i in range(40) if corpus.paper(f"P{i}").year == 2020}
        rows = {r[0]: (r[1], r[2]) for r in proximity_rows(corpus, topic, 2020)}
        for author in corpus.author_ids():
            assert rows[author][0] == citation_proximity(corpus, author, topic, 2020, MODE_TOTAL)
            assert rows[author][1] == citation_proximity(corpus, author, topic, 2020, MODE_DISTINCT)

    def test_monotonicity_properties(self):
        records = self.base_records() + [
            record("T1", pub_date="2020-06-01", author_ids=["Q"], references=["P1"]),
            record("T2", pub_date="2020-07-01", author_ids=["Q"], references=["P1", "P2"]),
        ]
        corpus = build_corpus(records)
        small, large = {"T1"}, {"T1", "T2"}
        for topic in (small, large):
            total = citation_proximity(corpus, "A", topic, 2020, MODE_TOTAL)
            assert total >= citation_proximity(corpus, "A", topic, 2020, MODE_DISTINCT)
        assert citation_proximity(corpus, "A", large, 2020, MODE_TOTAL) >= citation_proximity(
            corpus, "A", small, 2020, MODE_TOTAL
        )

    def test_unknown_author_and_bad_mode(self):
        corpus = build_corpus(self.base_records())
        with pytest.raises(KeyError):
            citation_proximity(corpus, "ghost", set(), 2020)
        with pytest.raises(ValueError):
            citation_proximity(corpus, "A", set(), 2020, mode="bogus")
