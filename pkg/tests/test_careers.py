"""Established authors, career profiles, matching, and new collaborators."""

import random

import pytest

from pivotlab.careers import (
    AFFIL_DIFFERENT,
    AFFIL_SAME,
    AFFIL_UNKNOWN,
    FIELD_DIFFERENT,
    FIELD_SAME,
    FIELD_UNKNOWN,
    UNMATCHED_NO_CANDIDATE,
    CareerProfile,
    career_profile,
    established_authors,
    match_controls,
    new_collaborator_series,
)

from conftest import build_corpus, record


def papers_for(author, years, start=0):
    return [
        record(f"{author}_{start + i}", pub_date=f"{y}-06-01", author_ids=[author])
        for i, y in enumerate(years)
    ]


class TestEstablishedAuthors:
    def test_threshold_cases(self):
        records = (
            papers_for("A5", [2015, 2016, 2017, 2018, 2019])
            + papers_for("A4", [2016, 2017, 2018, 2019])
            + papers_for("LATE", [2015, 2016, 2017, 2018, 2020])
        )
        corpus = build_corpus(records)
        established = established_authors(corpus, min_pubs=5, cutoff_year=2019)
        assert "A5" in established
        assert "A4" not in established
        # brute-force count with the cutoff: only 4 of LATE's papers are <= 2019
        assert sum(1 for p in corpus.author_papers("LATE") if corpus.paper(p).year <= 2019) == 4
        assert "LATE" not in established


class TestCareerProfile:
    def test_modal_field_strict_mode(self):
        records = [
            record("P1", pub_date="2015-01-01", author_ids=["A"], fields_l1=["F1"], fields_l0=["D1"]),
            record("P2", pub_date="2016-01-01", author_ids=["A"], fields_l1=["F1"], fields_l0=["D1"]),
            record("P3", pub_date="2017-01-01", author_ids=["A"], fields_l1=["F2"], fields_l0=["D2"]),
        ]
        profile = career_profile(build_corpus(records), "A")
        assert profile.modal_l1_field == "F1"
        assert profile.modal_l0_field == "D1"

    def test_modal_tie_breaks_lexicographically(self):
        records = [
            record("P1", pub_date="2015-01-01", author_ids=["A"], fields_l1=["F2"]),
            record("P2", pub_date="2016-01-01", author_ids=["A"], fields_l1=["F1"]),
        ]
        assert career_profile(build_corpus(records), "A").modal_l1_field == "F1"

    def test_window_count(self):
        corpus = build_corpus(papers_for("A", [2014, 2015, 2019, 2020]))
        profile = career_profile(corpus, "A", window=(2015, 2019))
        assert profile.pub_count_window == 2
        assert profile.first_pub_year == 2014
        assert profile.last_pub_year == 2020

    def test_unfielded_papers_excluded_from_mode(self):
        records = [
            record("P1", pub_date="2015-01-01", author_ids=["A"]),
            record("P2", pub_date="2016-01-01", author_ids=["A"], fields_l1=["F9"]),
        ]
        assert career_profile(build_corpus(records), "A").modal_l1_field == "F9"

    def test_prior_impact_counts_window_citations(self):
        records = papers_for("A", [2016, 2018]) + [
            record("C1", pub_date="2019-01-01", references=["A_0", "A_1"]),
            record("C2", pub_date="2021-01-01", references=["A_0"]),  # after window end
        ]
        profile = career_profile(build_corpus(records), "A", window=(2015, 2019))
        assert profile.prior_impact == 2

    def test_unknown_author(self):
        with pytest.raises(KeyError):
            career_profile(build_corpus(papers_for("A", [2015])), "B")


def profile(author, first=2005, field="F1", pubs=0):
    return CareerProfile(
        author_id=author,
        first_pub_year=first,
        last_pub_year=2020,
        modal_l0_field=None,
        modal_l1_field=field,
        pub_count_window=pubs,
        prior_impact=0,
        window=(2015, 2019),
    )


def greedy_oracle(treated, pool, profiles):
    """Exhaustive-search replay of the greedy matching rule."""
    available = set(pool)
    pairs, dists, unmatched = {}, {}, []
    for t in sorted(treated):
        pt = profiles[t]
        cands = [
            c
            for c in available
            if profiles[c].first_pub_year == pt.first_pub_year
            and profiles[c].modal_l1_field == pt.modal_l1_field
        ]
        if not cands:
            unmatched.append((t, UNMATCHED_NO_CANDIDATE))
            continue
        best = min(cands, key=lambda c: (abs(profiles[c].pub_count_window - pt.pub_count_window), c))
        pairs[t] = best
        dists[t] = abs(profiles[best].pub_count_window - pt.pub_count_window)
        available.remove(best)
    return pairs, dists, unmatched


class TestMatchControls:
    def test_nearest_by_pub_count(self):
        profiles = {
            "T": profile("T", pubs=10),
            "C8": profile("C8", pubs=8),
            "C11": profile("C11", pubs=11),
        }
        m = match_controls({"T"}, {"C8", "C11"}, profiles)
        assert m.pairs == {"T": "C11"}
        assert m.distances == {"T": 1}

    def test_exact_twin_distance_zero(self):
        profiles = {"T": profile("T", pubs=7), "C": profile("C", pubs=7)}
        m = match_controls({"T"}, {"C"}, profiles)
        assert m.pairs == {"T": "C"} and m.distances["T"] == 0

    def test_key_mismatch_leaves_unmatched(self):
        profiles = {
            "T": profile("T", first=2005, field="F1"),
            "C1": profile("C1", first=2006, field="F1"),
            "C2": profile("C2", first=2005, field="F2"),
        }
        m = match_controls({"T"}, {"C1", "C2"}, profiles)
        assert m.pairs == {}
        assert m.unmatched == [("T", UNMATCHED_NO_CANDIDATE)]

    def test_equal_distance_tie_breaks_to_smaller_id(self):
        profiles = {
            "T": profile("T", pubs=10),
            "CA": profile("CA", pubs=9),
            "CB": profile("CB", pubs=11),
        }
        m = match_controls({"T"}, {"CA", "CB"}, profiles)
        assert m.pairs["T"] == "CA"

    def test_without_replacement(self):
        profiles = {
            "T1": profile("T1", pubs=10),
            "T2": profile("T2", pubs=10),
            "C": profile("C", pubs=10),
            "D": profile("D", pubs=13),
        }
        m = match_controls({"T1", "T2"}, {"C", "D"}, profiles)
        assert m.pairs == {"T1": "C", "T2": "D"}
        assert len(set(m.pairs.values())) == len(m.pairs)

    def test_overlap_rejected(self):
        profiles = {"X": profile("X")}
        with pytest.raises(ValueError):
            match_controls({"X"}, {"X"}, profiles)

    def test_matches_exhaustive_oracle_on_random_instances(self):
        rng = random.Random(23)
        for _ in range(40):
            n_treated = rng.randint(1, 30)
            n_pool = rng.randint(1, 100)
            profiles = {}
            treated = {f"T{i:02d}" for i in range(n_treated)}
            pool = {f"C{i:03d}" for i in range(n_pool)}
            for a in treated | pool:
                profiles[a] = profile(
                    a,
                    first=rng.choice([2004, 2005]),
                    field=rng.choice(["F1", "F2"]),
                    pubs=rng.randint(0, 25),
                )
            m = match_controls(treated, pool, profiles)
            pairs, dists, unmatched = greedy_oracle(treated, pool, profiles)
            assert m.pairs == pairs
            assert m.distances == dists
            assert sorted(m.unmatched) == sorted(unmatched)
            # injectivity and exact keys
            assert len(set(m.pairs.values())) == len(m.pairs)
            for t, c in m.pairs.items():
                assert profiles[t].first_pub_year == profiles[c].first_pub_year
                assert profiles[t].modal_l1_field == profiles[c].modal_l1_field


def collab_corpus(order=None):
    records = [
        record("P1", pub_date="2016-01-01", author_ids=["A", "B"]),
        record("P2", pub_date="2017-01-01", author_ids=["A", "C"]),
        record("P3", pub_date="2018-01-01", author_ids=["A", "B", "C", "D"]),
    ]
    if order:
        records = [records[i] for i in order]
    return build_corpus(records)


class TestNewCollaborators:
    def everyone(self, corpus):
        return set(corpus.author_ids())

    def test_first_paper_all_new(self):
        corpus = build_corpus([record("P1", pub_date="2016-01-01", author_ids=["A", "B", "C", "D"])])
        events = new_collaborator_series(corpus, "A", self.everyone(corpus))
        assert [e.new_count for e in events] == [3]

    def test_repeat_coauthors_not_new(self):
        corpus = build_corpus(
            [
                record("P1", pub_date="2016-01-01", author_ids=["A", "B"]),
                record("P2", pub_date="2017-01-01", author_ids=["A", "B"]),
            ]
        )
        events = new_collaborator_series(corpus, "A", self.everyone(corpus))
        assert [e.new_count for e in events] == [1, 0]

    def test_sequential_counts(self):
        corpus = collab_corpus()
        events = new_collaborator_series(corpus, "A", self.everyone(corpus))
        assert [e.new_count for e in events] == [1, 1, 1]
        assert [l.collaborator_id for e in events for l in e.new_collaborators] == ["B", "C", "D"]

    def test_counts_sum_to_distinct_coauthors(self):
        rng = random.Random(31)
        authors = [f"A{i}" for i in range(8)]
        records = []
        for i in range(25):
            team = rng.sample(authors, k=rng.randint(1, 4))
            records.append(record(f"P{i:02d}", pub_date=f"{2000 + i}-01-01", author_ids=team))
        corpus = build_corpus(records)
        established = set(authors)
        for author in authors:
            if author not in corpus.author_ids():
                continue
            events = new_collaborator_series(corpus, author, established)
            distinct = set()
            for pid in corpus.author_papers(author):
                distinct.update(a for a in corpus.paper(pid).author_ids if a != author)
            assert sum(e.new_count for e in events) == len(distinct)

    def test_input_order_invariance(self):
        base = new_collaborator_series(collab_corpus(), "A", {"A", "B", "C", "D"})
        shuffled = new_collaborator_series(collab_corpus(order=[2, 0, 1]), "A", {"A", "B", "C", "D"})
        assert base == shuffled

    def test_only_established_collaborators_tracked(self):
        corpus = collab_corpus()
        events = new_collaborator_series(corpus, "A", {"A", "B"})
        assert [e.new_count for e in events] == [1, 0, 0]

    def test_not_established_author_rejected(self):
        corpus = collab_corpus()
        with pytest.raises(ValueError):
            new_collaborator_series(corpus, "A", {"B"})

    def test_field_categorization(self):
        records = (
            [record(f"A_{i}", pub_date=f"{2010 + i}-01-01", author_ids=["A"], fields_l1=["F1"]) for i in range(5)]
            + [record(f"B_{i}", pub_date=f"{2010 + i}-01-01", author_ids=["B"], fields_l1=["F1"]) for i in range(5)]
            + [record(f"C_{i}", pub_date=f"{2010 + i}-01-01", author_ids=["C"], fields_l1=["F2"]) for i in range(5)]
            + [record(f"D_{i}", pub_date=f"{2010 + i}-01-01", author_ids=["D"], fields_l1=["F2"]) for i in range(2)]
            + [record("JOINT", pub_date="2020-01-01", author_ids=["A", "B", "C", "D"])]
        )
        corpus = build_corpus(records)
        established = {"A", "B", "C", "D"}
        events = new_collaborator_series(corpus, "A", established)
        links = {l.collaborator_id: l for e in events for l in e.new_collaborators}
        assert links["B"].field_category == FIELD_SAME
        assert links["C"].field_category == FIELD_DIFFERENT
        assert links["D"].field_category == FIELD_UNKNOWN  # only 2 prior papers

    def test_affiliation_categorization_with_fallback(self):
        records = [
            record("OLD", pub_date="2015-01-01", author_ids=["B"], affiliations={"B": ["G2"]}),
            record(
                "J1",
                pub_date="2016-01-01",
                author_ids=["A", "B"],
                affiliations={"A": ["G1"]},  # B missing here -> fallback to OLD
            ),
            record(
                "J2",
                pub_date="2017-01-01",
                author_ids=["A", "C"],
                affiliations={"A": ["G1"], "C": ["G1"]},
            ),
            record("J3", pub_date="2018-01-01", author_ids=["A", "D"]),
        ]
        corpus = build_corpus(records)
        established = {"A", "B", "C", "D"}
        events = new_collaborator_series(corpus, "A", established, min_prior_pubs=1)
        links = {l.collaborator_id: l for e in events for l in e.new_collaborators}
        assert links["B"].affiliation_category == AFFIL_DIFFERENT
        assert links["B"].affiliation_fallback
        assert links["C"].affiliation_category == AFFIL_SAME
        assert not links["C"].affiliation_fallback
        assert links["D"].affiliation_category == AFFIL_UNKNOWN
