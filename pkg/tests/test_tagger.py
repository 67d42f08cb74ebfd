"""Query parsing/evaluation, topic tagging, and title-word scoring."""

import math
import random

import pytest

from pivotlab.tagger import (
    COVID_QUERY,
    And,
    Or,
    Phrase,
    QueryParseError,
    author_title_proximity,
    build_relfreq,
    evaluate,
    parse_query,
    score_title,
    tag,
    tokenize_title,
)

from conftest import build_corpus, record


class TestParseQuery:
    def test_simple_or(self):
        assert parse_query('"a" OR "b"') == Or((Phrase("a"), Phrase("b")))

    def test_parens_force_precedence(self):
        assert parse_query('("x" OR "y") AND "z"') == And((Or((Phrase("x"), Phrase("y"))), Phrase("z")))

    def test_and_binds_tighter_than_or(self):
        assert parse_query('"a" OR "b" AND "c"') == Or((Phrase("a"), And((Phrase("b"), Phrase("c")))))

    def test_bare_words_are_phrases(self):
        assert parse_query("Wuhan OR China") == Or((Phrase("wuhan"), Phrase("china")))

    def test_full_topic_query_structure(self):
        tree = parse_query(COVID_QUERY)
        assert isinstance(tree, Or)
        assert len(tree.children) == 9
        last = tree.children[-1]
        assert last == And(
            (
                Or((Phrase("coronavirus"), Phrase("corona virus"))),
                Or((Phrase("wuhan"), Phrase("china"), Phrase("novel"))),
            )
        )

    @pytest.mark.parametrize(
        "bad,pos",
        [
            ('"unterminated', 0),
            ('("a" OR "b"', 11),
            ('"a") OR "b"', 3),
            ('"a" OR', 6),
            ("", 0),
        ],
    )
    def test_parse_errors_carry_position(self, bad, pos):
        with pytest.raises(QueryParseError) as err:
            parse_query(bad)
        assert err.value.position == pos

    def test_empty_phrase_rejected(self):
        with pytest.raises(QueryParseError):
            parse_query('""')


class TestEvaluate:
    def test_token_boundary_blocks_prefix_match(self):
        q = parse_query('"hcov"')
        assert evaluate(q, "the HCoV-19 outbreak")
        assert not evaluate(q, "hcovid spreads")

    def test_case_insensitive_and_whitespace_collapsed(self):
        q = parse_query('"corona virus"')
        assert evaluate(q, "Corona   Virus research")
        assert not evaluate(q, "coronavirus research")

    def test_hyphenated_phrase(self):
        q = parse_query('"COVID-19"')
        assert evaluate(q, "covid-19 and policy")
        assert not evaluate(q, "covid-19x mutation")


class TestTag:
    def corpus(self):
        return build_corpus(
            [
                record("T1", title="COVID-19 and policy", pub_date="2020-04-01"),
                record("T2", title="coronavirus replication", abstract="in vitro assay", pub_date="2020-04-01"),
                record("T3", title="coronavirus replication", abstract="samples from Wuhan", pub_date="2020-04-01"),
                record("T4", title="", pub_date="2020-04-01"),
                record("T5", title="COVID-19 in 2019?", pub_date="2019-12-01"),
                record("T6", title="economic shocks", abstract="we study SARS-CoV-2 impacts", pub_date="2020-07-01"),
            ]
        )

    def test_spec_cases(self):
        corpus = self.corpus()
        query = parse_query(COVID_QUERY)
        tagged = tag(corpus, query, year_filter=(2020, 2020))
        assert "T1" in tagged
        assert "T2" not in tagged  # conjunction guard not satisfied
        assert "T3" in tagged  # abstract supplies the guard word
        assert "T4" not in tagged
        assert "T5" not in tagged  # outside year filter
        assert "T6" in tagged  # matched via abstract

    def test_year_filter_optional(self):
        tagged = tag(self.corpus(), parse_query(COVID_QUERY))
        assert "T5" in tagged

    def test_or_union_and_intersection_properties(self):
        rng = random.Random(5)
        words = ["alpha", "beta", "gamma", "delta"]
        records = [
            record(f"P{i}", title=" ".join(rng.choices(words, k=3)), pub_date="2020-01-01")
            for i in range(40)
        ]
        corpus = build_corpus(records)
        for _ in range(20):
            q1 = Phrase(rng.choice(words))
            q2 = (
                Phrase(rng.choice(words))
                if rng.random() < 0.5
                else And((Phrase(rng.choice(words)), Phrase(rng.choice(words))))
            )
            assert tag(corpus, Or((q1, q2))) == tag(corpus, q1) | tag(corpus, q2)
            assert tag(corpus, And((q1, q2))) == tag(corpus, q1) & tag(corpus, q2)


def relfreq_corpus():
    """10 topic papers (3 contain 'wordy') and 100 non-topic (5 contain it)."""
    records = []
    for i in range(10):
        title = "wordy topic stuff" if i < 3 else "topic stuff"
        records.append(record(f"T{i}", title=title, pub_date="2020-02-01"))
    for i in range(100):
        title = "wordy plain stuff" if i < 5 else "plain stuff"
        records.append(record(f"N{i}", title=title, pub_date="2020-08-01"))
    return build_corpus(records), {f"T{i}" for i in range(10)}


class TestBuildRelfreq:
    def test_hand_computed_score(self):
        corpus, topic = relfreq_corpus()
        table = build_relfreq(corpus, topic, min_topic_papers=3, top_k=500)
        # ((3+1)/10) / ((5+1)/100) = 0.4 / 0.06
        assert math.isclose(table.get("wordy"), 20.0 / 3.0, rel_tol=0, abs_tol=1e-12)

    def test_symmetric_word_scores_one(self):
        records = [record(f"T{i}", title="common", pub_date="2020-01-01") for i in range(10)]
        records += [record(f"N{i}", title="common", pub_date="2020-01-01") for i in range(10)]
        corpus = build_corpus(records)
        table = build_relfreq(corpus, {f"T{i}" for i in range(10)}, min_topic_papers=1)
        assert table.get("common") == pytest.approx(1.0, abs=1e-15)

    def test_exclusion_list_removes_word(self):
        corpus, topic = relfreq_corpus()
        table = build_relfreq(corpus, topic, min_topic_papers=3, exclusions=["wordy"])
        assert "wordy" not in table
        assert "topic" in table

    def test_min_topic_papers_threshold(self):
        corpus, topic = relfreq_corpus()
        table = build_relfreq(corpus, topic, min_topic_papers=4)
        assert "wordy" not in table  # appears in only 3 topic titles

    def test_top_k_cut_with_deterministic_ties(self):
        corpus, topic = relfreq_corpus()
        table = build_relfreq(corpus, topic, min_topic_papers=1, top_k=2)
        assert len(table) <= 2
        scores = [s for _, s in table.rows()]
        assert scores == sorted(scores, reverse=True)

    def test_within_title_repetition_does_not_change_counts(self):
        records = [record("T0", title="solo solo solo other", pub_date="2020-01-01")]
        records += [record(f"N{i}", title="other", pub_date="2020-01-01") for i in range(4)]
        corpus1 = build_corpus(records)
        records[0] = record("T0", title="solo other", pub_date="2020-01-01")
        corpus2 = build_corpus(records)
        t1 = build_relfreq(corpus1, {"T0"}, min_topic_papers=1)
        t2 = build_relfreq(corpus2, {"T0"}, min_topic_papers=1)
        assert t1.get("solo") == t2.get("solo")

    def test_errors(self):
        corpus, topic = relfreq_corpus()
        with pytest.raises(ValueError):
            build_relfreq(corpus, set())
        only_topic = build_corpus([record("T0", title="x y", pub_date="2020-01-01")])
        with pytest.raises(ValueError):
            build_relfreq(only_topic, {"T0"}, min_topic_papers=1)
        with pytest.raises(ValueError):
            build_relfreq(corpus, topic | {"T0"} if "T0" not in topic else topic, year=2021)


def toy_table():
    from pivotlab.tagger import WordScoreTable

    return WordScoreTable(
        scores={"alpha": 6.0, "beta": 2.0, "gamma": 4.0},
        min_topic_papers=1,
        top_k=10,
        exclusions=(),
    )


class TestScoreTitle:
    def test_mean_of_scored_tokens(self):
        assert score_title("alpha beta", toy_table()) == (4.0, True)

    def test_no_coverage_flagged(self):
        value, covered = score_title("unknown words", toy_table())
        assert value == 0.0 and not covered

    def test_single_token(self):
        assert score_title("gamma", toy_table()) == (4.0, True)

    def test_occurrences_counted_and_permutation_invariant(self):
        table = toy_table()
        twice = score_title("alpha alpha beta", table)
        assert twice.value == pytest.approx((6.0 + 6.0 + 2.0) / 3)
        assert score_title("beta alpha alpha", table) == twice

    def test_unscored_tokens_skipped(self):
        assert score_title("alpha mystery", toy_table()).value == 6.0


class TestAuthorTitleProximity:
    def corpus(self):
        return build_corpus(
            [
                record("P1", title="alpha", pub_date="2018-01-01", author_ids=["A1"]),
                record("P2", title="beta gamma", pub_date="2019-01-01", author_ids=["A1"]),
                record("P3", title="alpha", pub_date="2020-06-01", author_ids=["A1", "A2"]),
                record("P4", title="nothing scored", pub_date="2019-01-01", author_ids=["A3"]),
            ]
        )

    def test_mean_over_pre_cutoff_papers(self):
        # P1 scores 6.0, P2 scores 3.0; P3 is at/after the cutoff.
        assert author_title_proximity(self.corpus(), "A1", toy_table(), 2020) == pytest.approx(4.5)

    def test_no_pre_cutoff_papers_undefined(self):
        assert author_title_proximity(self.corpus(), "A2", toy_table(), 2020) is None

    def test_uncovered_titles_contribute_zero(self):
        assert author_title_proximity(self.corpus(), "A3", toy_table(), 2020) == 0.0

    def test_unknown_author_raises(self):
        with pytest.raises(KeyError):
            author_title_proximity(self.corpus(), "ghost", toy_table(), 2020)


def test_tokenize_drops_short_tokens():
    assert tokenize_title("A COVID-19 re-analysis") == ["covid", "19", "re", "analysis"]
