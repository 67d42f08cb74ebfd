"""Shared fixtures: compact builders for synthetic paper records and corpora."""

from __future__ import annotations

import json

import pytest

from pivotlab.corpus import Corpus, ingest


def record(paper_id, pub_date="2020-06-15", title="", **kw):
    """A raw input record as a dict; keyword args override any field."""
    obj = {
        "paper_id": paper_id,
        "title": title,
        "pub_date": pub_date,
        "fields_l0": [],
        "fields_l1": [],
        "author_ids": [],
        "references": [],
        "grant_ids": [],
        "is_preprint": False,
    }
    obj.update(kw)
    return obj


def build_corpus(records) -> Corpus:
    corpus, report = ingest(json.dumps(r) for r in records)
    assert report.records_dropped == 0, dict(report.dropped)
    return corpus


@pytest.fixture
def make_corpus():
    return build_corpus
