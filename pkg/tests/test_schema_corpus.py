"""Shared schema corpus stays in sync with live engine validation."""

import json
from pathlib import Path

import pytest

from vivo.audio import parse_chain
from vivo.errors import ConfigError
from vivo.mapping import parse_mapping
from vivo.score import parse_score

CORPUS_PATH = Path(__file__).resolve().parents[1] / "shared" / "schema_corpus.json"


@pytest.fixture(scope="module")
def corpus():
    return json.loads(CORPUS_PATH.read_text(encoding="utf-8"))


def live_verdict(kind, doc, context):
    try:
        if kind == "chain":
            parse_chain(json.dumps(doc))
        elif kind == "score":
            parse_score(json.dumps(doc), chain=context)
        elif kind == "mapping":
            parse_mapping(json.dumps(doc), chain=context)
        else:
            pytest.fail(f"unknown corpus document kind {kind!r}")
        return True, []
    except ConfigError as exc:
        return False, exc.errors


def test_corpus_shape(corpus):
    assert len(corpus["documents"]) == 50
    names = [d["name"] for d in corpus["documents"]]
    assert len(set(names)) == 50
    accepted = sum(1 for d in corpus["documents"] if d["engine_accepts"])
    assert 10 <= accepted <= 40  # both classes well represented
    kinds = {d["kind"] for d in corpus["documents"]}
    assert kinds == {"score", "mapping", "chain"}


def test_chain_context_is_valid(corpus):
    parse_chain(json.dumps(corpus["chain_context"]))


def test_every_verdict_matches_engine(corpus):
    context = parse_chain(json.dumps(corpus["chain_context"]))
    for entry in corpus["documents"]:
        accepts, errors = live_verdict(entry["kind"], entry["doc"], context)
        assert accepts == entry["engine_accepts"], \
            f"{entry['name']}: engine now says {accepts}"
        assert errors == entry["engine_errors"], \
            f"{entry['name']}: error text drifted"
