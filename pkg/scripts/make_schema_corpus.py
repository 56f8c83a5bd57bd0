"""Generate the shared schema-contract corpus.

Fifty configuration documents (score, mapping, chain) with the engine's own
accept/reject verdict recorded next to each. Both test suites consume the
output: the Python side re-validates every document to catch drift, and the
console's validators must agree with every verdict (client accepts iff the
engine accepts).

    python3 scripts/make_schema_corpus.py [out.json]

Default output: shared/schema_corpus.json (repo root).
"""

import json
import sys
from pathlib import Path

from vivo.audio import parse_chain
from vivo.errors import ConfigError
from vivo.mapping import parse_mapping
from vivo.scenario import load_assets
from vivo.score import parse_score


def dist(kind, params, target, spread="FIXED"):
    return {"kind": kind, "params": params, "target": target,
            "spread_policy": spread}


def section(dists, on_trigger="ADVANCE", **extra):
    return {"distributions": dists, "on_trigger": on_trigger, **extra}


def score(sections, **extra):
    return {"sections": sections, "seed": 1, "s_ref": 0.01, "wrap": True, **extra}


def route(source, target, **extra):
    return {"source": source, "target": target, "curve": "LINEAR",
            "out_lo": 0.0, "out_hi": 1.0, "smoothing_ms": 0.0, **extra}


def unit(uid, kind, params, **extra):
    return {"id": uid, "kind": kind, "params": params, **extra}


def chain(units, **extra):
    return {"sample_rate": 48000, "block_size": 256, "dry_gain": 1.0,
            "wet_gain": 0.8, "units": units, **extra}


GAIN = unit("gain", "GAIN", {"level": 1.0})
LP = unit("lp", "LOWPASS", {"cutoff_hz": 4000.0, "q": 0.707})
ECHO = unit("echo", "DELAY", {"time_samples": 4800, "feedback": 0.3, "mix": 0.25})
RING = unit("ring", "RINGMOD", {"freq_hz": 220.0, "mix": 0.5})


def build_documents():
    docs = []

    def add(name, kind, doc):
        docs.append({"name": name, "kind": kind, "doc": doc})

    # -- scores: 8 well-formed, 9 broken --
    add("score-minimal", "score", score([
        section([dist("UNIFORM", {"lo": 0.1, "hi": 0.9}, "gain.level")])]))
    add("score-two-sections", "score", score([
        section([dist("UNIFORM", {"lo": 0.2, "hi": 0.6}, "lowpass.cutoff_hz",
                      "SHRINK_WITH_LOW_SOA"),
                 dist("GAUSSIAN", {"mu": 0.5, "sigma_base": 0.1}, "gain.level")]),
        section([dist("CHOICE", {"values": [0.2, 0.5, 0.9],
                                 "weights": [1, 2, 1]}, "lowpass.q")], "RESAMPLE")]))
    add("score-explicit-ids", "score", score([
        section([dist("UNIFORM", {"lo": 0.0, "hi": 1.0}, "gain.level")], id=0),
        section([dist("UNIFORM", {"lo": 0.3, "hi": 0.4}, "lowpass.q")], "HOLD", id=1)]))
    add("score-timed-section", "score", score([
        section([dist("GAUSSIAN", {"mu": 0.4, "sigma_base": 0.2}, "gain.level")],
                duration_limit=4.0)], wrap=False))
    add("score-choice-single-value", "score", score([
        section([dist("CHOICE", {"values": [0.5], "weights": [1.0]}, "lowpass.q")])]))
    add("score-shrinking-gaussian", "score", score([
        section([dist("GAUSSIAN", {"mu": 0.5, "sigma_base": 0.3}, "lowpass.cutoff_hz",
                      "SHRINK_WITH_LOW_SOA")])], s_ref=0.25))
    add("score-three-actions", "score", score([
        section([dist("UNIFORM", {"lo": 0.1, "hi": 0.2}, "gain.level")], "HOLD",
                duration_limit=2.0),
        section([dist("UNIFORM", {"lo": 0.4, "hi": 0.6}, "gain.level")], "RESAMPLE"),
        section([dist("UNIFORM", {"lo": 0.8, "hi": 0.9}, "gain.level")])]))
    add("score-zero-width-uniform", "score", score([
        section([dist("UNIFORM", {"lo": 0.7, "hi": 0.7}, "gain.level")])],
        seed=2 ** 62))

    add("score-uniform-lo-above-hi", "score", score([
        section([dist("UNIFORM", {"lo": 0.9, "hi": 0.1}, "gain.level")])]))
    add("score-negative-sigma", "score", score([
        section([dist("GAUSSIAN", {"mu": 0.5, "sigma_base": -0.1}, "gain.level")])]))
    add("score-weight-length-mismatch", "score", score([
        section([dist("CHOICE", {"values": [0.1, 0.9], "weights": [1.0]},
                      "lowpass.q")])]))
    add("score-choice-empty-values", "score", score([
        section([dist("CHOICE", {"values": [], "weights": []}, "lowpass.q")])]))
    add("score-unknown-kind", "score", score([
        section([dist("POISSON", {"lam": 2.0}, "gain.level")])]))
    add("score-gapped-section-ids", "score", score([
        section([dist("UNIFORM", {"lo": 0.1, "hi": 0.9}, "gain.level")], id=0),
        section([dist("UNIFORM", {"lo": 0.1, "hi": 0.9}, "lowpass.q")], id=2)]))
    add("score-unresolved-target", "score", score([
        section([dist("UNIFORM", {"lo": 0.1, "hi": 0.9}, "ghost.level")])]))
    add("score-mu-beyond-unit-range", "score", score([
        section([dist("GAUSSIAN", {"mu": 1.5, "sigma_base": 0.1},
                      "gain.level")])]))
    add("score-no-sections", "score", score([]))

    # -- mappings: 7 well-formed, 8 broken --
    add("mapping-empty", "mapping", {"routes": []})
    add("mapping-linear-qom", "mapping", {"routes": [
        route("QOM", "gain.level", out_lo=0.2, out_hi=1.2, smoothing_ms=40.0)]})
    add("mapping-exponent-soa", "mapping", {"routes": [
        route("SOA", "lowpass.cutoff_hz", curve="EXPONENT", p=2.0,
              out_lo=500.0, out_hi=8000.0, smoothing_ms=100.0)]})
    add("mapping-invert-envelope-to-master", "mapping", {"routes": [
        route("AUDIO_ENVELOPE", "master.wet_gain", curve="INVERT")]})
    add("mapping-disabled-duplicate", "mapping", {"routes": [
        route("QOM", "gain.level"),
        route("QOM", "gain.level", enabled=False, out_hi=2.0)]})
    add("mapping-two-sources-one-target", "mapping", {"routes": [
        route("QOM", "gain.level"),
        route("SOA", "gain.level")]})
    add("mapping-degenerate-range", "mapping", {"routes": [
        route("QOM", "gain.level", out_lo=0.5, out_hi=0.5)]})

    add("mapping-lo-above-hi", "mapping", {"routes": [
        route("QOM", "gain.level", out_lo=1.0, out_hi=0.0)]})
    add("mapping-zero-exponent", "mapping", {"routes": [
        route("SOA", "lowpass.q", curve="EXPONENT", p=0.0)]})
    add("mapping-negative-smoothing", "mapping", {"routes": [
        route("QOM", "gain.level", smoothing_ms=-1.0)]})
    add("mapping-enabled-duplicate", "mapping", {"routes": [
        route("QOM", "gain.level"),
        route("QOM", "gain.level", out_hi=2.0)]})
    add("mapping-target-without-dot", "mapping", {"routes": [
        route("QOM", "gainlevel")]})
    add("mapping-unknown-source", "mapping", {"routes": [
        route("MIDI", "gain.level")]})
    add("mapping-unknown-curve", "mapping", {"routes": [
        route("QOM", "gain.level", curve="SIGMOID")]})
    add("mapping-unresolved-target", "mapping", {"routes": [
        route("QOM", "ghost.level")]})

    # -- chains: 6 well-formed, 12 broken --
    add("chain-reference", "chain", chain([GAIN, LP]))
    add("chain-44100-gain-only", "chain",
        chain([GAIN], sample_rate=44100, block_size=512))
    add("chain-min-block", "chain", chain([GAIN], block_size=64))
    add("chain-max-block-four-units", "chain",
        chain([GAIN, ECHO, RING, LP], block_size=2048))
    add("chain-max-feedback", "chain", chain([
        unit("echo", "DELAY",
             {"time_samples": 24000, "feedback": 0.95, "mix": 1.0})]))
    add("chain-bypassed-unit", "chain",
        chain([GAIN, unit("ring", "RINGMOD", {"freq_hz": 55.0, "mix": 1.0},
                          active=False)]))

    add("chain-unsupported-rate", "chain", chain([GAIN], sample_rate=22050))
    add("chain-block-not-power-of-two", "chain", chain([GAIN], block_size=100))
    add("chain-block-too-large", "chain", chain([GAIN], block_size=4096))
    add("chain-duplicate-ids", "chain", chain([GAIN, unit("gain", "LOWPASS",
        {"cutoff_hz": 1000.0, "q": 1.0})]))
    add("chain-reserved-master-id", "chain",
        chain([unit("master", "GAIN", {"level": 1.0})]))
    add("chain-dotted-id", "chain", chain([unit("a.b", "GAIN", {"level": 1.0})]))
    add("chain-param-out-of-range", "chain",
        chain([unit("gain", "GAIN", {"level": 5.0})]))
    add("chain-cutoff-beyond-nyquist", "chain",
        chain([unit("lp", "LOWPASS", {"cutoff_hz": 24000.0, "q": 0.707})]))
    add("chain-missing-param", "chain",
        chain([unit("lp", "LOWPASS", {"cutoff_hz": 4000.0})]))
    add("chain-unknown-param", "chain",
        chain([unit("gain", "GAIN", {"level": 1.0, "foo": 2.0})]))
    add("chain-unknown-kind", "chain",
        chain([unit("fl", "FLANGER", {"depth": 0.5})]))
    add("chain-gain-above-unity", "chain", chain([GAIN], dry_gain=1.5))

    return docs


def engine_verdict(kind, doc, context):
    try:
        if kind == "chain":
            parse_chain(json.dumps(doc))
        elif kind == "score":
            parse_score(json.dumps(doc), chain=context)
        elif kind == "mapping":
            parse_mapping(json.dumps(doc), chain=context)
        else:
            raise ValueError(f"unknown document kind {kind!r}")
        return True, []
    except ConfigError as exc:
        return False, exc.errors


def main(argv):
    out = Path(argv[1]) if len(argv) > 1 else \
        Path(__file__).resolve().parents[1] / "shared" / "schema_corpus.json"
    chain_context_doc = load_assets()["chain"]
    context = parse_chain(json.dumps(chain_context_doc))

    documents = build_documents()
    assert len(documents) == 50, f"corpus must hold 50 documents, got {len(documents)}"
    names = [d["name"] for d in documents]
    assert len(set(names)) == 50, "document names must be unique"

    for entry in documents:
        accepts, errors = engine_verdict(entry["kind"], entry["doc"], context)
        entry["engine_accepts"] = accepts
        entry["engine_errors"] = errors

    accepted = sum(1 for d in documents if d["engine_accepts"])
    corpus = {
        "version": 1,
        "chain_context": chain_context_doc,
        "documents": documents,
    }
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(corpus, indent=2, sort_keys=True) + "\n",
                   encoding="utf-8")
    print(f"{out}: {len(documents)} documents, {accepted} accepted, "
          f"{len(documents) - accepted} rejected")
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
