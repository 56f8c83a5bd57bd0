"""Session recording, deterministic replay, and interplay timeline export.

A session log is UTF-8 line-delimited JSON. The first line is a header
carrying the full configuration documents plus sha256 digests of their
canonical forms; every later line is one record:

    {"t": "start", "ts": ...}                      input: engine start
    {"t": "motion", "ts", "qom", "frame"}          input: one video frame
    {"t": "env", "ts", "value"}                    input: envelope snapshot,
                                                   closes the tick
    {"t": "control", "ts", "kind", "payload"}      input: control command
    {"t": "saliency" | "trigger" | "section" | "param", ...}   derived outputs
    {"t": "annotation", "ts", "text"}
    {"t": "end", "ts", "counts"}                   clean-shutdown footer
    {"t": "truncated"}                             abort marker

No wall-clock values are recorded, so identical inputs give byte-identical
logs. Replay rebuilds the engine from the header, feeds the recorded inputs
back through it, and demands that every derived record matches field for
field.
"""

from __future__ import annotations

import enum
import hashlib
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

from .audio import ParameterCommand, CommandOrigin, parse_chain, param_range, serialize_chain
from .engine import EngineConfig, EngineCore, SectionChange
from .errors import DigestMismatch, InvalidInput, ReplayDivergence
from .mapping import parse_mapping, serialize_mapping
from .motion import MotionSample
from .saliency import SaliencySample, SoaSource, TriggerConfig, TriggerEvent
from .score import parse_score, serialize_score

log = logging.getLogger(__name__)

LOG_VERSION = 1
FLUSH_INTERVAL_S = 1.0


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def _trigger_dict(cfg: TriggerConfig) -> dict:
    return {"theta_hi": cfg.theta_hi, "theta_lo": cfg.theta_lo,
            "refractory": cfg.refractory, "adaptive": cfg.adaptive,
            "k_adapt": cfg.k_adapt, "long_window": cfg.long_window}


def build_header(cfg: EngineConfig, fps: float, session_id: str) -> dict:
    configs = {
        "chain": json.loads(serialize_chain(cfg.chain)),
        "score": json.loads(serialize_score(cfg.score)),
        "mapping": json.loads(serialize_mapping(cfg.mapping)),
    }
    engine = {
        "trigger": _trigger_dict(cfg.trigger),
        "soa_source": cfg.soa_source.value,
        "soa_window": cfg.soa_window,
        "score_ramp_ms": cfg.score_ramp_ms,
        "seed": cfg.effective_seed,
        "sample_rate": cfg.chain.sample_rate,
        "fps": fps,
    }
    digests = {name: digest(doc) for name, doc in configs.items()}
    digests["engine"] = digest(engine)
    return {"t": "header", "version": LOG_VERSION, "session_id": session_id,
            "seed": cfg.effective_seed, "sample_rate": cfg.chain.sample_rate,
            "fps": fps, "engine": engine, "configs": configs, "digests": digests}


def event_record(event) -> dict:
    """Serialize one derived engine event to its log record."""
    if isinstance(event, SaliencySample):
        return {"t": "saliency", "ts": event.timestamp_us, "s": event.s,
                "source": event.source.value}
    if isinstance(event, TriggerEvent):
        return {"t": "trigger", "ts": event.timestamp_us, "index": event.sample_index,
                "s": event.s_at_fire, "threshold": event.threshold_at_fire}
    if isinstance(event, SectionChange):
        return {"t": "section", "ts": event.timestamp_us, "from": event.from_section,
                "to": event.to_section, "action": event.action}
    if isinstance(event, ParameterCommand):
        return {"t": "param", "ts": event.timestamp_us, "target": event.target,
                "value": event.value, "ramp_ms": event.ramp_ms,
                "origin": event.origin.value}
    raise InvalidInput(f"cannot serialize event of type {type(event).__name__}")


class SessionWriter:
    """Append-only log writer; rejects time travel, flushes at least 1 Hz."""

    def __init__(self, path: str | Path, header: dict):
        self.path = Path(path)
        self._fh = open(self.path, "w", encoding="utf-8")
        self._last_ts = -1
        self._last_flush = time.monotonic()
        self._open = True
        self.counts = {"ticks": 0, "triggers": 0, "params": 0, "controls": 0}
        self._write(header)

    def _write(self, record: dict) -> None:
        if not self._open:
            raise InvalidInput("session writer already closed")
        try:
            self._fh.write(canonical_json(record) + "\n")
        except OSError:
            self.abort()
            raise
        now = time.monotonic()
        if now - self._last_flush >= FLUSH_INTERVAL_S:
            self._fh.flush()
            self._last_flush = now

    def write_record(self, record: dict) -> bool:
        """Write one record; returns False (and writes nothing) when its
        timestamp precedes an already written one."""
        ts = record.get("ts")
        if ts is not None:
            if ts < self._last_ts:
                log.warning("rejected out-of-order record at ts=%s (last=%s): %s",
                            ts, self._last_ts, record.get("t"))
                return False
            self._last_ts = ts
        self._write(record)
        return True

    def write_start(self, ts: int) -> None:
        self.write_record({"t": "start", "ts": ts})

    def write_motion(self, sample: MotionSample) -> None:
        self.write_record({"t": "motion", "ts": sample.timestamp_us,
                           "qom": sample.qom, "frame": sample.frame_index})

    def write_env(self, value: float, ts: int) -> None:
        self.counts["ticks"] += 1
        self.write_record({"t": "env", "ts": ts, "value": float(value)})

    def write_control(self, kind: str, payload: dict, ts: int) -> None:
        self.counts["controls"] += 1
        self.write_record({"t": "control", "ts": ts, "kind": kind, "payload": payload})

    def write_events(self, events) -> None:
        for e in events:
            rec = event_record(e)
            if rec["t"] == "trigger":
                self.counts["triggers"] += 1
            elif rec["t"] == "param":
                self.counts["params"] += 1
            self.write_record(rec)

    def annotate(self, text: str, ts: int) -> None:
        self.write_record({"t": "annotation", "ts": ts, "text": str(text)})

    def end(self, ts: int) -> None:
        self.write_record({"t": "end", "ts": ts, "counts": self.counts})
        self._fh.flush()
        self._fh.close()
        self._open = False

    def abort(self) -> None:
        if not self._open:
            return
        try:
            self._fh.write(canonical_json({"t": "truncated"}) + "\n")
            self._fh.flush()
        finally:
            self._fh.close()
            self._open = False

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if self._open:
            if exc_type is None:
                self.end(self._last_ts if self._last_ts >= 0 else 0)
            else:
                self.abort()
        return False


@dataclass
class SessionLog:
    header: dict
    records: list
    complete: bool
    truncated: bool

    @property
    def trigger_count(self) -> int:
        return sum(1 for r in self.records if r["t"] == "trigger")

    def duration_s(self) -> float:
        ts = [r["ts"] for r in self.records if "ts" in r]
        return (max(ts) / 1e6) if ts else 0.0


def read_session(path: str | Path) -> SessionLog:
    records = []
    header = None
    truncated = False
    complete = False
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InvalidInput(f"{path}:{i + 1}: bad record: {exc}") from exc
            if i == 0:
                if rec.get("t") != "header":
                    raise InvalidInput(f"{path}: first line must be the session header")
                header = rec
                continue
            if rec.get("t") == "truncated":
                truncated = True
                continue
            if rec.get("t") == "end":
                complete = True
            records.append(rec)
    if header is None:
        raise InvalidInput(f"{path}: empty log")
    return SessionLog(header=header, records=records, complete=complete, truncated=truncated)


def verify_digests(header: dict, external: dict | None = None) -> None:
    """Check embedded config digests; `external` may supply replacement
    documents (keyed like header['configs']) that must match the digests."""
    stored = header.get("digests", {})
    recomputed = {name: digest(doc) for name, doc in header.get("configs", {}).items()}
    recomputed["engine"] = digest(header.get("engine", {}))
    mismatches = [name for name, d in recomputed.items() if stored.get(name) != d]
    if external:
        for name, doc in external.items():
            if name not in stored:
                mismatches.append(name)
            elif digest(doc) != stored[name]:
                mismatches.append(name)
    if mismatches:
        raise DigestMismatch(f"config digest mismatch: {sorted(set(mismatches))}")


def engine_from_header(header: dict) -> EngineCore:
    chain = parse_chain(json.dumps(header["configs"]["chain"]))
    score = parse_score(json.dumps(header["configs"]["score"]), chain=chain)
    mapping = parse_mapping(json.dumps(header["configs"]["mapping"]), chain=chain)
    eng = header["engine"]
    cfg = EngineConfig(
        chain=chain, score=score, mapping=mapping,
        trigger=TriggerConfig(**eng["trigger"]),
        soa_source=SoaSource(eng["soa_source"]),
        soa_window=int(eng["soa_window"]),
        seed=int(header["seed"]),
        score_ramp_ms=float(eng["score_ramp_ms"]),
    )
    return EngineCore(cfg)


_INPUT_KINDS = {"start", "motion", "env", "control"}
_OUTPUT_KINDS = {"saliency", "trigger", "section", "param"}


@dataclass
class ReplayReport:
    ticks: int
    outputs_checked: int
    triggers: int


def replay_session(path: str | Path, external_configs: dict | None = None) -> ReplayReport:
    """Re-derive every output in the log from its recorded inputs.

    Raises DigestMismatch when header digests fail, ReplayDivergence on the
    first output record that differs from the re-derived one.
    """
    session = read_session(path)
    if session.truncated:
        raise ReplayDivergence(f"{path}: log is marked truncated")
    verify_digests(session.header, external_configs)
    core = engine_from_header(session.header)

    ticks = 0
    checked = 0
    triggers = 0
    pending_motion: MotionSample | None = None
    records = session.records
    i = 0
    while i < len(records):
        rec = records[i]
        kind = rec["t"]
        if kind in ("annotation", "end"):
            i += 1
            continue
        if kind in _OUTPUT_KINDS:
            raise ReplayDivergence(
                f"record {i}: unexpected {kind} output with no preceding input"
            )
        if kind == "motion":
            pending_motion = MotionSample(qom=rec["qom"], timestamp_us=rec["ts"],
                                          frame_index=rec["frame"])
            i += 1
            continue
        if kind == "start":
            events = core.start(rec["ts"])
        elif kind == "env":
            events = core.tick(pending_motion, rec["value"], rec["ts"])
            pending_motion = None
            ticks += 1
        elif kind == "control":
            events, _ops = core.apply_control(rec["kind"], rec["payload"], rec["ts"])
        else:
            raise ReplayDivergence(f"record {i}: unknown record kind {kind!r}")
        i += 1
        for event in events:
            expected = event_record(event)
            if i >= len(records):
                raise ReplayDivergence(
                    f"log ends at record {i} but replay derives {expected['t']}"
                )
            actual = records[i]
            if actual != expected:
                raise ReplayDivergence(
                    f"record {i}: logged {canonical_json(actual)} != derived {canonical_json(expected)}"
                )
            if expected["t"] == "trigger":
                triggers += 1
            checked += 1
            i += 1
    return ReplayReport(ticks=ticks, outputs_checked=checked, triggers=triggers)


# -- timeline export ---------------------------------------------------------


class TimelineLabel(enum.Enum):
    SYSTEM_INTERPLAY = "SYSTEM_INTERPLAY"
    THRESHOLD_TRIGGER = "THRESHOLD_TRIGGER"
    PERFORMER_INTERPLAY = "PERFORMER_INTERPLAY"
    PERFORMER_ACTION_TO_TRIGGER = "PERFORMER_ACTION_TO_TRIGGER"


@dataclass(frozen=True)
class TimelineEntry:
    label: TimelineLabel
    t_start: float  # seconds
    t_end: float

    def __post_init__(self):
        if self.t_start > self.t_end:
            raise InvalidInput("timeline entry with t_start > t_end")


def export_timeline(session: SessionLog, gap_ms: float = 500.0, min_qom: float = 0.02,
                    env_threshold: float = 0.05, activity_threshold: float = 0.02,
                    bin_ms: float = 100.0, min_span_ms: float = 1000.0) -> list[TimelineEntry]:
    """Label the session as alternating performer/system interplay spans with
    trigger points, in the style of an annotated performance timeline.

    Per time bin: the performer dominates when the input envelope exceeds
    env_threshold while motion stays below min_qom; the system dominates when
    automated parameter activity (sum of normalized parameter movements from
    score and mapping commands) exceeds activity_threshold. Performer wins
    when both hold. Maximal same-label runs become spans; spans shorter than
    min_span_ms are dropped; spans are split at trigger instants; performer
    spans ending within gap_ms before a trigger are relabeled as the
    performer action that led to it.
    """
    chain = parse_chain(json.dumps(session.header["configs"]["chain"]))
    end_us = max((r["ts"] for r in session.records if "ts" in r), default=0)
    bin_us = bin_ms * 1000.0
    n_bins = int(math.ceil(end_us / bin_us)) if end_us > 0 else 0

    env_sum = [0.0] * n_bins
    env_n = [0] * n_bins
    qom_sum = [0.0] * n_bins
    qom_n = [0] * n_bins
    activity = [0.0] * n_bins
    trigger_ts: list[float] = []
    shadow: dict[str, float] = {}

    def bin_of(ts: int) -> int:
        return min(n_bins - 1, int(ts / bin_us))

    for rec in session.records:
        kind = rec["t"]
        if kind == "env":
            b = bin_of(rec["ts"])
            env_sum[b] += rec["value"]
            env_n[b] += 1
        elif kind == "motion":
            b = bin_of(rec["ts"])
            qom_sum[b] += rec["qom"]
            qom_n[b] += 1
        elif kind == "trigger":
            trigger_ts.append(rec["ts"] / 1e6)
        elif kind == "param" and rec["origin"] in (CommandOrigin.SCORE.value,
                                                   CommandOrigin.MAPPING.value):
            lo, hi = param_range(chain, rec["target"])
            prev = shadow.get(rec["target"], rec["value"])
            if hi > lo:
                activity[bin_of(rec["ts"])] += abs(rec["value"] - prev) / (hi - lo)
            shadow[rec["target"]] = rec["value"]

    labels: list[TimelineLabel | None] = [None] * n_bins
    for b in range(n_bins):
        env = env_sum[b] / env_n[b] if env_n[b] else 0.0
        qom = qom_sum[b] / qom_n[b] if qom_n[b] else math.inf
        if env > env_threshold and qom < min_qom:
            labels[b] = TimelineLabel.PERFORMER_INTERPLAY
        elif activity[b] > activity_threshold:
            labels[b] = TimelineLabel.SYSTEM_INTERPLAY

    # maximal runs -> spans, dropping short ones
    spans: list[tuple[TimelineLabel, float, float]] = []
    b = 0
    while b < n_bins:
        label = labels[b]
        start = b
        while b < n_bins and labels[b] == label:
            b += 1
        if label is not None:
            t0, t1 = start * bin_ms / 1000.0, b * bin_ms / 1000.0
            if (t1 - t0) * 1000.0 >= min_span_ms:
                spans.append((label, t0, t1))

    # split spans at trigger instants
    split: list[tuple[TimelineLabel, float, float]] = []
    for label, t0, t1 in spans:
        cuts = sorted(t for t in trigger_ts if t0 < t < t1)
        prev = t0
        for c in cuts:
            split.append((label, prev, c))
            prev = c
        split.append((label, prev, t1))

    # performer spans ending just before a trigger led to it
    entries: list[TimelineEntry] = []
    for label, t0, t1 in split:
        if label is TimelineLabel.PERFORMER_INTERPLAY and any(
                0.0 <= t - t1 <= gap_ms / 1000.0 for t in trigger_ts):
            label = TimelineLabel.PERFORMER_ACTION_TO_TRIGGER
        entries.append(TimelineEntry(label=label, t_start=t0, t_end=t1))
    entries.extend(TimelineEntry(label=TimelineLabel.THRESHOLD_TRIGGER, t_start=t, t_end=t)
                   for t in trigger_ts)
    entries.sort(key=lambda e: (e.t_start, e.t_end))
    return entries


def timeline_to_json(entries: list[TimelineEntry]) -> str:
    return json.dumps([{"label": e.label.value, "t_start": round(e.t_start, 6),
                        "t_end": round(e.t_end, 6)} for e in entries], indent=2)


def timeline_to_text(entries: list[TimelineEntry]) -> str:
    lines = [f"{e.t_start:9.2f}s  {e.t_end:9.2f}s  {e.label.value}" for e in entries]
    return "\n".join(lines) + ("\n" if lines else "")
