"""Deterministic engine core: one code path shared by live runs, the scripted
scenario, and replay verification.

The core is a pure-ish state machine over three inputs:

    start(t)                  initial section sample
    tick(motion, env, t)      one video frame plus the envelope snapshot
    apply_control(kind, p, t) one validated control command

Each call returns the derived events in a fixed order (saliency, then
trigger, then section change, then score commands, then mapping commands), so
a session log that records inputs and outputs interleaved replays exactly.
The core never touches audio or network state; the runtime forwards emitted
ParameterCommand/ActivationEvent items to the audio processor.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .audio import (ActivationEvent, CommandOrigin, MASTER_UNIT_ID, MASTER_RANGES,
                    ParameterCommand, ProcessingChain, denormalize, param_range,
                    param_ranges, resolve_target)
from .errors import ConfigError, InvalidInput
from .mapping import MappingConfig, apply_routes, parse_mapping, validate_mapping
from .motion import MotionSample
from .saliency import SaliencySample, SaliencyTracker, SoaSource, TriggerConfig, TriggerEvent
from .score import (Score, ScoreState, TriggerAction, make_rng, parse_score,
                    replace_section, sample_section)

DEFAULT_SOA_WINDOW = 64
DEFAULT_SCORE_RAMP_MS = 20.0


@dataclass(frozen=True)
class SectionChange:
    from_section: int
    to_section: int
    action: str  # ADVANCE | RESAMPLE | TIMED | LOAD
    timestamp_us: int = 0


@dataclass(frozen=True)
class EngineConfig:
    chain: ProcessingChain
    score: Score
    mapping: MappingConfig
    trigger: TriggerConfig
    soa_source: SoaSource = SoaSource.QOM_VARIANCE
    soa_window: int = DEFAULT_SOA_WINDOW
    seed: int | None = None  # run seed; overrides score.seed when set
    score_ramp_ms: float = DEFAULT_SCORE_RAMP_MS

    @property
    def effective_seed(self) -> int:
        return self.score.seed if self.seed is None else self.seed


def _initial_shadow(chain: ProcessingChain) -> dict[str, float]:
    shadow = {f"{MASTER_UNIT_ID}.dry_gain": chain.dry_gain,
              f"{MASTER_UNIT_ID}.wet_gain": chain.wet_gain}
    for u in chain.units:
        for name in param_ranges(u.kind, chain.sample_rate):
            shadow[f"{u.id}.{name}"] = float(u.params[name])
    return shadow


class EngineCore:
    """Signal derivation pipeline; single-owner state, no I/O."""

    def __init__(self, cfg: EngineConfig):
        problems = validate_mapping(cfg.mapping, cfg.chain)
        if problems:
            raise ConfigError(problems)
        for target in cfg.score.targets():
            resolve_target(cfg.chain, target)
        self.cfg = cfg
        self.tracker = SaliencyTracker(cfg.soa_window, cfg.trigger, cfg.soa_source)
        self.score = cfg.score
        self.mapping = cfg.mapping
        self.state = ScoreState(current_section=0, rng=make_rng(cfg.effective_seed))
        self._shadow = _initial_shadow(cfg.chain)
        self.last_qom = 0.0
        self.last_env = 0.0
        self.trigger_count = 0

    # -- derived state exposed to the metrics feed ------------------------

    @property
    def current_section(self) -> int:
        return self.state.current_section

    @property
    def current_soa(self) -> float:
        return self.tracker.current.s

    @property
    def effective_theta_hi(self) -> float:
        return self.tracker.trigger.effective_thresholds()[0]

    def shadow_value(self, target: str) -> float:
        return self._shadow[target]

    # -- score plumbing ----------------------------------------------------

    def _score_commands(self, timestamp_us: int) -> list[ParameterCommand]:
        params = sample_section(self.score.sections[self.state.current_section],
                                self.tracker.current, self.score, self.state)
        commands = []
        for target, x in params.items():
            value = denormalize(self.cfg.chain, target, x)
            self._shadow[target] = value
            commands.append(ParameterCommand(
                target=target, value=value, ramp_ms=self.cfg.score_ramp_ms,
                origin=CommandOrigin.SCORE, timestamp_us=timestamp_us,
            ))
        return commands

    def _enter_section(self, to_section: int, action: str, timestamp_us: int) -> list:
        events = []
        frm = self.state.current_section
        if to_section != frm or action in ("RESAMPLE", "LOAD"):
            if to_section != frm or action == "LOAD":
                events.append(SectionChange(from_section=frm, to_section=to_section,
                                            action=action, timestamp_us=timestamp_us))
            replace_section(self.state, to_section, timestamp_us)
        events.extend(self._score_commands(timestamp_us))
        return events

    def _react_to_trigger(self, timestamp_us: int) -> list:
        """Apply the current section's trigger policy; HOLD emits nothing."""
        section = self.score.sections[self.state.current_section]
        action = section.on_trigger
        if action is TriggerAction.HOLD:
            return []
        if action is TriggerAction.RESAMPLE:
            return self._enter_section(self.state.current_section, "RESAMPLE", timestamp_us)
        nxt = self.state.current_section + 1
        if nxt >= len(self.score.sections):
            nxt = 0 if self.score.wrap else len(self.score.sections) - 1
        if nxt == self.state.current_section:
            # clamped at the last section: stay, but generate afresh
            replace_section(self.state, nxt, timestamp_us)
            return self._score_commands(timestamp_us)
        return self._enter_section(nxt, "ADVANCE", timestamp_us)

    def _check_duration(self, timestamp_us: int) -> list:
        section = self.score.sections[self.state.current_section]
        if section.duration_limit is None:
            return []
        if timestamp_us - self.state.section_entered_us < section.duration_limit * 1e6:
            return []
        nxt = self.state.current_section + 1
        if nxt >= len(self.score.sections):
            if not self.score.wrap:
                # nowhere to go; restart the clock so this does not refire every tick
                self.state.section_entered_us = timestamp_us
                return []
            nxt = 0
        return self._enter_section(nxt, "TIMED", timestamp_us)

    def _on_saliency(self, sample: SaliencySample | None, trig: TriggerEvent | None,
                     timestamp_us: int) -> list:
        events = []
        if sample is not None:
            events.append(sample)
        if trig is not None:
            self.trigger_count += 1
            events.append(trig)
            events.extend(self._react_to_trigger(timestamp_us))
        return events

    # -- the three input entry points --------------------------------------

    def start(self, timestamp_us: int = 0) -> list:
        """Emit the initial parameter set from section 0."""
        self.state.section_entered_us = timestamp_us
        return self._score_commands(timestamp_us)

    def tick(self, motion: MotionSample | None, env: float, timestamp_us: int) -> list:
        """Process one frame of input: motion sample plus envelope snapshot."""
        events = []
        events.extend(self._check_duration(timestamp_us))
        self.last_env = float(env)
        if motion is not None:
            self.last_qom = motion.qom
            sample, trig = self.tracker.feed(motion.qom, SoaSource.QOM_VARIANCE, timestamp_us)
            events.extend(self._on_saliency(sample, trig, timestamp_us))
        events.extend(apply_routes(motion, self.tracker.current, env, self.mapping,
                                   self.score.s_ref, timestamp_us))
        for e in events:
            if isinstance(e, ParameterCommand):
                self._shadow[e.target] = e.value
        return events

    def apply_control(self, kind: str, payload: dict, timestamp_us: int) -> tuple[list, list]:
        """Apply one control command at a tick boundary.

        Returns (derived events, audio operations). Raises ConfigError or
        InvalidInput on anything malformed; nothing changes in that case.
        """
        handler = getattr(self, f"_ctl_{kind.lower()}", None)
        if handler is None:
            raise InvalidInput(f"unsupported control kind {kind!r}")
        return handler(payload, timestamp_us)

    # -- control handlers ---------------------------------------------------

    def _ctl_set_param(self, payload: dict, timestamp_us: int) -> tuple[list, list]:
        target = str(payload["target"])
        lo, hi = param_range(self.cfg.chain, target)
        value = min(max(float(payload["value"]), lo), hi)
        ramp_ms = float(payload.get("ramp_ms", 0.0))
        if ramp_ms < 0:
            raise InvalidInput(f"ramp_ms must be >= 0: {ramp_ms}")
        delta = abs(value - self._shadow[target]) / (hi - lo) if hi > lo else 0.0
        self._shadow[target] = value
        cmd = ParameterCommand(target=target, value=value, ramp_ms=ramp_ms,
                               origin=CommandOrigin.CONTROL_PLANE, timestamp_us=timestamp_us)
        sample, trig = self.tracker.feed(delta, SoaSource.PARAM_CHANGE_VARIANCE, timestamp_us)
        events = self._on_saliency(sample, trig, timestamp_us)
        return events, [cmd]

    def _ctl_set_active(self, payload: dict, timestamp_us: int) -> tuple[list, list]:
        unit_id = str(payload["unit_id"])
        if unit_id not in {u.id for u in self.cfg.chain.units}:
            raise InvalidInput(f"no unit {unit_id!r} in chain")
        op = ActivationEvent(unit_id=unit_id, active=bool(payload["active"]),
                             timestamp_us=timestamp_us)
        return [], [op]

    def _ctl_set_threshold(self, payload: dict, timestamp_us: int) -> tuple[list, list]:
        cur = self.tracker.trigger.cfg
        theta_hi = float(payload.get("theta_hi", cur.theta_hi))
        theta_lo = float(payload.get("theta_lo", min(cur.theta_lo, theta_hi)))
        cfg = replace(cur, theta_hi=theta_hi, theta_lo=theta_lo)  # validates
        self.tracker.trigger.set_config(cfg)
        return [], []

    def _ctl_set_trigger_config(self, payload: dict, timestamp_us: int) -> tuple[list, list]:
        cur = self.tracker.trigger.cfg
        cfg = TriggerConfig(
            theta_hi=float(payload.get("theta_hi", cur.theta_hi)),
            theta_lo=float(payload.get("theta_lo", cur.theta_lo)),
            refractory=int(payload.get("refractory", cur.refractory)),
            adaptive=bool(payload.get("adaptive", cur.adaptive)),
            k_adapt=float(payload.get("k_adapt", cur.k_adapt)),
            long_window=int(payload.get("long_window", cur.long_window)),
        )
        self.tracker.trigger.set_config(cfg)
        events: list = []
        if "soa_source" in payload:
            source = SoaSource(payload["soa_source"])
            self.tracker.select_source(source)
        return events, []

    def _ctl_load_score(self, payload: dict, timestamp_us: int) -> tuple[list, list]:
        import json

        score = parse_score(json.dumps(payload["document"]), chain=self.cfg.chain)
        self.score = score
        seed = score.seed if self.cfg.seed is None else self.cfg.seed
        self.state = ScoreState(current_section=0, rng=make_rng(seed))
        events = self._enter_section(0, "LOAD", timestamp_us)
        return events, []

    def _ctl_load_mapping(self, payload: dict, timestamp_us: int) -> tuple[list, list]:
        import json

        cfg = parse_mapping(json.dumps(payload["document"]), chain=self.cfg.chain)
        self.mapping = cfg
        return [], []
