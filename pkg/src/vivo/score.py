"""Stochastic score: ordered sections of probability distributions over
normalized processing parameters, sampled under a saliency constraint.

The saliency value S shrinks or preserves each distribution's spread through
g(S) = clamp(S / s_ref, 0, 1): quiet scenes pull draws toward distribution
centers, salient action unlocks the full range. All values at this layer are
normalized to [0, 1]; unit-specific ranges are applied downstream.

Document format (UTF-8 JSON):

    {"seed": 7, "s_ref": 0.02, "wrap": false,
     "sections": [{"on_trigger": "ADVANCE", "duration_limit": 30.0,
                   "distributions": [{"kind": "UNIFORM", "params": {"lo": 0.2, "hi": 0.8},
                                      "target": "delay.mix",
                                      "spread_policy": "SHRINK_WITH_LOW_SOA"}]}]}
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, InvalidInput, UnresolvedTarget
from .saliency import SaliencySample


class DistributionKind(enum.Enum):
    UNIFORM = "UNIFORM"
    GAUSSIAN = "GAUSSIAN"
    CHOICE = "CHOICE"


class SpreadPolicy(enum.Enum):
    FIXED = "FIXED"
    SHRINK_WITH_LOW_SOA = "SHRINK_WITH_LOW_SOA"


class TriggerAction(enum.Enum):
    ADVANCE = "ADVANCE"
    RESAMPLE = "RESAMPLE"
    HOLD = "HOLD"


def parse_target(target: str) -> tuple[str, str]:
    """Split a parameter address 'unit.param' into its two parts."""
    parts = target.split(".")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise ConfigError(f"parameter address must be 'unit.param': {target!r}")
    return parts[0], parts[1]


@dataclass(frozen=True)
class ParamDistribution:
    kind: DistributionKind
    params: dict
    target: str
    spread_policy: SpreadPolicy = SpreadPolicy.FIXED

    def __post_init__(self):
        parse_target(self.target)
        p = self.params
        where = f"distribution for {self.target!r}"
        if self.kind is DistributionKind.UNIFORM:
            lo, hi = _need(p, where, "lo", "hi")
            if not (0.0 <= lo <= hi <= 1.0):
                raise ConfigError(f"{where}: need 0 <= lo <= hi <= 1, got lo={lo} hi={hi}")
        elif self.kind is DistributionKind.GAUSSIAN:
            mu, sigma = _need(p, where, "mu", "sigma_base")
            if not (0.0 <= mu <= 1.0):
                raise ConfigError(f"{where}: mu out of [0, 1]: {mu}")
            if sigma < 0:
                raise ConfigError(f"{where}: sigma_base must be >= 0: {sigma}")
        elif self.kind is DistributionKind.CHOICE:
            values = p.get("values")
            if not values:
                raise ConfigError(f"{where}: CHOICE needs a non-empty 'values' list")
            if any(not (0.0 <= float(v) <= 1.0) for v in values):
                raise ConfigError(f"{where}: CHOICE values must lie in [0, 1]")
            weights = p.get("weights", [1.0] * len(values))
            if len(weights) != len(values):
                raise ConfigError(f"{where}: weights length {len(weights)} != values length {len(values)}")
            if any(w < 0 for w in weights) or sum(weights) <= 0:
                raise ConfigError(f"{where}: weights must be >= 0 with positive sum")
        else:  # pragma: no cover - enum is closed
            raise ConfigError(f"{where}: unknown kind {self.kind}")


def _need(params: dict, where: str, *names: str) -> list[float]:
    out = []
    for name in names:
        if name not in params:
            raise ConfigError(f"{where}: missing parameter {name!r}")
        out.append(float(params[name]))
    return out


@dataclass(frozen=True)
class Section:
    id: int
    distributions: tuple[ParamDistribution, ...]
    on_trigger: TriggerAction = TriggerAction.ADVANCE
    duration_limit: float | None = None

    def __post_init__(self):
        if not self.distributions:
            raise ConfigError(f"section {self.id}: distributions must be non-empty")
        if self.duration_limit is not None and self.duration_limit <= 0:
            raise ConfigError(f"section {self.id}: duration_limit must be positive")
        object.__setattr__(self, "distributions", tuple(self.distributions))


@dataclass(frozen=True)
class Score:
    sections: tuple[Section, ...]
    seed: int
    s_ref: float
    wrap: bool = False

    def __post_init__(self):
        if not self.sections:
            raise ConfigError("score needs at least one section")
        if self.s_ref <= 0:
            raise ConfigError(f"s_ref must be positive: {self.s_ref}")
        if not (0 <= self.seed < 2 ** 64):
            raise ConfigError(f"seed must be a 64-bit unsigned value: {self.seed}")
        for i, sec in enumerate(self.sections):
            if sec.id != i:
                raise ConfigError(f"section ids must be contiguous from 0; index {i} has id {sec.id}")
        object.__setattr__(self, "sections", tuple(self.sections))

    def targets(self) -> list[str]:
        seen: dict[str, None] = {}
        for sec in self.sections:
            for dist in sec.distributions:
                seen.setdefault(dist.target, None)
        return list(seen)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator so identical seeds give identical draw streams."""
    return np.random.Generator(np.random.Philox(key=seed))


@dataclass
class ScoreState:
    current_section: int = 0
    rng: np.random.Generator = field(default_factory=lambda: make_rng(0))
    last_parameter_set: dict[str, float] = field(default_factory=dict)
    section_entered_us: int = 0

    @classmethod
    def initial(cls, score: Score, timestamp_us: int = 0) -> "ScoreState":
        return cls(current_section=0, rng=make_rng(score.seed),
                   last_parameter_set={}, section_entered_us=timestamp_us)


def spread_gain(s: float, s_ref: float, policy: SpreadPolicy) -> float:
    """g(S): fraction of the base spread that remains at saliency S."""
    if policy is SpreadPolicy.FIXED:
        return 1.0
    return min(max(s / s_ref, 0.0), 1.0)


def sample_section(section: Section, s: SaliencySample, score: Score,
                   state: ScoreState) -> dict[str, float]:
    """Draw one normalized value per distribution, in list order.

    Advances state.rng; records the result in state.last_parameter_set.
    """
    out: dict[str, float] = {}
    rng = state.rng
    for dist in section.distributions:
        g = spread_gain(s.s, score.s_ref, dist.spread_policy)
        p = dist.params
        if dist.kind is DistributionKind.UNIFORM:
            lo, hi = float(p["lo"]), float(p["hi"])
            mid = (lo + hi) / 2.0
            half = g * (hi - lo) / 2.0
            # Always draw, even for a zero-width interval, so the generator
            # consumes the same amount of state regardless of S.
            value = float(rng.uniform(mid - half, mid + half))
        elif dist.kind is DistributionKind.GAUSSIAN:
            value = float(rng.normal(float(p["mu"]), g * float(p["sigma_base"])))
            value = min(max(value, 0.0), 1.0)
        else:
            values = [float(v) for v in p["values"]]
            weights = np.asarray(p.get("weights", [1.0] * len(values)), dtype=np.float64)
            idx = int(rng.choice(len(values), p=weights / weights.sum()))
            value = values[idx]
        out[dist.target] = value
    state.last_parameter_set = dict(out)
    return out


def advance(state: ScoreState, score: Score, timestamp_us: int = 0) -> tuple[ScoreState, TriggerAction]:
    """React to a trigger per the current section's policy.

    Returns the (possibly) updated state and the action taken; RESAMPLE asks
    the caller to draw a fresh parameter set from the unchanged section.
    """
    section = score.sections[state.current_section]
    action = section.on_trigger
    if action is TriggerAction.ADVANCE:
        nxt = state.current_section + 1
        if nxt >= len(score.sections):
            nxt = 0 if score.wrap else len(score.sections) - 1
        if nxt != state.current_section:
            state = replace_section(state, nxt, timestamp_us)
    return state, action


def replace_section(state: ScoreState, section_index: int, timestamp_us: int) -> ScoreState:
    state.current_section = section_index
    state.section_entered_us = timestamp_us
    return state


def parse_score(text: str, chain=None) -> Score:
    """Parse and validate a score document.

    When a ProcessingChain is supplied, every distribution target must
    resolve against it; unknown targets raise UnresolvedTarget listing each
    offender.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"score is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("score document must be a JSON object")

    errors: list[str] = []
    sections: list[Section] = []
    raw_sections = doc.get("sections")
    if not isinstance(raw_sections, list) or not raw_sections:
        raise ConfigError("score needs a non-empty 'sections' list")
    for i, raw in enumerate(raw_sections):
        dists = []
        for j, rd in enumerate(raw.get("distributions", [])):
            try:
                dists.append(ParamDistribution(
                    kind=DistributionKind(rd.get("kind")),
                    params=dict(rd.get("params", {})),
                    target=str(rd.get("target", "")),
                    spread_policy=SpreadPolicy(rd.get("spread_policy", "FIXED")),
                ))
            except (ConfigError, ValueError) as exc:
                errors.append(f"sections[{i}].distributions[{j}]: {exc}")
        if errors:
            continue
        try:
            sections.append(Section(
                id=int(raw.get("id", i)),
                distributions=tuple(dists),
                on_trigger=TriggerAction(raw.get("on_trigger", "ADVANCE")),
                duration_limit=raw.get("duration_limit"),
            ))
        except (ConfigError, ValueError) as exc:
            errors.append(f"sections[{i}]: {exc}")
    if errors:
        raise ConfigError(errors)

    try:
        score = Score(
            sections=tuple(sections),
            seed=int(doc.get("seed", 0)),
            s_ref=float(doc.get("s_ref", 1.0)),
            wrap=bool(doc.get("wrap", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"score header invalid: {exc}") from exc

    if chain is not None:
        validate_score_targets(score, chain)
    return score


def validate_score_targets(score: Score, chain) -> None:
    """Raise UnresolvedTarget naming every target the chain cannot resolve."""
    from .audio import resolve_target  # local import to avoid a cycle

    missing = []
    for target in score.targets():
        try:
            resolve_target(chain, target)
        except InvalidInput:
            missing.append(f"unresolved target {target!r}")
    if missing:
        raise UnresolvedTarget(missing)


def serialize_score(score: Score) -> str:
    doc = {
        "seed": score.seed,
        "s_ref": score.s_ref,
        "wrap": score.wrap,
        "sections": [
            {
                "on_trigger": sec.on_trigger.value,
                **({"duration_limit": sec.duration_limit} if sec.duration_limit is not None else {}),
                "distributions": [
                    {
                        "kind": d.kind.value,
                        "params": d.params,
                        "target": d.target,
                        "spread_policy": d.spread_policy.value,
                    }
                    for d in sec.distributions
                ],
            }
            for sec in score.sections
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
