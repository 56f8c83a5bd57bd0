"""Continuous control routing: motion, saliency, and input envelope scaled
onto DSP parameter targets through simple curves.

Mapping document (UTF-8 JSON):

    {"routes": [{"source": "QOM", "target": "delay.feedback",
                 "curve": "LINEAR", "out_lo": 0.0, "out_hi": 0.9,
                 "smoothing_ms": 80, "enabled": true},
                {"source": "SOA", "target": "lowpass.cutoff_hz",
                 "curve": "EXPONENT", "p": 2.0, "out_lo": 200, "out_hi": 8000,
                 "smoothing_ms": 120, "enabled": true}]}

Saliency is normalized before scaling as clamp(S / s_ref, 0, 1), reusing the
score's reference scale so one calibration constant governs both uses.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass

from .audio import CommandOrigin, ParameterCommand, ProcessingChain, resolve_target
from .errors import ConfigError, InvalidInput
from .motion import MotionSample
from .saliency import SaliencySample

log = logging.getLogger(__name__)


class RouteSource(enum.Enum):
    QOM = "QOM"
    SOA = "SOA"
    AUDIO_ENVELOPE = "AUDIO_ENVELOPE"


class CurveKind(enum.Enum):
    LINEAR = "LINEAR"
    EXPONENT = "EXPONENT"
    INVERT = "INVERT"


@dataclass(frozen=True)
class Route:
    source: RouteSource
    target: str
    curve: CurveKind = CurveKind.LINEAR
    p: float = 1.0
    out_lo: float = 0.0
    out_hi: float = 1.0
    smoothing_ms: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        parts = self.target.split(".")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise ConfigError(f"route target must be 'unit.param': {self.target!r}")
        if self.out_lo > self.out_hi:
            raise ConfigError(f"route to {self.target!r}: out_lo {self.out_lo} > out_hi {self.out_hi}")
        if self.curve is CurveKind.EXPONENT and self.p <= 0:
            raise ConfigError(f"route to {self.target!r}: exponent p must be > 0, got {self.p}")
        if self.smoothing_ms < 0:
            raise ConfigError(f"route to {self.target!r}: smoothing_ms must be >= 0")


@dataclass(frozen=True)
class MappingConfig:
    routes: tuple[Route, ...] = ()

    def __post_init__(self):
        seen = set()
        for r in self.routes:
            if not r.enabled:
                continue
            key = (r.source, r.target)
            if key in seen:
                raise ConfigError(
                    f"duplicate enabled route {r.source.value} -> {r.target!r}"
                )
            seen.add(key)
        object.__setattr__(self, "routes", tuple(self.routes))


def scale(x: float, curve: CurveKind, out_lo: float, out_hi: float, p: float = 1.0) -> float:
    """Map a normalized x in [0, 1] into [out_lo, out_hi] through the curve."""
    if not (0.0 <= x <= 1.0):
        log.warning("scale input %s outside [0, 1]; clamped", x)
        x = min(max(x, 0.0), 1.0)
    span = out_hi - out_lo
    if curve is CurveKind.LINEAR:
        return out_lo + x * span
    if curve is CurveKind.EXPONENT:
        return out_lo + (x ** p) * span
    return out_lo + (1.0 - x) * span


def apply_routes(qom: MotionSample | None, soa: SaliencySample | None,
                 env: float | None, cfg: MappingConfig, s_ref: float,
                 timestamp_us: int = 0) -> list[ParameterCommand]:
    """One ParameterCommand per enabled route, in route list order.

    Routes whose source value is unavailable this tick (no motion sample yet,
    say) are skipped. Pure: identical inputs give identical command lists.
    """
    commands = []
    for route in cfg.routes:
        if not route.enabled:
            continue
        if route.source is RouteSource.QOM:
            if qom is None:
                continue
            x = qom.qom
        elif route.source is RouteSource.SOA:
            if soa is None:
                continue
            x = min(max(soa.s / s_ref, 0.0), 1.0)
        else:
            if env is None:
                continue
            x = min(max(float(env), 0.0), 1.0)
        commands.append(ParameterCommand(
            target=route.target,
            value=scale(x, route.curve, route.out_lo, route.out_hi, route.p),
            ramp_ms=route.smoothing_ms,
            origin=CommandOrigin.MAPPING,
            timestamp_us=timestamp_us,
        ))
    return commands


def validate_mapping(cfg: MappingConfig, chain: ProcessingChain) -> list[str]:
    """Full list of problems (empty when valid): unresolved targets and
    duplicate enabled (source, target) pairs."""
    errors = []
    seen = set()
    for i, route in enumerate(cfg.routes):
        try:
            resolve_target(chain, route.target)
        except InvalidInput as exc:
            errors.append(f"routes[{i}]: {exc}")
        if route.enabled:
            key = (route.source, route.target)
            if key in seen:
                errors.append(
                    f"routes[{i}]: duplicate enabled route {route.source.value} -> {route.target!r}"
                )
            seen.add(key)
    return errors


def parse_mapping(text: str, chain: ProcessingChain | None = None) -> MappingConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"mapping is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("mapping document must be a JSON object")
    routes = []
    errors = []
    for i, raw in enumerate(doc.get("routes", [])):
        try:
            routes.append(Route(
                source=RouteSource(raw.get("source")),
                target=str(raw.get("target", "")),
                curve=CurveKind(raw.get("curve", "LINEAR")),
                p=float(raw.get("p", 1.0)),
                out_lo=float(raw.get("out_lo", 0.0)),
                out_hi=float(raw.get("out_hi", 1.0)),
                smoothing_ms=float(raw.get("smoothing_ms", 0.0)),
                enabled=bool(raw.get("enabled", True)),
            ))
        except (ConfigError, ValueError, TypeError) as exc:
            errors.append(f"routes[{i}]: {exc}")
    if errors:
        raise ConfigError(errors)
    cfg = MappingConfig(routes=tuple(routes))
    if chain is not None:
        problems = validate_mapping(cfg, chain)
        if problems:
            raise ConfigError(problems)
    return cfg


def serialize_mapping(cfg: MappingConfig) -> str:
    doc = {"routes": [
        {
            "source": r.source.value,
            "target": r.target,
            "curve": r.curve.value,
            **({"p": r.p} if r.curve is CurveKind.EXPONENT else {}),
            "out_lo": r.out_lo,
            "out_hi": r.out_hi,
            "smoothing_ms": r.smoothing_ms,
            "enabled": r.enabled,
        }
        for r in cfg.routes
    ]}
    return json.dumps(doc, indent=2, sort_keys=True)
