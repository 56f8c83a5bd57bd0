"""Mono audio processing path: an ordered chain of built-in DSP units under
smoothed parameter automation, with dry/wet mixing and offline rendering.

Units and their difference equations:

    GAIN     y[n] = g * x[n]
    DELAY    y[n] = (1 - mix) * x[n] + mix * w[n],  w[n] = x[n-D] + fb * w[n-D]
    RINGMOD  y[n] = (1 - mix) * x[n] + mix * x[n] * sin(phase_n),
             phase advancing by 2*pi*f/fs per sample, persistent across blocks
    LOWPASS  RBJ low-pass biquad from (cutoff_hz, q), transposed direct-form II

Parameters ramp linearly with per-sample interpolation; ramp_ms = 0 applies at
the next block start. Activation changes crossfade over 10 ms. Gains, mixes,
delay feedback, and ring-mod frequency are consumed per sample; delay time and
low-pass coefficients update once per block (end-of-ramp value for the block).
Internal math runs in float64, buffers are float32 at the interface, and
feedback state below 1e-30 is flushed to zero.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io.wavfile
import scipy.signal

from .errors import ConfigError, InvalidInput

log = logging.getLogger(__name__)

SAMPLE_RATES = (44100, 48000)
XFADE_MS = 10.0  # activation crossfade
DENORMAL_FLOOR = 1e-30
MASTER_UNIT_ID = "master"


class UnitKind(enum.Enum):
    GAIN = "GAIN"
    DELAY = "DELAY"
    RINGMOD = "RINGMOD"
    LOWPASS = "LOWPASS"


class CommandOrigin(enum.Enum):
    MAPPING = "MAPPING"
    SCORE = "SCORE"
    CONTROL_PLANE = "CONTROL_PLANE"


def param_ranges(kind: UnitKind, sample_rate: int) -> dict[str, tuple[float, float]]:
    """Declared (lo, hi) range per parameter of a unit kind."""
    fs = sample_rate
    if kind is UnitKind.GAIN:
        return {"level": (0.0, 2.0)}
    if kind is UnitKind.DELAY:
        return {"time_samples": (1.0, float(fs)), "feedback": (0.0, 0.95), "mix": (0.0, 1.0)}
    if kind is UnitKind.RINGMOD:
        return {"freq_hz": (0.0, fs / 2.0), "mix": (0.0, 1.0)}
    if kind is UnitKind.LOWPASS:
        # declared open interval (0, fs/2); practical clamp bounds below
        return {"cutoff_hz": (1.0, fs / 2.0 - 1.0), "q": (0.1, 10.0)}
    raise InvalidInput(f"unknown unit kind {kind}")


MASTER_RANGES = {"dry_gain": (0.0, 1.0), "wet_gain": (0.0, 1.0)}


@dataclass(frozen=True)
class UnitInstance:
    id: str
    kind: UnitKind
    params: dict
    active: bool = True

    def __post_init__(self):
        if not self.id or "." in self.id:
            raise ConfigError(f"unit id must be non-empty without dots: {self.id!r}")
        if self.id == MASTER_UNIT_ID:
            raise ConfigError(f"unit id {MASTER_UNIT_ID!r} is reserved")
        try:
            object.__setattr__(self, "params",
                               {str(k): float(v) for k, v in self.params.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"unit {self.id!r}: non-numeric parameter value ({exc})") from exc


@dataclass(frozen=True)
class ProcessingChain:
    sample_rate: int
    block_size: int
    units: tuple[UnitInstance, ...]
    dry_gain: float = 1.0
    wet_gain: float = 1.0

    def __post_init__(self):
        errors = []
        if self.sample_rate not in SAMPLE_RATES:
            errors.append(f"sample_rate must be one of {SAMPLE_RATES}: {self.sample_rate}")
        bs = self.block_size
        if bs < 64 or bs > 2048 or bs & (bs - 1) != 0:
            errors.append(f"block_size must be a power of two in [64, 2048]: {bs}")
        if not (0.0 <= self.dry_gain <= 1.0) or not (0.0 <= self.wet_gain <= 1.0):
            errors.append(f"dry/wet gains must lie in [0, 1]: {self.dry_gain}/{self.wet_gain}")
        ids = [u.id for u in self.units]
        if len(set(ids)) != len(ids):
            errors.append(f"unit ids must be unique: {ids}")
        # Param ranges need a sample rate; fall back to 48 kHz so an invalid
        # rate doesn't suppress the rest of the report.
        rate = self.sample_rate if self.sample_rate in SAMPLE_RATES else 48000
        for u in self.units:
            ranges = param_ranges(u.kind, rate)
            missing = sorted(set(ranges) - set(u.params))
            extra = sorted(set(u.params) - set(ranges))
            if missing:
                errors.append(f"unit {u.id!r}: missing params {missing}")
            if extra:
                errors.append(f"unit {u.id!r}: unknown params {extra}")
            for name, (lo, hi) in ranges.items():
                if name in u.params and not (lo <= float(u.params[name]) <= hi):
                    errors.append(
                        f"unit {u.id!r}: {name}={u.params[name]} outside [{lo}, {hi}]"
                    )
        if errors:
            raise ConfigError(errors)
        object.__setattr__(self, "units", tuple(self.units))


@dataclass(frozen=True)
class ParameterCommand:
    """A timed request to move one DSP parameter to a value."""

    target: str  # "unit.param"
    value: float
    ramp_ms: float = 0.0
    origin: CommandOrigin = CommandOrigin.CONTROL_PLANE
    timestamp_us: int = 0

    def __post_init__(self):
        if self.ramp_ms < 0:
            raise InvalidInput(f"ramp_ms must be >= 0: {self.ramp_ms}")
        if not math.isfinite(self.value):
            raise InvalidInput(f"command value must be finite: {self.value}")


@dataclass(frozen=True)
class ActivationEvent:
    """A timed request to activate or bypass a unit."""

    unit_id: str
    active: bool
    timestamp_us: int = 0


@dataclass
class AudioBuffer:
    samples: np.ndarray  # float32, length = block_size
    block_index: int = 0
    channels: int = 1


def resolve_target(chain: ProcessingChain, target: str) -> tuple[str, str]:
    """Validate 'unit.param' against the chain; returns (unit_id, param)."""
    parts = target.split(".")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise InvalidInput(f"parameter address must be 'unit.param': {target!r}")
    unit_id, param = parts
    if unit_id == MASTER_UNIT_ID:
        if param not in MASTER_RANGES:
            raise InvalidInput(f"unknown master parameter {param!r} in {target!r}")
        return unit_id, param
    for u in chain.units:
        if u.id == unit_id:
            if param not in param_ranges(u.kind, chain.sample_rate):
                raise InvalidInput(
                    f"unit {unit_id!r} has no parameter {param!r} (target {target!r})")
            return unit_id, param
    raise InvalidInput(f"no unit {unit_id!r} in chain for target {target!r}")


def param_range(chain: ProcessingChain, target: str) -> tuple[float, float]:
    unit_id, param = resolve_target(chain, target)
    if unit_id == MASTER_UNIT_ID:
        return MASTER_RANGES[param]
    unit = next(u for u in chain.units if u.id == unit_id)
    return param_ranges(unit.kind, chain.sample_rate)[param]


def denormalize(chain: ProcessingChain, target: str, x: float) -> float:
    """Map a normalized [0, 1] value into the target parameter's range."""
    lo, hi = param_range(chain, target)
    x = min(max(float(x), 0.0), 1.0)
    return lo + x * (hi - lo)


class ParamRamp:
    """Linear per-sample ramp toward a target value.

    After set(v, ramp_ms), the trajectory over the next `ramp_samples` samples
    is current + (i+1) * delta / ramp_samples; ramp_ms = 0 jumps immediately
    (commands are drained at block boundaries, so the jump lands at the next
    block start).
    """

    __slots__ = ("current", "target", "step", "remaining", "sample_rate")

    def __init__(self, initial: float, sample_rate: int):
        self.current = float(initial)
        self.target = float(initial)
        self.step = 0.0
        self.remaining = 0
        self.sample_rate = sample_rate

    @property
    def ramping(self) -> bool:
        return self.remaining > 0

    def set(self, value: float, ramp_ms: float) -> None:
        value = float(value)
        if ramp_ms <= 0:
            self.current = self.target = value
            self.remaining = 0
            self.step = 0.0
            return
        n = max(1, int(round(ramp_ms * self.sample_rate / 1000.0)))
        self.target = value
        self.step = (value - self.current) / n
        self.remaining = n

    def block_values(self, n: int):
        """Values for the next n samples; float when steady, ndarray when ramping."""
        if self.remaining == 0:
            return self.current
        m = min(self.remaining, n)
        out = np.full(n, self.target, dtype=np.float64)
        out[:m] = self.current + self.step * np.arange(1, m + 1)
        self.remaining -= m
        self.current = self.target if self.remaining == 0 else float(out[m - 1])
        return out


def _last(v) -> float:
    return float(v[-1]) if isinstance(v, np.ndarray) else float(v)


class _GainProc:
    def __init__(self, fs: int, block: int):
        pass

    def process(self, x: np.ndarray, p: dict) -> np.ndarray:
        return p["level"] * x


class _DelayProc:
    def __init__(self, fs: int, block: int):
        # ring stores s[n] = x[n] + fb*w[n]; w[n] is then s[n-D]
        self.cap = fs + block
        self.ring = np.zeros(self.cap, dtype=np.float64)
        self.pos = 0  # slot the next sample is written to

    def process(self, x: np.ndarray, p: dict) -> np.ndarray:
        n = len(x)
        d = max(1, int(round(_last(p["time_samples"]))))
        fb = p["feedback"]
        w = np.empty(n, dtype=np.float64)
        if d >= n:
            idx_r = (self.pos - d + np.arange(n)) % self.cap
            w[:] = self.ring[idx_r]
            s = x + fb * w
            idx_w = (self.pos + np.arange(n)) % self.cap
            self.ring[idx_w] = s
        elif d >= 16:
            i = 0
            while i < n:
                m = min(d, n - i)
                idx_r = (self.pos + i - d + np.arange(m)) % self.cap
                wc = self.ring[idx_r]
                fbc = fb[i:i + m] if isinstance(fb, np.ndarray) else fb
                sc = x[i:i + m] + fbc * wc
                idx_w = (self.pos + i + np.arange(m)) % self.cap
                self.ring[idx_w] = sc
                w[i:i + m] = wc
                i += m
        else:
            # per-sample fallback: lag too short for chunked vectorization
            ring, cap, pos = self.ring, self.cap, self.pos
            fb_arr = isinstance(fb, np.ndarray)
            for i in range(n):
                wi = ring[(pos + i - d) % cap]
                f = fb[i] if fb_arr else fb
                ring[(pos + i) % cap] = x[i] + f * wi
                w[i] = wi
        self.pos = (self.pos + n) % self.cap
        self.ring[np.abs(self.ring) < DENORMAL_FLOOR] = 0.0
        return (1.0 - p["mix"]) * x + p["mix"] * w


class _RingmodProc:
    def __init__(self, fs: int, block: int):
        self.fs = fs
        self.phase = 0.0

    def process(self, x: np.ndarray, p: dict) -> np.ndarray:
        n = len(x)
        freq = p["freq_hz"]
        inc = (2.0 * math.pi / self.fs) * (freq if isinstance(freq, np.ndarray) else np.full(n, freq))
        # phase at sample i is the phase *before* adding its own increment
        phases = self.phase + np.concatenate(([0.0], np.cumsum(inc[:-1])))
        self.phase = (self.phase + float(np.sum(inc))) % (2.0 * math.pi)
        mod = x * np.sin(phases)
        return (1.0 - p["mix"]) * x + p["mix"] * mod


def rbj_lowpass(cutoff_hz: float, q: float, fs: int) -> tuple[np.ndarray, np.ndarray]:
    """RBJ cookbook low-pass biquad coefficients (b, a), a[0] normalized to 1."""
    w0 = 2.0 * math.pi * cutoff_hz / fs
    cw, sw = math.cos(w0), math.sin(w0)
    alpha = sw / (2.0 * q)
    b = np.array([(1 - cw) / 2.0, 1 - cw, (1 - cw) / 2.0])
    a = np.array([1 + alpha, -2 * cw, 1 - alpha])
    b, a = b / a[0], a / a[0]
    # sum(b) == sum(a) algebraically; renormalize so DC gain is exactly 1
    # in floating point too (cancellation in 1-cos(w0) otherwise leaves
    # ~1e-12 residue at low cutoffs)
    b *= a.sum() / b.sum()
    return b, a


class _LowpassProc:
    def __init__(self, fs: int, block: int):
        self.fs = fs
        self.zi = np.zeros(2, dtype=np.float64)

    def process(self, x: np.ndarray, p: dict) -> np.ndarray:
        b, a = rbj_lowpass(_last(p["cutoff_hz"]), _last(p["q"]), self.fs)
        y, self.zi = scipy.signal.lfilter(b, a, x, zi=self.zi)
        self.zi[np.abs(self.zi) < DENORMAL_FLOOR] = 0.0
        return y


_PROCS = {
    UnitKind.GAIN: _GainProc,
    UnitKind.DELAY: _DelayProc,
    UnitKind.RINGMOD: _RingmodProc,
    UnitKind.LOWPASS: _LowpassProc,
}


class _UnitRuntime:
    def __init__(self, cfg: UnitInstance, fs: int, block: int):
        self.cfg = cfg
        self.proc = _PROCS[cfg.kind](fs, block)
        self.ramps = {name: ParamRamp(float(cfg.params[name]), fs)
                      for name in param_ranges(cfg.kind, fs)}
        self.activation = ParamRamp(1.0 if cfg.active else 0.0, fs)

    def process(self, x: np.ndarray) -> np.ndarray:
        n = len(x)
        a = self.activation.block_values(n)
        params = {name: ramp.block_values(n) for name, ramp in self.ramps.items()}
        if isinstance(a, float) and a == 0.0:
            return x  # fully bypassed: identity, DSP state frozen
        wet = self.proc.process(x, params)
        if isinstance(a, float) and a == 1.0:
            return wet
        return a * wet + (1.0 - a) * x


def envelope_follow(samples: np.ndarray) -> float:
    """Root-mean-square of the block, clamped to [0, 1]."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return min(1.0, float(np.sqrt(np.mean(x * x))))


class ChainProcessor:
    """Owns all DSP state for one chain; single-owner, never blocks.

    Parameter and activation changes come in as commands applied at block
    boundaries (the engine drains its command queue there); process_block is
    the only method that advances time.
    """

    def __init__(self, chain: ProcessingChain):
        self.chain = chain
        fs, bs = chain.sample_rate, chain.block_size
        self._units = [_UnitRuntime(u, fs, bs) for u in chain.units]
        self._by_id = {u.cfg.id: u for u in self._units}
        self._master = {
            "dry_gain": ParamRamp(chain.dry_gain, fs),
            "wet_gain": ParamRamp(chain.wet_gain, fs),
        }
        self.block_index = 0
        self.last_envelope = 0.0

    def set_parameter(self, cmd: ParameterCommand) -> float:
        """Apply a command; returns the (possibly clamped) accepted value."""
        unit_id, param = resolve_target(self.chain, cmd.target)
        lo, hi = param_range(self.chain, cmd.target)
        value = min(max(float(cmd.value), lo), hi)
        if value != cmd.value:
            log.warning("clamped %s: %s -> %s (range [%s, %s])",
                        cmd.target, cmd.value, value, lo, hi)
        ramp = (self._master[param] if unit_id == MASTER_UNIT_ID
                else self._by_id[unit_id].ramps[param])
        ramp.set(value, cmd.ramp_ms)
        return value

    def set_active(self, unit_id: str, active: bool) -> None:
        """Crossfade a unit toward active/bypassed over 10 ms."""
        unit = self._by_id.get(unit_id)
        if unit is None:
            raise InvalidInput(f"no unit {unit_id!r} in chain")
        unit.activation.set(1.0 if active else 0.0, XFADE_MS)

    def parameter_value(self, target: str) -> float:
        unit_id, param = resolve_target(self.chain, target)
        ramp = (self._master[param] if unit_id == MASTER_UNIT_ID
                else self._by_id[unit_id].ramps[param])
        return ramp.current

    def process_block(self, buf: AudioBuffer) -> AudioBuffer:
        x = np.asarray(buf.samples, dtype=np.float64)
        if len(x) != self.chain.block_size:
            raise InvalidInput(
                f"buffer length {len(x)} != block_size {self.chain.block_size}"
            )
        sig = x
        for unit in self._units:
            sig = unit.process(sig)
        n = len(x)
        dry = self._master["dry_gain"].block_values(n)
        wet = self._master["wet_gain"].block_values(n)
        y = dry * x + wet * sig
        self.last_envelope = envelope_follow(x)
        out = AudioBuffer(samples=y.astype(np.float32), block_index=self.block_index)
        self.block_index += 1
        return out


def parse_chain(text: str) -> ProcessingChain:
    """Parse a chain document: UTF-8 JSON with sample_rate, block_size,
    dry_gain, wet_gain, units:[{id, kind, params, active}]."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"chain is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("chain document must be a JSON object")
    units = []
    errors = []
    for i, raw in enumerate(doc.get("units", [])):
        try:
            units.append(UnitInstance(
                id=str(raw.get("id", "")),
                kind=UnitKind(raw.get("kind")),
                params={k: float(v) for k, v in dict(raw.get("params", {})).items()},
                active=bool(raw.get("active", True)),
            ))
        except (ConfigError, ValueError, TypeError) as exc:
            errors.append(f"units[{i}]: {exc}")
    if errors:
        raise ConfigError(errors)
    try:
        return ProcessingChain(
            sample_rate=int(doc.get("sample_rate", 48000)),
            block_size=int(doc.get("block_size", 512)),
            units=tuple(units),
            dry_gain=float(doc.get("dry_gain", 1.0)),
            wet_gain=float(doc.get("wet_gain", 1.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"chain header invalid: {exc}") from exc


def serialize_chain(chain: ProcessingChain) -> str:
    doc = {
        "sample_rate": chain.sample_rate,
        "block_size": chain.block_size,
        "dry_gain": chain.dry_gain,
        "wet_gain": chain.wet_gain,
        "units": [
            {"id": u.id, "kind": u.kind.value, "params": u.params, "active": u.active}
            for u in chain.units
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def read_wav(path: str | Path) -> tuple[np.ndarray, int]:
    """Load a WAV file as mono float64 in [-1, 1]; returns (samples, rate).

    Accepts 16/24/32-bit PCM and float32/float64; multichannel input is
    averaged down to mono.
    """
    rate, data = scipy.io.wavfile.read(path)
    if data.ndim == 2:
        data = data.mean(axis=1)
    if data.dtype == np.int16:
        x = data.astype(np.float64) / 32768.0
    elif data.dtype == np.int32:
        x = data.astype(np.float64) / 2147483648.0
    elif data.dtype == np.uint8:
        x = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype in (np.float32, np.float64):
        x = data.astype(np.float64)
    else:
        raise InvalidInput(f"{path}: unsupported WAV sample format {data.dtype}")
    return x, int(rate)


def write_wav(path: str | Path, samples: np.ndarray, sample_rate: int) -> None:
    """Write mono float32 WAV."""
    scipy.io.wavfile.write(path, sample_rate, np.asarray(samples, dtype=np.float32))


def render_offline(chain: ProcessingChain, input_path: str | Path,
                   trace, output_path: str | Path) -> int:
    """Process a WAV file through the chain, applying a timed trace of
    ParameterCommand and ActivationEvent items at block boundaries.

    An event lands on the first block whose start time is >= its timestamp.
    Deterministic: identical inputs give byte-identical output files. Returns
    the number of blocks rendered.
    """
    x, rate = read_wav(input_path)
    if rate != chain.sample_rate:
        raise InvalidInput(
            f"{input_path}: sample rate {rate} != chain sample rate {chain.sample_rate}"
        )
    duration_us = len(x) / chain.sample_rate * 1e6
    events = sorted(trace, key=lambda e: e.timestamp_us)
    for e in events:  # validate everything before touching any state
        if e.timestamp_us > duration_us:
            raise InvalidInput(
                f"trace event at {e.timestamp_us}us beyond input duration {duration_us:.0f}us"
            )
        if isinstance(e, ParameterCommand):
            resolve_target(chain, e.target)
        elif isinstance(e, ActivationEvent):
            if e.unit_id not in {u.id for u in chain.units}:
                raise InvalidInput(f"trace references unknown unit {e.unit_id!r}")
        else:
            raise InvalidInput(f"unsupported trace event {type(e).__name__}")

    proc = ChainProcessor(chain)
    bs = chain.block_size
    n_blocks = (len(x) + bs - 1) // bs
    padded = np.zeros(n_blocks * bs, dtype=np.float64)
    padded[: len(x)] = x
    out = np.empty_like(padded, dtype=np.float32)
    ei = 0
    for k in range(n_blocks):
        t_us = k * bs / chain.sample_rate * 1e6
        while ei < len(events) and events[ei].timestamp_us <= t_us:
            e = events[ei]
            if isinstance(e, ParameterCommand):
                proc.set_parameter(e)
            else:
                proc.set_active(e.unit_id, e.active)
            ei += 1
        buf = proc.process_block(AudioBuffer(samples=padded[k * bs:(k + 1) * bs], block_index=k))
        out[k * bs:(k + 1) * bs] = buf.samples
    write_wav(output_path, out[: len(x)], chain.sample_rate)
    return n_blocks
