"""Saliency of action: rolling variance over a scalar stream, plus the
variance-threshold trigger that turns sustained activity into discrete events.

The saliency value S is the population variance of the last W samples of
either the motion stream or the stream of user-directed parameter changes
(one source at a time; switching clears the window).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import InvalidInput


class SoaSource(enum.Enum):
    QOM_VARIANCE = "QOM_VARIANCE"
    PARAM_CHANGE_VARIANCE = "PARAM_CHANGE_VARIANCE"


@dataclass(frozen=True)
class SaliencySample:
    s: float  # population variance, >= 0
    source: SoaSource
    timestamp_us: int = 0

    def __post_init__(self):
        if self.s < 0:
            raise InvalidInput(f"saliency must be >= 0: {self.s}")


class RollingWindow:
    """Fixed-capacity window with incrementally maintained population variance.

    Uses a Welford-style update extended with an eviction correction so pushes
    are O(1). A full two-pass recomputation runs every `capacity` pushes to
    stop floating-point drift from accumulating across long streams; the
    running statistics therefore track an exact two-pass recomputation to
    within ~1e-12 relative for well-scaled data.
    """

    __slots__ = ("capacity", "_buf", "_head", "_count", "_mean", "_m2", "_pushes")

    def __init__(self, capacity: int):
        if capacity < 2 or int(capacity) != capacity:
            raise InvalidInput(f"window capacity must be an integer >= 2: {capacity}")
        self.capacity = int(capacity)
        self._buf = [0.0] * self.capacity
        self._head = 0  # index of the slot the next push writes
        self._count = 0
        self._mean = 0.0
        self._m2 = 0.0  # sum of squared deviations from the mean
        self._pushes = 0

    def __len__(self) -> int:
        return self._count

    @property
    def full(self) -> bool:
        return self._count == self.capacity

    @property
    def mean(self) -> float:
        return self._mean

    def contents(self) -> list[float]:
        """Current samples, oldest first."""
        if self._count < self.capacity:
            return self._buf[: self._count]
        return self._buf[self._head:] + self._buf[: self._head]

    def clear(self) -> None:
        self._head = 0
        self._count = 0
        self._mean = 0.0
        self._m2 = 0.0
        self._pushes = 0

    def _refresh(self) -> None:
        xs = self.contents()
        n = len(xs)
        if n == 0:
            self._mean = 0.0
            self._m2 = 0.0
            return
        mean = math.fsum(xs) / n
        self._mean = mean
        self._m2 = math.fsum((x - mean) ** 2 for x in xs)

    def push(self, x: float) -> float:
        """Insert x (evicting the oldest at capacity) and return the variance."""
        x = float(x)
        if not math.isfinite(x):
            raise InvalidInput(f"window input must be finite: {x}")
        if self._count < self.capacity:
            self._buf[self._head] = x
            self._head = (self._head + 1) % self.capacity
            self._count += 1
            delta = x - self._mean
            self._mean += delta / self._count
            self._m2 += delta * (x - self._mean)
        else:
            old = self._buf[self._head]
            self._buf[self._head] = x
            self._head = (self._head + 1) % self.capacity
            # Replace `old` with `x` at constant count n.
            n = self.capacity
            delta = x - old
            old_mean = self._mean
            old_dev2 = (old - old_mean) ** 2
            self._mean += delta / n
            self._m2 += delta * (x - self._mean + old - old_mean)
            # The O(1) update cancels catastrophically when the departing
            # point carried most of the spread; recompute exactly then.
            if old_dev2 > self._m2:
                self._refresh()
        self._pushes += 1
        if self._pushes % self.capacity == 0:
            self._refresh()
        return self.variance

    @property
    def variance(self) -> float:
        """Population variance of the current contents (0 for < 2 samples)."""
        if self._count < 1:
            return 0.0
        return max(0.0, self._m2 / self._count)


@dataclass(frozen=True)
class TriggerConfig:
    theta_hi: float
    theta_lo: float
    refractory: int = 0  # minimum sample-index gap between firings
    adaptive: bool = False
    k_adapt: float = 2.0
    long_window: int = 1024

    def __post_init__(self):
        if not (0.0 <= self.theta_lo <= self.theta_hi):
            raise InvalidInput(
                f"thresholds must satisfy 0 <= theta_lo <= theta_hi: lo={self.theta_lo} hi={self.theta_hi}"
            )
        if self.refractory < 0:
            raise InvalidInput(f"refractory must be >= 0: {self.refractory}")
        if self.adaptive and self.long_window <= 2:
            raise InvalidInput(f"adaptive mode needs long_window > 2: {self.long_window}")

    @property
    def lo_ratio(self) -> float:
        return self.theta_lo / self.theta_hi if self.theta_hi > 0 else 1.0


@dataclass(frozen=True)
class TriggerEvent:
    timestamp_us: int
    sample_index: int
    s_at_fire: float
    threshold_at_fire: float

    def __post_init__(self):
        if self.s_at_fire < self.threshold_at_fire:
            raise InvalidInput("trigger fired below threshold")


def adaptive_threshold(mu_long: float, sigma_long: float, cfg: TriggerConfig) -> float:
    """Effective high threshold: mu + k*sigma when adaptive, else the static one."""
    if not cfg.adaptive:
        return cfg.theta_hi
    return mu_long + cfg.k_adapt * sigma_long


class Trigger:
    """Armed/disarmed threshold detector over a saliency stream.

    Fires when armed, s >= effective theta_hi, and at least `refractory`
    samples have passed since the previous firing. Firing disarms; the
    detector re-arms once s falls to theta_lo or below. With adaptation on,
    the thresholds derive from the long-window statistics of s (static until
    that window fills); the low threshold keeps the configured lo/hi ratio.

    For each sample the effective threshold is computed from long-window
    contents *before* the sample itself is pushed, so a sample is never
    judged against statistics that include it.
    """

    def __init__(self, cfg: TriggerConfig):
        self.cfg = cfg
        self.armed = True
        self.sample_index = 0
        self.last_fire_index: int | None = None
        self._long = RollingWindow(cfg.long_window) if cfg.adaptive else None

    def set_config(self, cfg: TriggerConfig) -> None:
        """Swap thresholds/refractory in place; arm state and indices persist."""
        if cfg.adaptive and (self._long is None or self._long.capacity != cfg.long_window):
            self._long = RollingWindow(cfg.long_window)
        if not cfg.adaptive:
            self._long = None
        self.cfg = cfg

    def effective_thresholds(self) -> tuple[float, float]:
        cfg = self.cfg
        if self._long is None or not self._long.full:
            return cfg.theta_hi, cfg.theta_lo
        hi = adaptive_threshold(self._long.mean, math.sqrt(self._long.variance), cfg)
        return hi, hi * cfg.lo_ratio

    def evaluate(self, sample: SaliencySample) -> TriggerEvent | None:
        """Advance the state machine by one sample; return the event if fired."""
        hi, lo = self.effective_thresholds()
        if self._long is not None:
            self._long.push(sample.s)
        index = self.sample_index
        self.sample_index += 1

        event = None
        if self.armed and sample.s >= hi:
            gap_ok = (
                self.last_fire_index is None
                or index - self.last_fire_index >= self.cfg.refractory
            )
            if gap_ok:
                event = TriggerEvent(
                    timestamp_us=sample.timestamp_us,
                    sample_index=index,
                    s_at_fire=sample.s,
                    threshold_at_fire=hi,
                )
                self.armed = False
                self.last_fire_index = index
        if not self.armed and sample.s <= lo:
            self.armed = True
        return event


class SaliencyTracker:
    """Owns the rolling window, the active source, and the trigger.

    feed() pushes a value from the active source and runs the trigger; values
    from the inactive source are ignored by the variance but still visible to
    callers via `current`. Switching sources clears the window so variances
    never mix units.
    """

    def __init__(self, window: int, trigger_cfg: TriggerConfig,
                 source: SoaSource = SoaSource.QOM_VARIANCE):
        self.window = RollingWindow(window)
        self.trigger = Trigger(trigger_cfg)
        self.source = source
        self._last = SaliencySample(s=0.0, source=source)

    @property
    def current(self) -> SaliencySample:
        return self._last

    def select_source(self, source: SoaSource) -> None:
        if source == self.source:
            return
        self.source = source
        self.window.clear()
        self._last = SaliencySample(s=0.0, source=source)

    def feed(self, value: float, source: SoaSource, timestamp_us: int) -> tuple[SaliencySample | None, TriggerEvent | None]:
        """Push one scalar observed from `source`; no-op if it is inactive."""
        if source != self.source:
            return None, None
        s = self.window.push(value)
        sample = SaliencySample(s=s, source=self.source, timestamp_us=timestamp_us)
        self._last = sample
        return sample, self.trigger.evaluate(sample)

    def feed_param_deltas(self, magnitudes, timestamp_us: int) -> list[tuple[SaliencySample, TriggerEvent | None]]:
        """Push a batch of |Δparam| magnitudes (normalized to [0, 1]).

        No-op unless PARAM_CHANGE_VARIANCE is the active source; each
        magnitude is one sample for both the variance and the trigger.
        """
        out = []
        for m in magnitudes:
            if not (0.0 <= float(m) <= 1.0):
                raise InvalidInput(f"parameter delta magnitude out of [0, 1]: {m}")
            sample, event = self.feed(float(m), SoaSource.PARAM_CHANGE_VARIANCE, timestamp_us)
            if sample is not None:
                out.append((sample, event))
        return out


def soa_from_parameter_changes(window: RollingWindow, magnitudes,
                               timestamp_us: int = 0) -> SaliencySample:
    """Push absolute normalized parameter deltas and report the variance."""
    s = window.variance
    for m in magnitudes:
        if not (0.0 <= float(m) <= 1.0):
            raise InvalidInput(f"parameter delta magnitude out of [0, 1]: {m}")
        s = window.push(float(m))
    return SaliencySample(s=s, source=SoaSource.PARAM_CHANGE_VARIANCE,
                          timestamp_us=timestamp_us)
