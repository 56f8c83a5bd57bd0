"""Rolling variance and the hysteresis trigger against reference machines."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vivo.errors import InvalidInput
from vivo.saliency import (RollingWindow, SaliencySample, SaliencyTracker,
                           SoaSource, Trigger, TriggerConfig,
                           soa_from_parameter_changes)

from oracles import ReferenceTrigger, oracle_variance


def step(trig: Trigger, s: float, ts: int = 0):
    return trig.evaluate(SaliencySample(s=s, source=SoaSource.QOM_VARIANCE,
                                        timestamp_us=ts))


class TestRollingWindow:
    def test_matches_twopass_oracle_each_step(self, rng):
        w = RollingWindow(capacity=16)
        window = []
        for x in rng.random(400):
            w.push(float(x))
            window.append(float(x))
            window = window[-16:]
            assert w.variance == pytest.approx(oracle_variance(window), rel=1e-9, abs=1e-15)

    def test_constant_input_zero_variance(self):
        w = RollingWindow(capacity=8)
        for _ in range(50):
            w.push(0.25)
            assert w.variance == pytest.approx(0.0, abs=1e-15)

    def test_variance_never_negative_with_adversarial_offsets(self):
        # large mean, tiny wiggle: catastrophic cancellation territory
        w = RollingWindow(capacity=32)
        rng = np.random.default_rng(9)
        for x in 1e8 + rng.random(1000) * 1e-4:
            w.push(float(x))
            assert w.variance >= 0.0

    def test_clear_resets(self, rng):
        w = RollingWindow(capacity=8)
        for x in rng.random(20):
            w.push(float(x))
        w.clear()
        assert len(w) == 0 and w.variance == 0.0

    def test_rejects_non_finite(self):
        w = RollingWindow(capacity=4)
        with pytest.raises(InvalidInput):
            w.push(float("nan"))
        with pytest.raises(InvalidInput):
            w.push(float("inf"))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200),
           st.integers(2, 64))
    def test_property_matches_oracle(self, values, cap):
        w = RollingWindow(capacity=cap)
        for v in values:
            w.push(v)
        assert w.variance == pytest.approx(
            oracle_variance(values[-cap:]), rel=1e-9, abs=1e-12)

    def test_contents_order(self):
        w = RollingWindow(capacity=3)
        for v in [1.0, 2.0, 3.0, 4.0]:
            w.push(v)
        assert w.contents() == [2.0, 3.0, 4.0]


class TestTrigger:
    def run_both(self, stream, cfg: TriggerConfig):
        trig = Trigger(cfg)
        ref = ReferenceTrigger(cfg.theta_hi, cfg.theta_lo, cfg.refractory,
                               cfg.adaptive, cfg.k_adapt, cfg.long_window)
        fired = []
        for i, s in enumerate(stream):
            ev = step(trig, s, ts=i)
            ref_fired = ref.step(s)
            assert (ev is not None) == ref_fired, f"divergence at index {i}"
            if ev is not None:
                fired.append(i)
        return fired

    def test_basic_fire(self):
        cfg = TriggerConfig(theta_hi=0.5, theta_lo=0.1)
        assert self.run_both([0.2, 0.6], cfg) == [1]

    def test_hysteresis_single_fire_on_plateau(self):
        cfg = TriggerConfig(theta_hi=0.5, theta_lo=0.1)
        assert self.run_both([0.6, 0.6, 0.6, 0.6], cfg) == [0]

    def test_refire_requires_rearm(self):
        cfg = TriggerConfig(theta_hi=0.5, theta_lo=0.1)
        # dips to 0.2 which is above theta_lo: still disarmed
        assert self.run_both([0.6, 0.2, 0.6], cfg) == [0]
        # dips below theta_lo: re-arms and fires again
        assert self.run_both([0.6, 0.05, 0.6], cfg) == [0, 2]

    def test_refractory_blocks_early_refire(self):
        cfg = TriggerConfig(theta_hi=0.5, theta_lo=0.1, refractory=10)
        stream = [0.6, 0.05, 0.6, 0.05, 0.6] + [0.05] * 6 + [0.6]
        fired = self.run_both(stream, cfg)
        assert fired[0] == 0
        for a, b in zip(fired, fired[1:]):
            assert b - a >= 10

    def test_fuzz_against_reference(self):
        rng = np.random.default_rng(1234)
        for case in range(300):
            hi = float(rng.uniform(0.05, 1.0))
            lo = float(rng.uniform(0.0, hi))
            cfg = TriggerConfig(theta_hi=hi, theta_lo=lo,
                                refractory=int(rng.integers(0, 20)),
                                adaptive=bool(rng.integers(0, 2)),
                                k_adapt=float(rng.uniform(0.5, 4.0)),
                                long_window=int(rng.integers(8, 64)))
            stream = rng.uniform(0.0, hi * 2.5, size=120).tolist()
            self.run_both(stream, cfg)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(77)
        for _ in range(50):
            hi = float(rng.uniform(0.05, 1.0))
            lo = float(rng.uniform(0.0, hi))
            r = int(rng.integers(0, 12))
            alpha = float(rng.uniform(0.1, 50.0))
            stream = rng.uniform(0.0, hi * 2.0, size=150).tolist()
            base_cfg = TriggerConfig(theta_hi=hi, theta_lo=lo, refractory=r)
            scaled_cfg = TriggerConfig(theta_hi=hi * alpha, theta_lo=lo * alpha,
                                       refractory=r)
            t1, t2 = Trigger(base_cfg), Trigger(scaled_cfg)
            for s in stream:
                e1 = step(t1, s)
                e2 = step(t2, s * alpha)
                assert (e1 is None) == (e2 is None)

    def test_adaptive_threshold_from_long_window(self):
        cfg = TriggerConfig(theta_hi=10.0, theta_lo=2.0, adaptive=True,
                            k_adapt=2.0, long_window=8)
        trig = Trigger(cfg)
        # until the long window fills, the configured threshold applies
        for s in [1.0, 1.2, 0.8, 1.1, 0.9, 1.0, 1.05, 0.95]:
            assert step(trig, s) is None
            hi, _ = trig.effective_thresholds()
        # window now full: next thresholds come from its statistics
        hi, lo = trig.effective_thresholds()
        vals = [1.0, 1.2, 0.8, 1.1, 0.9, 1.0, 1.05, 0.95]
        mu = float(np.mean(vals))
        sigma = float(np.sqrt(oracle_variance(vals)))
        assert hi == pytest.approx(mu + 2.0 * sigma, rel=1e-12)
        assert lo == pytest.approx(hi * (2.0 / 10.0), rel=1e-12)
        # a sample far above the adapted threshold fires even though it is
        # far below the configured static one
        assert step(trig, mu + 3.0 * sigma + 0.01) is not None

    def test_threshold_computed_before_push(self):
        # the judged sample must not influence its own threshold
        cfg = TriggerConfig(theta_hi=100.0, theta_lo=10.0, adaptive=True,
                            k_adapt=1.0, long_window=4)
        trig = Trigger(cfg)
        for s in [1.0, 1.0, 1.0, 1.0]:
            step(trig, s)
        # window holds four 1.0s: threshold = 1.0 + 1.0*0 = 1.0
        ev = step(trig, 5.0)
        assert ev is not None
        assert ev.threshold_at_fire == pytest.approx(1.0)

    def test_config_validation(self):
        with pytest.raises(InvalidInput):
            TriggerConfig(theta_hi=0.1, theta_lo=0.5)
        with pytest.raises(InvalidInput):
            TriggerConfig(theta_hi=-0.1, theta_lo=-0.2)
        with pytest.raises(InvalidInput):
            TriggerConfig(theta_hi=0.5, theta_lo=0.1, refractory=-1)


class TestTracker:
    def test_source_exclusivity(self):
        tr = SaliencyTracker(window=8, trigger_cfg=TriggerConfig(0.5, 0.1),
                             source=SoaSource.QOM_VARIANCE)
        sample, _ = tr.feed(0.3, SoaSource.QOM_VARIANCE, 1000)
        assert sample is not None
        sample, _ = tr.feed(0.9, SoaSource.PARAM_CHANGE_VARIANCE, 2000)
        assert sample is None

    def test_switch_clears_window(self):
        tr = SaliencyTracker(window=8, trigger_cfg=TriggerConfig(0.5, 0.1),
                             source=SoaSource.QOM_VARIANCE)
        for i in range(6):
            tr.feed(float(i), SoaSource.QOM_VARIANCE, 1000 * (i + 1))
        assert tr.current.s > 0.0
        tr.select_source(SoaSource.PARAM_CHANGE_VARIANCE)
        assert tr.current.s == 0.0

    def test_param_change_magnitudes(self):
        w = RollingWindow(capacity=8)
        s1 = soa_from_parameter_changes(w, [0.5], timestamp_us=10)
        assert s1.source is SoaSource.PARAM_CHANGE_VARIANCE
        assert s1.s == pytest.approx(oracle_variance([0.5]))
        s2 = soa_from_parameter_changes(w, [0.1, 0.9], timestamp_us=20)
        assert s2.s == pytest.approx(oracle_variance([0.5, 0.1, 0.9]), rel=1e-9)

    def test_param_change_rejects_out_of_range(self):
        w = RollingWindow(capacity=8)
        with pytest.raises(InvalidInput):
            soa_from_parameter_changes(w, [1.5])
