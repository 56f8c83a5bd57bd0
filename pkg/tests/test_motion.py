"""Quantity-of-motion pipeline against brute-force oracles."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from vivo.errors import InsufficientData, InvalidInput
from vivo.motion import (LuminanceGrid, MotionAnalyzer, MotionConfig,
                         calibrate_noise_floor, compute_qom, to_luminance)

from oracles import oracle_calibrate, oracle_luminance, oracle_qom

def grid(arr, ts=1000):
    a = np.asarray(arr, dtype=np.uint8)
    return LuminanceGrid(width=a.shape[1], height=a.shape[0],
                         intensities=a, timestamp_us=ts)


def qval(a, b, cfg):
    return compute_qom(grid(a, 1), grid(b, 2), cfg).qom


def grids(arrays):
    return [grid(a, (i + 1) * 1000) for i, a in enumerate(arrays)]


def rand_frame(rng, h=8, w=8):
    return rng.integers(0, 256, size=(h, w), dtype=np.uint8)


class TestLuminance:
    def test_matches_weighted_sum_oracle(self, rng):
        rgb = rng.integers(0, 256, size=(6, 7, 3), dtype=np.uint8)
        out = to_luminance(rgb).intensities
        for i in range(6):
            for j in range(7):
                r, g, b = (int(v) for v in rgb[i, j])
                assert out[i, j] == oracle_luminance(r, g, b)

    def test_pure_channels(self):
        red = np.zeros((1, 1, 3), dtype=np.uint8)
        red[0, 0, 0] = 255
        assert to_luminance(red).intensities[0, 0] == oracle_luminance(255, 0, 0)
        white = np.full((1, 1, 3), 255, dtype=np.uint8)
        assert to_luminance(white).intensities[0, 0] == 255


class TestComputeQom:
    def test_identical_frames_zero(self, rng):
        f = rand_frame(rng)
        assert qval(f, f, MotionConfig(noise_floor=0)) == 0.0

    def test_full_flip_is_one(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.full((4, 4), 255, dtype=np.uint8)
        assert qval(a, b, MotionConfig(noise_floor=0)) == 1.0

    def test_half_flip_is_half(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = a.copy()
        b[:2, :] = 255
        assert qval(a, b, MotionConfig(noise_floor=0)) == 0.5

    def test_matches_bruteforce_oracle(self, rng):
        cfg = MotionConfig(noise_floor=7)
        for _ in range(25):
            a, b = rand_frame(rng), rand_frame(rng)
            assert qval(a, b, cfg) == pytest.approx(oracle_qom(a, b, 7), abs=1e-12)

    def test_downsampled_matches_oracle(self, rng):
        cfg = MotionConfig(noise_floor=4, downsample_factor=3)
        for _ in range(10):
            a, b = rand_frame(rng, 10, 11), rand_frame(rng, 10, 11)
            want = oracle_qom(a, b, 4, factor=3)
            assert qval(a, b, cfg) == pytest.approx(want, rel=1e-12, abs=1e-15)

    def test_rejects_mismatched_shapes(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        b = np.zeros((4, 5), dtype=np.uint8)
        with pytest.raises(InvalidInput):
            compute_qom(grid(a, 1), grid(b, 2), MotionConfig(noise_floor=0))

    def test_rejects_non_increasing_timestamps(self):
        a = np.zeros((4, 4), dtype=np.uint8)
        with pytest.raises(InvalidInput):
            compute_qom(grid(a, 5), grid(a, 5), MotionConfig(noise_floor=0))

    @given(st.integers(0, 255), st.data())
    def test_symmetry_in_frame_order(self, floor, data):
        # |a-b| is symmetric so swapping frames (with valid timestamps)
        # cannot change the result
        a = np.array(data.draw(st.lists(st.integers(0, 255), min_size=16,
                                        max_size=16)), dtype=np.uint8).reshape(4, 4)
        b = np.array(data.draw(st.lists(st.integers(0, 255), min_size=16,
                                        max_size=16)), dtype=np.uint8).reshape(4, 4)
        cfg = MotionConfig(noise_floor=floor)
        assert qval(a, b, cfg) == qval(b, a, cfg)

    @given(st.integers(0, 254))
    def test_monotone_in_noise_floor(self, floor):
        rng = np.random.default_rng(floor)
        a, b = rand_frame(rng), rand_frame(rng)
        lo = qval(a, b, MotionConfig(noise_floor=floor))
        hi = qval(a, b, MotionConfig(noise_floor=floor + 1))
        assert hi <= lo

    @given(st.integers(1, 30))
    def test_subthreshold_shift_reads_zero(self, shift):
        rng = np.random.default_rng(shift)
        a = rng.integers(0, 200, size=(6, 6), dtype=np.uint8)
        b = (a + shift).astype(np.uint8)
        assert qval(a, b, MotionConfig(noise_floor=shift + 1)) == 0.0


class TestCalibration:
    def make_still(self, rng, n=30, base=100, noise=5):
        frames = []
        f = np.full((8, 8), base, dtype=np.int16)
        for _ in range(n):
            jitter = rng.integers(-noise, noise + 1, size=(8, 8))
            frames.append(np.clip(f + jitter, 0, 255).astype(np.uint8))
        return frames

    def test_matches_exhaustive_scan_oracle(self, rng):
        frames = self.make_still(rng)
        assert calibrate_noise_floor(grids(frames)) == oracle_calibrate(frames)

    def test_identical_frames_floor_zero(self):
        frames = [np.full((8, 8), 50, dtype=np.uint8)] * 30
        assert calibrate_noise_floor(grids(frames)) == 0

    def test_alternating_pm10_needs_eleven(self):
        # frames alternate 100 and 110: every diff is 10, so the smallest
        # floor that silences the scene is 11
        a = np.full((8, 8), 100, dtype=np.uint8)
        b = np.full((8, 8), 110, dtype=np.uint8)
        frames = [a, b] * 15
        got = calibrate_noise_floor(grids(frames))
        assert got == oracle_calibrate(frames) == 11

    def test_requires_min_frames(self, rng):
        with pytest.raises(InsufficientData):
            calibrate_noise_floor(grids(self.make_still(rng, n=10)))

    def test_margin_scales_result(self, rng):
        frames = grids(self.make_still(rng))
        base = calibrate_noise_floor(frames)
        want = min(255, int(np.ceil(base * 2.0)))
        assert calibrate_noise_floor(frames, margin=2.0) == want

    @given(st.integers(1, 12))
    def test_result_silences_the_scene(self, noise):
        rng = np.random.default_rng(noise * 31)
        frames = self.make_still(rng, noise=noise)
        eps = calibrate_noise_floor(grids(frames))
        qoms = [qval(p, c, MotionConfig(noise_floor=eps))
                for p, c in zip(frames[:-1], frames[1:])]
        assert float(np.mean(qoms)) <= 1e-4
        if eps > 0:
            qoms2 = [qval(p, c, MotionConfig(noise_floor=eps - 1))
                     for p, c in zip(frames[:-1], frames[1:])]
            assert float(np.mean(qoms2)) > 1e-4


class TestAnalyzer:
    def test_first_frame_yields_none(self, rng):
        an = MotionAnalyzer(MotionConfig(noise_floor=0))
        assert an.feed(grid(rand_frame(rng), 1)) is None
        s = an.feed(grid(rand_frame(rng), 2))
        assert s is not None and s.frame_index == 0
        s2 = an.feed(grid(rand_frame(rng), 3))
        assert s2.frame_index == 1

    def test_streaming_matches_direct(self, rng):
        frames = [rand_frame(rng) for _ in range(12)]
        cfg = MotionConfig(noise_floor=6)
        an = MotionAnalyzer(cfg)
        streamed = []
        for i, f in enumerate(frames):
            s = an.feed(grid(f, (i + 1) * 1000))
            if s is not None:
                streamed.append(s.qom)
        direct = [qval(p, c, cfg) for p, c in zip(frames[:-1], frames[1:])]
        assert streamed == direct

    def test_recalibrate_updates_floor(self, rng):
        an = MotionAnalyzer(MotionConfig(noise_floor=0))
        frames = TestCalibration().make_still(rng)
        eps = an.recalibrate(grids(frames))
        assert an.cfg.noise_floor == eps == oracle_calibrate(frames)

    def test_recalibrate_rejects_moving_scene(self, rng):
        an = MotionAnalyzer(MotionConfig(noise_floor=0))
        frames = grids([rand_frame(rng) for _ in range(30)])
        with pytest.raises(InvalidInput, match="still"):
            an.recalibrate(frames)
