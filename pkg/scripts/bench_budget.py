"""Measure the two real-time budgets on this machine.

Reports per-frame motion-analysis time at 320x240 and per-block processing
time for a four-unit chain at 48 kHz, against their deadlines (33.3 ms frame
period with a 2 ms analysis budget; 50% of the block period).

    python3 scripts/bench_budget.py [--frames N] [--blocks N]
"""

import argparse
import time

import numpy as np

from vivo.audio import (AudioBuffer, ChainProcessor, CommandOrigin,
                        ParameterCommand, ProcessingChain, UnitInstance, UnitKind)
from vivo.motion import LuminanceGrid, MotionAnalyzer, MotionConfig


def bench_motion(n_frames: int) -> np.ndarray:
    rng = np.random.default_rng(1)
    frames = rng.integers(0, 256, size=(n_frames + 1, 240, 320), dtype=np.uint8)
    analyzer = MotionAnalyzer(MotionConfig(noise_floor=8, downsample_factor=1))
    times = np.empty(n_frames)
    analyzer.feed(LuminanceGrid(width=320, height=240, intensities=frames[0],
                                timestamp_us=0))
    for i in range(n_frames):
        grid = LuminanceGrid(width=320, height=240, intensities=frames[i + 1],
                             timestamp_us=(i + 1) * 33_333)
        t0 = time.perf_counter()
        analyzer.feed(grid)
        times[i] = time.perf_counter() - t0
    return times * 1e3


def bench_audio(n_blocks: int, block_size: int = 512) -> np.ndarray:
    chain = ProcessingChain(
        sample_rate=48000, block_size=block_size, dry_gain=0.0, wet_gain=1.0,
        units=(
            UnitInstance(id="gain", kind=UnitKind.GAIN, params={"level": 1.0}),
            UnitInstance(id="echo", kind=UnitKind.DELAY,
                         params={"time_samples": 4800, "feedback": 0.3,
                                 "mix": 0.2}),
            UnitInstance(id="ring", kind=UnitKind.RINGMOD,
                         params={"freq_hz": 220.0, "mix": 0.3}),
            UnitInstance(id="lp", kind=UnitKind.LOWPASS,
                         params={"cutoff_hz": 8000.0, "q": 0.707}),
        ))
    proc = ChainProcessor(chain)
    rng = np.random.default_rng(2)
    blocks = (rng.standard_normal((n_blocks, block_size)) * 0.3).astype(np.float32)
    times = np.empty(n_blocks)
    for b in range(n_blocks):
        if b % 16 == 0:  # keep parameter ramps in flight, as a live set would
            proc.set_parameter(ParameterCommand(
                target="lp.cutoff_hz", value=2000.0 + (b % 32) * 400.0,
                ramp_ms=30.0, origin=CommandOrigin.SCORE, timestamp_us=0))
        t0 = time.perf_counter()
        proc.process_block(AudioBuffer(samples=blocks[b], block_index=b))
        times[b] = time.perf_counter() - t0
    return times * 1e3


def report(name: str, times_ms: np.ndarray, budget_ms: float) -> None:
    mean = times_ms.mean()
    p95 = float(np.percentile(times_ms, 95))
    p99 = float(np.percentile(times_ms, 99))
    verdict = "within" if p95 <= budget_ms else "OVER"
    print(f"{name}: mean {mean:.3f} ms  p95 {p95:.3f} ms  p99 {p99:.3f} ms  "
          f"max {times_ms.max():.3f} ms  ({verdict} {budget_ms:.2f} ms budget)")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=600)
    ap.add_argument("--blocks", type=int, default=2000)
    args = ap.parse_args()

    report("motion 320x240", bench_motion(args.frames), budget_ms=2.0)
    block_ms = 512 / 48000 * 1e3
    report("audio 512/4-unit", bench_audio(args.blocks), budget_ms=block_ms * 0.5)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
