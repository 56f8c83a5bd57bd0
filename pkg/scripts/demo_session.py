"""End-to-end tour of the engine API without any devices.

Records a short synthetic performance (scripted motion over a sine tone),
replays the log to verify determinism, prints the interplay timeline, and
renders the processed audio to WAV.

    python3 scripts/demo_session.py [outdir]
"""

import math
import sys
from pathlib import Path

import numpy as np

from vivo.audio import AudioBuffer, ChainProcessor, ParameterCommand, write_wav
from vivo.motion import MotionSample
from vivo.runtime import EngineRuntime
from vivo.scenario import engine_config_from_assets, load_assets
from vivo.session import export_timeline, read_session, replay_session, timeline_to_text

FPS = 30.0
DURATION_S = 20.0
SEED = 2026


def scripted_qom(t: float) -> float:
    """Gentle sway with one sharp burst around 12 s."""
    if 12.0 <= t < 12.4:
        return 0.55 if int(t * FPS) % 2 == 0 else 0.05
    return 0.1 + 0.04 * math.sin(2.0 * math.pi * t / 3.0)


def main() -> int:
    outdir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo-out")
    outdir.mkdir(parents=True, exist_ok=True)
    log_path = outdir / "demo.ndjson"
    wav_path = outdir / "demo.wav"

    cfg = engine_config_from_assets(load_assets(), seed=SEED)
    rt = EngineRuntime(cfg, fps=FPS, log_path=log_path, session_id="demo")
    proc = rt.proc
    fs, bs = cfg.chain.sample_rate, cfg.chain.block_size

    n_samples = int(DURATION_S * fs) // bs * bs
    t_audio = np.arange(n_samples) / fs
    tone = (0.2 * np.sin(2.0 * np.pi * 220.0 * t_audio)).astype(np.float32)
    rendered = np.empty_like(tone)

    rt.start()
    n_frames = int(DURATION_S * FPS)
    block = 0
    for i in range(1, n_frames + 1):
        t = i / FPS
        ts = int(t * 1e6)
        # audio runs ahead of each video tick, exactly like the live loop
        while block * bs / fs <= t and (block + 1) * bs <= n_samples:
            rt.drain_audio_commands()
            sl = slice(block * bs, (block + 1) * bs)
            rendered[sl] = proc.process_block(
                AudioBuffer(samples=tone[sl], block_index=block)).samples
            block += 1
        rt.process_tick(MotionSample(qom=scripted_qom(t), timestamp_us=ts,
                                     frame_index=i - 1),
                        proc.last_envelope, ts)
    rt.stop()
    write_wav(wav_path, rendered, fs)

    report = replay_session(log_path)
    session = read_session(log_path)
    print(f"log: {log_path}")
    print(f"replay verified: {report.ticks} ticks, {report.outputs_checked} "
          f"outputs, {report.triggers} triggers")
    print(f"audio: {wav_path} ({n_samples / fs:.1f} s)")
    print("timeline:")
    print(timeline_to_text(export_timeline(session)) or "  (no spans)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
