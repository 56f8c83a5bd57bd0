"""Scripted case-study run: synthetic inputs shaped like the documented
interplay excerpt, driven offline through the full pipeline.

The bundled asset script describes 40 seconds of interplay: system-led
motion wiggle with a salient burst (first trigger), a quiet performer
passage whose closing burst fires the trigger again, a second performer
passage, and a closing system passage. Video frames and the instrument
audio are synthesized deterministically from the script, so the run is a
pure function of the seed: exactly two trigger events, and a timeline that
alternates system and performer spans around them.
"""

from __future__ import annotations

import json
import math
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from .audio import AudioBuffer, ChainProcessor, ParameterCommand, parse_chain, write_wav
from .engine import EngineConfig, EngineCore
from .errors import InvalidInput
from .mapping import parse_mapping
from .motion import MotionAnalyzer, MotionConfig, LuminanceGrid
from .saliency import SoaSource, TriggerConfig
from .score import parse_score
from .session import SessionLog, SessionWriter, build_header, read_session

ASSET_NAME = "case_study.json"


def load_assets() -> dict:
    """Read the bundled scenario script; error when it is not present."""
    try:
        path = resources.files("vivo").joinpath("assets").joinpath(ASSET_NAME)
        text = path.read_text(encoding="utf-8")
    except (FileNotFoundError, ModuleNotFoundError) as exc:
        raise InvalidInput(f"scenario asset {ASSET_NAME!r} is missing") from exc
    return json.loads(text)


def _phase_at(phases: list[dict], t: float) -> dict:
    for p in phases:
        if t < p["until_s"]:
            return p
    return phases[-1]


def _flatten(phases: list[dict]) -> list[dict]:
    """Replace every burst with a continuation of the preceding phase."""
    out: list[dict] = []
    for p in phases:
        if p["kind"] == "burst" and out:
            prev = dict(out[-1])
            prev["until_s"] = p["until_s"]
            out.append(prev)
        else:
            out.append(dict(p))
    return out


def motion_qom_targets(video: dict, phases: list[dict]) -> np.ndarray:
    """Target motion value for each frame transition (index 1..n_frames-1).

    Wiggle phases follow a sine on the global frame index; burst phases
    alternate hi/lo starting hi; still phases hold a constant level.
    """
    fps = video["fps"]
    n_frames = int(round(video["duration_s"] * fps))
    targets = np.zeros(n_frames, dtype=np.float64)
    burst_start: dict[int, int] = {}
    for i in range(1, n_frames):
        t = (i + 1) / fps
        phase = _phase_at(phases, t)
        kind = phase["kind"]
        if kind == "wiggle":
            targets[i] = phase["mean"] + phase["amp"] * math.sin(
                2.0 * math.pi * i / phase["period_frames"])
        elif kind == "still":
            targets[i] = phase["level"]
        elif kind == "burst":
            key = id(phase)
            start = burst_start.setdefault(key, i)
            targets[i] = phase["hi"] if (i - start) % 2 == 0 else phase["lo"]
        else:
            raise InvalidInput(f"unknown motion phase kind {kind!r}")
    return targets


def synth_frames(video: dict, targets: np.ndarray):
    """Yield frames whose pairwise motion value realizes the target series.

    Pixels toggle between intensities 1 and 255; toggling k of the N pixels
    between consecutive frames gives qom = 254*k / (255*N), so each target is
    realized exactly up to that quantization.
    """
    w, h, fps = video["width"], video["height"], video["fps"]
    n = w * h
    us_per_frame = 1_000_000.0 / fps
    state = np.zeros(n, dtype=bool)
    for i in range(len(targets)):
        if i > 0:
            k = min(n, int(round(targets[i] * 255.0 * n / 254.0)))
            state[:k] ^= True
        frame = np.where(state, 255, 1).astype(np.uint8).reshape(h, w)
        yield LuminanceGrid(width=w, height=h, intensities=frame,
                            timestamp_us=int(round((i + 1) * us_per_frame)))


def synth_audio(audio_cfg: dict, duration_s: float, sample_rate: int) -> np.ndarray:
    """Sine tone with phase-scripted amplitude; the performer stand-in."""
    n = int(round(duration_s * sample_rate))
    t = np.arange(n, dtype=np.float64) / sample_rate
    amp = np.empty(n, dtype=np.float64)
    prev_until = 0.0
    for p in audio_cfg["phases"]:
        sel = (t >= prev_until) & (t < p["until_s"])
        amp[sel] = p["amp"]
        prev_until = p["until_s"]
    amp[t >= prev_until] = audio_cfg["phases"][-1]["amp"]
    return (amp * np.sin(2.0 * math.pi * audio_cfg["freq_hz"] * t)).astype(np.float32)


def engine_config_from_assets(assets: dict, seed: int | None = None) -> EngineConfig:
    chain = parse_chain(json.dumps(assets["chain"]))
    score = parse_score(json.dumps(assets["score"]), chain=chain)
    mapping = parse_mapping(json.dumps(assets["mapping"]), chain=chain)
    eng = assets["engine"]
    return EngineConfig(
        chain=chain, score=score, mapping=mapping,
        trigger=TriggerConfig(**eng["trigger"]),
        soa_source=SoaSource(eng["soa_source"]),
        soa_window=int(eng["soa_window"]),
        seed=seed if seed is not None else int(eng["seed"]),
        score_ramp_ms=float(eng["score_ramp_ms"]),
    )


def run_case_study_scenario(seed: int | None = None, log_path: str | Path | None = None,
                            flatten: bool = False,
                            render_path: str | Path | None = None) -> tuple[SessionLog, Path]:
    """Run the scripted excerpt offline; returns the session log and its path.

    flatten=True removes the salient motion bursts (the no-trigger control
    condition); render_path writes the processed audio as float32 WAV.
    """
    assets = load_assets()
    cfg = engine_config_from_assets(assets, seed)
    video = assets["video"]
    phases = _flatten(assets["motion_phases"]) if flatten else assets["motion_phases"]
    fps = float(video["fps"])
    fs = cfg.chain.sample_rate
    bs = cfg.chain.block_size

    core = EngineCore(cfg)
    proc = ChainProcessor(cfg.chain)
    analyzer = MotionAnalyzer(MotionConfig(noise_floor=0.0, downsample_factor=1))
    audio = synth_audio(assets["audio"], video["duration_s"], fs)
    n_blocks = len(audio) // bs
    targets = motion_qom_targets(video, phases)

    if log_path is None:
        fd = tempfile.NamedTemporaryFile(prefix="case-study-", suffix=".ndjson",
                                         delete=False)
        fd.close()
        log_path = fd.name
    log_path = Path(log_path)

    session_id = f"case-study-seed{cfg.effective_seed}" + ("-flat" if flatten else "")
    header = build_header(cfg, fps=fps, session_id=session_id)
    rendered = np.empty(n_blocks * bs, dtype=np.float32) if render_path else None

    pending: list[ParameterCommand] = []

    def queue(events) -> None:
        pending.extend(e for e in events if isinstance(e, ParameterCommand))

    with SessionWriter(log_path, header) as writer:
        writer.write_start(0)
        events = core.start(0)
        writer.write_events(events)
        queue(events)

        block_i = 0
        last_env = 0.0
        last_ts = 0

        def run_blocks_until(limit_us: int) -> None:
            nonlocal block_i, last_env
            while block_i < n_blocks and (block_i + 1) * bs * 1e6 / fs <= limit_us:
                for cmd in pending:
                    proc.set_parameter(cmd)
                pending.clear()
                buf = proc.process_block(AudioBuffer(
                    samples=audio[block_i * bs:(block_i + 1) * bs], block_index=block_i))
                if rendered is not None:
                    rendered[block_i * bs:(block_i + 1) * bs] = buf.samples
                last_env = proc.last_envelope
                block_i += 1

        for grid in synth_frames(video, targets):
            sample = analyzer.feed(grid)
            if sample is None:
                continue
            run_blocks_until(grid.timestamp_us)
            events = core.tick(sample, last_env, grid.timestamp_us)
            writer.write_motion(sample)
            writer.write_env(last_env, grid.timestamp_us)
            writer.write_events(events)
            queue(events)
            last_ts = grid.timestamp_us

        run_blocks_until(int(video["duration_s"] * 1e6) + 1)
        writer.end(max(last_ts, int(video["duration_s"] * 1e6)))

    if render_path is not None and rendered is not None:
        write_wav(render_path, rendered, fs)
    return read_session(log_path), log_path
