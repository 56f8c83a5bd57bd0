"""Runtime host: wires the engine core to the audio processor, the session
writer, outbound control, and the command intake used by the network layer.

All engine state changes funnel through process_tick, which runs in the
scheduler context: queued control commands apply first (atomically, with
replies issued after application), then the frame's signals derive. The audio
context only ever touches the chain processor and a lock-free command deque,
so no network or disk condition can stall it.
"""

from __future__ import annotations

import asyncio
import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .audio import (ActivationEvent, AudioBuffer, ChainProcessor, ParameterCommand,
                    read_wav)
from .engine import EngineConfig, EngineCore
from .errors import ConfigError, InvalidInput, VivoError
from .motion import MotionAnalyzer, MotionConfig, MotionSample
from .session import SessionWriter, build_header

log = logging.getLogger(__name__)

ENGINE_CONTROL_KINDS = {"SET_THRESHOLD", "SET_TRIGGER_CONFIG", "LOAD_SCORE",
                        "LOAD_MAPPING", "SET_PARAM", "SET_ACTIVE"}


@dataclass
class PendingControl:
    kind: str
    payload: dict
    request_id: object
    on_reply: Callable[[dict], None]


@dataclass
class TickStats:
    ticks: int = 0
    triggers: int = 0
    commands_forwarded: int = 0


class EngineRuntime:
    """Single-owner engine host; process_tick is the only state mutator."""

    def __init__(self, cfg: EngineConfig, fps: float = 30.0,
                 log_path: str | Path | None = None, session_id: str = "live",
                 osc_send: Callable[[ParameterCommand], None] | None = None):
        self.cfg = cfg
        self.fps = fps
        self.core = EngineCore(cfg)
        self.proc = ChainProcessor(cfg.chain)
        self.audio_commands: deque = deque()  # drained by the audio context
        self._controls: deque[PendingControl] = deque()
        self.writer = SessionWriter(log_path, build_header(cfg, fps, session_id)) \
            if log_path else None
        self.osc_send = osc_send
        self.stats = TickStats()
        self._triggers_since_metrics = 0
        self._last_ts = 0
        self.running = False

    # -- lifecycle ----------------------------------------------------------

    def start(self, ts: int = 0) -> None:
        self.running = True
        events = self.core.start(ts)
        if self.writer:
            self.writer.write_start(ts)
            self.writer.write_events(events)
        self._forward(events)

    def stop(self) -> None:
        self.running = False
        if self.writer:
            self.writer.end(self._last_ts)
            self.writer = None

    def abort(self) -> None:
        self.running = False
        if self.writer:
            self.writer.abort()
            self.writer = None

    # -- control intake ------------------------------------------------------

    def submit_control(self, kind: str, payload: dict, request_id,
                       on_reply: Callable[[dict], None]) -> None:
        """Queue a validated command for application at the next tick."""
        if kind not in ENGINE_CONTROL_KINDS:
            on_reply({"t": "reply", "request_id": request_id, "ok": False,
                      "error": f"kind {kind!r} is not an engine command"})
            return
        self._controls.append(PendingControl(kind, payload, request_id, on_reply))

    def _apply_controls(self, ts: int) -> None:
        while self._controls:
            pc = self._controls.popleft()
            try:
                events, ops = self.core.apply_control(pc.kind, pc.payload, ts)
            except (VivoError, KeyError, TypeError, ValueError) as exc:
                detail = "; ".join(exc.errors) if isinstance(exc, ConfigError) else str(exc)
                pc.on_reply({"t": "reply", "request_id": pc.request_id,
                             "ok": False, "error": detail})
                continue
            if self.writer:
                self.writer.write_control(pc.kind, pc.payload, ts)
                self.writer.write_events(events)
            self._forward(events)
            self._forward(ops)
            pc.on_reply({"t": "reply", "request_id": pc.request_id, "ok": True,
                         "result": {"applied_at_us": ts}})

    def _forward(self, items) -> None:
        for item in items:
            if isinstance(item, (ParameterCommand, ActivationEvent)):
                self.audio_commands.append(item)
                self.stats.commands_forwarded += 1
                if self.osc_send is not None and isinstance(item, ParameterCommand):
                    self.osc_send(item)

    # -- the scheduler tick ---------------------------------------------------

    def process_tick(self, motion: MotionSample | None, env: float, ts: int) -> list:
        """Apply queued controls, derive the frame's events, log and forward."""
        self._last_ts = max(self._last_ts, ts)
        self._apply_controls(ts)
        events = self.core.tick(motion, env, ts)
        if self.writer:
            if motion is not None:
                self.writer.write_motion(motion)
            self.writer.write_env(env, ts)
            self.writer.write_events(events)
        self._forward(events)
        self.stats.ticks += 1
        fired = sum(1 for e in events if e.__class__.__name__ == "TriggerEvent")
        self.stats.triggers += fired
        self._triggers_since_metrics += fired
        return events

    # -- audio context helpers -------------------------------------------------

    def drain_audio_commands(self) -> None:
        """Apply every queued audio operation; called at block boundaries
        from whatever context owns the processor clock."""
        while self.audio_commands:
            item = self.audio_commands.popleft()
            try:
                if isinstance(item, ParameterCommand):
                    self.proc.set_parameter(item)
                else:
                    self.proc.set_active(item.unit_id, item.active)
            except InvalidInput:
                log.exception("dropped unappliable audio op")

    def metrics_snapshot(self, ts: int) -> dict:
        fired = self._triggers_since_metrics > 0
        self._triggers_since_metrics = 0
        return {
            "t": "metrics",
            "ts": ts,
            "qom": self.core.last_qom,
            "soa": self.core.current_soa,
            "effective_theta_hi": self.core.effective_theta_hi,
            "trigger_flag": fired,
            "current_section": self.core.current_section,
            "envelope": self.core.last_env,
        }


class VirtualAudioDriver:
    """Block-cadence audio pump with deadline accounting.

    Stands in for a device callback: every block period it drains the command
    queue and processes one block (from a WAV loop or silence). Like a real
    device it keeps a few periods of playback buffer, so a deadline miss is
    recorded only when block production falls behind the device clock by more
    than QUEUE_PERIODS periods (an underrun), not on a single late wakeup.
    """

    QUEUE_PERIODS = 4  # simulated device buffer depth, ~43 ms at 48k/512

    def __init__(self, runtime: EngineRuntime, source: np.ndarray | None = None):
        self.rt = runtime
        self.source = source
        self.misses = 0
        self.blocks = 0
        self._pos = 0

    def _next_block(self) -> np.ndarray:
        bs = self.rt.cfg.chain.block_size
        if self.source is None:
            return np.zeros(bs, dtype=np.float32)
        n = len(self.source)
        idx = (self._pos + np.arange(bs)) % n  # wrap-around copy
        self._pos = (self._pos + bs) % n
        return self.source[idx]

    def pump_once(self) -> AudioBuffer:
        self.rt.drain_audio_commands()
        buf = self.rt.proc.process_block(AudioBuffer(samples=self._next_block(),
                                                     block_index=self.blocks))
        self.blocks += 1
        return buf

    async def run(self, duration_s: float) -> None:
        loop = asyncio.get_running_loop()
        chain = self.rt.cfg.chain
        period = chain.block_size / chain.sample_rate
        start = loop.time()
        next_t = start + period
        while loop.time() - start < duration_s:
            delay = next_t - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            self.pump_once()
            if loop.time() > next_t + self.QUEUE_PERIODS * period:
                self.misses += 1
            next_t += period
            if next_t < loop.time() - 1.0:  # fell far behind; resync
                self.misses += 1
                next_t = loop.time() + period


class SyntheticVideoDriver:
    """Frame-cadence tick pump fed by a motion-value generator callable."""

    def __init__(self, runtime: EngineRuntime, qom_fn: Callable[[int], float]):
        self.rt = runtime
        self.qom_fn = qom_fn
        self.frames = 0

    def pump_once(self) -> None:
        self.frames += 1
        ts = int(round(self.frames * 1e6 / self.rt.fps))
        motion = MotionSample(qom=float(self.qom_fn(self.frames)), timestamp_us=ts,
                              frame_index=self.frames - 1)
        self.rt.process_tick(motion, self.rt.proc.last_envelope, ts)

    async def run(self, duration_s: float) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / self.rt.fps
        start = loop.time()
        next_t = start + period
        while loop.time() - start < duration_s:
            delay = next_t - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            self.pump_once()
            next_t += period


class CameraVideoDriver:
    """Live camera tick pump; frames are read in a worker thread."""

    def __init__(self, runtime: EngineRuntime, camera_index: int,
                 motion_cfg: MotionConfig | None = None):
        self.rt = runtime
        self.camera_index = camera_index
        self.analyzer = MotionAnalyzer(motion_cfg or MotionConfig())
        self.recalibrate_requested = False

    async def run(self, duration_s: float | None = None) -> None:
        from .rawvideo import iter_camera

        loop = asyncio.get_running_loop()
        frames = iter_camera(self.camera_index)
        start = loop.time()
        pending_calibration: list = []
        while self.rt.running:
            if duration_s is not None and loop.time() - start >= duration_s:
                break
            grid = await loop.run_in_executor(None, lambda: next(frames, None))
            if grid is None:
                break
            if self.recalibrate_requested:
                pending_calibration.append(grid)
                if len(pending_calibration) >= 30:
                    try:
                        eps = self.analyzer.recalibrate(pending_calibration)
                        log.info("recalibrated noise floor to %d", eps)
                    except (InvalidInput, VivoError):
                        log.exception("recalibration failed")
                    pending_calibration = []
                    self.recalibrate_requested = False
                continue
            sample = self.analyzer.feed(grid)
            if sample is not None:
                self.rt.process_tick(sample, self.rt.proc.last_envelope,
                                     sample.timestamp_us)


def wav_source(path: str | Path) -> np.ndarray:
    samples, _rate = read_wav(path)
    return samples
