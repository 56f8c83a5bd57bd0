"""Command-line entry point: live performance, deterministic replay, offline
rendering, the scripted case-study scenario, and timeline export.

Every flag can also be set through the environment with a VIVO_ prefix
(VIVO_MODE, VIVO_SCORE, VIVO_LISTEN, ...); explicit flags win.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import os
import secrets
import sys
from pathlib import Path

from . import scenario as scenario_mod
from .audio import ActivationEvent, ParameterCommand, CommandOrigin, parse_chain, render_offline
from .control import ControlServer, OscSender
from .engine import EngineConfig
from .errors import DigestMismatch, ReplayDivergence, VivoError, ConfigError
from .mapping import parse_mapping
from .runtime import EngineRuntime, SyntheticVideoDriver, VirtualAudioDriver, wav_source
from .saliency import SoaSource, TriggerConfig
from .score import parse_score
from .session import (export_timeline, read_session, replay_session,
                      timeline_to_json, timeline_to_text)

log = logging.getLogger(__name__)

MODES = ("live", "replay", "render", "scenario", "export")


def _env(name: str, default=None):
    return os.environ.get(f"VIVO_{name.upper()}", default)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="vivo",
        description="Camera-driven interactive music engine: motion saliency "
                    "triggers stochastic audio processing.")
    p.add_argument("--mode", choices=MODES, default=_env("mode"),
                   help="live | replay | render | scenario | export")
    p.add_argument("--score", default=_env("score"), help="score document (JSON)")
    p.add_argument("--mapping", default=_env("mapping"), help="mapping document (JSON)")
    p.add_argument("--chain", default=_env("chain"), help="processing chain document (JSON)")
    p.add_argument("--input", default=_env("input"),
                   help="input WAV (render/live) or raw video file (live)")
    p.add_argument("--log", default=_env("log"), help="session log path")
    p.add_argument("--seed", type=int, default=_env("seed"),
                   help="run seed (overrides the score document's seed)")
    p.add_argument("--listen", default=_env("listen", "127.0.0.1:9900"),
                   help="control-plane host:port (TCP; WebSocket on port+1)")
    p.add_argument("--camera-index", type=int, default=int(_env("camera_index", 0)))
    p.add_argument("--audio-device", default=_env("audio_device"),
                   help="sound device name/index for live audio")
    p.add_argument("--osc", default=_env("osc"),
                   help="outbound OSC endpoint host:port (disabled when unset)")
    p.add_argument("--output", default=_env("output"),
                   help="output WAV (render/scenario) or timeline file (export)")
    p.add_argument("--duration", type=float, default=_env("duration"),
                   help="live run length in seconds (default: until interrupted)")
    p.add_argument("--synthetic", action="store_true",
                   default=str(_env("synthetic", "")).lower() in ("1", "true"),
                   help="live mode without devices: scripted motion, silent or file audio")
    p.add_argument("--flatten", action="store_true",
                   help="scenario: remove the salient bursts (no-trigger control)")
    p.add_argument("--gap-ms", type=float, default=float(_env("gap_ms", 500.0)),
                   help="export: trigger attribution window")
    p.add_argument("--min-qom", type=float, default=float(_env("min_qom", 0.02)),
                   help="export: motion ceiling for performer spans")
    p.add_argument("--format", choices=("json", "text"), default=_env("format", "json"),
                   help="export output format")
    p.add_argument("--static-root", default=_env("static_root"),
                   help="directory of console files served over HTTP")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _fail(*messages: str) -> int:
    for m in messages:
        print(f"error: {m}", file=sys.stderr)
    return 1


def _read_doc(path: str, what: str) -> dict:
    fp = Path(path)
    if not fp.is_file():
        raise ConfigError(f"{what} file not found: {fp}")
    try:
        return json.loads(fp.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {fp} is not valid JSON: {exc}") from exc


def _load_engine_config(args, seed: int | None) -> EngineConfig:
    """Build the engine configuration, falling back to the bundled defaults
    for any document not supplied; all validation errors are aggregated."""
    assets = scenario_mod.load_assets()
    errors: list[str] = []
    chain = score = mapping = None
    try:
        chain_doc = _read_doc(args.chain, "chain") if args.chain else assets["chain"]
        chain = parse_chain(json.dumps(chain_doc))
    except ConfigError as exc:
        errors.extend(exc.errors)
    if chain is not None:
        try:
            score_doc = _read_doc(args.score, "score") if args.score else assets["score"]
            score = parse_score(json.dumps(score_doc), chain=chain)
        except ConfigError as exc:
            errors.extend(exc.errors)
        try:
            mapping_doc = _read_doc(args.mapping, "mapping") if args.mapping else assets["mapping"]
            mapping = parse_mapping(json.dumps(mapping_doc), chain=chain)
        except ConfigError as exc:
            errors.extend(exc.errors)
    if errors:
        raise ConfigError(errors)
    eng = assets["engine"]
    return EngineConfig(
        chain=chain, score=score, mapping=mapping,
        trigger=TriggerConfig(**eng["trigger"]),
        soa_source=SoaSource(eng["soa_source"]),
        soa_window=int(eng["soa_window"]),
        seed=seed,
        score_ramp_ms=float(eng["score_ramp_ms"]),
    )


def _parse_endpoint(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


# -- modes ----------------------------------------------------------------


def _mode_scenario(args) -> int:
    if args.seed is None:
        return _fail("scenario mode requires an explicit --seed")
    log_path = args.log or f"case-study-seed{args.seed}.ndjson"
    session, path = scenario_mod.run_case_study_scenario(
        seed=args.seed, log_path=log_path, flatten=args.flatten,
        render_path=args.output)
    entries = export_timeline(session, gap_ms=args.gap_ms, min_qom=args.min_qom)
    print(f"log: {path}")
    print(f"triggers: {session.trigger_count}")
    print(f"timeline: {' '.join(e.label.value for e in entries)}")
    if args.output:
        print(f"rendered: {args.output}")
    return 0


def _mode_replay(args) -> int:
    if not args.log:
        return _fail("replay mode requires --log")
    external = {}
    if args.score:
        external["score"] = _read_doc(args.score, "score")
    if args.mapping:
        external["mapping"] = _read_doc(args.mapping, "mapping")
    if args.chain:
        external["chain"] = _read_doc(args.chain, "chain")
    try:
        report = replay_session(args.log, external_configs=external or None)
    except (DigestMismatch, ReplayDivergence) as exc:
        print(f"replay failed: {exc}", file=sys.stderr)
        return 2
    header = read_session(args.log).header
    if args.seed is not None and args.seed != header["seed"]:
        return _fail(f"--seed {args.seed} does not match logged seed {header['seed']}")
    print(f"replay ok: {report.ticks} ticks, {report.outputs_checked} outputs verified, "
          f"{report.triggers} triggers")
    return 0


def _trace_from_log(log_path: str) -> list:
    """Recover the audio-facing command trace from a session log."""
    session = read_session(log_path)
    trace: list = []
    for rec in session.records:
        if rec["t"] == "param":
            trace.append(ParameterCommand(
                target=rec["target"], value=rec["value"], ramp_ms=rec["ramp_ms"],
                origin=CommandOrigin(rec["origin"]), timestamp_us=rec["ts"]))
        elif rec["t"] == "control" and rec["kind"] == "SET_ACTIVE":
            trace.append(ActivationEvent(unit_id=rec["payload"]["unit_id"],
                                         active=rec["payload"]["active"],
                                         timestamp_us=rec["ts"]))
    return trace


def _mode_render(args) -> int:
    missing = [name for name, val in (("--chain", args.chain), ("--input", args.input),
                                      ("--output", args.output)) if not val]
    if missing:
        return _fail(f"render mode requires {', '.join(missing)}")
    chain = parse_chain(json.dumps(_read_doc(args.chain, "chain")))
    trace = _trace_from_log(args.log) if args.log else []
    blocks = render_offline(chain, args.input, trace, args.output)
    print(f"rendered {blocks} blocks -> {args.output}")
    return 0


def _mode_export(args) -> int:
    if not args.log:
        return _fail("export mode requires --log")
    session = read_session(args.log)
    entries = export_timeline(session, gap_ms=args.gap_ms, min_qom=args.min_qom)
    text = timeline_to_json(entries) if args.format == "json" else timeline_to_text(entries)
    if args.output:
        Path(args.output).write_text(text + ("\n" if not text.endswith("\n") else ""),
                                     encoding="utf-8")
        print(f"timeline: {len(entries)} entries -> {args.output}")
    else:
        print(text)
    return 0


async def _live_loop(args, rt: EngineRuntime, duration: float | None) -> None:
    host, port = _parse_endpoint(args.listen)
    server = ControlServer(rt, host=host, port=port, static_root=args.static_root)
    await server.start()
    print(f"control plane: tcp://{host}:{port}  ws://{host}:{server.ws_port}")

    tasks: list[asyncio.Task] = []
    if args.synthetic:
        import math

        def qom_fn(i: int) -> float:
            return 0.1 + 0.05 * math.sin(2.0 * math.pi * i / 40.0)

        video = SyntheticVideoDriver(rt, qom_fn)
        audio = VirtualAudioDriver(rt, source=wav_source(args.input) if args.input else None)
        run_for = duration if duration is not None else 1e9
        tasks.append(asyncio.create_task(video.run(run_for)))
        tasks.append(asyncio.create_task(audio.run(run_for)))
    else:
        from .runtime import CameraVideoDriver

        video = CameraVideoDriver(rt, camera_index=args.camera_index)
        rt.video_driver = video
        tasks.append(asyncio.create_task(video.run(duration)))
        tasks.append(asyncio.create_task(_device_audio(args, rt, duration)))

    try:
        await asyncio.gather(*tasks)
    finally:
        for t in tasks:
            t.cancel()
        await server.stop()


async def _device_audio(args, rt: EngineRuntime, duration: float | None) -> None:
    """Full-duplex device stream: instrument in, processed signal out."""
    try:
        import sounddevice as sd
    except ImportError as exc:
        raise VivoError("live audio needs the sounddevice package "
                        "(or run with --synthetic)") from exc
    from .audio import AudioBuffer

    chain = rt.cfg.chain
    blocks = 0

    def callback(indata, outdata, frames, time_info, status):
        nonlocal blocks
        rt.drain_audio_commands()
        buf = rt.proc.process_block(AudioBuffer(samples=indata[:, 0], block_index=blocks))
        outdata[:, 0] = buf.samples
        blocks += 1

    device = args.audio_device
    if device is not None and str(device).isdigit():
        device = int(device)
    with sd.Stream(samplerate=chain.sample_rate, blocksize=chain.block_size,
                   channels=1, dtype="float32", device=device, callback=callback):
        await asyncio.sleep(duration if duration is not None else 1e9)


def _mode_live(args) -> int:
    seed = args.seed if args.seed is not None else secrets.randbits(63)
    cfg = _load_engine_config(args, seed)
    osc = None
    if args.osc:
        osc_host, osc_port = _parse_endpoint(args.osc)
        osc = OscSender(osc_host, osc_port)
    rt = EngineRuntime(cfg, fps=30.0, log_path=args.log,
                       session_id=f"live-{seed}",
                       osc_send=osc.send_command if osc else None)
    print(f"seed: {seed}")
    rt.start()
    try:
        asyncio.run(_live_loop(args, rt, args.duration))
    except KeyboardInterrupt:
        pass
    finally:
        if rt.running:
            rt.stop()
        if osc:
            osc.close()
    if args.log:
        print(f"session log: {args.log}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.mode:
        return _fail("--mode is required (live | replay | render | scenario | export)")
    if args.seed is not None:
        args.seed = int(args.seed)
    if args.duration is not None:
        args.duration = float(args.duration)
    try:
        handler = {"scenario": _mode_scenario, "replay": _mode_replay,
                   "render": _mode_render, "export": _mode_export,
                   "live": _mode_live}[args.mode]
        return handler(args)
    except ConfigError as exc:
        return _fail(*exc.errors)
    except VivoError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
