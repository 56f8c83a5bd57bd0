"""Network control plane: live metrics out, configuration commands in, and
outbound OSC so external sound hosts can follow the engine's automation.

Wire format on the TCP socket: each message is a 4-byte big-endian length
prefix followed by that many bytes of UTF-8 JSON. The same JSON documents
travel over WebSocket text frames for browser clients; the WebSocket port
also answers plain HTTP GETs with the bundled console files when a static
root is configured.

Requests:  {"kind": ..., "payload": {...}, "request_id": token}
Replies:   {"t": "reply", "request_id": token, "ok": true, "result": {...}}
           {"t": "reply", "request_id": token, "ok": false, "error": reason}
Metrics:   {"t": "metrics", "ts", "qom", "soa", "effective_theta_hi",
            "trigger_flag", "current_section", "envelope"}  (after SUBSCRIBE)

Commands are schema-checked synchronously; valid engine commands apply
atomically at the next scheduler tick and the reply is sent only after
application. Invalid commands change nothing.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import socket
import struct
from dataclasses import dataclass
from http import HTTPStatus
from pathlib import Path

from .audio import ParameterCommand
from .saliency import SoaSource

log = logging.getLogger(__name__)

MAX_MESSAGE_BYTES = 4 * 1024 * 1024
SUBSCRIBER_QUEUE_LIMIT = 64
DEFAULT_METRICS_HZ = 20.0

CONTROL_KINDS = ("SET_THRESHOLD", "SET_TRIGGER_CONFIG", "LOAD_SCORE", "LOAD_MAPPING",
                 "SET_PARAM", "SET_ACTIVE", "TRANSPORT", "SUBSCRIBE", "PING")


class SchemaError(ValueError):
    pass


def _require(payload: dict, name: str, types, predicate=None) -> object:
    if name not in payload:
        raise SchemaError(f"payload missing field {name!r}")
    value = payload[name]
    if not isinstance(value, types) or isinstance(value, bool) and bool not in _tuple(types):
        raise SchemaError(f"field {name!r} has wrong type {type(value).__name__}")
    if predicate is not None and not predicate(value):
        raise SchemaError(f"field {name!r} value {value!r} out of range")
    return value


def _tuple(types) -> tuple:
    return types if isinstance(types, tuple) else (types,)


def _optional(payload: dict, name: str, types, predicate=None, default=None):
    if name not in payload:
        return default
    return _require(payload, name, types, predicate)


_NUM = (int, float)


def _finite(x) -> bool:
    return math.isfinite(x)


def validate_message(msg) -> tuple[str, dict, object]:
    """Schema-check one inbound message; returns (kind, payload, request_id).

    Raises SchemaError with a readable reason on the first violation; the
    caller turns that into an error reply without touching engine state.
    """
    if not isinstance(msg, dict):
        raise SchemaError("message must be a JSON object")
    kind = msg.get("kind")
    if kind not in CONTROL_KINDS:
        raise SchemaError(f"unknown kind {kind!r}")
    request_id = msg.get("request_id")
    payload = msg.get("payload", {})
    if not isinstance(payload, dict):
        raise SchemaError("payload must be an object")

    if kind == "SET_THRESHOLD":
        _require(payload, "theta_hi", _NUM, _finite)
        _optional(payload, "theta_lo", _NUM, _finite)
    elif kind == "SET_TRIGGER_CONFIG":
        _optional(payload, "theta_hi", _NUM, _finite)
        _optional(payload, "theta_lo", _NUM, _finite)
        _optional(payload, "refractory", int, lambda v: v >= 0)
        _optional(payload, "adaptive", bool)
        _optional(payload, "k_adapt", _NUM, _finite)
        _optional(payload, "long_window", int, lambda v: v > 2)
        _optional(payload, "soa_source", str,
                  lambda v: v in {s.value for s in SoaSource})
    elif kind in ("LOAD_SCORE", "LOAD_MAPPING"):
        _require(payload, "document", dict)
    elif kind == "SET_PARAM":
        _require(payload, "target", str, lambda v: v.count(".") == 1)
        _require(payload, "value", _NUM, _finite)
        _optional(payload, "ramp_ms", _NUM, lambda v: _finite(v) and v >= 0)
    elif kind == "SET_ACTIVE":
        _require(payload, "unit_id", str, lambda v: len(v) > 0)
        _require(payload, "active", bool)
    elif kind == "TRANSPORT":
        _require(payload, "action", str,
                 lambda v: v in ("start", "stop", "recalibrate"))
    elif kind == "SUBSCRIBE":
        _optional(payload, "rate_hz", _NUM, lambda v: 1.0 <= v <= 60.0)
    # PING carries no payload fields
    return kind, payload, request_id


# -- length-prefixed framing --------------------------------------------------


def encode_frame(obj) -> bytes:
    body = json.dumps(obj, separators=(",", ":")).encode("utf-8")
    if len(body) > MAX_MESSAGE_BYTES:
        raise SchemaError(f"message of {len(body)} bytes exceeds limit")
    return struct.pack(">I", len(body)) + body


def decode_frames(buffer: bytearray) -> list:
    """Pop every complete frame from the accumulation buffer (in place)."""
    out = []
    while len(buffer) >= 4:
        (length,) = struct.unpack(">I", buffer[:4])
        if length > MAX_MESSAGE_BYTES:
            raise SchemaError(f"frame of {length} bytes exceeds limit")
        if len(buffer) < 4 + length:
            break
        body = bytes(buffer[4:4 + length])
        del buffer[:4 + length]
        out.append(json.loads(body.decode("utf-8")))
    return out


async def read_frame(reader: asyncio.StreamReader):
    header = await reader.readexactly(4)
    (length,) = struct.unpack(">I", header)
    if length > MAX_MESSAGE_BYTES:
        raise SchemaError(f"frame of {length} bytes exceeds limit")
    body = await reader.readexactly(length)
    return json.loads(body.decode("utf-8"))


# -- OSC 1.0 outbound ----------------------------------------------------------


def _osc_pad(data: bytes) -> bytes:
    return data + b"\x00" * (4 - len(data) % 4)


def osc_encode(address: str, value: float) -> bytes:
    """One OSC message with a single big-endian float32 argument."""
    return _osc_pad(address.encode("ascii")) + _osc_pad(b",f") + struct.pack(">f", value)


def osc_decode(datagram: bytes) -> tuple[str, float]:
    end = datagram.index(b"\x00")
    address = datagram[:end].decode("ascii")
    cursor = end + (4 - end % 4)
    tag_end = datagram.index(b"\x00", cursor)
    typetag = datagram[cursor:tag_end].decode("ascii")
    if typetag != ",f":
        raise ValueError(f"expected typetag ',f', got {typetag!r}")
    cursor = tag_end + (4 - tag_end % 4)
    (value,) = struct.unpack(">f", datagram[cursor:cursor + 4])
    return address, value


def osc_param_message(cmd: ParameterCommand) -> bytes:
    unit, name = cmd.target.split(".", 1)
    return osc_encode(f"/vivo/param/{unit}/{name}", float(cmd.value))


class OscSender:
    """Fire-and-forget UDP sender; failures are logged, never raised."""

    def __init__(self, host: str, port: int):
        self.addr = (host, port)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.setblocking(False)
        self.sent = 0

    def send_command(self, cmd: ParameterCommand) -> None:
        try:
            self.sock.sendto(osc_param_message(cmd), self.addr)
            self.sent += 1
        except OSError:
            log.warning("OSC send to %s failed", self.addr, exc_info=True)

    def close(self) -> None:
        self.sock.close()


# -- server --------------------------------------------------------------------


@dataclass
class _Subscriber:
    queue: asyncio.Queue
    task: asyncio.Task
    label: str


class ControlServer:
    """TCP + WebSocket command/metrics endpoint around an EngineRuntime.

    Subscribers get a bounded queue and a private sender task; a subscriber
    that stops draining (stalled socket) fills its queue and is disconnected,
    so the engine side never waits on the network.
    """

    def __init__(self, runtime, host: str = "127.0.0.1", port: int = 9900,
                 metrics_hz: float = DEFAULT_METRICS_HZ,
                 static_root: str | Path | None = None):
        self.rt = runtime
        self.host = host
        self.port = port          # TCP; WebSocket+HTTP listen on port + 1
        self.metrics_hz = metrics_hz
        self.static_root = Path(static_root) if static_root else None
        self._subscribers: dict[int, _Subscriber] = {}
        self._next_sub_id = 0
        self._tcp_server: asyncio.AbstractServer | None = None
        self._ws_server = None
        self._metrics_task: asyncio.Task | None = None
        self.metrics_frames_published = 0

    @property
    def ws_port(self) -> int:
        return self.port + 1

    # -- lifecycle --

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(self._serve_tcp, self.host, self.port)
        import websockets

        self._ws_server = await websockets.serve(
            self._serve_ws, self.host, self.ws_port,
            process_request=self._process_http)
        self._metrics_task = asyncio.create_task(self._metrics_loop())

    async def stop(self) -> None:
        if self._metrics_task:
            self._metrics_task.cancel()
            try:
                await self._metrics_task
            except asyncio.CancelledError:
                pass
        for sub in list(self._subscribers.values()):
            sub.task.cancel()
        self._subscribers.clear()
        if self._tcp_server:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
        if self._ws_server:
            self._ws_server.close()
            await self._ws_server.wait_closed()

    # -- shared command handling --

    async def _handle_message(self, msg, send) -> None:
        """Validate and dispatch one message; always replies exactly once."""
        request_id = msg.get("request_id") if isinstance(msg, dict) else None
        try:
            kind, payload, request_id = validate_message(msg)
        except SchemaError as exc:
            await send({"t": "reply", "request_id": request_id, "ok": False,
                        "error": str(exc)})
            return
        if kind == "PING":
            await send({"t": "reply", "request_id": request_id, "ok": True,
                        "result": {"pong": True}})
            return
        if kind == "SUBSCRIBE":
            await send({"t": "reply", "request_id": request_id, "ok": True,
                        "result": {"rate_hz": self.metrics_hz}})
            raise _SubscribeRequested()
        if kind == "TRANSPORT":
            action = payload["action"]
            if action == "start" and not self.rt.running:
                self.rt.start()
            elif action == "stop" and self.rt.running:
                self.rt.stop()
            elif action == "recalibrate":
                driver = getattr(self.rt, "video_driver", None)
                if driver is not None:
                    driver.recalibrate_requested = True
            await send({"t": "reply", "request_id": request_id, "ok": True,
                        "result": {"action": action}})
            return

        loop = asyncio.get_running_loop()
        future: asyncio.Future = loop.create_future()

        def on_reply(reply: dict) -> None:
            if not future.done():
                future.set_result(reply)

        self.rt.submit_control(kind, payload, request_id, on_reply)
        reply = await future
        await send(reply)

    def _register_subscriber(self, send, label: str) -> asyncio.Queue:
        queue: asyncio.Queue = asyncio.Queue(maxsize=SUBSCRIBER_QUEUE_LIMIT)
        sub_id = self._next_sub_id
        self._next_sub_id += 1

        async def sender() -> None:
            try:
                while True:
                    frame = await queue.get()
                    await send(frame)
            except Exception:
                pass
            finally:
                self._subscribers.pop(sub_id, None)

        task = asyncio.create_task(sender())
        self._subscribers[sub_id] = _Subscriber(queue=queue, task=task, label=label)
        return queue

    async def _metrics_loop(self) -> None:
        period = 1.0 / self.metrics_hz
        loop = asyncio.get_running_loop()
        start = loop.time()
        n = 0
        while True:
            n += 1
            target = start + n * period
            delay = target - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            frame = self.rt.metrics_snapshot(ts=int((loop.time() - start) * 1e6))
            self.metrics_frames_published += 1
            for sub_id, sub in list(self._subscribers.items()):
                try:
                    sub.queue.put_nowait(frame)
                except asyncio.QueueFull:
                    log.warning("dropping stalled subscriber %s", sub.label)
                    sub.task.cancel()
                    self._subscribers.pop(sub_id, None)

    # -- TCP endpoint --

    async def _serve_tcp(self, reader: asyncio.StreamReader,
                         writer: asyncio.StreamWriter) -> None:
        peer = writer.get_extra_info("peername")

        async def send(obj) -> None:
            writer.write(encode_frame(obj))
            await writer.drain()

        try:
            while True:
                try:
                    msg = await read_frame(reader)
                except (asyncio.IncompleteReadError, ConnectionResetError):
                    break
                except (SchemaError, json.JSONDecodeError, UnicodeDecodeError) as exc:
                    await send({"t": "reply", "request_id": None, "ok": False,
                                "error": f"bad frame: {exc}"})
                    break
                try:
                    await self._handle_message(msg, send)
                except _SubscribeRequested:
                    self._register_subscriber(send, label=f"tcp:{peer}")
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    # -- WebSocket endpoint --

    async def _serve_ws(self, websocket) -> None:
        async def send(obj) -> None:
            await websocket.send(json.dumps(obj, separators=(",", ":")))

        try:
            async for raw in websocket:
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    await send({"t": "reply", "request_id": None, "ok": False,
                                "error": f"bad JSON: {exc}"})
                    continue
                try:
                    await self._handle_message(msg, send)
                except _SubscribeRequested:
                    self._register_subscriber(send, label=f"ws:{websocket.remote_address}")
        except Exception:
            log.debug("websocket client disconnected", exc_info=True)

    def _process_http(self, connection, request):
        """Serve the bundled console over plain HTTP on the WebSocket port."""
        if "upgrade" in request.headers.get("Connection", "").lower():
            return None
        if self.static_root is None:
            return connection.respond(HTTPStatus.NOT_FOUND, "no console bundled\n")
        name = request.path.split("?")[0].lstrip("/") or "index.html"
        target = (self.static_root / name).resolve()
        if not str(target).startswith(str(self.static_root.resolve())) or not target.is_file():
            return connection.respond(HTTPStatus.NOT_FOUND, "not found\n")
        body = target.read_bytes()
        content_type = {
            ".html": "text/html; charset=utf-8",
            ".js": "text/javascript; charset=utf-8",
            ".css": "text/css; charset=utf-8",
            ".json": "application/json",
            ".map": "application/json",
        }.get(target.suffix, "application/octet-stream")
        from websockets.datastructures import Headers
        from websockets.http11 import Response

        headers = Headers()
        headers["Content-Type"] = content_type
        headers["Content-Length"] = str(len(body))
        return Response(HTTPStatus.OK.value, "OK", headers, body)


class _SubscribeRequested(Exception):
    """Internal flow control: the connection asked for the metrics feed."""
