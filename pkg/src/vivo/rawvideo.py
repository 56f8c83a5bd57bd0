"""Uncompressed grayscale frame-sequence files, plus an optional camera source.

The file format exists so tests and offline runs need no codec:

    magic   4 bytes  b"VRAW"
    version u16      currently 1
    width   u32
    height  u32
    count   u32      frame count
    fps     f64
    body             count frames, each height*width bytes, row-major uint8

All integers little-endian. Camera capture goes through OpenCV and is only
imported when actually requested, so the module works without it.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import InvalidInput
from .motion import LuminanceGrid

MAGIC = b"VRAW"
VERSION = 1
_HEADER = struct.Struct("<4sHIIId")


@dataclass(frozen=True)
class RawVideoInfo:
    width: int
    height: int
    frame_count: int
    fps: float


def write_raw_video(path: str | Path, frames: np.ndarray, fps: float) -> RawVideoInfo:
    """Write a (count, height, width) uint8 array as a raw frame sequence."""
    arr = np.ascontiguousarray(frames)
    if arr.ndim != 3 or arr.dtype != np.uint8:
        raise InvalidInput(f"expected uint8 array of shape (count, height, width), got {arr.shape} {arr.dtype}")
    if fps <= 0:
        raise InvalidInput(f"fps must be positive: {fps}")
    count, height, width = arr.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, width, height, count, float(fps)))
        fh.write(arr.tobytes())
    return RawVideoInfo(width=width, height=height, frame_count=count, fps=float(fps))


def read_raw_video_info(path: str | Path) -> RawVideoInfo:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
    if len(header) < _HEADER.size:
        raise InvalidInput(f"{path}: truncated header")
    magic, version, width, height, count, fps = _HEADER.unpack(header)
    if magic != MAGIC:
        raise InvalidInput(f"{path}: not a raw video file (bad magic {magic!r})")
    if version != VERSION:
        raise InvalidInput(f"{path}: unsupported raw video version {version}")
    return RawVideoInfo(width=width, height=height, frame_count=count, fps=fps)


def iter_raw_video(path: str | Path) -> Iterator[LuminanceGrid]:
    """Yield frames as LuminanceGrid with timestamps derived from fps."""
    info = read_raw_video_info(path)
    frame_bytes = info.width * info.height
    us_per_frame = 1_000_000.0 / info.fps
    with open(path, "rb") as fh:
        fh.seek(_HEADER.size)
        for i in range(info.frame_count):
            buf = fh.read(frame_bytes)
            if len(buf) < frame_bytes:
                raise InvalidInput(f"{path}: truncated at frame {i}")
            arr = np.frombuffer(buf, dtype=np.uint8).reshape(info.height, info.width)
            yield LuminanceGrid(
                width=info.width,
                height=info.height,
                intensities=arr,
                timestamp_us=int(round((i + 1) * us_per_frame)),
            )


def read_raw_video(path: str | Path) -> tuple[np.ndarray, RawVideoInfo]:
    """Load the whole sequence as a (count, height, width) uint8 array."""
    info = read_raw_video_info(path)
    frames = np.empty((info.frame_count, info.height, info.width), dtype=np.uint8)
    for i, grid in enumerate(iter_raw_video(path)):
        frames[i] = grid.intensities
    return frames, info


def iter_camera(camera_index: int = 0, max_frames: int | None = None) -> Iterator[LuminanceGrid]:
    """Capture grayscale frames from a camera device. Requires opencv."""
    try:
        import cv2
    except ImportError as exc:  # pragma: no cover - depends on install extras
        raise InvalidInput("camera capture requires the opencv 'camera' extra") from exc
    cap = cv2.VideoCapture(camera_index)
    if not cap.isOpened():
        raise InvalidInput(f"cannot open camera index {camera_index}")
    try:
        produced = 0
        while max_frames is None or produced < max_frames:
            ok, frame = cap.read()
            if not ok:
                break
            gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
            h, w = gray.shape
            ts = cap.get(cv2.CAP_PROP_POS_MSEC) * 1000.0
            yield LuminanceGrid(width=w, height=h, intensities=gray.astype(np.uint8),
                                timestamp_us=int(ts) if ts > 0 else produced + 1)
            produced += 1
    finally:
        cap.release()
