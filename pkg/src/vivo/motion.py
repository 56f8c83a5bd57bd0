"""Per-frame motion measurement from a video stream.

The motion value of a frame pair is the noise-gated mean absolute luminance
change per pixel, normalised to [0, 1]:

    qom = (1 / (N * 255)) * sum_p d_p,   d_p = |curr_p - prev_p| if >= eps else 0

where N is the pixel count after optional mean-pool downsampling and eps is
the noise floor in intensity units. The gate is hard: a difference at or
above eps is kept whole, below it contributes nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, InvalidInput

I_MAX = 255


@dataclass(frozen=True)
class LuminanceGrid:
    """A timestamped grayscale frame, row-major uint8 intensities."""

    width: int
    height: int
    intensities: np.ndarray  # shape (height, width), dtype uint8
    timestamp_us: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InvalidInput(f"frame dimensions must be >= 1x1, got {self.width}x{self.height}")
        arr = np.asarray(self.intensities)
        if arr.dtype != np.uint8:
            raise InvalidInput(f"intensities must be uint8, got {arr.dtype}")
        if arr.shape != (self.height, self.width):
            raise InvalidInput(
                f"intensities shape {arr.shape} does not match {self.height}x{self.width}"
            )
        object.__setattr__(self, "intensities", arr)


@dataclass(frozen=True)
class MotionSample:
    """Scalar motion value for one frame transition."""

    qom: float
    timestamp_us: int
    frame_index: int

    def __post_init__(self):
        if not (0.0 <= self.qom <= 1.0):
            raise InvalidInput(f"qom out of [0, 1]: {self.qom}")


@dataclass(frozen=True)
class MotionConfig:
    """Noise gate and downsampling for the motion computation."""

    noise_floor: float = 0.0  # intensity units, [0, 255]
    downsample_factor: int = 1

    def __post_init__(self):
        if not (0.0 <= self.noise_floor <= 255.0):
            raise InvalidInput(f"noise_floor out of [0, 255]: {self.noise_floor}")
        if self.downsample_factor < 1 or int(self.downsample_factor) != self.downsample_factor:
            raise InvalidInput(f"downsample_factor must be a positive integer: {self.downsample_factor}")


# BT.601 luma weights; any fixed weighting would do, this one is conventional.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def to_luminance(frame: np.ndarray, timestamp_us: int = 0) -> LuminanceGrid:
    """Convert an RGB frame (H, W, 3) to a luminance grid.

    Per pixel: round(0.299*R + 0.587*G + 0.114*B), clamped to [0, 255].
    """
    arr = np.asarray(frame)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise InvalidInput(f"expected an RGB frame of shape (H, W, 3), got {arr.shape}")
    luma = arr.astype(np.float64) @ _LUMA_WEIGHTS
    luma = np.clip(np.rint(luma), 0, 255).astype(np.uint8)
    h, w = luma.shape
    return LuminanceGrid(width=w, height=h, intensities=luma, timestamp_us=timestamp_us)


def _pooled(grid: LuminanceGrid, k: int) -> np.ndarray:
    """Mean-pool intensities by integer factor k, cropping any remainder."""
    if k == 1:
        return grid.intensities
    h = (grid.height // k) * k
    w = (grid.width // k) * k
    if h == 0 or w == 0:
        raise InvalidInput(f"frame {grid.width}x{grid.height} too small for downsample factor {k}")
    a = grid.intensities[:h, :w].astype(np.float64)
    return a.reshape(h // k, k, w // k, k).mean(axis=(1, 3))


def compute_qom(prev: LuminanceGrid, curr: LuminanceGrid, cfg: MotionConfig,
                frame_index: int = 0) -> MotionSample:
    """Quantity of motion between two frames.

    Parameters
    ----------
    prev, curr : LuminanceGrid
        Same dimensions; curr.timestamp_us must be strictly later.
    cfg : MotionConfig
        Noise floor (gate) and downsample factor.

    Returns
    -------
    MotionSample with qom in [0, 1]. Identical frames give exactly 0.0; a
    full-scale change at every pixel with a zero noise floor gives exactly 1.0.
    """
    if (prev.width, prev.height) != (curr.width, curr.height):
        raise InvalidInput(
            f"frame dimension mismatch: {prev.width}x{prev.height} vs {curr.width}x{curr.height}"
        )
    if curr.timestamp_us <= prev.timestamp_us:
        raise InvalidInput("curr.timestamp_us must be greater than prev.timestamp_us")

    k = cfg.downsample_factor
    if k == 1:
        # Integer path: exact.
        d = np.abs(prev.intensities.astype(np.int16) - curr.intensities.astype(np.int16))
        gated = d[d >= cfg.noise_floor]
        total = int(gated.sum(dtype=np.int64))
        n = prev.width * prev.height
    else:
        a = _pooled(prev, k)
        b = _pooled(curr, k)
        d = np.abs(a - b)
        total = float(d[d >= cfg.noise_floor].sum())
        n = d.size
    qom = total / (n * I_MAX)
    return MotionSample(qom=min(qom, 1.0), timestamp_us=curr.timestamp_us, frame_index=frame_index)


STILL_SCENE_MEAN_QOM = 1e-4


def calibrate_noise_floor(frames, margin: float = 1.0, min_frames: int = 30) -> int:
    """Estimate the noise floor from a nominally still scene.

    Scans integer eps in [0, 255] and returns the smallest value for which
    re-gating every consecutive frame pair yields a mean qom <= 1e-4. A
    margin > 1 scales the estimate up (ceil, clamped to 255) for headroom.

    Parameters
    ----------
    frames : sequence of LuminanceGrid
        At least `min_frames` frames of a still scene, equal dimensions.

    Raises
    ------
    InsufficientData
        Fewer than `min_frames` frames supplied.
    """
    frames = list(frames)
    if len(frames) < min_frames:
        raise InsufficientData(
            f"noise-floor calibration needs >= {min_frames} frames, got {len(frames)}"
        )
    if margin <= 0:
        raise InvalidInput(f"margin must be positive: {margin}")

    # One histogram of absolute differences over all pairs; gating at eps then
    # reduces to a suffix sum, which matches per-pair brute force exactly.
    counts = np.zeros(256, dtype=np.int64)
    n_pixels = frames[0].width * frames[0].height
    for a, b in zip(frames, frames[1:]):
        if (a.width, a.height) != (b.width, b.height):
            raise InvalidInput("calibration frames must share dimensions")
        d = np.abs(a.intensities.astype(np.int16) - b.intensities.astype(np.int16))
        counts += np.bincount(d.ravel(), minlength=256)[:256]

    n_pairs = len(frames) - 1
    values = np.arange(256, dtype=np.int64)
    weighted = counts * values
    # suffix[eps] = sum of gated differences with gate eps
    suffix = np.concatenate([np.cumsum(weighted[::-1])[::-1], [0]])
    denom = n_pairs * n_pixels * I_MAX
    for eps in range(256):
        if suffix[eps] / denom <= STILL_SCENE_MEAN_QOM:
            return min(255, math.ceil(eps * margin))
    return 255


@dataclass
class MotionAnalyzer:
    """Streaming wrapper: feed frames, get one MotionSample per transition.

    Keeps the previous frame and a running frame index; compute_qom itself is
    pure, so the analyzer is the only stateful part of the video path.
    """

    cfg: MotionConfig
    _prev: LuminanceGrid | None = field(default=None, repr=False)
    _index: int = 0

    def feed(self, grid: LuminanceGrid) -> MotionSample | None:
        """Process the next frame; returns None for the very first frame."""
        prev, self._prev = self._prev, grid
        if prev is None:
            return None
        sample = compute_qom(prev, grid, self.cfg, frame_index=self._index)
        self._index += 1
        return sample

    def recalibrate(self, frames, still_scene_max_eps: int = 64) -> int:
        """Re-estimate the noise floor and adopt it.

        Raises InvalidInput when the scene is clearly not still (the estimate
        exceeds `still_scene_max_eps`).
        """
        eps = calibrate_noise_floor(frames)
        if eps > still_scene_max_eps:
            raise InvalidInput(
                f"scene not still: calibration wants eps={eps} > {still_scene_max_eps}"
            )
        self.cfg = MotionConfig(noise_floor=float(eps), downsample_factor=self.cfg.downsample_factor)
        return eps
