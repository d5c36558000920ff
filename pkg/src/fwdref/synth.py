"""Decoder-reproducible forward-reference frame synthesis.

Every path here is integer-only so that the encoder and the decoder build the
same virtual frame from the decoded I-frame and the transmitted poses. Poses
are always taken through the 16.8 fixed-point representation first; a raw
:class:`Pose` passed in is quantized on entry.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DimensionMismatchError, MissingFrameError
from .model import (
    N_JOINTS,
    POSE_SCALE,
    ForwardRefMode,
    Frame,
    Pose,
    QuantizedPose,
    div_round,
    parse_forward_mode,
    quantize_pose,
)

DEFAULT_BUMP_RADIUS = 4
DEFAULT_PATCH_RADIUS = 24


def as_quantized(pose) -> QuantizedPose:
    if isinstance(pose, QuantizedPose):
        return pose
    if not isinstance(pose, Pose):
        pose = Pose(pose)
    return quantize_pose(pose)


@dataclass(frozen=True, eq=False)
class HeatmapStack:
    width: int
    height: int
    channels: np.ndarray  # (13, height, width) uint8

    def __post_init__(self):
        if self.channels.shape != (N_JOINTS, self.height, self.width):
            raise DimensionMismatchError(f"heatmap stack shape {self.channels.shape}")

    def combined(self):
        """Per-pixel maximum across the joint channels."""
        return self.channels.max(axis=0)


def render_heatmaps(pose, width: int, height: int, bump_radius: int = DEFAULT_BUMP_RADIUS):
    """One bump per joint, ``round(255 * (R^2 - d^2) / R^2)`` inside radius R.

    Joints whose rounded position falls outside the canvas get an all-zero
    channel.
    """
    if bump_radius < 1:
        raise ValueError("bump_radius must be >= 1")
    centers = as_quantized(pose).rounded_positions()
    r2 = bump_radius * bump_radius
    yy, xx = np.mgrid[0:height, 0:width].astype(np.int64)
    channels = np.zeros((N_JOINTS, height, width), dtype=np.uint8)
    for j, (cx, cy) in enumerate(centers):
        if not (0 <= cx < width and 0 <= cy < height):
            continue
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        inside = d2 < r2
        vals = (2 * 255 * (r2 - d2) + r2) // (2 * r2)
        channels[j] = np.where(inside, vals, 0).astype(np.uint8)
    return HeatmapStack(width, height, channels)


@dataclass(frozen=True)
class SynthInputs:
    """Decoded I-frame plus the I-frame pose and the current pose.

    ``canvas`` is the frame size the poses were annotated against, when known;
    it must match the I-frame's source size.
    """

    i_frame: Frame
    pose_i: QuantizedPose
    pose_t: QuantizedPose
    canvas: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "pose_i", as_quantized(self.pose_i))
        object.__setattr__(self, "pose_t", as_quantized(self.pose_t))
        if self.canvas is not None and tuple(self.canvas) != tuple(self.i_frame.source_size):
            raise DimensionMismatchError(
                f"pose canvas {tuple(self.canvas)} does not match frame {self.i_frame.source_size}"
            )


def synthesize_linear(inputs: SynthInputs, bump_radius: int = DEFAULT_BUMP_RADIUS) -> Frame:
    frame = inputs.i_frame
    h_t = render_heatmaps(inputs.pose_t, frame.width, frame.height, bump_radius).combined()
    h_i = render_heatmaps(inputs.pose_i, frame.width, frame.height, bump_radius).combined()
    luma = frame.luma.astype(np.int16) + h_t.astype(np.int16) - h_i.astype(np.int16)
    luma = np.clip(luma, 0, 255).astype(np.uint8)
    return frame.replace_planes((luma,) + frame.planes[1:])


def _warp_plane(plane, centers, disps, radius):
    h, w = plane.shape
    r2 = radius * radius
    yy, xx = np.mgrid[0:h, 0:w].astype(np.int64)
    best_d2 = np.full((h, w), r2 + 1, dtype=np.int64)
    owner = np.full((h, w), -1, dtype=np.int64)
    for j, (cx, cy) in enumerate(centers):
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        # strict '<' keeps the lower joint index on ties
        take = d2 < best_d2
        best_d2 = np.where(take, d2, best_d2)
        owner = np.where(take, j, owner)
    out = plane.copy()
    for j, (dx, dy) in enumerate(disps):
        sel = owner == j
        if not sel.any():
            continue
        sy = np.clip(yy[sel] - dy, 0, h - 1)
        sx = np.clip(xx[sel] - dx, 0, w - 1)
        out[sel] = plane[sy, sx]
    return out


def synthesize_patchwarp(inputs: SynthInputs, patch_radius: int = DEFAULT_PATCH_RADIUS) -> Frame:
    """Move a disc of radius ``patch_radius`` around each joint with that joint.

    Each target pixel is owned by the nearest displaced joint within the
    radius and copies the I-frame sample the joint's displacement points back
    to. Chroma uses halved centres, displacements and radius.
    """
    if patch_radius < 1:
        raise ValueError("patch_radius must be >= 1")
    frame = inputs.i_frame
    centers = inputs.pose_t.rounded_positions()
    disps = div_round(inputs.pose_t.raw_array() - inputs.pose_i.raw_array(), POSE_SCALE)
    planes = [_warp_plane(frame.luma, centers, disps, patch_radius)]
    if len(frame.planes) > 1:
        c_centers = div_round(centers, 2)
        c_disps = div_round(disps, 2)
        c_radius = max(1, div_round(patch_radius, 2))
        planes += [_warp_plane(p, c_centers, c_disps, c_radius) for p in frame.planes[1:]]
    return frame.replace_planes(planes)


class FrameStore:
    """Read-only source of externally generated forward-reference frames.

    Backed by a Y4M file (frame ``t`` is the ``t``-th frame, 1-based) or a
    directory of ``frame_%04d.pgm`` files.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._frames = None

    def _load_y4m(self):
        if self._frames is None:
            from .io import read_y4m

            with open(self.path, "rb") as fh:
                self._frames, _ = read_y4m(fh)
        return self._frames

    def get(self, t: int) -> Frame:
        if self.path.is_dir():
            fname = self.path / f"frame_{t:04d}.pgm"
            if not fname.exists():
                raise MissingFrameError(f"no external frame for t={t} in {self.path}")
            from .io import read_pgm

            with open(fname, "rb") as fh:
                return read_pgm(fh)
        if not self.path.exists():
            raise MissingFrameError(f"external frame store {self.path} does not exist")
        frames = self._load_y4m()
        if not 1 <= t <= len(frames):
            raise MissingFrameError(f"no external frame for t={t} in {self.path}")
        return frames[t - 1]

    def __fspath__(self):
        return os.fspath(self.path)


def load_external_forward_frame(store, t: int, size=None) -> Frame:
    """Fetch frame ``t`` from ``store``; ``size`` is the expected (w, h)."""
    if not isinstance(store, FrameStore):
        if isinstance(store, (str, os.PathLike)):
            store = FrameStore(store)
        else:
            try:
                frame = store[t]
            except (KeyError, IndexError):
                raise MissingFrameError(f"no external frame for t={t}") from None
            store = None
    if store is not None:
        frame = store.get(t)
    if size is not None and frame.size != tuple(size):
        raise DimensionMismatchError(
            f"external frame t={t} is {frame.size}, expected {tuple(size)}"
        )
    return frame


def synthesize(inputs: SynthInputs, mode, *, bump_radius=DEFAULT_BUMP_RADIUS,
               patch_radius=DEFAULT_PATCH_RADIUS) -> Frame:
    mode = parse_forward_mode(mode)
    if mode is ForwardRefMode.LINEAR:
        return synthesize_linear(inputs, bump_radius)
    if mode is ForwardRefMode.PATCHWARP:
        return synthesize_patchwarp(inputs, patch_radius)
    raise ValueError(f"mode {mode.name} is not a pose-driven synthesizer")
