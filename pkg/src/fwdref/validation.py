"""Input coercion shared by the estimator and the command line."""

from __future__ import annotations

import numpy as np

from .exceptions import DimensionMismatchError, PoseCountError
from .io import PoseDocument
from .model import Frame, Pose, QuantizedPose


def check_frames(X) -> list:
    """Coerce ``X`` to a non-empty list of same-sized :class:`Frame` objects.

    Accepts a sequence of frames, a sequence of 2-D uint8 luma arrays or a
    3-D ``(n, height, width)`` uint8 array.
    """
    if isinstance(X, Frame):
        raise TypeError("expected a sequence of frames, got a single Frame")
    if isinstance(X, np.ndarray):
        if X.ndim != 3:
            raise ValueError(f"frame array must be 3-D (n, height, width), got {X.ndim}-D")
        items = list(X)
    else:
        items = list(X)
    if not items:
        raise ValueError("empty frame sequence")
    frames = []
    for i, item in enumerate(items):
        if isinstance(item, Frame):
            frames.append(item)
            continue
        arr = np.asarray(item)
        if arr.ndim != 2:
            raise ValueError(f"frame {i + 1}: luma must be 2-D, got shape {arr.shape}")
        if arr.dtype != np.uint8:
            if not np.issubdtype(arr.dtype, np.integer):
                raise ValueError(f"frame {i + 1}: samples must be integers, got {arr.dtype}")
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise ValueError(f"frame {i + 1}: samples outside [0, 255]")
            arr = arr.astype(np.uint8)
        frames.append(Frame.from_luma(arr))
    first = frames[0]
    for i, f in enumerate(frames[1:], start=2):
        if f.size != first.size or f.chroma_format != first.chroma_format:
            raise DimensionMismatchError(f"frame {i} is {f.size}, expected {first.size}")
    return frames


def check_poses(poses, n_frames=None):
    """Coerce poses to a list of :class:`Pose`/:class:`QuantizedPose`, or ``None``."""
    if poses is None:
        return None
    if isinstance(poses, PoseDocument):
        poses = poses.poses
    out = []
    for p in poses:
        if isinstance(p, (Pose, QuantizedPose)):
            out.append(p)
        else:
            arr = np.asarray(p, dtype=np.float64)
            out.append(Pose(tuple(map(tuple, arr.tolist()))))
    if n_frames is not None and len(out) != n_frames:
        raise PoseCountError(f"{len(out)} poses for {n_frames} frames")
    return out
