"""Syntax elements of a coded frame, shared by the codec and the serializer.

Coefficient blocks are stored as 64-tuples of integer levels in raster
order, or ``None`` when the block's coded_block_flag is 0.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import QuantizedPose


class FrameType(enum.IntEnum):
    I = 0  # noqa: E741
    P = 1


@dataclass(frozen=True)
class MotionVector:
    dx: int = 0
    dy: int = 0

    def halved(self):
        """Chroma vector: each component halved, rounded half away from zero."""
        return MotionVector(_half(self.dx), _half(self.dy))


def _half(v):
    mag = (abs(v) + 1) // 2
    return -mag if v < 0 else mag


ZERO_MV = MotionVector(0, 0)


def pack_block(levels) -> Optional[tuple]:
    """``(8, 8)`` integer levels -> 64-tuple, or ``None`` if all zero."""
    arr = np.asarray(levels).reshape(64)
    if not arr.any():
        return None
    return tuple(arr.tolist())


def unpack_block(block) -> np.ndarray:
    if block is None:
        return np.zeros((8, 8), dtype=np.int64)
    return np.array(block, dtype=np.int64).reshape(8, 8)


@dataclass(frozen=True)
class Partition:
    """A 16x16 or 8x8 prediction partition.

    ``blocks`` holds the luma transform blocks it covers: four for an
    unsplit macroblock (raster order inside it), one for an 8x8 partition.
    """

    ref_index: int
    mv: MotionVector
    blocks: tuple


@dataclass(frozen=True)
class InterMacroblock:
    split: bool
    partitions: tuple
    chroma: tuple = ()


@dataclass(frozen=True)
class IntraMacroblock:
    blocks: tuple
    chroma: tuple = ()


@dataclass(frozen=True)
class CodedFrame:
    frame_type: FrameType
    macroblocks: tuple
    pose_payload: Optional[QuantizedPose] = None
