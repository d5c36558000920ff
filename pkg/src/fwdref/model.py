"""Value types shared across the codec: frames, poses, block geometry, config."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import DimensionMismatchError, PoseCountError, PoseRangeError

MB_SIZE = 16
SUB_SIZE = 8

JOINT_NAMES = (
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
)
N_JOINTS = len(JOINT_NAMES)

POSE_FRAC_BITS = 8
POSE_FIELD_BITS = 24
POSE_SCALE = 1 << POSE_FRAC_BITS
POSE_MAX_RAW = (1 << POSE_FIELD_BITS) - 1
POSE_MAX = POSE_MAX_RAW / POSE_SCALE  # 65535.99609375
POSE_PAYLOAD_BITS = 2 * N_JOINTS * POSE_FIELD_BITS  # 624


def round_half_away(x):
    """Round to nearest integer, ties away from zero (scalars or arrays)."""
    if isinstance(x, np.ndarray):
        return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(np.int64)
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def div_round(num, den):
    """Integer ``num / den`` rounded half away from zero; ``den`` must be > 0.

    Works elementwise on integer numpy arrays.
    """
    if isinstance(num, np.ndarray):
        mag = (2 * np.abs(num) + den) // (2 * den)
        return np.where(num < 0, -mag, mag)
    mag = (2 * abs(num) + den) // (2 * den)
    return -mag if num < 0 else mag


class ChromaFormat(enum.IntEnum):
    MONO = 0
    C420 = 1


class ForwardRefMode(enum.IntEnum):
    OFF = 0
    LINEAR = 1
    PATCHWARP = 2
    EXTERNAL = 3

    @property
    def needs_poses(self):
        return self in (ForwardRefMode.LINEAR, ForwardRefMode.PATCHWARP)


class ModeDecision(enum.Enum):
    SAD = "sad"
    LAGRANGIAN = "lagrangian"


def _chroma_size(width, height):
    return (width + 1) // 2, (height + 1) // 2


@dataclass(frozen=True, eq=False)
class Frame:
    """Planar 8-bit picture.

    ``planes`` holds the luma plane and, for 4:2:0, the two chroma planes as
    ``(rows, cols)`` uint8 arrays. ``source_size`` remembers the picture size
    before macroblock padding so the output can be cropped back.
    """

    width: int
    height: int
    planes: tuple
    chroma_format: ChromaFormat = ChromaFormat.MONO
    source_size: tuple = None

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise DimensionMismatchError(f"invalid frame size {self.width}x{self.height}")
        fmt = ChromaFormat(self.chroma_format)
        object.__setattr__(self, "chroma_format", fmt)
        expected = [(self.height, self.width)]
        if fmt is ChromaFormat.C420:
            cw, ch = _chroma_size(self.width, self.height)
            expected += [(ch, cw), (ch, cw)]
        if len(self.planes) != len(expected):
            raise DimensionMismatchError(
                f"{fmt.name} frame needs {len(expected)} planes, got {len(self.planes)}"
            )
        planes = []
        for plane, shape in zip(self.planes, expected):
            arr = np.asarray(plane)
            if arr.ndim == 1 and arr.size == shape[0] * shape[1]:
                arr = arr.reshape(shape)
            if arr.shape != shape:
                raise DimensionMismatchError(f"plane shape {arr.shape} != {shape}")
            if arr.dtype != np.uint8:
                if arr.size and (arr.min() < 0 or arr.max() > 255):
                    raise ValueError("samples must lie in [0, 255]")
                arr = arr.astype(np.uint8)
            arr = np.array(arr, dtype=np.uint8, copy=True)
            arr.flags.writeable = False
            planes.append(arr)
        object.__setattr__(self, "planes", tuple(planes))
        if self.source_size is None:
            object.__setattr__(self, "source_size", (self.width, self.height))
        else:
            object.__setattr__(self, "source_size", tuple(int(v) for v in self.source_size))

    @classmethod
    def from_luma(cls, luma, **kwargs):
        luma = np.asarray(luma)
        return cls(width=luma.shape[1], height=luma.shape[0], planes=(luma,), **kwargs)

    @property
    def luma(self):
        return self.planes[0]

    @property
    def size(self):
        return self.width, self.height

    def __eq__(self, other):
        if not isinstance(other, Frame):
            return NotImplemented
        return (
            self.size == other.size
            and self.chroma_format == other.chroma_format
            and all(np.array_equal(a, b) for a, b in zip(self.planes, other.planes))
        )

    __hash__ = None

    def tobytes(self):
        return b"".join(p.tobytes() for p in self.planes)

    def replace_planes(self, planes):
        return Frame(self.width, self.height, tuple(planes), self.chroma_format, self.source_size)


def pad_to_macroblock(frame: Frame) -> Frame:
    """Round both dimensions up to a multiple of 16 by edge replication."""
    pw = -(-frame.width // MB_SIZE) * MB_SIZE
    ph = -(-frame.height // MB_SIZE) * MB_SIZE
    if (pw, ph) == frame.size:
        return frame
    planes = [np.pad(frame.luma, ((0, ph - frame.height), (0, pw - frame.width)), mode="edge")]
    for plane in frame.planes[1:]:
        ch, cw = ph // 2, pw // 2
        planes.append(
            np.pad(plane, ((0, ch - plane.shape[0]), (0, cw - plane.shape[1])), mode="edge")
        )
    return Frame(pw, ph, tuple(planes), frame.chroma_format, frame.source_size)


def crop_to_source(frame: Frame) -> Frame:
    w, h = frame.source_size
    if (w, h) == frame.size:
        return frame
    planes = [frame.luma[:h, :w]]
    cw, ch = _chroma_size(w, h)
    planes += [p[:ch, :cw] for p in frame.planes[1:]]
    return Frame(w, h, tuple(planes), frame.chroma_format)


@dataclass(frozen=True)
class BlockRect:
    x: int
    y: int
    w: int = MB_SIZE
    h: int = MB_SIZE

    def __post_init__(self):
        if self.w not in (8, 16) or self.h not in (8, 16):
            raise ValueError(f"block extents must be 8 or 16, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError("block offsets must be non-negative")

    @property
    def slices(self):
        return slice(self.y, self.y + self.h), slice(self.x, self.x + self.w)

    def quadrants(self):
        half = self.w // 2
        return [
            BlockRect(self.x + ox, self.y + oy, half, half)
            for oy in (0, half)
            for ox in (0, half)
        ]


def partition_frame(width: int, height: int) -> list[BlockRect]:
    """Raster-order 16x16 macroblocks tiling a padded frame."""
    if width % MB_SIZE or height % MB_SIZE or width <= 0 or height <= 0:
        raise ValueError(f"frame size {width}x{height} is not a positive multiple of 16")
    return [
        BlockRect(x, y)
        for y in range(0, height, MB_SIZE)
        for x in range(0, width, MB_SIZE)
    ]


def _check_coord(v):
    v = float(v)
    if not math.isfinite(v):
        raise PoseRangeError(f"non-finite pose coordinate {v!r}")
    if v < 0.0 or v > POSE_MAX:
        raise PoseRangeError(f"pose coordinate {v} outside [0, {POSE_MAX}]")
    return v


@dataclass(frozen=True)
class Pose:
    """13 joints as ``(x, y)`` pixel coordinates in ``JOINT_NAMES`` order."""

    joints: tuple

    def __post_init__(self):
        joints = tuple(tuple(j) for j in self.joints)
        if len(joints) != N_JOINTS:
            raise PoseCountError(f"expected {N_JOINTS} joints, got {len(joints)}")
        if any(len(j) != 2 for j in joints):
            raise PoseCountError("each joint must be an (x, y) pair")
        object.__setattr__(
            self, "joints", tuple((_check_coord(x), _check_coord(y)) for x, y in joints)
        )

    def as_array(self):
        return np.array(self.joints, dtype=np.float64)


@dataclass(frozen=True)
class QuantizedPose:
    """26 unsigned 16.8 fixed-point values, x then y per joint."""

    coords: tuple

    def __post_init__(self):
        coords = tuple(int(c) for c in self.coords)
        if len(coords) != 2 * N_JOINTS:
            raise PoseCountError(f"expected {2 * N_JOINTS} coordinates, got {len(coords)}")
        for c in coords:
            if not 0 <= c <= POSE_MAX_RAW:
                raise PoseRangeError(f"fixed-point value {c} does not fit in 24 bits")
        object.__setattr__(self, "coords", coords)

    def joint_raw(self, j):
        return self.coords[2 * j], self.coords[2 * j + 1]

    def rounded_positions(self):
        """Integer pixel position of every joint, ``(13, 2)`` int64."""
        raw = np.array(self.coords, dtype=np.int64).reshape(N_JOINTS, 2)
        return (raw + POSE_SCALE // 2) >> POSE_FRAC_BITS

    def raw_array(self):
        return np.array(self.coords, dtype=np.int64).reshape(N_JOINTS, 2)


def quantize_pose(pose: Pose) -> QuantizedPose:
    coords = []
    for x, y in pose.joints:
        coords.append(round_half_away(_check_coord(x) * POSE_SCALE))
        coords.append(round_half_away(_check_coord(y) * POSE_SCALE))
    return QuantizedPose(tuple(coords))


def dequantize_pose(qpose: QuantizedPose) -> Pose:
    c = qpose.coords
    return Pose(tuple((c[i] / POSE_SCALE, c[i + 1] / POSE_SCALE) for i in range(0, len(c), 2)))


@dataclass(frozen=True)
class EncoderConfig:
    qp: int = 28
    gop_size: int = 32
    search_range: int = 8
    forward_ref_mode: ForwardRefMode = ForwardRefMode.OFF
    mode_decision: ModeDecision = ModeDecision.SAD
    patch_radius: int = 24
    bump_radius: int = 4
    mb_size: int = field(default=MB_SIZE, init=False)

    def __post_init__(self):
        object.__setattr__(self, "forward_ref_mode", parse_forward_mode(self.forward_ref_mode))
        object.__setattr__(self, "mode_decision", ModeDecision(self.mode_decision))
        if not 0 <= self.qp <= 51:
            raise ValueError(f"qp must be in [0, 51], got {self.qp}")
        if not 1 <= self.gop_size <= 255:
            raise ValueError(f"gop_size must be in [1, 255], got {self.gop_size}")
        if not 1 <= self.search_range <= 64:
            raise ValueError(f"search_range must be in [1, 64], got {self.search_range}")
        if not 1 <= self.patch_radius <= 255:
            raise ValueError(f"patch_radius must be in [1, 255], got {self.patch_radius}")
        if not 1 <= self.bump_radius <= 255:
            raise ValueError(f"bump_radius must be in [1, 255], got {self.bump_radius}")


def parse_forward_mode(mode) -> ForwardRefMode:
    if isinstance(mode, ForwardRefMode):
        return mode
    if isinstance(mode, str):
        try:
            return ForwardRefMode[mode.upper()]
        except KeyError:
            raise ValueError(f"unknown forward reference mode {mode!r}") from None
    return ForwardRefMode(mode)


def poses_from_sequence(poses: Sequence) -> list[Pose]:
    out = []
    for p in poses:
        out.append(p if isinstance(p, Pose) else Pose(p))
    return out
