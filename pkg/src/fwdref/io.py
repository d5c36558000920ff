"""Readers and writers for Y4M video, binary PGM and pose JSON.

Readers reject malformed input instead of repairing it. Frame numbers in
error messages are 1-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    BadSignatureError,
    FormatError,
    PoseCountError,
    PoseRangeError,
    TruncatedFrameError,
    UnsupportedFormatError,
)
from .model import N_JOINTS, POSE_MAX, ChromaFormat, Frame, Pose

Y4M_SIGNATURE = b"YUV4MPEG2"
_Y4M_COLORSPACES = {
    "mono": ChromaFormat.MONO,
    "420": ChromaFormat.C420,
    "420jpeg": ChromaFormat.C420,
    "420mpeg2": ChromaFormat.C420,
    "420paldv": ChromaFormat.C420,
}


@dataclass
class Y4MInfo:
    width: int
    height: int
    chroma_format: ChromaFormat
    params: list = field(default_factory=list)  # header tokens after the signature
    frame_params: list = field(default_factory=list)  # per-frame FRAME line tokens

    @property
    def frame_rate(self):
        for tok in self.params:
            if tok.startswith("F"):
                return tok[1:]
        return None


def _plane_sizes(width, height, fmt):
    sizes = [width * height]
    if fmt is ChromaFormat.C420:
        c = ((width + 1) // 2) * ((height + 1) // 2)
        sizes += [c, c]
    return sizes


def read_y4m(stream):
    """Parse a Y4M stream into ``(frames, Y4MInfo)``."""
    line = stream.readline()
    if not line.startswith(Y4M_SIGNATURE + b" ") or not line.endswith(b"\n"):
        raise BadSignatureError("missing YUV4MPEG2 signature")
    tokens = line[len(Y4M_SIGNATURE):].decode("ascii").split()
    width = height = None
    fmt = ChromaFormat.C420
    for tok in tokens:
        key, val = tok[0], tok[1:]
        if key == "W":
            width = int(val)
        elif key == "H":
            height = int(val)
        elif key == "C":
            if val not in _Y4M_COLORSPACES:
                raise UnsupportedFormatError(f"unsupported Y4M colorspace C{val}")
            fmt = _Y4M_COLORSPACES[val]
    if not width or not height or width <= 0 or height <= 0:
        raise FormatError("Y4M header lacks valid W/H parameters")
    info = Y4MInfo(width, height, fmt, tokens)
    sizes = _plane_sizes(width, height, fmt)
    frame_bytes = sum(sizes)
    frames = []
    while True:
        marker = stream.readline()
        if not marker:
            break
        n = len(frames) + 1
        if not marker.startswith(b"FRAME") or not marker.endswith(b"\n"):
            raise FormatError(f"frame {n}: bad FRAME marker")
        info.frame_params.append(marker[5:].decode("ascii").split())
        payload = stream.read(frame_bytes)
        if len(payload) != frame_bytes:
            raise TruncatedFrameError(
                f"frame {n}: payload has {len(payload)} of {frame_bytes} bytes", n
            )
        planes, off = [], 0
        for size in sizes:
            planes.append(np.frombuffer(payload, dtype=np.uint8, count=size, offset=off))
            off += size
        frames.append(Frame(width, height, tuple(planes), fmt))
    return frames, info


def write_y4m(stream, frames, info: Y4MInfo = None, frame_rate="30:1"):
    """Write frames as Y4M; reuses ``info``'s header and FRAME tokens if given."""
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to write")
    first = frames[0]
    if info is not None:
        tokens = info.params
    else:
        cs = "mono" if first.chroma_format is ChromaFormat.MONO else "420jpeg"
        tokens = [f"W{first.width}", f"H{first.height}", f"F{frame_rate}", "Ip", "A1:1", f"C{cs}"]
    stream.write(Y4M_SIGNATURE + b" " + " ".join(tokens).encode("ascii") + b"\n")
    for i, f in enumerate(frames):
        extra = info.frame_params[i] if info is not None and i < len(info.frame_params) else []
        stream.write(b"FRAME" + "".join(" " + t for t in extra).encode("ascii") + b"\n")
        stream.write(f.tobytes())


def _pgm_token(data, pos):
    n = len(data)
    while pos < n:
        c = data[pos:pos + 1]
        if c == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not data[pos:pos + 1].isspace():
        pos += 1
    if start == pos:
        raise FormatError("truncated PGM header")
    return data[start:pos], pos


def read_pgm(stream) -> Frame:
    data = stream.read()
    if data[:2] != b"P5":
        if data[:2] == b"P2":
            raise UnsupportedFormatError("ASCII PGM (P2) is not supported")
        raise BadSignatureError("not a binary PGM (P5) file")
    pos = 2
    vals = []
    for _ in range(3):
        tok, pos = _pgm_token(data, pos)
        try:
            vals.append(int(tok))
        except ValueError:
            raise FormatError(f"bad PGM header field {tok!r}") from None
    width, height, maxval = vals
    if maxval != 255:
        raise UnsupportedFormatError(f"PGM maxval {maxval} is not 255")
    if width <= 0 or height <= 0:
        raise FormatError("PGM dimensions must be positive")
    pos += 1  # single whitespace after maxval
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise TruncatedFrameError("PGM raster is truncated", 1)
    return Frame(width, height, (np.frombuffer(body, dtype=np.uint8),))


def write_pgm(stream, frame: Frame):
    stream.write(f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii"))
    stream.write(frame.luma.tobytes())


@dataclass
class PoseDocument:
    name: str
    width: int
    height: int
    poses: list

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise FormatError("pose document dimensions must be positive")

    def __len__(self):
        return len(self.poses)

    def to_json(self):
        return {
            "name": self.name,
            "width": self.width,
            "height": self.height,
            "frames": [{"joints": [list(j) for j in p.joints]} for p in self.poses],
        }


def _parse_pose(joints, n):
    if not isinstance(joints, list) or len(joints) != N_JOINTS:
        count = len(joints) if isinstance(joints, list) else "no"
        raise PoseCountError(f"frame {n}: expected {N_JOINTS} joints, got {count}")
    coords = []
    for j in joints:
        if not isinstance(j, (list, tuple)) or len(j) != 2:
            raise PoseCountError(f"frame {n}: joint is not an [x, y] pair")
        pair = []
        for v in j:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise FormatError(f"frame {n}: joint coordinate {v!r} is not a number")
            v = float(v)
            if not math.isfinite(v):
                raise PoseRangeError(f"frame {n}: non-finite joint coordinate")
            if not 0.0 <= v <= POSE_MAX:
                raise PoseRangeError(f"frame {n}: coordinate {v} outside [0, {POSE_MAX}]")
            pair.append(v)
        coords.append(tuple(pair))
    return Pose(tuple(coords))


def read_pose_json(stream) -> PoseDocument:
    try:
        doc = json.load(stream)
    except ValueError as exc:
        raise FormatError(f"invalid pose JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("pose JSON must be an object")
    for key, typ in (("name", str), ("width", int), ("height", int), ("frames", list)):
        if not isinstance(doc.get(key), typ) or isinstance(doc.get(key), bool):
            raise FormatError(f"pose JSON field {key!r} missing or of the wrong type")
    poses = []
    for n, entry in enumerate(doc["frames"], start=1):
        if not isinstance(entry, dict) or "joints" not in entry:
            raise FormatError(f"frame {n}: missing 'joints'")
        poses.append(_parse_pose(entry["joints"], n))
    return PoseDocument(doc["name"], doc["width"], doc["height"], poses)


def write_pose_json(stream, doc: PoseDocument):
    json.dump(doc.to_json(), stream, separators=(",", ":"))
    stream.write("\n")
