"""Bit-exact serialization for the ``.drf`` container.

Bits are MSB-first within each byte and multi-byte header fields are
big-endian. A stream is::

    header (17 bytes, +2 when flags bit 3 is set)
    frame_count byte-aligned frames
    CRC-32 of the decoded luma bytes (4 bytes)

Each frame is a frame-type bit, an optional 624-bit pose payload, the
raster-order macroblocks and zero padding to the next byte boundary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numba
import numpy as np

from .coded import (
    CodedFrame,
    FrameType,
    InterMacroblock,
    IntraMacroblock,
    MotionVector,
    Partition,
)
from .exceptions import CorruptStreamError, HeaderError, TruncatedStreamError
from .model import (
    N_JOINTS,
    POSE_FIELD_BITS,
    ChromaFormat,
    ForwardRefMode,
    QuantizedPose,
)

MAGIC = b"DRFC"
VERSION = 1
EOB = 64
MAX_LEADING_ZEROS = 32

FLAG_FORWARD = 0x01
FLAG_SYNTH_PARAMS = 0x08

_HEADER = struct.Struct(">4sBHHBBBBI")
HEADER_BYTES = _HEADER.size


def _zigzag_order():
    order = []
    for s in range(15):
        rows = range(min(s, 7), max(0, s - 7) - 1, -1)
        if s % 2:
            rows = reversed(list(rows))
        order.extend(r * 8 + (s - r) for r in rows)
    return tuple(order)


ZIGZAG = _zigzag_order()


class BitWriter:
    """Append-only MSB-first bit sink."""

    def __init__(self):
        self._chunks = []
        self._nbits = 0

    def __len__(self):
        return self._nbits

    @property
    def bit_position(self):
        return self._nbits

    def write_bits(self, value: int, nbits: int):
        if nbits == 0:
            return
        if value < 0 or value >> nbits:
            raise ValueError(f"{value} does not fit in {nbits} bits")
        self._chunks.append(format(value, f"0{nbits}b"))
        self._nbits += nbits

    def write_bit(self, bit):
        self._chunks.append("1" if bit else "0")
        self._nbits += 1

    def write_ue(self, v: int):
        if v < 0:
            raise ValueError(f"ue(v) needs v >= 0, got {v}")
        code = _ue_code(v)
        self._chunks.append(code)
        self._nbits += len(code)

    def write_se(self, v: int):
        self.write_ue(2 * v - 1 if v > 0 else -2 * v)

    def align(self):
        pad = -self._nbits % 8
        if pad:
            self.write_bits(0, pad)

    def write_bytes(self, data: bytes):
        if self._nbits % 8:
            raise ValueError("write_bytes requires byte alignment")
        for b in data:
            self.write_bits(b, 8)

    def getvalue(self) -> bytes:
        if self._nbits % 8:
            raise ValueError("stream is not byte-aligned")
        bits = "".join(self._chunks)
        self._chunks = [bits]
        if not bits:
            return b""
        return int(bits, 2).to_bytes(len(bits) // 8, "big")


class BitReader:
    """MSB-first bit source over a byte string."""

    def __init__(self, data: bytes, pos: int = 0):
        self._bits = bin(int.from_bytes(data, "big"))[2:].zfill(8 * len(data)) if data else ""
        self.pos = pos
        self.frame_index = None
        self._data = data
        self._array = None

    @property
    def bit_array(self):
        """The stream as a uint8 array of single bits."""
        if self._array is None:
            self._array = np.unpackbits(np.frombuffer(self._data, dtype=np.uint8))
        return self._array

    @property
    def remaining(self):
        return len(self._bits) - self.pos

    def _need(self, n):
        if self.pos + n > len(self._bits):
            raise TruncatedStreamError("unexpected end of stream", self.frame_index)

    def read_bits(self, n: int) -> int:
        if n == 0:
            return 0
        self._need(n)
        v = int(self._bits[self.pos:self.pos + n], 2)
        self.pos += n
        return v

    def read_bit(self) -> int:
        self._need(1)
        b = self._bits[self.pos] == "1"
        self.pos += 1
        return int(b)

    def read_ue(self) -> int:
        one = self._bits.find("1", self.pos, self.pos + MAX_LEADING_ZEROS + 1)
        if one < 0:
            if self.pos + MAX_LEADING_ZEROS + 1 > len(self._bits):
                raise TruncatedStreamError("unexpected end of stream", self.frame_index)
            raise CorruptStreamError("Exp-Golomb prefix longer than 32 zeros", self.frame_index)
        n = one - self.pos
        self._need(2 * n + 1)
        v = int(self._bits[one:one + n + 1], 2) - 1
        self.pos = one + n + 1
        return v

    def read_se(self) -> int:
        k = self.read_ue()
        return (k + 1) // 2 if k % 2 else -(k // 2)

    def align(self):
        pad = -self.pos % 8
        if pad:
            if self.read_bits(pad):
                raise CorruptStreamError("non-zero alignment padding", self.frame_index)

    def read_bytes(self, n: int) -> bytes:
        if self.pos % 8:
            raise ValueError("read_bytes requires byte alignment")
        return bytes(self.read_bits(8) for _ in range(n))


_UE_CACHE = {}


def _ue_code(v):
    code = _UE_CACHE.get(v)
    if code is None:
        b = bin(v + 1)[2:]
        code = "0" * (len(b) - 1) + b
        if v < 1 << 14:
            _UE_CACHE[v] = code
    return code


_EOB_CODE = _ue_code(EOB)


def ue_bits(v: int) -> int:
    return 2 * (v + 1).bit_length() - 1


def se_bits(v: int) -> int:
    return ue_bits(2 * v - 1 if v > 0 else -2 * v)


def mv_bits(mv: MotionVector, with_ref_bit: bool) -> int:
    """Exact cost of the (ref_index, mv) syntax of one partition."""
    return se_bits(mv.dx) + se_bits(mv.dy) + (1 if with_ref_bit else 0)


def code_coeff_block(writer: BitWriter, levels):
    """Zigzag run-level code of a 64-tuple (raster order) of levels."""
    parts = []
    last = -1
    for pos, idx in enumerate(ZIGZAG):
        level = levels[idx]
        if level:
            parts.append(_ue_code(pos - last - 1))
            parts.append(_ue_code(2 * level - 1 if level > 0 else -2 * level))
            last = pos
    parts.append(_EOB_CODE)
    code = "".join(parts)
    writer._chunks.append(code)
    writer._nbits += len(code)


def decode_coeff_block(reader: BitReader) -> tuple:
    # inlined Exp-Golomb parsing: this is the decoder's hot loop
    bits = reader._bits
    n = len(bits)
    p = reader.pos
    levels = [0] * 64
    pos = -1
    want_run = True
    while True:
        one = bits.find("1", p, p + MAX_LEADING_ZEROS + 1)
        if one < 0:
            reader.pos = p
            if p + MAX_LEADING_ZEROS + 1 > n:
                raise TruncatedStreamError("unexpected end of stream", reader.frame_index)
            raise CorruptStreamError("Exp-Golomb prefix longer than 32 zeros", reader.frame_index)
        end = 2 * one - p + 1
        if end > n:
            reader.pos = p
            raise TruncatedStreamError("unexpected end of stream", reader.frame_index)
        v = int(bits[one:end], 2) - 1
        p = end
        if want_run:
            if v == EOB:
                break
            pos += v + 1
            if v > EOB or pos > 63:
                reader.pos = p
                raise CorruptStreamError("coefficient scan overrun", reader.frame_index)
        else:
            if v == 0:
                reader.pos = p
                raise CorruptStreamError("zero level in run-level pair", reader.frame_index)
            levels[ZIGZAG[pos]] = (v + 1) // 2 if v % 2 else -(v // 2)
        want_run = not want_run
    reader.pos = p
    if pos < 0:
        raise CorruptStreamError("coded block with no coefficients", reader.frame_index)
    return tuple(levels)


def _write_block(writer, block):
    writer.write_bit(block is not None)
    if block is not None:
        code_coeff_block(writer, block)


def _read_block(reader):
    if reader.read_bit():
        return decode_coeff_block(reader)
    return None


def write_pose(writer: BitWriter, pose: QuantizedPose):
    for c in pose.coords:
        writer.write_bits(c, POSE_FIELD_BITS)


def read_pose(reader: BitReader) -> QuantizedPose:
    return QuantizedPose(tuple(reader.read_bits(POSE_FIELD_BITS) for _ in range(2 * N_JOINTS)))


@dataclass(frozen=True)
class StreamLayout:
    """What the frame syntax depends on: carried by the container header."""

    mb_count: int
    forward: bool
    pose_payload: bool
    n_chroma: int


_ZIGZAG_ARR = np.array(ZIGZAG)


def coeff_block_codes(blocks) -> list:
    """Run-level code strings for many blocks at once.

    ``blocks`` is a sequence of 64-tuples (raster order), none all-zero; the
    result matches :func:`code_coeff_block` block by block.
    """
    if not len(blocks):
        return []
    scanned = np.asarray(blocks, dtype=np.int64)[:, _ZIGZAG_ARR]
    bi, pos = np.nonzero(scanned)
    lv = scanned[bi, pos]
    first = np.ones(len(bi), dtype=bool)
    first[1:] = bi[1:] != bi[:-1]
    prev = np.empty_like(pos)
    prev[0] = -1
    prev[1:] = pos[:-1]
    prev[first] = -1
    syms = np.empty(2 * len(bi), dtype=np.int64)
    syms[0::2] = pos - prev - 1
    syms[1::2] = np.where(lv > 0, 2 * lv - 1, -2 * lv)
    codes = [_ue_code(v) for v in syms.tolist()]
    counts = 2 * np.bincount(bi, minlength=len(scanned))
    out, o = [], 0
    for c in counts.tolist():
        out.append("".join(codes[o:o + c]) + _EOB_CODE)
        o += c
    return out


def _frame_blocks(coded: CodedFrame):
    for mb in coded.macroblocks:
        if coded.frame_type is FrameType.I:
            yield from mb.blocks
        else:
            for part in mb.partitions:
                yield from part.blocks
        yield from mb.chroma


def write_frame(writer: BitWriter, coded: CodedFrame, layout: StreamLayout):
    writer.write_bit(coded.frame_type is FrameType.P)
    if layout.pose_payload:
        if coded.pose_payload is None:
            raise ValueError("stream carries pose payloads but the frame has none")
        write_pose(writer, coded.pose_payload)
    elif coded.pose_payload is not None:
        raise ValueError("stream layout has no pose payload")
    if len(coded.macroblocks) != layout.mb_count:
        raise ValueError(f"expected {layout.mb_count} macroblocks, got {len(coded.macroblocks)}")
    codes = iter(coeff_block_codes([b for b in _frame_blocks(coded) if b is not None]))
    out = writer._chunks

    def block(b):
        if b is None:
            out.append("0")
        else:
            out.append("1")
            out.append(next(codes))

    for mb in coded.macroblocks:
        if coded.frame_type is FrameType.I:
            for b in mb.blocks:
                block(b)
        else:
            out.append("1" if mb.split else "0")
            for part in mb.partitions:
                if layout.forward:
                    out.append("1" if part.ref_index else "0")
                elif part.ref_index:
                    raise ValueError("forward reference used in a backward-only stream")
                dx, dy = part.mv.dx, part.mv.dy
                out.append(_ue_code(2 * dx - 1 if dx > 0 else -2 * dx))
                out.append(_ue_code(2 * dy - 1 if dy > 0 else -2 * dy))
                for b in part.blocks:
                    block(b)
        for b in mb.chroma:
            block(b)
    # resync the bit count from the appended chunks
    writer._chunks = ["".join(out)]
    writer._nbits = len(writer._chunks[0])
    writer.align()


def read_frame_reference(reader: BitReader, layout: StreamLayout, frame_index=None) -> CodedFrame:
    """Symbol-by-symbol frame parser; :func:`read_frame` must agree with it."""
    reader.frame_index = frame_index
    frame_type = FrameType(reader.read_bit())
    pose = read_pose(reader) if layout.pose_payload else None
    mbs = []
    for _ in range(layout.mb_count):
        if frame_type is FrameType.I:
            blocks = tuple(_read_block(reader) for _ in range(4))
            chroma = tuple(_read_block(reader) for _ in range(layout.n_chroma))
            mbs.append(IntraMacroblock(blocks, chroma))
            continue
        split = bool(reader.read_bit())
        parts = []
        for _ in range(4 if split else 1):
            ref = reader.read_bit() if layout.forward else 0
            mv = MotionVector(reader.read_se(), reader.read_se())
            blocks = tuple(_read_block(reader) for _ in range(1 if split else 4))
            parts.append(Partition(ref, mv, blocks))
        chroma = tuple(_read_block(reader) for _ in range(layout.n_chroma))
        mbs.append(InterMacroblock(split, tuple(parts), chroma))
    reader.align()
    reader.frame_index = None
    return CodedFrame(frame_type, tuple(mbs), pose)


# error codes of the compiled parser
_OK, _TRUNC, _LONG_PREFIX, _OVERRUN, _ZERO_LEVEL, _EMPTY_BLOCK, _PADDING = range(7)
_PARSE_ERRORS = {
    _LONG_PREFIX: "Exp-Golomb prefix longer than 32 zeros",
    _OVERRUN: "coefficient scan overrun",
    _ZERO_LEVEL: "zero level in run-level pair",
    _EMPTY_BLOCK: "coded block with no coefficients",
    _PADDING: "non-zero alignment padding",
}


@numba.njit(cache=True, nogil=True)
def _jit_ue(bits, p):
    n = bits.shape[0]
    lz = 0
    while True:
        if p >= n:
            return 0, p, _TRUNC
        if bits[p]:
            break
        lz += 1
        p += 1
        if lz > MAX_LEADING_ZEROS:
            return 0, p, _LONG_PREFIX
    if p + lz + 1 > n:
        return 0, p, _TRUNC
    v = 0
    for k in range(lz + 1):
        v = (v << 1) | bits[p + k]
    return v - 1, p + lz + 1, _OK


@numba.njit(cache=True, nogil=True)
def _jit_block(bits, p, zigzag, out):
    pos = -1
    while True:
        run, p, err = _jit_ue(bits, p)
        if err:
            return p, err
        if run == EOB:
            break
        pos += run + 1
        if run > EOB or pos > 63:
            return p, _OVERRUN
        code, p, err = _jit_ue(bits, p)
        if err:
            return p, err
        if code == 0:
            return p, _ZERO_LEVEL
        out[zigzag[pos]] = (code + 1) // 2 if code % 2 else -(code // 2)
    if pos < 0:
        return p, _EMPTY_BLOCK
    return p, _OK


@numba.njit(cache=True, nogil=True)
def _jit_parse_frame(bits, p, mb_count, forward, pose_payload, n_chroma, zigzag,
                     pose, split, ref, mv, cbf, levels):
    """Parse one frame into preallocated arrays; returns ``(pos, frame_type, err)``.

    Per macroblock, block slots 0..3 are the luma transform blocks in raster
    order inside the macroblock and slots 4.. the chroma blocks.
    """
    n = bits.shape[0]
    if p >= n:
        return p, 0, _TRUNC
    ftype = bits[p]
    p += 1
    if pose_payload:
        if p + 24 * pose.shape[0] > n:
            return p, ftype, _TRUNC
        for i in range(pose.shape[0]):
            v = 0
            for k in range(24):
                v = (v << 1) | bits[p + k]
            pose[i] = v
            p += 24
    for m in range(mb_count):
        if ftype == 0:
            for b in range(4 + n_chroma):
                if p >= n:
                    return p, ftype, _TRUNC
                cbf[m, b] = bits[p]
                p += 1
                if cbf[m, b]:
                    p, err = _jit_block(bits, p, zigzag, levels[m, b])
                    if err:
                        return p, ftype, err
            continue
        if p >= n:
            return p, ftype, _TRUNC
        split[m] = bits[p]
        p += 1
        nparts = 4 if split[m] else 1
        per_part = 1 if split[m] else 4
        for q in range(nparts):
            if forward:
                if p >= n:
                    return p, ftype, _TRUNC
                ref[m, q] = bits[p]
                p += 1
            for c in range(2):
                code, p, err = _jit_ue(bits, p)
                if err:
                    return p, ftype, err
                mv[m, q, c] = (code + 1) // 2 if code % 2 else -(code // 2)
            for k in range(per_part):
                b = q * per_part + k
                if p >= n:
                    return p, ftype, _TRUNC
                cbf[m, b] = bits[p]
                p += 1
                if cbf[m, b]:
                    p, err = _jit_block(bits, p, zigzag, levels[m, b])
                    if err:
                        return p, ftype, err
        for b in range(4, 4 + n_chroma):
            if p >= n:
                return p, ftype, _TRUNC
            cbf[m, b] = bits[p]
            p += 1
            if cbf[m, b]:
                p, err = _jit_block(bits, p, zigzag, levels[m, b])
                if err:
                    return p, ftype, err
    pad = (-p) % 8
    if p + pad > n:
        return p, ftype, _TRUNC
    for k in range(pad):
        if bits[p + k]:
            return p, ftype, _PADDING
    return p + pad, ftype, _OK


def _block_tuple(flag, row):
    return tuple(row.tolist()) if flag else None


def read_frame(reader: BitReader, layout: StreamLayout, frame_index=None) -> CodedFrame:
    """Parse one byte-aligned frame starting at the reader's position."""
    m = layout.mb_count
    nb = 4 + layout.n_chroma
    pose = np.zeros(2 * N_JOINTS, dtype=np.int64)
    split = np.zeros(m, dtype=np.uint8)
    ref = np.zeros((m, 4), dtype=np.int64)
    mv = np.zeros((m, 4, 2), dtype=np.int64)
    cbf = np.zeros((m, nb), dtype=np.uint8)
    levels = np.zeros((m, nb, 64), dtype=np.int64)
    end, ftype, err = _jit_parse_frame(
        reader.bit_array, reader.pos, m, layout.forward, layout.pose_payload,
        layout.n_chroma, _ZIGZAG_ARR, pose, split, ref, mv, cbf, levels,
    )
    reader.pos = end
    if err == _TRUNC:
        raise TruncatedStreamError("unexpected end of stream", frame_index)
    if err:
        raise CorruptStreamError(_PARSE_ERRORS[err], frame_index)
    frame_type = FrameType(int(ftype))
    mbs = []
    for i in range(m):
        flags = cbf[i].tolist()
        chroma = tuple(_block_tuple(flags[b], levels[i, b]) for b in range(4, nb))
        if frame_type is FrameType.I:
            blocks = tuple(_block_tuple(flags[b], levels[i, b]) for b in range(4))
            mbs.append(IntraMacroblock(blocks, chroma))
            continue
        if split[i]:
            parts = tuple(
                Partition(int(ref[i, q]), MotionVector(int(mv[i, q, 0]), int(mv[i, q, 1])),
                          (_block_tuple(flags[q], levels[i, q]),))
                for q in range(4)
            )
        else:
            parts = (Partition(
                int(ref[i, 0]), MotionVector(int(mv[i, 0, 0]), int(mv[i, 0, 1])),
                tuple(_block_tuple(flags[b], levels[i, b]) for b in range(4)),
            ),)
        mbs.append(InterMacroblock(bool(split[i]), parts, chroma))
    qpose = QuantizedPose(tuple(pose.tolist())) if layout.pose_payload else None
    return CodedFrame(frame_type, tuple(mbs), qpose)


@dataclass(frozen=True)
class ContainerHeader:
    width: int
    height: int
    chroma_format: ChromaFormat
    gop_size: int
    qp: int
    forward_mode: ForwardRefMode
    frame_count: int
    bump_radius: int = 4
    patch_radius: int = 24

    @property
    def flags(self):
        flags = int(self.forward_mode) << 1
        if self.forward_mode is not ForwardRefMode.OFF:
            flags |= FLAG_FORWARD
        if (self.bump_radius, self.patch_radius) != (4, 24):
            flags |= FLAG_SYNTH_PARAMS
        return flags

    def pack(self) -> bytes:
        data = _HEADER.pack(
            MAGIC, VERSION, self.width, self.height, int(self.chroma_format),
            self.gop_size, self.qp, self.flags, self.frame_count,
        )
        if self.flags & FLAG_SYNTH_PARAMS:
            data += bytes((self.bump_radius, self.patch_radius))
        return data

    @classmethod
    def unpack(cls, data: bytes):
        """Parse a header from the start of ``data``; returns (header, size)."""
        if len(data) < HEADER_BYTES:
            raise HeaderError("stream shorter than the container header")
        magic, version, w, h, chroma, gop, qp, flags, count = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise HeaderError(f"bad magic {magic!r}")
        if version != VERSION:
            raise HeaderError(f"unsupported version {version}")
        if flags & ~0x0F:
            raise HeaderError(f"unknown flag bits {flags:#04x}")
        try:
            chroma = ChromaFormat(chroma)
        except ValueError:
            raise HeaderError(f"unknown chroma format {chroma}") from None
        mode = ForwardRefMode((flags >> 1) & 0x03)
        if bool(flags & FLAG_FORWARD) != (mode is not ForwardRefMode.OFF):
            raise HeaderError("forward flag inconsistent with synth mode")
        if w == 0 or h == 0 or gop == 0 or qp > 51:
            raise HeaderError("header field out of range")
        size = HEADER_BYTES
        bump, patch = 4, 24
        if flags & FLAG_SYNTH_PARAMS:
            if len(data) < size + 2:
                raise HeaderError("stream shorter than the container header")
            bump, patch = data[size], data[size + 1]
            if bump == 0 or patch == 0:
                raise HeaderError("synthesis radius must be positive")
            size += 2
        return cls(w, h, chroma, gop, qp, mode, count, bump, patch), size
