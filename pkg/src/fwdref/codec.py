"""Closed-loop encoder and decoder.

Every P-frame in a GOP is predicted from the GOP's decoded I-frame
(reference 0) and, when enabled, a forward reference synthesized for the
current time instant (reference 1). The decoder rebuilds the forward
reference from the decoded I-frame and the transmitted quantized poses, so
its output matches the encoder's reconstruction byte for byte.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bitstream import (
    BitReader,
    BitWriter,
    ContainerHeader,
    StreamLayout,
    read_frame,
    write_frame,
)
from .coded import (
    CodedFrame,
    FrameType,
    InterMacroblock,
    IntraMacroblock,
    MotionVector,
    Partition,
    pack_block,
    unpack_block,
)
from .exceptions import (
    ChecksumMismatchError,
    CorruptStreamError,
    DimensionMismatchError,
    HeaderError,
    PoseCountError,
)
from .model import (
    MB_SIZE,
    ChromaFormat,
    EncoderConfig,
    ForwardRefMode,
    Frame,
    crop_to_source,
    pad_to_macroblock,
)
from .motion import BACKWARD, fetch_block, search_frame, try_split
from .synth import SynthInputs, as_quantized, load_external_forward_frame, synthesize
from .transform import forward_code, from_blocks, inverse_code, to_blocks


@dataclass
class FrameStats:
    """Encoder-side diagnostics for one frame.

    ``mb_sad`` holds the chosen luma prediction SAD of every macroblock
    (zeros for I-frames), ``mb_ref`` the reference index of each 8x8 luma
    block.
    """

    index: int
    frame_type: FrameType
    bits: int
    mb_sad: np.ndarray
    mb_split: np.ndarray
    mb_ref: np.ndarray


@dataclass
class EncodedSequence:
    data: bytes
    reconstruction: list
    stats: list = field(default_factory=list)
    coded_frames: list = field(default_factory=list)

    @property
    def total_bits(self):
        return 8 * len(self.data)

    @property
    def frame_bits(self):
        return [s.bits for s in self.stats]


def _n_chroma(frame):
    return 2 if frame.chroma_format is ChromaFormat.C420 else 0


def _residual_code(src_planes, pred_planes, qp):
    """Transform-code ``src - pred`` per plane and reconstruct.

    Returns per-plane level stacks ``(n, 8, 8)`` and reconstructed uint8
    planes.
    """
    levels, recon = [], []
    for src, pred in zip(src_planes, pred_planes):
        res = src.astype(np.int64) - pred
        lv = forward_code(to_blocks(res), qp)
        levels.append(lv)
        recon.append(_reconstruct_plane(pred, lv, qp))
    return levels, recon


def _reconstruct_plane(pred, levels, qp):
    h, w = pred.shape
    res = from_blocks(inverse_code(levels, qp), h, w)
    return np.clip(pred + res, 0, 255).astype(np.uint8)


def _luma_block_index(my, mx, q, nbx):
    return (2 * my + q // 2) * nbx + 2 * mx + q % 2


def encode_i_frame(x: Frame, cfg: EncoderConfig):
    """Intra-code every 8x8 block independently (no spatial prediction)."""
    x = pad_to_macroblock(x)
    zero = [np.zeros(p.shape, dtype=np.int64) for p in x.planes]
    levels, recon = _residual_code(x.planes, zero, cfg.qp)
    nmy, nmx = x.height // MB_SIZE, x.width // MB_SIZE
    nbx = 2 * nmx
    mbs = []
    for my in range(nmy):
        for mx in range(nmx):
            blocks = tuple(pack_block(levels[0][_luma_block_index(my, mx, q, nbx)]) for q in range(4))
            chroma = tuple(pack_block(lv[my * nmx + mx]) for lv in levels[1:])
            mbs.append(IntraMacroblock(blocks, chroma))
    return CodedFrame(FrameType.I, tuple(mbs)), x.replace_planes(recon)


def _decode_i_frame(coded: CodedFrame, template: Frame, qp):
    nmx = template.width // MB_SIZE
    nbx = 2 * nmx
    levels = [np.zeros((p.size // 64, 8, 8), dtype=np.int64) for p in template.planes]
    for i, mb in enumerate(coded.macroblocks):
        if not isinstance(mb, IntraMacroblock):
            raise CorruptStreamError("inter macroblock in an I-frame")
        my, mx = divmod(i, nmx)
        for q, block in enumerate(mb.blocks):
            levels[0][_luma_block_index(my, mx, q, nbx)] = unpack_block(block)
        for c, block in enumerate(mb.chroma):
            levels[1 + c][i] = unpack_block(block)
    recon = [
        _reconstruct_plane(np.zeros(p.shape, dtype=np.int64), lv, qp)
        for p, lv in zip(template.planes, levels)
    ]
    return template.replace_planes(recon)


_MARGIN = 64 + MB_SIZE


class _ClampedPlane:
    """A plane with an edge-replicated margin so most fetches are plain slices."""

    def __init__(self, plane):
        self.plane = plane
        self.padded = np.pad(plane, _MARGIN, mode="edge")

    def fetch(self, x, y, size):
        h, w = self.plane.shape
        if -_MARGIN <= x and x + size <= w + _MARGIN and -_MARGIN <= y and y + size <= h + _MARGIN:
            return self.padded[y + _MARGIN:y + _MARGIN + size, x + _MARGIN:x + _MARGIN + size]
        return fetch_block(self.plane, x, y, size, size)


def _predict(refs, macroblocks, template: Frame):
    """Motion-compensated prediction planes (int64) for an inter frame."""
    preds = [np.empty(p.shape, dtype=np.int64) for p in template.planes]
    clamped = [[_ClampedPlane(p) for p in ref.planes] for ref in refs]
    nmx = template.width // MB_SIZE
    for i, mb in enumerate(macroblocks):
        my, mx = divmod(i, nmx)
        x0, y0 = mx * MB_SIZE, my * MB_SIZE
        size = MB_SIZE // 2 if mb.split else MB_SIZE
        for q, part in enumerate(mb.partitions):
            if part.ref_index >= len(refs):
                raise CorruptStreamError("reference index without a forward reference")
            planes = clamped[part.ref_index]
            px = x0 + (q % 2) * size
            py = y0 + (q // 2) * size
            mv = part.mv
            preds[0][py:py + size, px:px + size] = planes[0].fetch(px + mv.dx, py + mv.dy, size)
            cmv = mv.halved()
            cs, cx, cy = size // 2, px // 2, py // 2
            for c in range(1, len(preds)):
                preds[c][cy:cy + cs, cx:cx + cs] = planes[c].fetch(cx + cmv.dx, cy + cmv.dy, cs)
    return preds


def _candidate(result, kind, row, col):
    mv = result.mv16 if kind == 16 else result.mv8
    s = result.sad16 if kind == 16 else result.sad8
    return MotionVector(int(mv[row, col, 0]), int(mv[row, col, 1])), int(s[row, col])


def encode_p_frame(x: Frame, backward: Frame, forward: Optional[Frame], cfg: EncoderConfig):
    """Code ``x`` against the decoded I-frame and an optional forward reference.

    Returns ``(CodedFrame, reconstruction, FrameStats)``; the stats index is
    left at 0 for the caller to fill in.
    """
    x = pad_to_macroblock(x)
    refs = [pad_to_macroblock(backward)]
    if forward is not None:
        refs.append(pad_to_macroblock(forward))
    for ref in refs:
        if ref.size != x.size or ref.chroma_format != x.chroma_format:
            raise DimensionMismatchError(f"reference {ref.size} does not match frame {x.size}")
    searches = [search_frame(x.luma, ref.luma, cfg.search_range) for ref in refs]
    nmy, nmx = x.height // MB_SIZE, x.width // MB_SIZE
    mb_sad = np.zeros((nmy, nmx), dtype=np.int64)
    mb_split = np.zeros((nmy, nmx), dtype=bool)
    mb_ref = np.zeros((2 * nmy, 2 * nmx), dtype=np.int8)
    choices = []
    for my in range(nmy):
        for mx in range(nmx):
            whole = [_candidate(s, 16, my, mx) for s in searches]
            quads = [
                [_candidate(s, 8, 2 * my + q // 2, 2 * mx + q % 2) for s in searches]
                for q in range(4)
            ]
            if forward is None:
                whole.append(None)
                for cand in quads:
                    cand.append(None)
            choice = try_split(whole, quads, mode=cfg.mode_decision, qp=cfg.qp)
            choices.append(choice)
            mb_sad[my, mx] = choice.sad
            mb_split[my, mx] = choice.split
            refs_here = [p.ref_index for p in choice.partitions]
            mb_ref[2 * my:2 * my + 2, 2 * mx:2 * mx + 2] = np.reshape(
                refs_here * 4 if len(refs_here) == 1 else refs_here, (2, 2)
            )
    skeleton = [
        InterMacroblock(c.split, tuple(Partition(p.ref_index, p.mv, ()) for p in c.partitions))
        for c in choices
    ]
    preds = _predict(refs, skeleton, x)
    levels, recon = _residual_code(x.planes, preds, cfg.qp)
    nbx = 2 * nmx
    mbs = []
    for i, mb in enumerate(skeleton):
        my, mx = divmod(i, nmx)
        if mb.split:
            parts = tuple(
                Partition(p.ref_index, p.mv, (pack_block(levels[0][_luma_block_index(my, mx, q, nbx)]),))
                for q, p in enumerate(mb.partitions)
            )
        else:
            p = mb.partitions[0]
            blocks = tuple(pack_block(levels[0][_luma_block_index(my, mx, q, nbx)]) for q in range(4))
            parts = (Partition(p.ref_index, p.mv, blocks),)
        chroma = tuple(pack_block(lv[i]) for lv in levels[1:])
        mbs.append(InterMacroblock(mb.split, parts, chroma))
    stats = FrameStats(0, FrameType.P, 0, mb_sad, mb_split, mb_ref)
    return CodedFrame(FrameType.P, tuple(mbs)), x.replace_planes(recon), stats


def _decode_p_frame(coded: CodedFrame, refs, template: Frame, qp):
    preds = _predict(refs, coded.macroblocks, template)
    nmx = template.width // MB_SIZE
    nbx = 2 * nmx
    levels = [np.zeros((p.size // 64, 8, 8), dtype=np.int64) for p in template.planes]
    for i, mb in enumerate(coded.macroblocks):
        if not isinstance(mb, InterMacroblock):
            raise CorruptStreamError("intra macroblock in a P-frame")
        my, mx = divmod(i, nmx)
        if mb.split:
            for q, part in enumerate(mb.partitions):
                levels[0][_luma_block_index(my, mx, q, nbx)] = unpack_block(part.blocks[0])
        else:
            for q, block in enumerate(mb.partitions[0].blocks):
                levels[0][_luma_block_index(my, mx, q, nbx)] = unpack_block(block)
        for c, block in enumerate(mb.chroma):
            levels[1 + c][i] = unpack_block(block)
    recon = [_reconstruct_plane(pred, lv, qp) for pred, lv in zip(preds, levels)]
    return template.replace_planes(recon)


def _forward_reference(mode, i_recon, pose_i, pose_t, t, external, cfg_like, size):
    if mode is ForwardRefMode.EXTERNAL:
        if external is None:
            raise ValueError("EXTERNAL forward mode needs a frame store")
        return pad_to_macroblock(load_external_forward_frame(external, t, size))
    return synthesize(
        SynthInputs(i_recon, pose_i, pose_t),
        mode,
        bump_radius=cfg_like.bump_radius,
        patch_radius=cfg_like.patch_radius,
    )


def luma_crc(frames) -> int:
    crc = 0
    for f in frames:
        crc = zlib.crc32(np.ascontiguousarray(f.luma).tobytes(), crc)
    return crc


def _check_frames(frames):
    if not frames:
        raise ValueError("cannot encode an empty sequence")
    first = frames[0]
    for i, f in enumerate(frames):
        if f.size != first.size or f.chroma_format != first.chroma_format:
            raise DimensionMismatchError(
                f"frame {i + 1} is {f.size}/{f.chroma_format.name}, "
                f"expected {first.size}/{first.chroma_format.name}"
            )
    if first.width > 0xFFFF or first.height > 0xFFFF:
        raise DimensionMismatchError("frame dimensions exceed 65535")


def encode_sequence(frames: Sequence[Frame], poses=None, cfg: EncoderConfig = None, *,
                    external=None) -> EncodedSequence:
    """Encode a sequence into a ``.drf`` byte string.

    ``poses`` must hold one pose per frame for LINEAR and PATCHWARP modes;
    ``external`` is the forward-frame store for EXTERNAL mode.
    """
    cfg = cfg or EncoderConfig()
    frames = list(frames)
    _check_frames(frames)
    mode = cfg.forward_ref_mode
    qposes = None
    if mode.needs_poses:
        if poses is None:
            raise PoseCountError(f"{mode.name} forward referencing needs a pose per frame")
        qposes = [as_quantized(p) for p in poses]
    if poses is not None and len(poses) != len(frames):
        raise PoseCountError(f"{len(poses)} poses for {len(frames)} frames")

    src_size = frames[0].size
    header = ContainerHeader(
        width=src_size[0], height=src_size[1], chroma_format=frames[0].chroma_format,
        gop_size=cfg.gop_size, qp=cfg.qp, forward_mode=mode, frame_count=len(frames),
        bump_radius=cfg.bump_radius, patch_radius=cfg.patch_radius,
    )
    padded = [pad_to_macroblock(f) for f in frames]
    layout = StreamLayout(
        mb_count=(padded[0].width // MB_SIZE) * (padded[0].height // MB_SIZE),
        forward=mode is not ForwardRefMode.OFF,
        pose_payload=mode.needs_poses,
        n_chroma=_n_chroma(padded[0]),
    )
    writer = BitWriter()
    writer.write_bytes(header.pack())
    recon, stats, coded_frames = [], [], []
    i_recon = pose_i = None
    for i, x in enumerate(padded):
        start = writer.bit_position
        if i % cfg.gop_size == 0:
            coded, rec = encode_i_frame(x, cfg)
            nmy, nmx = x.height // MB_SIZE, x.width // MB_SIZE
            st = FrameStats(i + 1, FrameType.I, 0, np.zeros((nmy, nmx), dtype=np.int64),
                            np.zeros((nmy, nmx), dtype=bool),
                            np.zeros((2 * nmy, 2 * nmx), dtype=np.int8))
            i_recon = rec
            pose_i = qposes[i] if qposes else None
        else:
            forward = None
            if mode is not ForwardRefMode.OFF:
                forward = _forward_reference(
                    mode, i_recon, pose_i, qposes[i] if qposes else None, i + 1,
                    external, cfg, src_size,
                )
            coded, rec, st = encode_p_frame(x, i_recon, forward, cfg)
            st.index = i + 1
        if qposes:
            coded = CodedFrame(coded.frame_type, coded.macroblocks, qposes[i])
        write_frame(writer, coded, layout)
        st.bits = writer.bit_position - start
        recon.append(crop_to_source(rec))
        stats.append(st)
        coded_frames.append(coded)
    writer.write_bytes(luma_crc(recon).to_bytes(4, "big"))
    return EncodedSequence(writer.getvalue(), recon, stats, coded_frames)


@dataclass
class DecodedSequence:
    header: ContainerHeader
    frames: list
    coded_frames: list
    frame_bits: list


def decode_sequence_detailed(data: bytes, *, external=None) -> DecodedSequence:
    header, hsize = ContainerHeader.unpack(data)
    src = Frame(header.width, header.height,
                tuple(np.zeros(s, dtype=np.uint8) for s in _plane_shapes(header)),
                header.chroma_format)
    template = pad_to_macroblock(src)
    mode = header.forward_mode
    layout = StreamLayout(
        mb_count=(template.width // MB_SIZE) * (template.height // MB_SIZE),
        forward=mode is not ForwardRefMode.OFF,
        pose_payload=mode.needs_poses,
        n_chroma=_n_chroma(template),
    )
    if mode is ForwardRefMode.EXTERNAL and external is None:
        raise ValueError("stream uses EXTERNAL forward references; a frame store is required")
    reader = BitReader(data, 8 * hsize)
    frames, coded_frames, bits = [], [], []
    i_recon = pose_i = None
    for i in range(header.frame_count):
        start = reader.pos
        coded = read_frame(reader, layout, i + 1)
        expect_i = i % header.gop_size == 0
        if (coded.frame_type is FrameType.I) != expect_i:
            raise CorruptStreamError("frame type does not match the GOP structure", i + 1)
        if coded.frame_type is FrameType.I:
            rec = _decode_i_frame(coded, template, header.qp)
            i_recon, pose_i = rec, coded.pose_payload
        else:
            refs = [i_recon]
            if mode is not ForwardRefMode.OFF:
                refs.append(_forward_reference(
                    mode, i_recon, pose_i, coded.pose_payload, i + 1, external, header,
                    src.size,
                ))
            rec = _decode_p_frame(coded, refs, template, header.qp)
        frames.append(crop_to_source(rec))
        coded_frames.append(coded)
        bits.append(reader.pos - start)
    if reader.remaining != 32:
        if reader.remaining < 32:
            raise CorruptStreamError("stream truncated before the checksum")
        raise CorruptStreamError("trailing data after the last frame")
    stored = reader.read_bits(32)
    if stored != luma_crc(frames):
        raise ChecksumMismatchError("decoded luma does not match the stored CRC-32")
    return DecodedSequence(header, frames, coded_frames, bits)


def decode_sequence(data: bytes, *, external=None) -> list:
    """Decode a ``.drf`` byte string to frames cropped to the source size."""
    return decode_sequence_detailed(data, external=external).frames


def _plane_shapes(header):
    shapes = [(header.height, header.width)]
    if header.chroma_format is ChromaFormat.C420:
        c = ((header.height + 1) // 2, (header.width + 1) // 2)
        shapes += [c, c]
    return shapes

