"""Block matching: SAD, exhaustive integer-pel search and mode decision.

Motion vectors point from the current block to the reference samples it is
predicted from: the prediction for pixel ``(x, y)`` is ``ref[y + dy, x + dx]``
with reads outside the reference clamped to the nearest edge sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .bitstream import mv_bits
from .coded import MotionVector
from .model import ModeDecision

BACKWARD = 0
FORWARD = 1

# bound on the candidate-stack size per numpy pass (samples)
_CHUNK_SAMPLES = 1 << 23


def sad(a, b) -> int:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"SAD of mismatched blocks {a.shape} vs {b.shape}")
    return int(np.abs(a.astype(np.int64) - b.astype(np.int64)).sum())


def candidate_vectors(search_range: int):
    """All displacements in tie-break order: |dx|+|dy|, then dy, then dx."""
    r = search_range
    cands = [(dx, dy) for dy in range(-r, r + 1) for dx in range(-r, r + 1)]
    cands.sort(key=lambda v: (abs(v[0]) + abs(v[1]), v[1], v[0]))
    return np.array(cands, dtype=np.int64).reshape(-1, 2)


def fetch_block(ref, x, y, w, h):
    """``h x w`` block of ``ref`` at ``(x, y)`` with edge clamping."""
    H, W = ref.shape
    rows = np.clip(np.arange(y, y + h), 0, H - 1)
    cols = np.clip(np.arange(x, x + w), 0, W - 1)
    return ref[np.ix_(rows, cols)]


def motion_search(cur, rect, ref, search_range: int):
    """Exhaustive search for one block; returns ``(MotionVector, sad)``."""
    src = np.asarray(cur)[rect.slices].astype(np.int32)
    cands = candidate_vectors(search_range)
    r = search_range
    H, W = ref.shape
    rows = np.clip(np.arange(rect.y - r, rect.y + rect.h + r), 0, H - 1)
    cols = np.clip(np.arange(rect.x - r, rect.x + rect.w + r), 0, W - 1)
    window = np.asarray(ref)[np.ix_(rows, cols)].astype(np.int32)
    views = sliding_window_view(window, (rect.h, rect.w))
    stack = views[cands[:, 1] + r, cands[:, 0] + r]
    sads = np.abs(stack - src).sum(axis=(1, 2))
    best = int(np.argmin(sads))
    return MotionVector(int(cands[best, 0]), int(cands[best, 1])), int(sads[best])


@dataclass
class SearchResult:
    """Best vectors for every 8x8 block and every 16x16 macroblock of a frame.

    Arrays are indexed ``[row, col]`` on the respective block grid; vectors
    are stored as ``(..., 2)`` with ``(dx, dy)`` order.
    """

    sad8: np.ndarray
    mv8: np.ndarray
    sad16: np.ndarray
    mv16: np.ndarray


@numba.njit(cache=True, nogil=True)
def _sad8_table_jit(cur, padded, cands, r):
    H, W = cur.shape
    out = np.zeros((cands.shape[0], H // 8, W // 8), dtype=np.int64)
    for c in range(cands.shape[0]):
        ox = cands[c, 0] + r
        oy = cands[c, 1] + r
        for y in range(H):
            row = y // 8
            for x in range(W):
                d = np.int32(cur[y, x]) - np.int32(padded[y + oy, x + ox])
                out[c, row, x // 8] += d if d >= 0 else -d
    return out


def _sad8_table_numpy(cur, padded, cands, r):
    H, W = cur.shape
    windows = sliding_window_view(padded, (H, W))
    by, bx = H // 8, W // 8
    # column sums by matmul; float32 is exact for 16x16x255
    col_sum = np.kron(np.eye(bx, dtype=np.float32), np.ones((8, 1), dtype=np.float32))
    sad8 = np.empty((len(cands), by, bx), dtype=np.int64)
    step = max(1, _CHUNK_SAMPLES // (H * W))
    for lo in range(0, len(cands), step):
        c = cands[lo:lo + step]
        stack = windows[c[:, 1] + r, c[:, 0] + r]
        diff = np.maximum(stack, cur)
        diff -= np.minimum(stack, cur)
        cols = diff.reshape(-1, W).astype(np.float32) @ col_sum
        sad8[lo:lo + len(c)] = cols.reshape(len(c), by, 8, bx).sum(axis=2)
    return sad8


def sad8_table(cur, ref, search_range: int, *, use_jit=True):
    """SAD of every 8x8 block of ``cur`` at every candidate displacement.

    Returns ``(candidates, table)`` with ``table[c, row, col]``.
    """
    cur = np.ascontiguousarray(cur, dtype=np.uint8)
    cands = candidate_vectors(search_range)
    padded = np.pad(np.asarray(ref, dtype=np.uint8), search_range, mode="edge")
    kernel = _sad8_table_jit if use_jit else _sad8_table_numpy
    return cands, kernel(cur, padded, cands, search_range)


def search_frame(cur, ref, search_range: int, *, use_jit=True) -> SearchResult:
    """Run :func:`motion_search` for all 8x8 and 16x16 blocks at once."""
    cands, sad8 = sad8_table(cur, ref, search_range, use_jit=use_jit)
    n, by, bx = sad8.shape
    sad16 = sad8.reshape(n, by // 2, 2, bx // 2, 2).sum(axis=(2, 4))
    # argmin keeps the first minimum, i.e. the tie-break order of the candidates
    i8 = np.argmin(sad8, axis=0)
    i16 = np.argmin(sad16, axis=0)
    return SearchResult(
        sad8=np.take_along_axis(sad8, i8[None], 0)[0],
        mv8=cands[i8],
        sad16=np.take_along_axis(sad16, i16[None], 0)[0],
        mv16=cands[i16],
    )


def lagrange_multiplier(qp: int) -> float:
    return 0.85 * 2.0 ** ((qp - 12) / 3.0)


@dataclass(frozen=True)
class Choice:
    ref_index: int
    mv: MotionVector
    sad: int
    cost: float


def select_reference(backward, forward=None, *, mode=ModeDecision.SAD, qp=28,
                     forward_enabled=None) -> Choice:
    """Pick the backward or forward ``(mv, sad)`` candidate.

    SAD mode keeps the lower SAD; LAGRANGIAN mode the lower
    ``SAD + lambda * bits(ref_index, mv)``. Ties go to the backward reference.
    """
    if forward_enabled is None:
        forward_enabled = forward is not None
    mode = ModeDecision(mode)
    lam = lagrange_multiplier(qp) if mode is ModeDecision.LAGRANGIAN else 0.0

    def cost(mv, s):
        if mode is ModeDecision.SAD:
            return s
        return s + lam * mv_bits(mv, forward_enabled)

    best = Choice(BACKWARD, backward[0], backward[1], cost(*backward))
    if forward is not None:
        j = cost(*forward)
        if j < best.cost:
            best = Choice(FORWARD, forward[0], forward[1], j)
    return best


@dataclass(frozen=True)
class MacroblockChoice:
    split: bool
    partitions: tuple  # of Choice, 1 or 4
    sad16: int
    sad8_total: int

    @property
    def sad(self):
        return sum(p.sad for p in self.partitions)


def try_split(whole, quads, *, mode=ModeDecision.SAD, qp=28) -> MacroblockChoice:
    """Choose between one 16x16 partition and four 8x8 partitions.

    ``whole`` is ``(backward, forward)`` candidates for the macroblock and
    ``quads`` the same for each 8x8 quadrant in raster order; ``forward`` is
    ``None`` when forward referencing is off. Splitting needs a strictly
    lower total.
    """
    fwd_on = whole[1] is not None
    mb = select_reference(*whole, mode=mode, qp=qp, forward_enabled=fwd_on)
    parts = [select_reference(*q, mode=mode, qp=qp, forward_enabled=fwd_on) for q in quads]
    total8 = sum(p.cost for p in parts)
    split = total8 < mb.cost
    return MacroblockChoice(
        split=split,
        partitions=tuple(parts) if split else (mb,),
        sad16=mb.sad,
        sad8_total=sum(p.sad for p in parts),
    )
