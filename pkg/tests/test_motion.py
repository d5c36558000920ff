import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwdref.coded import MotionVector
from fwdref.model import BlockRect, ModeDecision
from fwdref.motion import (
    BACKWARD,
    FORWARD,
    candidate_vectors,
    fetch_block,
    lagrange_multiplier,
    motion_search,
    sad,
    sad8_table,
    search_frame,
    select_reference,
    try_split,
)


def _clamped(ref, x, y):
    h, w = ref.shape
    return ref[min(max(y, 0), h - 1), min(max(x, 0), w - 1)]


def _search_oracle(cur, rect, ref, r):
    """Plain loops over the search window with the documented tie-break."""
    best = None
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            s = 0
            for y in range(rect.y, rect.y + rect.h):
                for x in range(rect.x, rect.x + rect.w):
                    s += abs(int(cur[y, x]) - int(_clamped(ref, x + dx, y + dy)))
            key = (s, abs(dx) + abs(dy), dy, dx)
            if best is None or key < best:
                best = key
    return MotionVector(best[3], best[2]), best[0]


def test_sad_basic():
    a = np.array([[0, 255], [10, 20]], dtype=np.uint8)
    b = np.array([[255, 0], [20, 10]], dtype=np.uint8)
    assert sad(a, b) == 530
    with pytest.raises(ValueError):
        sad(a, b[:1])


def test_candidate_order():
    c = candidate_vectors(1).tolist()
    assert c[0] == [0, 0]
    assert c[1:5] == [[0, -1], [-1, 0], [1, 0], [0, 1]]
    assert len(candidate_vectors(8)) == 17 * 17


def test_fetch_block_clamps():
    ref = np.arange(16, dtype=np.uint8).reshape(4, 4)
    blk = fetch_block(ref, -2, 3, 3, 2)
    assert blk.tolist() == [[12, 12, 12], [12, 12, 12]]


@pytest.mark.parametrize("seed", range(4))
def test_motion_search_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    ref = rng.integers(0, 256, (24, 24), dtype=np.uint8)
    # build cur as a shifted ref so there is a clear optimum, plus noise
    cur = np.roll(ref, (2, -3), axis=(0, 1)).copy()
    cur[rng.random(cur.shape) < 0.1] = 7
    for rect in (BlockRect(0, 0), BlockRect(8, 8, 8, 8), BlockRect(16, 16, 8, 8)):
        assert motion_search(cur, rect, ref, 3) == _search_oracle(cur, rect, ref, 3)


def test_ties_prefer_zero_vector():
    ref = np.full((16, 16), 50, dtype=np.uint8)
    cur = ref.copy()
    assert motion_search(cur, BlockRect(0, 0), ref, 4) == (MotionVector(0, 0), 0)


@given(st.integers(0, 2**32 - 1), st.integers(1, 5))
def test_search_frame_agrees_with_per_block_search(seed, r):
    rng = np.random.default_rng(seed)
    cur = rng.integers(0, 256, (32, 16), dtype=np.uint8)
    ref = rng.integers(0, 256, (32, 16), dtype=np.uint8)
    res = search_frame(cur, ref, r)
    for by in range(4):
        for bx in range(2):
            mv, s = motion_search(cur, BlockRect(8 * bx, 8 * by, 8, 8), ref, r)
            assert (mv.dx, mv.dy) == tuple(res.mv8[by, bx]) and s == res.sad8[by, bx]
    for my in range(2):
        mv, s = motion_search(cur, BlockRect(0, 16 * my), ref, r)
        assert (mv.dx, mv.dy) == tuple(res.mv16[my, 0]) and s == res.sad16[my, 0]


@given(st.integers(0, 2**32 - 1))
def test_jit_and_numpy_tables_agree(seed):
    rng = np.random.default_rng(seed)
    cur = rng.integers(0, 256, (16, 32), dtype=np.uint8)
    ref = rng.integers(0, 256, (16, 32), dtype=np.uint8)
    c1, t1 = sad8_table(cur, ref, 4, use_jit=True)
    c2, t2 = sad8_table(cur, ref, 4, use_jit=False)
    np.testing.assert_array_equal(c1, c2)
    np.testing.assert_array_equal(t1, t2)


def test_lambda_values():
    assert lagrange_multiplier(12) == pytest.approx(0.85)
    assert lagrange_multiplier(15) == pytest.approx(1.7)


def test_select_reference_sad_mode():
    b = (MotionVector(1, 0), 100)
    f = (MotionVector(0, 0), 90)
    assert select_reference(b, f).ref_index == FORWARD
    assert select_reference(b, (MotionVector(0, 0), 100)).ref_index == BACKWARD  # tie
    assert select_reference(b).ref_index == BACKWARD


def test_select_reference_lagrangian_counts_vector_bits():
    # backward: mv (5, 5) costs 1 + 2 * 7 bits; forward: (0, 0) costs 3 bits
    b = (MotionVector(5, 5), 100)
    f = (MotionVector(0, 0), 105)
    lam = lagrange_multiplier(28)
    choice = select_reference(b, f, mode=ModeDecision.LAGRANGIAN, qp=28)
    assert choice.ref_index == FORWARD
    assert choice.cost == pytest.approx(105 + 3 * lam)


def test_try_split_needs_strict_improvement():
    zero = MotionVector(0, 0)
    whole = [(zero, 40), None]
    quads = [[(zero, 10), None] for _ in range(4)]
    assert not try_split(whole, quads).split
    quads[0] = [(MotionVector(1, 0), 9), None]
    c = try_split(whole, quads)
    assert c.split and c.sad == 39 and c.sad16 == 40


def test_try_split_with_forward_superset():
    zero = MotionVector(0, 0)
    whole = [(zero, 40), (zero, 30)]
    quads = [[(zero, 10), (zero, 10)] for _ in range(4)]
    c = try_split(whole, quads)
    assert not c.split and c.partitions[0].ref_index == FORWARD and c.sad == 30
