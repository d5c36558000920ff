import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwdref.exceptions import DimensionMismatchError, PoseCountError, PoseRangeError
from fwdref.model import (
    POSE_MAX,
    POSE_PAYLOAD_BITS,
    BlockRect,
    ChromaFormat,
    EncoderConfig,
    ForwardRefMode,
    Frame,
    Pose,
    QuantizedPose,
    crop_to_source,
    dequantize_pose,
    div_round,
    pad_to_macroblock,
    parse_forward_mode,
    partition_frame,
    quantize_pose,
    round_half_away,
)


def test_payload_constant():
    assert POSE_PAYLOAD_BITS == 13 * 2 * 24 == 624


@pytest.mark.parametrize("x, want", [(0.5, 1), (-0.5, -1), (1.5, 2), (-2.5, -3), (0.49, 0), (2.0, 2)])
def test_round_half_away_scalars(x, want):
    assert round_half_away(x) == want


@given(st.integers(-10_000, 10_000), st.integers(1, 500))
def test_div_round_matches_fraction_rounding(num, den):
    # oracle: exact rational arithmetic
    from fractions import Fraction

    q = Fraction(num, den)
    want = math.floor(abs(q) + Fraction(1, 2)) * (1 if q >= 0 else -1)
    assert div_round(num, den) == want


def test_frame_validation():
    with pytest.raises(DimensionMismatchError):
        Frame(4, 4, (np.zeros((4, 5), np.uint8),))
    with pytest.raises(DimensionMismatchError):
        Frame(4, 4, (np.zeros((4, 4), np.uint8),), ChromaFormat.C420)
    f = Frame(5, 3, tuple(np.zeros(s, np.uint8) for s in [(3, 5), (2, 3), (2, 3)]), 1)
    assert f.chroma_format is ChromaFormat.C420
    assert not f.luma.flags.writeable


def test_pad_and_crop_round_trip(rng):
    luma = rng.integers(0, 256, (20, 30), dtype=np.uint8)
    f = Frame.from_luma(luma)
    p = pad_to_macroblock(f)
    assert p.size == (32, 32) and p.source_size == (30, 20)
    # edge replication oracle
    np.testing.assert_array_equal(p.luma, np.pad(luma, ((0, 12), (0, 2)), mode="edge"))
    assert pad_to_macroblock(p) == p
    assert crop_to_source(p) == f


def test_partition_frame_raster_order():
    rects = partition_frame(48, 32)
    assert [(r.x, r.y) for r in rects] == [(0, 0), (16, 0), (32, 0), (0, 16), (16, 16), (32, 16)]
    with pytest.raises(ValueError):
        partition_frame(40, 32)


def test_block_quadrants():
    q = BlockRect(16, 32).quadrants()
    assert [(r.x, r.y, r.w) for r in q] == [(16, 32, 8), (24, 32, 8), (16, 40, 8), (24, 40, 8)]


def test_pose_validation():
    with pytest.raises(PoseCountError):
        Pose(((1.0, 1.0),) * 12)
    with pytest.raises(PoseRangeError):
        Pose(((1.0, -0.5),) + ((1.0, 1.0),) * 12)
    with pytest.raises(PoseRangeError):
        Pose(((math.nan, 1.0),) + ((1.0, 1.0),) * 12)
    with pytest.raises(PoseRangeError):
        QuantizedPose((1 << 24,) + (0,) * 25)


@given(st.lists(st.floats(0, POSE_MAX, allow_nan=False), min_size=26, max_size=26))
def test_quantize_round_trip_error_bound(vals):
    pose = Pose(tuple(zip(vals[0::2], vals[1::2])))
    back = dequantize_pose(quantize_pose(pose))
    err = np.abs(back.as_array() - pose.as_array()).max()
    assert err <= 1 / 512


def test_quantize_is_exact_on_grid():
    vals = [k / 256 for k in range(26)]
    pose = Pose(tuple(zip(vals[0::2], vals[1::2])))
    assert quantize_pose(pose).coords == tuple(range(26))


def test_config_ranges():
    with pytest.raises(ValueError):
        EncoderConfig(qp=52)
    with pytest.raises(ValueError):
        EncoderConfig(gop_size=0)
    cfg = EncoderConfig(forward_ref_mode="patchwarp")
    assert cfg.forward_ref_mode is ForwardRefMode.PATCHWARP
    assert cfg.mb_size == 16


def test_parse_forward_mode():
    assert parse_forward_mode("LINEAR") is ForwardRefMode.LINEAR
    assert parse_forward_mode(3) is ForwardRefMode.EXTERNAL
    with pytest.raises(ValueError):
        parse_forward_mode("bogus")
    assert ForwardRefMode.PATCHWARP.needs_poses and not ForwardRefMode.EXTERNAL.needs_poses
