from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_frame, random_pose
from fwdref.exceptions import DimensionMismatchError, MissingFrameError
from fwdref.io import write_pgm, write_y4m
from fwdref.model import ForwardRefMode, Frame, Pose, QuantizedPose, quantize_pose
from fwdref.synth import (
    FrameStore,
    SynthInputs,
    load_external_forward_frame,
    render_heatmaps,
    synthesize,
    synthesize_linear,
    synthesize_patchwarp,
)


def _bump_oracle(d2, r):
    if d2 >= r * r:
        return 0
    v = Fraction(255 * (r * r - d2), r * r)
    return int(v + Fraction(1, 2))  # half-up; v >= 0


def _centres(qpose):
    # pixel centre: nearest integer, halves up (all coordinates are >= 0)
    return [int(Fraction(c, 256) + Fraction(1, 2)) for c in qpose.coords]


@pytest.mark.parametrize("radius", [1, 3, 4, 7])
def test_heatmap_matches_pointwise_oracle(radius):
    rng = np.random.default_rng(radius)
    pose = random_pose(rng, 24, 20)
    stack = render_heatmaps(pose, 24, 20, radius)
    c = _centres(quantize_pose(pose))
    for j in range(13):
        cx, cy = c[2 * j], c[2 * j + 1]
        for y in range(20):
            for x in range(24):
                d2 = (x - cx) ** 2 + (y - cy) ** 2
                assert stack.channels[j, y, x] == _bump_oracle(d2, radius)


def test_heatmap_peak_and_offframe():
    joints = [(5.0, 5.0)] + [(1000.0, 1000.0)] * 12
    stack = render_heatmaps(Pose(tuple(joints)), 16, 16, 4)
    assert stack.channels[0, 5, 5] == 255
    assert stack.channels[0, 5, 9] == 0  # d == R is outside
    assert not stack.channels[1:].any()
    assert stack.combined().shape == (16, 16)


def _patchwarp_oracle(plane, pose_i, pose_t, radius):
    h, w = plane.shape
    ci, ct = pose_i.coords, pose_t.coords
    centres = _centres(pose_t)
    out = plane.copy()
    for y in range(h):
        for x in range(w):
            best, owner = None, None
            for j in range(13):
                d2 = (x - centres[2 * j]) ** 2 + (y - centres[2 * j + 1]) ** 2
                if d2 <= radius * radius and (best is None or d2 < best):
                    best, owner = d2, j
            if owner is None:
                continue
            disp = []
            for k in (2 * owner, 2 * owner + 1):
                q = Fraction(ct[k] - ci[k], 256)
                mag = int(abs(q) + Fraction(1, 2))
                disp.append(mag if q >= 0 else -mag)
            sx = min(max(x - disp[0], 0), w - 1)
            sy = min(max(y - disp[1], 0), h - 1)
            out[y, x] = plane[sy, sx]
    return out


@pytest.mark.parametrize("seed", range(3))
def test_patchwarp_matches_loop_oracle(seed):
    rng = np.random.default_rng(seed)
    frame = random_frame(rng, 20, 18)
    pi, pt = random_pose(rng, 20, 18), random_pose(rng, 20, 18)
    got = synthesize_patchwarp(SynthInputs(frame, pi, pt), patch_radius=5)
    want = _patchwarp_oracle(frame.luma, quantize_pose(pi), quantize_pose(pt), 5)
    np.testing.assert_array_equal(got.luma, want)


def test_linear_matches_formula(rng):
    frame = random_frame(rng, 24, 24, chroma=True)
    pi, pt = random_pose(rng, 24, 24), random_pose(rng, 24, 24)
    got = synthesize_linear(SynthInputs(frame, pi, pt), bump_radius=4)
    hi = render_heatmaps(pi, 24, 24, 4).channels.max(axis=0).astype(int)
    ht = render_heatmaps(pt, 24, 24, 4).channels.max(axis=0).astype(int)
    want = np.clip(frame.luma.astype(int) + ht - hi, 0, 255)
    np.testing.assert_array_equal(got.luma, want)
    for a, b in zip(got.planes[1:], frame.planes[1:]):
        np.testing.assert_array_equal(a, b)


@given(seed=st.integers(0, 2**32 - 1), mode=st.sampled_from(["linear", "patchwarp"]),
       chroma=st.booleans())
def test_identity_when_poses_match(seed, mode, chroma):
    rng = np.random.default_rng(seed)
    frame = random_frame(rng, 32, 16, chroma)
    pose = random_pose(rng, 32, 16)
    out = synthesize(SynthInputs(frame, pose, pose), mode)
    assert out.tobytes() == frame.tobytes()


def test_raw_and_quantized_poses_agree(rng):
    frame = random_frame(rng, 32, 32)
    pi, pt = random_pose(rng, 32, 32), random_pose(rng, 32, 32)
    a = synthesize(SynthInputs(frame, pi, pt), "patchwarp")
    b = synthesize(SynthInputs(frame, quantize_pose(pi), quantize_pose(pt)), "patchwarp")
    assert a == b


def test_chroma_patchwarp_moves_chroma(rng):
    frame = random_frame(rng, 32, 32, chroma=True)
    pi = Pose(((10.0, 10.0),) * 13)
    pt = Pose(((14.0, 10.0),) * 13)
    out = synthesize_patchwarp(SynthInputs(frame, pi, pt), patch_radius=6)
    # luma at the new centre comes from the old centre, chroma likewise at half scale
    assert out.luma[10, 14] == frame.luma[10, 10]
    assert out.planes[1][5, 7] == frame.planes[1][5, 5]


def test_canvas_mismatch(rng):
    frame = random_frame(rng, 16, 16)
    pose = random_pose(rng, 16, 16)
    with pytest.raises(DimensionMismatchError):
        SynthInputs(frame, pose, pose, canvas=(32, 16))


def test_synthesize_rejects_non_pose_modes(rng):
    frame = random_frame(rng, 16, 16)
    pose = random_pose(rng, 16, 16)
    with pytest.raises(ValueError):
        synthesize(SynthInputs(frame, pose, pose), ForwardRefMode.EXTERNAL)


def test_frame_store_directory(tmp_path, rng):
    frame = random_frame(rng, 16, 8)
    with open(tmp_path / "frame_0003.pgm", "wb") as fh:
        write_pgm(fh, frame)
    store = FrameStore(tmp_path)
    assert load_external_forward_frame(store, 3, (16, 8)) == frame
    with pytest.raises(MissingFrameError):
        store.get(4)
    with pytest.raises(DimensionMismatchError):
        load_external_forward_frame(store, 3, (8, 8))


def test_frame_store_y4m(tmp_path, rng):
    frames = [random_frame(rng, 16, 16, chroma=True) for _ in range(3)]
    path = tmp_path / "fwd.y4m"
    with open(path, "wb") as fh:
        write_y4m(fh, frames)
    store = FrameStore(path)
    assert store.get(2) == frames[1]
    with pytest.raises(MissingFrameError):
        store.get(0)
    with pytest.raises(MissingFrameError):
        load_external_forward_frame({1: frames[0]}, 2)
    with pytest.raises(MissingFrameError):
        FrameStore(tmp_path / "nope.y4m").get(1)
