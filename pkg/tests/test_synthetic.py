import io

import numpy as np
import pytest

from fwdref.io import write_pose_json, write_y4m
from fwdref.synthetic import (
    LCG,
    displacement_from_first,
    generate_sequence,
    max_step,
    trajectory,
)


def test_lcg_reference_values():
    # x1 = 1013904223, x2 = (x1 * 1664525 + 1013904223) mod 2^32
    g = LCG(0)
    assert g.next() == 1013904223
    assert g.next() == (1013904223 * 1664525 + 1013904223) % 2**32
    assert LCG(2**32 + 5).state == 5


def _serialize(frames, doc):
    y, j = io.BytesIO(), io.StringIO()
    write_y4m(y, frames)
    write_pose_json(j, doc)
    return y.getvalue(), j.getvalue()


def test_same_seed_is_byte_identical():
    a = _serialize(*generate_sequence(64, 64, 4, "fast", 7))
    b = _serialize(*generate_sequence(64, 64, 4, "fast", 7))
    c = _serialize(*generate_sequence(64, 64, 4, "fast", 8))
    assert a == b and a != c


@pytest.mark.parametrize("motion, lo, hi", [("fast", 6.0, 10.0), ("moderate", 3.0, 5.0), ("slow", 0.5, 2.0)])
def test_motion_classes(motion, lo, hi):
    _, doc = generate_sequence(128, 128, 32, motion, 1)
    assert lo <= max_step(doc) <= hi


def test_ground_truth_poses_on_grid():
    traj = trajectory(128, 128, 8, "fast", 0)
    np.testing.assert_array_equal(traj * 256, np.round(traj * 256))
    frames, doc = generate_sequence(128, 128, 8, "fast", 0)
    assert doc.poses[0].joints == tuple(map(tuple, traj[0].tolist()))
    assert len(frames) == len(doc) == 8
    assert doc.width == frames[0].width == 128


def test_figure_is_drawn_at_its_joints():
    frames, doc = generate_sequence(128, 128, 2, "fast", 3)
    blank, _ = generate_sequence(128, 128, 2, "fast", 3, disc_radius=1, bar_half_width=0)
    # the textured disc changes the picture around the head joint
    x, y = (int(round(v)) for v in doc.poses[0].joints[0])
    assert not np.array_equal(frames[0].luma[y - 3:y + 4, x - 3:x + 4], blank[0].luma[y - 3:y + 4, x - 3:x + 4])


def test_displacement_from_first():
    _, doc = generate_sequence(64, 64, 17, "moderate", 0)
    d = displacement_from_first(doc)
    assert d[0] == 0.0 and d.argmax() not in (0, 16)


def test_rejects_unknown_motion():
    with pytest.raises(ValueError):
        generate_sequence(32, 32, 2, "warp")
