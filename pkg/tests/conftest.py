import functools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from fwdref.model import Frame, Pose
from fwdref.synthetic import generate_sequence

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@functools.lru_cache(maxsize=None)
def synthetic(motion="fast", width=128, height=128, n_frames=32, seed=1):
    """Cached synthetic sequence; callers must not mutate the result."""
    return generate_sequence(width, height, n_frames, motion, seed)


@pytest.fixture(scope="session")
def small_sequence():
    return synthetic("fast", 64, 48, 6, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_frame(rng, width, height, chroma=False):
    planes = [rng.integers(0, 256, (height, width), dtype=np.uint8)]
    fmt = 0
    if chroma:
        c = ((height + 1) // 2, (width + 1) // 2)
        planes += [rng.integers(0, 256, c, dtype=np.uint8) for _ in range(2)]
        fmt = 1
    return Frame(width, height, tuple(planes), fmt)


def random_pose(rng, width, height):
    xy = rng.uniform(0, [width - 1, height - 1], size=(13, 2))
    return Pose(tuple(map(tuple, xy.tolist())))


# one verdict line per acceptance criterion, printed in the terminal summary
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
