import sys
from pathlib import Path

import numpy as np
import pytest

from povpool.frames import Frame, SecondWindow

DATA = Path(__file__).parent / "data"
CLIP10 = DATA / "clip10"


def make_window(arrays, second=1):
    """SecondWindow from a list of (H, W, 3) uint8 arrays."""
    f = len(arrays)
    start = (second - 1) * f + 1
    frames = tuple(Frame(start + i, np.asarray(a, dtype=np.uint8), (start + i - 1) / f) for i, a in enumerate(arrays))
    return SecondWindow(second, frames)


def constant_window(f, value=(10, 200, 77), shape=(4, 5), second=1):
    img = np.empty(shape + (3,), dtype=np.uint8)
    img[...] = value
    return make_window([img] * f, second)


def random_window(f, shape=(6, 7), seed=0, second=1):
    rng = np.random.default_rng(seed)
    return make_window([rng.integers(0, 256, shape + (3,), dtype=np.uint8) for _ in range(f)], second)


@pytest.fixture
def clip10():
    return CLIP10


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
