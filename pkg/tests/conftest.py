import numpy as np
import pytest
from skimage import data


@pytest.fixture(scope="session")
def natural():
    """256x256 crop of the camera sample."""
    return data.camera()[100:356, 150:406].copy()


@pytest.fixture(scope="session")
def donor():
    return data.astronaut()[..., 1].copy()


def gradient(w, h, direction="h"):
    yy, xx = np.mgrid[0:h, 0:w]
    if direction == "h":
        g = xx * 255 // max(w - 1, 1)
    elif direction == "v":
        g = yy * 255 // max(h - 1, 1)
    else:
        g = (xx + yy) * 255 // max(w + h - 2, 1)
    return g.astype(np.uint8)


def noise(w, h, seed=0, lo=0, hi=256):
    return np.random.default_rng(seed).integers(lo, hi, (h, w)).astype(np.uint8)


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
