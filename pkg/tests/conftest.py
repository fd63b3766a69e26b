import math

import numpy as np
import pytest

from detwave.littlewood_paley import build_partition
from detwave.spectral import Grid, SpectralField, leray_project
from detwave.wavenumber import TupleGrid

TWO_PI = 2 * math.pi


@pytest.fixture(scope="session")
def grid16():
    return Grid(16)


@pytest.fixture(scope="session")
def grid32():
    return Grid(32)


@pytest.fixture(scope="session")
def grid64():
    return Grid(64)


@pytest.fixture(scope="session")
def part32(grid32):
    return build_partition(grid32)


@pytest.fixture(scope="session")
def part64(grid64):
    return build_partition(grid64)


@pytest.fixture(scope="session")
def tuples():
    return TupleGrid.default()


def white_field(grid, seed, scale=1.0):
    """Divergence-free, dealiased white-noise field (flat spectrum)."""
    rng = np.random.default_rng(seed)
    u = SpectralField.from_physical(grid, scale * rng.standard_normal((3,) + grid.phys_shape))
    return leray_project(u.with_coeffs(u.coeffs * grid.dealias))


def cos_field(grid, A=1.0):
    """u = (0, A cos(2 pi x / L), 0)."""
    x, _, _ = grid.mesh()
    vals = np.zeros((3,) + grid.phys_shape)
    vals[1] = A * np.cos(TWO_PI * x / grid.L)
    return SpectralField.from_physical(grid, vals)


# --- acceptance verdicts -------------------------------------------------------------

ACCEPTANCE_COUNT = 11
_VERDICTS = {}


def record_verdict(n, title, ok, detail=""):
    """Store and print one pass/fail line for acceptance criterion ``n``."""
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:>2}: {title}" + (f" | {detail}" if detail else "")
    _VERDICTS[n] = line
    print(line, flush=True)
    return ok


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in range(1, ACCEPTANCE_COUNT + 1):
        terminalreporter.write_line(_VERDICTS.get(n, f"[----] criterion {n:>2}: not run in this session"))
