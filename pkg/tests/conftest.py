"""Shared fixtures and the per-criterion acceptance summary."""

import numpy as np
import pytest
from hypothesis import settings

from slabmhd import GridSpec, make_grid

settings.register_profile("slab", max_examples=25, deadline=None)
settings.load_profile("slab")

ACCEPTANCE = {}


def record(number: int, title: str, passed: bool, detail: str = "") -> None:
    """Store one acceptance verdict for the end-of-session summary."""
    ACCEPTANCE[number] = (title, bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}  {detail}")


@pytest.fixture
def small_grid():
    return make_grid(GridSpec(Lx=2.0, Ly=1.5, delta=0.3, Nx=16, Ny=8, Nz=8))


@pytest.fixture
def cube_grid():
    return make_grid(GridSpec(Lx=1.0, Ly=1.0, delta=0.5, Nx=8, Ny=8, Nz=8))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
