import pytest

from kvwave.geometry import build_damping_preset, build_grid
from kvwave.nonlinear import Nonlinearity


@pytest.fixture
def grid1d():
    return build_grid(1, [1.0], [99])


@pytest.fixture
def gcc1d(grid1d):
    return build_damping_preset(grid1d, "interval_1d", {"epsilon": 0.1})[1]


@pytest.fixture
def zero_nl():
    return Nonlinearity("zero")


@pytest.fixture
def cubic():
    return Nonlinearity("power", p=3)


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[num]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:2d}. {title}: {detail}")
