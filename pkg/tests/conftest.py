import numpy as np
import pytest

from pqsolve.fem import ExponentSet
from pqsolve.mesh import build_2d_mesh, build_interval_mesh

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record_criterion():
    """Print and keep a one-line verdict; the lines are repeated in the terminal summary."""

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        ACCEPTANCE_LINES.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def unit_interval():
    return build_interval_mesh(0.0, 1.0, 64)


@pytest.fixture(scope="session")
def fine_interval():
    return build_interval_mesh(0.0, 1.0, 256)


@pytest.fixture(scope="session")
def coarse_square():
    return build_2d_mesh("unit_square", 1 / 8)


@pytest.fixture(scope="session")
def coarse_disk():
    return build_2d_mesh("disk", 0.2)


@pytest.fixture
def exp43():
    return ExponentSet(p=4.0, q=3.0, beta=0.5, sigma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
