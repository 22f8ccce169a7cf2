import math

import numpy as np
import pytest

from neumann_control.benchmark import build_benchmark
from neumann_control.mesh import build_sector_domain, generate_graded_mesh

OMEGA = 1.5 * math.pi

# lines collected by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def lshape():
    return build_sector_domain(OMEGA, 0.5, 0.5)


@pytest.fixture(scope="session")
def coarse_mesh(lshape):
    return generate_graded_mesh(lshape, 1 / 6)


@pytest.fixture(scope="session")
def tiny_mesh(lshape):
    return generate_graded_mesh(lshape, 1 / 3)


@pytest.fixture(scope="session")
def bench():
    return build_benchmark(OMEGA)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
