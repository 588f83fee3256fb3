import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from magrfk import geometry  # noqa: E402

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def disk_mesh():
    return geometry.build_mesh(geometry.disk(1.0), 0.1)


@pytest.fixture(scope="session")
def disk_mesh_ref():
    return geometry.build_mesh(geometry.disk(1.0), 0.05)


@pytest.fixture(scope="session")
def ellipse_mesh_ref():
    return geometry.build_mesh(geometry.ellipse(2.0, 0.5), 0.05)


@pytest.fixture(scope="session")
def star_mesh_ref():
    return geometry.build_mesh(geometry.fourier_star(1.0, [0.0, 0.15]), 0.05)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
