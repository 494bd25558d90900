import numpy as np
import pytest

from gakd.mesh import TriangleMesh, generate_terrain
from gakd.world import World


def flat_square(half=2.0, z=0.0):
    v = np.array([[-half, -half, z], [half, -half, z], [half, half, z], [-half, half, z]])
    return TriangleMesh.from_arrays(v, [[0, 1, 2], [0, 2, 3]])


def ridge_square(half=2.0, h=0.6):
    # the diagonal from (-half,-half) to (half,half) is raised; both faces fall away from it
    v = np.array([[-half, -half, h], [half, -half, 0.0], [half, half, h], [-half, half, 0.0]])
    return TriangleMesh.from_arrays(v, [[0, 1, 2], [0, 2, 3]])


@pytest.fixture(scope="session")
def flat_world():
    return World.build(flat_square(5.0))


@pytest.fixture(scope="session")
def ridge_world():
    return World.build(ridge_square())


@pytest.fixture(scope="session")
def terrain_mesh():
    return generate_terrain(7, 64, 64, 0.5, 2.0, 4)


@pytest.fixture(scope="session")
def terrain_world(terrain_mesh):
    return World.build(terrain_mesh)


@pytest.fixture(scope="session")
def small_terrain_world():
    return World.build(generate_terrain(3, 24, 24, 0.5, 1.0, 3))


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
