from __future__ import annotations

import math

import numpy as np
import pytest

from vpcstereo import tables
from vpcstereo.camera_models import AtanModel, PinholeIntrinsics, load_model

TABLE_NAMES = tables.available()


def random_rays(n: int, max_theta: float, seed: int = 0) -> np.ndarray:
    """Unit rays with incidence angle uniform in [0, max_theta] and uniform azimuth."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.0, max_theta, n)
    phi = rng.uniform(-math.pi, math.pi, n)
    return np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi),
                     np.cos(theta)], axis=-1)


def angle_between(a, b) -> np.ndarray:
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    # atan2 form stays accurate for tiny angles
    cross = np.linalg.norm(np.cross(a, b), axis=-1)
    return np.arctan2(cross, np.sum(a * b, axis=-1))


@pytest.fixture(scope="session")
def atan400():
    return load_model(tables.table_path("sim_atan_400"))


@pytest.fixture(scope="session")
def atan_f100():
    """ATAN, fov = pi, f = 100, principal point (200, 200) on a 400x400 image."""
    return AtanModel(PinholeIntrinsics(100.0, 100.0, 200.0, 200.0, 400, 400), math.pi)


@pytest.fixture(scope="session", params=TABLE_NAMES)
def table_model(request):
    return request.param, load_model(tables.table_path(request.param))


# verdict lines appended by the acceptance tests
ACCEPTANCE_LOG: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
