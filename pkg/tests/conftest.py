import json
import math
import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chordmink.measure import sample_general_position
from chordmink.polytope import wulff_shape

settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

DATA = os.path.join(os.path.dirname(__file__), "data")

AXES_2D = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
AXES_3D = np.vstack([np.eye(3), -np.eye(3)])


def equilateral_normals():
    th = np.deg2rad([90.0, 210.0, 330.0])
    return np.column_stack([np.cos(th), np.sin(th)])


def square():
    return wulff_shape(AXES_2D, np.ones(4))


def triangle():
    return wulff_shape(equilateral_normals(), np.ones(3))


def cube():
    return wulff_shape(AXES_3D, np.ones(6))


def random_polytope(n, N, seed, spread=0.3):
    """Wulff shape of random general-position normals with every facet present."""
    m = sample_general_position(n, N, seed)
    rng = np.random.default_rng(seed + 1000)
    # h = 1 touches the unit ball at every normal, so shrinking the
    # perturbation always ends with every facet active
    while True:
        P = wulff_shape(m.normals, 1.0 + spread * rng.random(N))
        if P.active.all():
            return P
        spread *= 0.7


def rel(a, b):
    return abs(a - b) / abs(b)


@pytest.fixture(scope="session")
def oracle_values():
    with open(os.path.join(DATA, "oracles.json"), encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture
def sq():
    return square()


@pytest.fixture
def tri():
    return triangle()


@pytest.fixture
def cb():
    return cube()


SQRT3 = math.sqrt(3.0)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
