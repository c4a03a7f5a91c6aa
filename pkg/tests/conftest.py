import numpy as np
import pytest

from slipdyn.corrector import RitzBasis
from slipdyn.geometry import unit_geometry, wide_geometry
from slipdyn.interaction import QuadratureConfig
from slipdyn.kernels import Material
from slipdyn.measures import DislocationConfig, ScalingSchedule


@pytest.fixture(scope="session")
def geom():
    return unit_geometry()


@pytest.fixture(scope="session")
def wide_geom():
    return wide_geometry()


@pytest.fixture(scope="session")
def mat():
    return Material(1.0, 1.0)


@pytest.fixture(scope="session")
def quad():
    return QuadratureConfig()


@pytest.fixture(scope="session")
def basis():
    return RitzBasis(8)


@pytest.fixture(scope="session")
def schedule():
    return ScalingSchedule()


@pytest.fixture(scope="session")
def small_schedule():
    # relaxed separation constant for few-dislocation scenarios
    return ScalingSchedule(r_coef=0.05)


def random_config(rng, geom, schedule, n_planes, per_plane, lo=0.25, hi=0.75,
                  plane_lo=0.25, plane_hi=0.75):
    """Rejection-sample a valid configuration on equally spaced planes."""
    ys = np.linspace(plane_lo, plane_hi, n_planes)
    while True:
        pts = np.array([[rng.uniform(lo, hi), y] for y in ys for _ in range(per_plane)])
        try:
            return DislocationConfig(pts, schedule, geom.r_box)
        except ValueError:
            continue
