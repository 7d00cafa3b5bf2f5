import numpy as np
import pytest

from pressure_lab.geometry import GeodesicChart, build_curve, default_cutoffs
from pressure_lab.fields import InteriorChart


@pytest.fixture(scope="session")
def circle():
    return build_curve({"kind": "circle", "radius": 1.0}, 256)


@pytest.fixture(scope="session")
def disk_chart(circle):
    return InteriorChart(circle, 64, 128)


@pytest.fixture(scope="session")
def disk_chart_fine(circle):
    return InteriorChart(circle, 128, 256)


@pytest.fixture(scope="session")
def cutoffs():
    return default_cutoffs(0.4)


@pytest.fixture(scope="session")
def collar(circle, cutoffs):
    return GeodesicChart(circle, cutoffs.delta, 64, 128)


@pytest.fixture(scope="session")
def collar_fine(circle, cutoffs):
    return GeodesicChart(circle, cutoffs.delta, 128, 256)


def disk_radii(chart):
    return np.linalg.norm(chart.points - chart.center, axis=-1)
