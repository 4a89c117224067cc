import numpy as np
import pytest

from isogauss.curvature import metric_field, riemann_tensor
from isogauss.gaussmap import build_gauss_field
from isogauss.surfaces import (CliffordTorus, Ellipsoid, EllipsoidM3, Graph,
                               RoundSphere, generate)


class Problem:
    """Oracle data bundled with the pipeline-side fields for one surface."""

    def __init__(self, surface, points):
        self.surface = surface
        self.chart = surface.default_chart(points)
        self.data = generate(surface, self.chart)
        self.metric = metric_field(self.chart, self.data.g)
        self._pack = None
        self._gauss = None

    @property
    def pack(self):
        if self._pack is None:
            self._pack = riemann_tensor(self.metric)
        return self._pack

    @property
    def gauss(self):
        if self._gauss is None:
            self._gauss = build_gauss_field(self.chart, self.data.frame[..., 0])
        return self._gauss

    @property
    def dx2(self):
        return self.chart.max_spacing ** 2


@pytest.fixture(scope="session")
def sphere():
    return Problem(RoundSphere(1.0), 49)


@pytest.fixture(scope="session")
def sphere_pair():
    return Problem(RoundSphere(1.0), 33), Problem(RoundSphere(1.0), 65)


@pytest.fixture(scope="session")
def ellipsoid():
    return Problem(Ellipsoid((1.0, 1.5, 2.0)), 49)


@pytest.fixture(scope="session")
def ellipsoid_pair():
    return (Problem(Ellipsoid((1.0, 1.5, 2.0)), 33),
            Problem(Ellipsoid((1.0, 1.5, 2.0)), 65))


@pytest.fixture(scope="session")
def graph_surface():
    return Problem(Graph((1.0, 0.0, 2.0)), 49)


@pytest.fixture(scope="session")
def ellipsoid_m3():
    return Problem(EllipsoidM3((1.0, 1.1, 1.2, 1.3)), 21)


@pytest.fixture(scope="session")
def clifford():
    return Problem(CliffordTorus(1.0, 1.4), 41)


def observed_order(coarse: float, fine: float) -> float:
    return float(np.log2(coarse / fine))
