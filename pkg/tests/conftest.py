import numpy as np
import pytest

from maxreg.discretization import DiscreteOperator
from maxreg.grids import SpaceGrid, TimeGrid
from maxreg.operator_calculus import OperatorFamily, RegularityCertificate

_POINT_GRID = SpaceGrid.uniform(0.0, 1.0, 1)


def make_scalar_family(fn, time_grid: TimeGrid, alpha=1.0, constant=1.0) -> OperatorFamily:
    """Family of 1x1 operators a(t) with a declared Hoelder certificate."""
    ops = [
        DiscreteOperator(np.array([[float(fn(t))]]), _POINT_GRID)
        for t in time_grid.times
    ]
    cert = RegularityCertificate("holder", alpha, constant)
    return OperatorFamily(time_grid, ops, cert)


@pytest.fixture
def scalar_family():
    return make_scalar_family


@pytest.fixture
def rng():
    return np.random.default_rng(0)
