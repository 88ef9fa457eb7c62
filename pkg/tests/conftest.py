import numpy as np
import pytest

from saddlekit.kernels import frac_kernel, reduce_to_1d
from saddlekit.radial_geometry import AveragedKernelCache
from saddlekit.operators import TriangularGrid, OddOperator2D
from saddlekit.layer1d import solve_layer, allen_cahn, peierls
from saddlekit.saddle import saddle_solve


@pytest.fixture(scope="session")
def frac2_half():
    return frac_kernel(2, 0.5)


@pytest.fixture(scope="session")
def cache_half(frac2_half):
    return AveragedKernelCache(frac2_half, m=1)


@pytest.fixture(scope="session")
def op_default(cache_half):
    """Default desk-scale operator: m=1, gamma=0.5, h=0.25, S_max=20."""
    grid = TriangularGrid(h=0.25, s_max=20.0)
    return OddOperator2D(cache_half, grid)


@pytest.fixture(scope="session")
def op_fine(cache_half):
    """Near-cone resolving operator for the maximum-principle ensembles."""
    grid = TriangularGrid(h=0.025, s_max=2.0)
    return OddOperator2D(cache_half, grid)


@pytest.fixture(scope="session")
def k1_half(frac2_half):
    return reduce_to_1d(frac2_half)


@pytest.fixture(scope="session")
def k1_quarter():
    return reduce_to_1d(frac_kernel(1, 0.25))


@pytest.fixture(scope="session")
def layer_bank(k1_half, k1_quarter):
    """Layers for both builtin nonlinearities at gamma in {0.25, 0.5}."""
    out = {}
    for nl in (allen_cahn(), peierls()):
        for key, k1 in (("0.5", k1_half), ("0.25", k1_quarter)):
            out[(nl.name, key)] = solve_layer(k1, nl, L=20.0, h=0.05)
    return out


@pytest.fixture(scope="session")
def layer_ac_half(layer_bank):
    return layer_bank[("allen-cahn", "0.5")]


@pytest.fixture(scope="session")
def saddle_default(op_default, layer_ac_half):
    """Saddle solution on the default preset, intermediates retained."""
    return saddle_solve(op_default, allen_cahn(), [5.0, 10.0, 15.0, 20.0],
                        layer_ac_half, keep_intermediate=True)
