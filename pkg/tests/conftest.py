import numpy as np
import pytest

from src.core.choquet import ContentHandle
from src.core.grid import GridFunction, GridSet, LatticeConfig
from src.core.lattice import CubeId, DyadicLattice
from src.core.set_functions import CubeGauge, Gauge


@pytest.fixture
def line4():
    """n=1, four cells of side 1/4"""
    return LatticeConfig(dimension=1, finest_level=-2)


@pytest.fixture
def line16():
    return LatticeConfig(dimension=1, finest_level=-4)


@pytest.fixture
def plane16():
    """n=2, 4x4 cells"""
    return LatticeConfig(dimension=2, finest_level=-2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def spike(line4):
    """4 on [0,1/4), 0 elsewhere"""
    return GridFunction.from_values(line4, [4, 0, 0, 0])


@pytest.fixture
def length(line4):
    """Content of the power gauge beta=1 on the four-cell line"""
    return ContentHandle.from_gauge(line4, Gauge.power(1.0))


def built_in_gauges(config: LatticeConfig):
    n = config.dimension
    gauges = [CubeGauge.from_gauge(config, Gauge.power(beta)) for beta in (float(n), 1.0, 0.5, 0.25)]
    gauges.append(CubeGauge.from_gauge(config, Gauge.log(1.0)))
    gauges.append(CubeGauge.measure_power(config, n / 2.0))
    # grows linearly in the level, not in the side
    steps = {level: (level - config.finest_level + 1) / (config.depth + 1) for level in config.levels()}
    gauges.append(CubeGauge.from_gauge(config, Gauge.side_table(steps)))
    return gauges


def brute_force_content(gauge: CubeGauge, grid_set: GridSet) -> float:
    """Minimum over the costs of every antichain of dyadic cubes covering the set"""
    lattice = DyadicLattice(gauge.config)

    def costs(cube: CubeId) -> set:
        if not grid_set.mask[lattice.cube_slices(cube)].any():
            return {0.0}
        options = {gauge.value(cube)}
        if cube.level > gauge.config.finest_level:
            # every cover below the cube is one cover per child
            combined = {0.0}
            for child in lattice.children(cube):
                combined = {round(a + b, 14) for a in combined for b in costs(child)}
            options |= combined
        return options

    return min(costs(lattice.root))
