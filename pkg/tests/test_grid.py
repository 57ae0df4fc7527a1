import math

import numpy as np
import pytest

from src.core.grid import (
    GridFunction,
    GridSet,
    LatticeConfig,
    LatticeError,
    block_reduce,
    random_set,
    random_step_function,
    upsample,
)


def test_config_shape_and_sizes():
    config = LatticeConfig(dimension=2, finest_level=-3)
    assert config.depth == 3
    assert config.side_cells == 8
    assert config.num_cells == 64
    assert config.shape == (8, 8)
    assert config.level_shape(-1) == (2, 2)
    assert config.levels() == [-3, -2, -1, 0]
    assert math.isclose(config.cell_volume, 1 / 64)
    assert config.anchor == (0, 0)


@pytest.mark.parametrize("kwargs", [
    {"dimension": 0},
    {"finest_level": 1},
    {"root_level": -1},
    {"dimension": 2, "anchor": (0,)},
    {"dimension": 1, "finest_level": -25},
])
def test_invalid_configs(kwargs):
    with pytest.raises(LatticeError):
        LatticeConfig(**kwargs)


def test_block_reduce_and_upsample():
    array = np.arange(16).reshape(4, 4)
    sums = block_reduce(array, np.sum)
    assert sums.tolist() == [[0 + 1 + 4 + 5, 2 + 3 + 6 + 7], [8 + 9 + 12 + 13, 10 + 11 + 14 + 15]]
    assert upsample(np.array([1, 2]), 2).tolist() == [1, 1, 1, 1, 2, 2, 2, 2]
    assert upsample(np.array([[1]]), 1).tolist() == [[1, 1], [1, 1]]


def test_set_algebra(line4):
    a = GridSet.from_cells(line4, [0, 3])
    b = GridSet.from_cells(line4, [1, 3])
    assert (a | b).cells() == [0, 1, 3]
    assert (a & b).cells() == [3]
    assert (a - b).cells() == [0]
    assert a.complement().cells() == [1, 2]
    assert (a & b) <= a
    assert not a <= b
    assert len(a) == 2
    assert GridSet.empty(line4).is_empty()
    assert a == GridSet.from_cells(line4, [3, 0])
    assert len({a, GridSet.from_cells(line4, [0, 3])}) == 1


def test_cells_are_row_major(plane16):
    grid_set = GridSet.from_cells(plane16, [1, 4])
    assert grid_set.mask[0, 1] and grid_set.mask[1, 0]
    assert grid_set.count() == 2


def test_cell_index_outside_window(line4):
    with pytest.raises(LatticeError):
        GridSet.from_cells(line4, [4])


def test_sets_on_different_windows(line4, line16):
    with pytest.raises(LatticeError):
        GridSet.full(line4) | GridSet.full(line16)


def test_function_rejects_nan(line4):
    with pytest.raises(ValueError, match="NaN"):
        GridFunction.from_values(line4, [1.0, float("nan"), 0.0, 0.0])


def test_function_allows_infinity(line4):
    f = GridFunction.from_values(line4, [math.inf, 0, 0, 0])
    assert f.level_set(1.0).cells() == [0]


def test_function_shape_mismatch(line4):
    with pytest.raises(LatticeError):
        GridFunction.from_values(line4, [1.0, 2.0])


def test_function_arithmetic(line4):
    f = GridFunction.from_values(line4, [-1, 2, 0, 3])
    assert f.abs().flat() == [1, 2, 0, 3]
    assert f.power(2).flat() == [1, 4, 0, 9]
    assert f.shift(1).flat() == [0, 3, 1, 4]
    assert f.scale(0).flat() == [0, 0, 0, 0]
    assert (f + f).flat() == [-2, 4, 0, 6]
    assert f.distinct_values().tolist() == [-1, 0, 2, 3]
    assert f.level_set(2).cells() == [1, 3]
    assert f.level_set(2, strict=True).cells() == [3]


def test_from_callable_samples_cell_centers(line4, plane16):
    f = GridFunction.from_callable(line4, lambda x: x)
    assert f.flat() == [0.125, 0.375, 0.625, 0.875]
    g = GridFunction.from_callable(plane16, lambda x, y: x + 10 * y)
    assert g.values[1, 2] == pytest.approx(0.375 + 6.25)


def test_indicator(line4):
    f = GridFunction.indicator(GridSet.from_cells(line4, [2]), value=5)
    assert f.flat() == [0, 0, 5, 0]


def test_values_are_read_only(line4):
    f = GridFunction.constant(line4, 1.0)
    with pytest.raises(ValueError):
        f.values[0] = 2.0


def test_random_generators_are_seeded(line16):
    first = random_set(line16, np.random.default_rng(3))
    second = random_set(line16, np.random.default_rng(3))
    assert first == second
    f = random_step_function(line16, np.random.default_rng(5))
    assert (f.values >= 0).all()
    assert len(f.distinct_values()) <= 5
