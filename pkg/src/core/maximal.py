"""
Capacitary maximal operators

Dyadic, centered-ball, uncentered-ball and sharp maximal functions of grid
step functions, the best-constant deviation and the BMO norm. Ball radii run
over multiples of the cell side up to the window diameter, so ball operators
are lower approximations of the continuum suprema.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Union

import numpy as np

from src.core.choquet import choquet_integral, cube_averages, cube_integral
from src.core.grid import GridFunction, GridSet
from src.core.lattice import Ball, CubeId, DyadicLattice
from src.core.set_functions import SetFunctionHandle

logger = logging.getLogger(__name__)


@dataclass
class MaximalResult:
    """Per-cell maximal values and the cube or ball attaining each one"""
    values: GridFunction
    witnesses: List[Union[CubeId, Ball, None]]

    def to_dict(self) -> dict:
        return {
            "values": self.values.flat(),
            "witnesses": [w.to_dict() if w is not None else None for w in self.witnesses],
        }


class BestConstant(NamedTuple):
    c: float
    deviation: float


def _require_nonnegative(f: GridFunction):
    if (f.values < 0).any():
        raise ValueError("maximal operators take nonnegative functions; pass |f|")


def dyadic_maximal(f: GridFunction, handle: SetFunctionHandle) -> MaximalResult:
    """Per cell, the largest average over the cubes containing it"""
    _require_nonnegative(f)
    config = f.config
    lattice = DyadicLattice(config)
    averages = cube_averages(f, handle)

    best = np.full(config.shape, -1.0)
    best_level = np.full(config.shape, config.finest_level)
    # finest first, so ties keep the smallest attaining cube
    for level in config.levels():
        spread = lattice.spread(averages[level], level)
        better = spread > best
        best = np.where(better, spread, best)
        best_level = np.where(better, level, best_level)

    flat_levels = best_level.ravel()
    witnesses = [lattice.cube_of_cell(cell, int(flat_levels[cell])) for cell in range(config.num_cells)]
    return MaximalResult(values=GridFunction(config, best), witnesses=witnesses)


def ball_radii(lattice: DyadicLattice) -> List[float]:
    """Radii j*2^L up to a ball that covers the whole window"""
    config = lattice.config
    count = int(math.ceil(config.side_cells * math.sqrt(config.dimension)))
    return [j * config.cell_side for j in range(1, count + 1)]


def ball_average(f: GridFunction, handle: SetFunctionHandle, mask: np.ndarray) -> float:
    """Average of f over a discretized ball (0 when the ball has zero capacity)"""
    region = GridSet(f.config, mask)
    capacity = handle.evaluate(region)
    if capacity == 0 or math.isinf(capacity):
        return 0.0
    return choquet_integral(f, handle, region) / capacity


def ball_maximal(f: GridFunction, handle: SetFunctionHandle, centered: bool = True) -> MaximalResult:
    """
    Ball maximal function over the discrete ball family

    Centered: balls centered at the cell center. Uncentered: every ball of the
    family (centers at cell centers) whose cells contain the point.
    """
    _require_nonnegative(f)
    config = f.config
    lattice = DyadicLattice(config)
    radii = ball_radii(lattice)
    cache: Dict[bytes, float] = {}

    best = np.full(config.num_cells, -1.0)
    witnesses: List[Optional[Ball]] = [None] * config.num_cells

    for cell in range(config.num_cells):
        center = lattice.cell_center(cell)
        for radius in radii:
            ball = Ball(center, radius)
            mask = lattice.ball_mask(ball)
            key = mask.tobytes()
            if key not in cache:
                cache[key] = ball_average(f, handle, mask)
            value = cache[key]
            if centered:
                if value > best[cell]:
                    best[cell] = value
                    witnesses[cell] = ball
            else:
                flat = mask.ravel()
                better = flat & (value > best)
                for target in np.flatnonzero(better):
                    witnesses[target] = ball
                best = np.where(better, value, best)
            if mask.all():
                break

    logger.debug(f"ball maximal ({'centered' if centered else 'uncentered'}): "
                 f"{len(cache)} distinct balls")
    return MaximalResult(values=GridFunction(config, best), witnesses=witnesses)


def _deviation(f: GridFunction, handle: SetFunctionHandle, cube: CubeId, c: float,
               capacity: float) -> float:
    return cube_integral(GridFunction(f.config, np.abs(f.values - c)), handle, cube) / capacity


def _breakpoints(values: np.ndarray) -> np.ndarray:
    """Distinct values and all pairwise midpoints, ascending"""
    values = np.unique(values)
    midpoints = (values[:, None] + values[None, :]) / 2.0
    return np.unique(np.concatenate([values, midpoints[np.triu_indices(len(values), k=1)]]))


def best_constant(f: GridFunction, cube: CubeId, handle: SetFunctionHandle) -> BestConstant:
    """
    Smallest c minimizing the mean deviation of f from c over the cube

    The objective is piecewise linear in c with kinks at the values of f and
    their pairwise midpoints; the minimum sits on one of those points. For
    submodular handles the objective is convex and a binary search suffices.

    Args:
        f: Real-valued step function
        cube: Cube Q'
        handle: Set function

    Returns:
        BestConstant(c, deviation); (0, 0) when H(Q') is 0 or infinite
    """
    lattice = handle.lattice
    capacity = handle.evaluate_in_cube(GridSet.full(f.config), cube)
    if capacity == 0 or math.isinf(capacity):
        return BestConstant(0.0, 0.0)

    values = np.unique(f.values[lattice.cube_slices(cube)])
    if np.isinf(values).any():
        raise ValueError("best constant needs a finite function on the cube")
    if len(values) == 1:
        return BestConstant(float(values[0]), 0.0)

    candidates = _breakpoints(values)
    memo: Dict[int, float] = {}

    def objective(i: int) -> float:
        if i not in memo:
            memo[i] = _deviation(f, handle, cube, float(candidates[i]), capacity)
        return memo[i]

    def settled(i: int) -> bool:
        # objective stops decreasing at i
        left, right = objective(i), objective(i + 1)
        return right >= left - 1e-12 * max(1.0, abs(left))

    if handle.submodular_claimed:
        lo, hi = 0, len(candidates) - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if settled(mid):
                hi = mid
            else:
                lo = mid + 1
        index = lo
    else:
        scores = [objective(i) for i in range(len(candidates))]
        lowest = min(scores)
        index = next(i for i, s in enumerate(scores) if s <= lowest + 1e-12 * max(1.0, abs(lowest)))
    return BestConstant(float(candidates[index]), objective(index))


def cube_deviations(f: GridFunction, handle: SetFunctionHandle, root: CubeId) -> Dict[CubeId, BestConstant]:
    """Best-constant deviation of every cube inside root"""
    lattice = handle.lattice
    lattice.validate(root)
    result = {}
    for depth in range(root.level - f.config.finest_level + 1):
        for cube in lattice.descendants(root, depth):
            result[cube] = best_constant(f, cube, handle)
    return result


def sharp_maximal(f: GridFunction, handle: SetFunctionHandle, root: CubeId) -> MaximalResult:
    """Per cell, the largest best-constant deviation over cubes inside root containing it"""
    config = f.config
    lattice = DyadicLattice(config)
    deviations = cube_deviations(f, handle, root)

    best = np.zeros(config.shape)
    best_level = np.full(config.shape, config.root_level + 1)
    inside = lattice.cells(root).mask
    for level in range(config.finest_level, root.level + 1):
        table = np.zeros(config.level_shape(level))
        for cube, result in deviations.items():
            if cube.level == level:
                table[cube.index] = result.deviation
        spread = lattice.spread(table, level)
        better = inside & ((spread > best) | (best_level > config.root_level))
        best = np.where(better, spread, best)
        best_level = np.where(better, level, best_level)

    flat_levels = best_level.ravel()
    witnesses = [
        lattice.cube_of_cell(cell, int(flat_levels[cell])) if flat_levels[cell] <= config.root_level else None
        for cell in range(config.num_cells)
    ]
    return MaximalResult(values=GridFunction(config, best), witnesses=witnesses)


def bmo_norm(f: GridFunction, handle: SetFunctionHandle, root: CubeId) -> float:
    """Largest best-constant deviation over the cubes inside root"""
    deviations = cube_deviations(f, handle, root)
    return max((r.deviation for r in deviations.values()), default=0.0)


def level_set_capacity(values: GridFunction, handle: SetFunctionHandle, threshold: float) -> float:
    """H({g > t})"""
    return handle.evaluate(values.level_set(threshold, strict=True))

