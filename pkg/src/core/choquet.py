"""
Dyadic contents and Choquet integrals

content(E) is the minimum of sum lambda(Q_i) over dyadic covers of E by cubes
inside the window, computed bottom-up:

    cost(Q) = 0                                   if E misses Q
    cost(Q) = min(lambda(Q), sum of child costs)  otherwise

Ties (within a relative tolerance) keep the coarser cube. For a monotone
lambda the cost at Q equals the content of E n Q, so one pass yields the
whole cube profile.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Union

import numpy as np

from src.core.grid import GridFunction, GridSet, block_reduce, upsample
from src.core.lattice import CubeId
from src.core.set_functions import CubeGauge, Gauge, SetFunctionHandle, saturating_multiply
from src.utils.config import DP_RELATIVE_TOLERANCE

logger = logging.getLogger(__name__)


@dataclass
class ContentSolution:
    """Per-level DP tables for one query set (finest level first)"""
    value: float
    costs: Dict[int, np.ndarray]
    takes: Dict[int, np.ndarray]
    occupied: Dict[int, np.ndarray]


def _solve_tree(mask: np.ndarray, lambdas: List[np.ndarray], rtol: float):
    occupied = mask
    lam = lambdas[0]
    cost = np.where(occupied, lam, 0.0)
    take = occupied.copy()
    costs, takes, occ = [cost], [take], [occupied]
    for lam in lambdas[1:]:
        occupied = block_reduce(occupied, np.any)
        child_sum = block_reduce(cost, np.sum)
        take = occupied & ((lam <= child_sum) | np.isclose(lam, child_sum, rtol=rtol, atol=0.0))
        cost = np.where(occupied, np.where(take, lam, child_sum), 0.0)
        costs.append(cost)
        takes.append(take)
        occ.append(occupied)
    return costs, takes, occ


class ContentHandle(SetFunctionHandle):
    """The dyadic content generated by a cube gauge"""

    def __init__(self, gauge: CubeGauge, name: Optional[str] = None,
                 rtol: float = DP_RELATIVE_TOLERANCE):
        super().__init__(
            gauge.config,
            name or f"content[{gauge.name}]",
            subadditive_claimed=True,
            submodular_claimed=True,
            metadata={"kind": "content", "gauge": gauge.name},
        )
        self.gauge = gauge
        self.rtol = rtol
        self._lambdas = [gauge.levels[level] for level in self.config.levels()]

    @classmethod
    def from_gauge(cls, config, gauge: Gauge) -> "ContentHandle":
        handle = cls(CubeGauge.from_gauge(config, gauge))
        handle.metadata.update(gauge.metadata())
        return handle

    def solve(self, grid_set: GridSet) -> ContentSolution:
        """Run the cover DP over the whole window"""
        self._check(grid_set)
        costs, takes, occ = _solve_tree(grid_set.mask, self._lambdas, self.rtol)
        levels = self.config.levels()
        return ContentSolution(
            value=float(costs[-1].reshape(-1)[0]),
            costs=dict(zip(levels, costs)),
            takes=dict(zip(levels, takes)),
            occupied=dict(zip(levels, occ)),
        )

    def evaluate(self, grid_set: GridSet) -> float:
        self._check(grid_set)
        costs, _, _ = _solve_tree(grid_set.mask, self._lambdas, self.rtol)
        return float(costs[-1].reshape(-1)[0])

    def evaluate_in_cube(self, grid_set: GridSet, cube: CubeId) -> float:
        """Content of E n Q, running the DP on the subtree of Q only"""
        self._check(grid_set)
        finest = self.config.finest_level
        lambdas = []
        for level in range(finest, cube.level + 1):
            width = 2 ** (cube.level - level)
            window = tuple(slice(i * width, (i + 1) * width) for i in cube.index)
            lambdas.append(self.gauge.levels[level][window])
        mask = grid_set.mask[self.lattice.cube_slices(cube)]
        costs, _, _ = _solve_tree(mask, lambdas, self.rtol)
        return float(costs[-1].reshape(-1)[0])

    def cube_profile(self, grid_set: GridSet) -> Dict[int, np.ndarray]:
        return self.solve(grid_set).costs

    def cover(self, grid_set: GridSet) -> List[CubeId]:
        """Witness cover attaining the content, coarse cubes first"""
        solution = self.solve(grid_set)
        levels = self.config.levels()
        active = solution.occupied[self.config.root_level]
        cubes = []
        for level in reversed(levels):
            take = solution.takes[level]
            emit = active & take
            cubes.extend(CubeId(level, tuple(int(i) for i in idx)) for idx in np.argwhere(emit))
            if level > self.config.finest_level:
                active = upsample(active & ~take) & solution.occupied[level - 1]
        return cubes


def _as_cube_gauge(grid_set: GridSet, gauge: Union[CubeGauge, Gauge]) -> CubeGauge:
    if isinstance(gauge, Gauge):
        return CubeGauge.from_gauge(grid_set.config, gauge)
    return gauge


def content(grid_set: GridSet, gauge: Union[CubeGauge, Gauge]) -> float:
    """Dyadic content of a grid set"""
    return ContentHandle(_as_cube_gauge(grid_set, gauge)).evaluate(grid_set)


def content_cover(grid_set: GridSet, gauge: Union[CubeGauge, Gauge]) -> List[CubeId]:
    return ContentHandle(_as_cube_gauge(grid_set, gauge)).cover(grid_set)


def _region_mask(f: GridFunction, region: Optional[GridSet]) -> np.ndarray:
    if region is None:
        return np.ones(f.config.shape, dtype=bool)
    if region.config != f.config:
        raise ValueError("region and function live on different windows")
    return region.mask


def _layer_values(f: GridFunction, mask: np.ndarray) -> np.ndarray:
    values = f.values[mask]
    if (values < 0).any():
        raise ValueError("Choquet integral needs a nonnegative function on the region")
    return np.unique(values[values > 0])


def _layer_cake(f: GridFunction, mask: np.ndarray, measure) -> float:
    total, previous = 0.0, 0.0
    for t in _layer_values(f, mask):
        height = measure(GridSet(f.config, mask & (f.values >= t)))
        total += float(saturating_multiply(t - previous, height))
        previous = t
    if math.isinf(total) and math.isinf(previous):
        logger.warning("Choquet integral is infinite: f = inf on a set of positive capacity")
    return total


def choquet_integral(f: GridFunction, handle: SetFunctionHandle,
                     region: Optional[GridSet] = None) -> float:
    """
    Layer-cake integral of a nonnegative step function over a region

    With distinct positive values t_1 < ... < t_K on the region:
    sum_k (t_k - t_{k-1}) * H({f >= t_k} n region).
    """
    return _layer_cake(f, _region_mask(f, region), handle.evaluate)


def cube_integral(f: GridFunction, handle: SetFunctionHandle, cube: CubeId) -> float:
    """Integral of f over one cube"""
    mask = np.zeros(f.config.shape, dtype=bool)
    mask[handle.lattice.cube_slices(cube)] = True
    return _layer_cake(f, mask, lambda s: handle.evaluate_in_cube(s, cube))


def cube_integrals(f: GridFunction, handle: SetFunctionHandle,
                   region: Optional[GridSet] = None) -> Dict[int, np.ndarray]:
    """Integral of f over (region n Q) for every cube Q, one array per level"""
    mask = _region_mask(f, region)
    totals = {level: np.zeros(f.config.level_shape(level)) for level in f.config.levels()}
    previous = 0.0
    for t in _layer_values(f, mask):
        profile = handle.cube_profile(GridSet(f.config, mask & (f.values >= t)))
        for level, heights in profile.items():
            totals[level] = totals[level] + saturating_multiply(t - previous, heights)
        previous = t
    return totals


def _safe_ratio(numerator, denominator):
    """numerator / denominator, 0 where the denominator is 0 or infinite"""
    numerator = np.asarray(numerator, dtype=float)
    denominator = np.asarray(denominator, dtype=float)
    usable = (denominator > 0) & np.isfinite(denominator)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(usable, numerator / np.where(usable, denominator, 1.0), 0.0)
    return ratio


def cube_averages(f: GridFunction, handle: SetFunctionHandle) -> Dict[int, np.ndarray]:
    """Average of f over every cube with the 0/0 -> 0 convention"""
    integrals = cube_integrals(f, handle)
    capacities = handle.cube_values()
    return {level: _safe_ratio(integrals[level], capacities[level]) for level in integrals}


def average(f: GridFunction, cube: CubeId, handle: SetFunctionHandle) -> float:
    """
    Capacitary average of f over a cube

    Returns 0 when H(Q) = 0 (and when H(Q) is infinite) regardless of the numerator.
    """
    capacity = handle.evaluate_in_cube(GridSet.full(f.config), cube)
    if capacity == 0 or math.isinf(capacity):
        return 0.0
    return cube_integral(f, handle, cube) / capacity


def lp_norm(f: GridFunction, handle: SetFunctionHandle,
            region: Optional[GridSet] = None, p: float = 1.0) -> float:
    """(integral of |f|^p)^(1/p)"""
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")
    integral = choquet_integral(f.power(p), handle, region)
    return float(integral ** (1.0 / p))


def linf_norm(f: GridFunction, handle: SetFunctionHandle,
              region: Optional[GridSet] = None) -> float:
    """Largest |f| over cells of positive capacity"""
    mask = _region_mask(f, region)
    charged = handle.cube_values()[f.config.finest_level] > 0
    values = np.abs(f.values[mask & charged])
    return float(values.max()) if values.size else 0.0
