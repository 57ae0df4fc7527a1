"""
Gauges, cube gauges and monotone set functions on grid sets

A Gauge maps a dyadic side length to a value, a CubeGauge assigns a value to
every cube of the window, and a SetFunctionHandle evaluates grid sets.
Extended reals use float('inf'); NaN is rejected everywhere.
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from src.core.grid import (
    GridFunction,
    GridSet,
    LatticeConfig,
    block_reduce,
    random_set,
    upsample,
)
from src.core.lattice import CubeId, DyadicLattice
from src.core.parallel_processor import ParallelProcessor
from src.core.reports import MonotonicityReport, SubadditivityReport
from src.utils.config import TOLERANCE

logger = logging.getLogger(__name__)

GAUGE_KINDS = ("power", "log", "side_table")


def saturating_multiply(a, b):
    """Product with the convention 0 * inf = 0"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        product = a * b
    return np.where((a == 0) | (b == 0), 0.0, product)


def _check_no_nan(values, what: str):
    if np.isnan(np.asarray(values, dtype=float)).any():
        raise ValueError(f"NaN is not allowed in {what}")


@dataclass(frozen=True)
class Gauge:
    """Translation-invariant gauge phi(side)"""
    kind: str
    beta: Optional[float] = None
    table: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self):
        if self.kind not in GAUGE_KINDS:
            raise ValueError(f"unknown gauge kind {self.kind!r}")
        if self.kind in ("power", "log"):
            if self.beta is None or not self.beta > 0 or math.isinf(self.beta):
                raise ValueError(f"{self.kind} gauge needs a positive finite beta, got {self.beta}")
        else:
            if not self.table:
                raise ValueError("side table gauge needs entries")
            entries = dict(self.table)
            _check_no_nan(list(entries.values()), "side table")
            if any(v < 0 for v in entries.values()):
                raise ValueError("side table values must be non-negative")
            object.__setattr__(self, "table", tuple(sorted((int(k), float(v)) for k, v in entries.items())))

    @classmethod
    def power(cls, beta: float) -> "Gauge":
        return cls("power", beta=float(beta))

    @classmethod
    def log(cls, beta: float) -> "Gauge":
        return cls("log", beta=float(beta))

    @classmethod
    def side_table(cls, entries: Dict[int, float]) -> "Gauge":
        return cls("side_table", table=tuple(dict(entries).items()))

    @property
    def name(self) -> str:
        if self.kind == "side_table":
            return "side-table"
        return f"{self.kind}-{self.beta:g}"

    def metadata(self) -> dict:
        data = {"kind": self.kind}
        if self.beta is not None:
            data["beta"] = self.beta
        if self.kind == "log":
            data["log_base"] = "natural"
        return data


def eval_gauge(gauge: Gauge, side: float) -> float:
    """
    Evaluate a gauge at a side length

    The log gauge is [log(2/t)]^(-beta) for t < 2 and +inf for t >= 2
    (natural logarithm).
    """
    if not side > 0:
        raise ValueError(f"side must be positive, got {side}")
    if gauge.kind == "power":
        return float(side ** gauge.beta)
    if gauge.kind == "log":
        if side >= 2:
            return math.inf
        return float(math.log(2.0 / side) ** (-gauge.beta))
    mantissa, exponent = math.frexp(side)
    if mantissa != 0.5:
        raise ValueError(f"side {side} is not a dyadic side length")
    level = exponent - 1
    table = dict(gauge.table)
    if level not in table:
        raise ValueError(f"side table has no entry for side 2^{level}")
    return table[level]


class CubeGauge:
    """A monotone value lambda(Q) for every cube Q of the window"""

    def __init__(self, config: LatticeConfig, levels: Dict[int, np.ndarray],
                 name: str = "table", validate: bool = True):
        self.config = config
        self.name = name
        self.levels = {}
        for level in config.levels():
            if level not in levels:
                raise ValueError(f"cube gauge is missing level {level}")
            values = np.broadcast_to(np.asarray(levels[level], dtype=float),
                                     config.level_shape(level)).copy()
            _check_no_nan(values, "cube gauge")
            if (values < 0).any():
                raise ValueError("cube gauge values must be non-negative")
            values.flags.writeable = False
            self.levels[level] = values
        if validate:
            self.validate_monotone()

    @classmethod
    def from_gauge(cls, config: LatticeConfig, gauge: Gauge) -> "CubeGauge":
        if gauge.kind == "side_table":
            missing = [k for k in config.levels() if k not in dict(gauge.table)]
            if missing:
                raise ValueError(f"partial side table: missing levels {missing}")
        levels = {
            level: np.full(config.level_shape(level), eval_gauge(gauge, 2.0 ** level))
            for level in config.levels()
        }
        return cls(config, levels, name=gauge.name)

    @classmethod
    def measure_power(cls, config: LatticeConfig, alpha: float,
                      density: Union[None, str, GridFunction, np.ndarray] = None) -> "CubeGauge":
        """lambda(Q) = mu(Q)^(alpha/n)"""
        capacity = MeasurePowerCapacity(config, alpha, density)
        return cls(config, capacity.cube_values(), name=capacity.name)

    @classmethod
    def from_table(cls, config: LatticeConfig, entries: Dict[CubeId, float]) -> "CubeGauge":
        """Explicit per-cube values; every cube of the window must be present"""
        lattice = DyadicLattice(config)
        levels = {level: np.full(config.level_shape(level), np.nan) for level in config.levels()}
        for cube, value in entries.items():
            lattice.validate(cube)
            levels[cube.level][cube.index] = float(value)
        missing = sum(int(np.isnan(v).sum()) for v in levels.values())
        if missing:
            raise ValueError(f"partial cube table: {missing} cubes have no value")
        return cls(config, levels, name="table")

    @classmethod
    def from_set_function(cls, handle: "SetFunctionHandle") -> "CubeGauge":
        """lambda(Q) = C(Q) for a monotone set function C"""
        return cls(handle.config, handle.cube_values(), name=handle.name)

    def value(self, cube: CubeId) -> float:
        return float(self.levels[cube.level][cube.index])

    def monotone_violation(self) -> Optional[Tuple[CubeId, CubeId]]:
        """First (child, parent) pair with lambda(child) > lambda(parent), if any"""
        for level in range(self.config.finest_level, self.config.root_level):
            child = self.levels[level]
            parent = upsample(self.levels[level + 1])
            with np.errstate(invalid="ignore"):
                bad = (child > parent) & ~np.isclose(child, parent, rtol=1e-12, atol=0.0)
            if bad.any():
                index = tuple(int(i) for i in np.argwhere(bad)[0])
                child_id = CubeId(level, index)
                return child_id, CubeId(level + 1, tuple(i >> 1 for i in index))
        return None

    def validate_monotone(self):
        violation = self.monotone_violation()
        if violation is not None:
            child, parent = violation
            raise ValueError(
                f"cube gauge is not monotone: lambda({child.label()})={self.value(child)} "
                f"> lambda({parent.label()})={self.value(parent)}"
            )


class SetFunctionHandle:
    """An evaluable monotone set function E -> [0, inf] on one window"""

    def __init__(self, config: LatticeConfig, name: str,
                 subadditive_claimed: bool = False,
                 submodular_claimed: bool = False,
                 doubling_claimed: bool = False,
                 metadata: Optional[dict] = None):
        self.config = config
        self.name = name
        self.subadditive_claimed = subadditive_claimed
        self.submodular_claimed = submodular_claimed
        self.doubling_claimed = doubling_claimed
        self.metadata = metadata or {}
        self.lattice = DyadicLattice(config)
        self._cube_values = None

    def evaluate(self, grid_set: GridSet) -> float:
        raise NotImplementedError

    def __call__(self, grid_set: GridSet) -> float:
        return self.evaluate(grid_set)

    def _check(self, grid_set: GridSet):
        if grid_set.config != self.config:
            raise ValueError(f"grid set window does not match handle {self.name}")

    def evaluate_in_cube(self, grid_set: GridSet, cube: CubeId) -> float:
        """H(E intersected with the cube)"""
        return self.evaluate(grid_set & self.lattice.cells(cube))

    def cube_value(self, cube: CubeId) -> float:
        return float(self.cube_values()[cube.level][cube.index])

    def cube_values(self) -> Dict[int, np.ndarray]:
        """H(Q) for every cube, as one array per level"""
        if self._cube_values is None:
            self._cube_values = self.cube_profile(GridSet.full(self.config))
        return self._cube_values

    def cube_profile(self, grid_set: GridSet) -> Dict[int, np.ndarray]:
        """H(E intersected with Q) for every cube Q"""
        profile = {}
        for level in self.config.levels():
            values = np.zeros(self.config.level_shape(level))
            for cube in self.lattice.cubes_at(level):
                values[cube.index] = self.evaluate_in_cube(grid_set, cube)
            profile[level] = values
        return profile

    def describe(self) -> dict:
        return {
            "name": self.name,
            "subadditive_claimed": self.subadditive_claimed,
            "submodular_claimed": self.submodular_claimed,
            "doubling_claimed": self.doubling_claimed,
            **self.metadata,
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name})"


def _density_masses(config: LatticeConfig,
                    density: Union[None, str, GridFunction, np.ndarray, List[float]]) -> np.ndarray:
    """Cell masses: density times cell volume"""
    if density is None or (isinstance(density, str) and density == "uniform"):
        values = np.ones(config.shape)
    elif isinstance(density, GridFunction):
        values = np.asarray(density.values, dtype=float)
    elif isinstance(density, str):
        raise ValueError(f"unknown density {density!r}")
    else:
        values = np.asarray(density, dtype=float)
        if values.shape == (config.num_cells,):
            values = values.reshape(config.shape)
    if values.shape != config.shape:
        raise ValueError(f"density shape {values.shape} does not match window {config.shape}")
    _check_no_nan(values, "density")
    if (values < 0).any() or np.isinf(values).any():
        raise ValueError("density values must be finite and non-negative")
    return values * config.cell_volume


def measure_power_eval(grid_set: GridSet, alpha: float,
                       density: Union[None, str, GridFunction, np.ndarray] = None) -> float:
    """(sum of mu over the cells of E)^(alpha/n)"""
    n = grid_set.config.dimension
    if not 0 < alpha <= n:
        raise ValueError(f"alpha must lie in (0, {n}], got {alpha}")
    masses = _density_masses(grid_set.config, density)
    return float(masses[grid_set.mask].sum() ** (alpha / n))


class MeasurePowerCapacity(SetFunctionHandle):
    """C(E) = mu(E)^(alpha/n) for a density mu on the window"""

    def __init__(self, config: LatticeConfig, alpha: float,
                 density: Union[None, str, GridFunction, np.ndarray] = None,
                 name: Optional[str] = None):
        n = config.dimension
        if not 0 < alpha <= n:
            raise ValueError(f"alpha must lie in (0, {n}], got {alpha}")
        uniform = density is None or (isinstance(density, str) and density == "uniform")
        if name is None:
            name = f"measure-power-{alpha / n:g}" + ("" if uniform else "-weighted")
        super().__init__(
            config, name,
            subadditive_claimed=True,
            submodular_claimed=True,
            doubling_claimed=uniform,
            metadata={"kind": "measure_power", "alpha": alpha, "density": "uniform" if uniform else "custom"},
        )
        self.alpha = float(alpha)
        self.exponent = self.alpha / n
        self.masses = _density_masses(config, density)
        self.masses.flags.writeable = False

    def evaluate(self, grid_set: GridSet) -> float:
        self._check(grid_set)
        return float(self.masses[grid_set.mask].sum() ** self.exponent)

    def evaluate_in_cube(self, grid_set: GridSet, cube: CubeId) -> float:
        self._check(grid_set)
        window = self.lattice.cube_slices(cube)
        return float(self.masses[window][grid_set.mask[window]].sum() ** self.exponent)

    def cube_profile(self, grid_set: GridSet) -> Dict[int, np.ndarray]:
        self._check(grid_set)
        mass = np.where(grid_set.mask, self.masses, 0.0)
        profile = {}
        for level in self.config.levels():
            if level > self.config.finest_level:
                mass = block_reduce(mass, np.sum)
            profile[level] = mass ** self.exponent
        return profile


class FunctionSetFunction(SetFunctionHandle):
    """Wrap a plain callable GridSet -> value as a handle"""

    def __init__(self, config: LatticeConfig, func: Callable[[GridSet], float], name: str = "function",
                 subadditive_claimed: bool = False, submodular_claimed: bool = False):
        super().__init__(config, name, subadditive_claimed=subadditive_claimed,
                         submodular_claimed=submodular_claimed)
        self.func = func

    def evaluate(self, grid_set: GridSet) -> float:
        self._check(grid_set)
        value = float(self.func(grid_set))
        if math.isnan(value):
            raise ValueError(f"set function {self.name} returned NaN")
        return value


def _cells_record(grid_set: GridSet) -> List[int]:
    return grid_set.cells()


def check_monotone(handle: SetFunctionHandle, trials: int = 200, seed: int = 0,
                   tolerance: float = TOLERANCE) -> MonotonicityReport:
    """
    Randomized monotonicity check: A subset of B must give H(A) <= H(B)

    Also checks H(empty) = 0 on every run.
    """
    config = handle.config
    empty_value = handle.evaluate(GridSet.empty(config))

    def trial(rng):
        superset = random_set(config, rng)
        subset = GridSet(config, superset.mask & (rng.random(config.shape) < rng.uniform(0.1, 0.9)))
        small, big = handle.evaluate(subset), handle.evaluate(superset)
        if small > big + tolerance * max(1.0, abs(big)):
            return {
                "subset": _cells_record(subset),
                "superset": _cells_record(superset),
                "subset_value": small,
                "superset_value": big,
            }
        return None

    results = ParallelProcessor().map_trials(trial, seed, trials, prefix="monotone")
    violations = [r for r in results if r is not None]
    passed = not violations and empty_value == 0
    if not passed:
        logger.warning(f"Monotonicity check failed for {handle.name}: "
                       f"{len(violations)} violations, H(empty)={empty_value}")
    return MonotonicityReport(
        handle=handle.name, trials=trials, empty_value=empty_value,
        violations=violations[:10], passed=passed,
    )


def _pair_check(handle: SetFunctionHandle, trials: int, seed: int, strong: bool,
                tolerance: float) -> SubadditivityReport:
    config = handle.config

    def trial(rng):
        a, b = random_set(config, rng), random_set(config, rng)
        left = handle.evaluate(a | b)
        if strong:
            left += handle.evaluate(a & b)
        right = handle.evaluate(a) + handle.evaluate(b)
        if math.isinf(right):
            return 0.0, None
        excess = left - right
        if excess > tolerance:
            return excess, {"A": _cells_record(a), "B": _cells_record(b), "lhs": left, "rhs": right}
        return excess, None

    results = ParallelProcessor().map_trials(trial, seed, trials, prefix="pairs")
    violations = [w for _, w in results if w is not None]
    max_excess = max((e for e, _ in results), default=0.0)
    kind = "strong" if strong else "subadditive"
    if violations:
        logger.warning(f"{kind} subadditivity failed for {handle.name}: {len(violations)} violations")
    return SubadditivityReport(
        handle=handle.name, kind=kind, trials=trials, max_excess=max_excess,
        violations=violations[:10], passed=not violations,
    )


def check_subadditivity(handle: SetFunctionHandle, trials: int = 200, seed: int = 0,
                        tolerance: float = TOLERANCE) -> SubadditivityReport:
    """H(A u B) <= H(A) + H(B) on random pairs"""
    return _pair_check(handle, trials, seed, strong=False, tolerance=tolerance)


def check_strong_subadditivity(handle: SetFunctionHandle, trials: int = 1000, seed: int = 0,
                               tolerance: float = TOLERANCE) -> SubadditivityReport:
    """H(A u B) + H(A n B) <= H(A) + H(B) on random pairs"""
    return _pair_check(handle, trials, seed, strong=True, tolerance=tolerance)
