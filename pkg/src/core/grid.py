"""
Grid sets and step functions on a finite dyadic window

A window is the unit cube [0,1)^n (shifted by an integer anchor) cut into
2^(n*depth) finest cells. Sets are boolean arrays over the cells, functions
are float arrays; both use row-major (C order) flat cell numbering.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, List, Optional, Tuple

import numpy as np

from src.utils.config import MAX_FINEST_CELLS

logger = logging.getLogger(__name__)


class LatticeError(ValueError):
    """Raised for invalid lattice configurations and cube addressing"""


@dataclass(frozen=True)
class LatticeConfig:
    """Window of the dyadic lattice: dimension, finest level and root"""
    dimension: int = 1
    finest_level: int = -6
    root_level: int = 0
    anchor: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.dimension < 1:
            raise LatticeError(f"dimension must be >= 1, got {self.dimension}")
        if self.root_level != 0:
            raise LatticeError(f"root_level must be 0, got {self.root_level}")
        if self.finest_level > self.root_level:
            raise LatticeError(
                f"finest_level {self.finest_level} above root_level {self.root_level}"
            )
        if not self.anchor:
            object.__setattr__(self, "anchor", (0,) * self.dimension)
        object.__setattr__(self, "anchor", tuple(int(a) for a in self.anchor))
        if len(self.anchor) != self.dimension:
            raise LatticeError(f"anchor {self.anchor} does not match dimension {self.dimension}")
        if self.num_cells > MAX_FINEST_CELLS:
            raise LatticeError(
                f"window has {self.num_cells} finest cells, above the cap of {MAX_FINEST_CELLS}"
            )

    @property
    def depth(self) -> int:
        return self.root_level - self.finest_level

    @property
    def side_cells(self) -> int:
        """Finest cells along one axis"""
        return 2 ** self.depth

    @property
    def num_cells(self) -> int:
        return 2 ** (self.dimension * self.depth)

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.side_cells,) * self.dimension

    @property
    def cell_side(self) -> float:
        return 2.0 ** self.finest_level

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (self.dimension * self.finest_level)

    def levels(self) -> List[int]:
        """Levels from finest to root"""
        return list(range(self.finest_level, self.root_level + 1))

    def level_shape(self, level: int) -> Tuple[int, ...]:
        """Shape of the array holding one value per cube of the given level"""
        return (2 ** (self.root_level - level),) * self.dimension

    def axis_centers(self, axis: int) -> np.ndarray:
        """Cell center coordinates along one axis"""
        return self.anchor[axis] + (np.arange(self.side_cells) + 0.5) * self.cell_side

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "finest_level": self.finest_level,
            "root_level": self.root_level,
            "anchor": list(self.anchor),
        }


def block_reduce(array: np.ndarray, func: Callable) -> np.ndarray:
    """Reduce every 2x...x2 block of a level array into one parent entry"""
    n = array.ndim
    half = array.shape[0] // 2
    blocks = array.reshape(sum(((half, 2) for _ in range(n)), ()))
    return func(blocks, axis=tuple(range(1, 2 * n, 2)))


def upsample(array: np.ndarray, levels: int = 1) -> np.ndarray:
    """Repeat each entry over the 2^levels x ... block it covers one or more levels down"""
    if levels == 0:
        return array
    factor = 2 ** levels
    for axis in range(array.ndim):
        array = np.repeat(array, factor, axis=axis)
    return array


class GridSet:
    """A union of finest cells of the window"""

    def __init__(self, config: LatticeConfig, mask: np.ndarray):
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != config.shape:
            raise LatticeError(f"mask shape {mask.shape} does not match window {config.shape}")
        mask = mask.copy()
        mask.flags.writeable = False
        self.config = config
        self.mask = mask

    @classmethod
    def empty(cls, config: LatticeConfig) -> "GridSet":
        return cls(config, np.zeros(config.shape, dtype=bool))

    @classmethod
    def full(cls, config: LatticeConfig) -> "GridSet":
        return cls(config, np.ones(config.shape, dtype=bool))

    @classmethod
    def from_cells(cls, config: LatticeConfig, cells: Iterable[int]) -> "GridSet":
        """Build from row-major flat cell indices"""
        flat = np.zeros(config.num_cells, dtype=bool)
        cells = np.asarray(list(cells), dtype=np.int64)
        if cells.size:
            if cells.min() < 0 or cells.max() >= config.num_cells:
                raise LatticeError(f"cell index outside window of {config.num_cells} cells")
            flat[cells] = True
        return cls(config, flat.reshape(config.shape))

    def cells(self) -> List[int]:
        """Row-major flat indices of member cells, ascending"""
        return np.flatnonzero(self.mask).tolist()

    def count(self) -> int:
        return int(self.mask.sum())

    def is_empty(self) -> bool:
        return not self.mask.any()

    def _check(self, other: "GridSet"):
        if self.config != other.config:
            raise LatticeError("grid sets live on different windows")

    def __or__(self, other: "GridSet") -> "GridSet":
        self._check(other)
        return GridSet(self.config, self.mask | other.mask)

    def __and__(self, other: "GridSet") -> "GridSet":
        self._check(other)
        return GridSet(self.config, self.mask & other.mask)

    def __sub__(self, other: "GridSet") -> "GridSet":
        self._check(other)
        return GridSet(self.config, self.mask & ~other.mask)

    def __le__(self, other: "GridSet") -> bool:
        self._check(other)
        return not (self.mask & ~other.mask).any()

    def complement(self) -> "GridSet":
        return GridSet(self.config, ~self.mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridSet):
            return NotImplemented
        return self.config == other.config and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.config, self.mask.tobytes()))

    def __len__(self) -> int:
        return self.count()

    def __repr__(self) -> str:
        return f"GridSet({self.count()}/{self.config.num_cells} cells)"


class GridFunction:
    """A step function with one extended-real value per finest cell"""

    def __init__(self, config: LatticeConfig, values: np.ndarray):
        values = np.asarray(values, dtype=float)
        if values.shape == (config.num_cells,):
            values = values.reshape(config.shape)
        if values.shape != config.shape:
            raise LatticeError(f"values shape {values.shape} does not match window {config.shape}")
        if np.isnan(values).any():
            raise ValueError("NaN values are not allowed in grid functions")
        values = values.copy()
        values.flags.writeable = False
        self.config = config
        self.values = values

    @classmethod
    def from_values(cls, config: LatticeConfig, values: Iterable[float]) -> "GridFunction":
        """Build from row-major flat values"""
        return cls(config, np.asarray(list(values), dtype=float))

    @classmethod
    def constant(cls, config: LatticeConfig, value: float) -> "GridFunction":
        return cls(config, np.full(config.shape, float(value)))

    @classmethod
    def indicator(cls, grid_set: GridSet, value: float = 1.0) -> "GridFunction":
        return cls(grid_set.config, np.where(grid_set.mask, float(value), 0.0))

    @classmethod
    def from_callable(cls, config: LatticeConfig, func: Callable) -> "GridFunction":
        """Sample func at cell centers; func takes one coordinate array per axis"""
        axes = np.meshgrid(*[config.axis_centers(a) for a in range(config.dimension)], indexing="ij")
        return cls(config, np.broadcast_to(func(*axes), config.shape))

    def flat(self) -> List[float]:
        return self.values.ravel().tolist()

    def abs(self) -> "GridFunction":
        return GridFunction(self.config, np.abs(self.values))

    def power(self, p: float) -> "GridFunction":
        return GridFunction(self.config, np.power(np.abs(self.values), p))

    def shift(self, constant: float) -> "GridFunction":
        return GridFunction(self.config, self.values + constant)

    def scale(self, factor: float) -> "GridFunction":
        factor = float(factor)
        if factor == 0:
            return GridFunction.constant(self.config, 0.0)
        return GridFunction(self.config, self.values * factor)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        if self.config != other.config:
            raise LatticeError("grid functions live on different windows")
        return GridFunction(self.config, self.values + other.values)

    def distinct_values(self, region: Optional[GridSet] = None) -> np.ndarray:
        values = self.values if region is None else self.values[region.mask]
        return np.unique(values)

    def level_set(self, threshold: float, strict: bool = False) -> GridSet:
        """{f > t} when strict, else {f >= t}"""
        mask = self.values > threshold if strict else self.values >= threshold
        return GridSet(self.config, mask)

    def __repr__(self) -> str:
        return f"GridFunction({self.config.num_cells} cells, {len(np.unique(self.values))} values)"


def random_set(config: LatticeConfig, rng: np.random.Generator, density: Optional[float] = None) -> GridSet:
    """A random grid set mixing scattered cells and whole dyadic blocks"""
    if density is None:
        density = float(rng.uniform(0.05, 0.6))
    mask = rng.random(config.shape) < density
    if config.depth > 0 and rng.random() < 0.5:
        # sprinkle in a few full cubes so coarse covers get exercised
        level = int(rng.integers(config.finest_level + 1, config.root_level + 1))
        coarse = rng.random(config.level_shape(level)) < density
        mask |= upsample(coarse, level - config.finest_level)
    return GridSet(config, mask)


def random_step_function(config: LatticeConfig, rng: np.random.Generator,
                         max_values: int = 4, scale: float = 4.0) -> GridFunction:
    """A nonnegative step function taking a handful of distinct values"""
    palette = np.concatenate([[0.0], np.round(rng.uniform(0.0, scale, size=max_values), 3)])
    values = rng.choice(palette, size=config.shape)
    return GridFunction(config, values)
