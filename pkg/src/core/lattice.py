"""
Dyadic lattice navigation and geometry

Cubes are half-open, addressed by (level, index) with side 2^level inside the
window root [0,1)^n. Balls are discretized by cell-center membership.
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np

from src.core.grid import GridSet, LatticeConfig, LatticeError, upsample

logger = logging.getLogger(__name__)

__all__ = [
    "Ball",
    "BallCover",
    "CubeId",
    "DyadicLattice",
    "LatticeConfig",
    "LatticeError",
]


@dataclass(frozen=True, order=True)
class CubeId:
    """A dyadic cube: [index*2^level, (index+1)*2^level)^n"""
    level: int
    index: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "index", tuple(int(i) for i in self.index))

    @property
    def side(self) -> float:
        return 2.0 ** self.level

    def label(self) -> str:
        return f"{self.level}:{','.join(str(i) for i in self.index)}"

    def to_dict(self) -> dict:
        return {"level": self.level, "index": list(self.index)}


@dataclass(frozen=True)
class Ball:
    """Open ball B(center, radius)"""
    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise LatticeError(f"ball radius must be positive, got {self.radius}")

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class BallCover:
    """Disjoint same-level cubes covering a discretized ball"""
    level: int
    cubes: Tuple[CubeId, ...]
    clamped: bool


class DyadicLattice:
    """Addressing and geometry of the dyadic cubes inside one window"""

    def __init__(self, config: LatticeConfig):
        self.config = config
        self.n = config.dimension

    @property
    def root(self) -> CubeId:
        return CubeId(self.config.root_level, (0,) * self.n)

    def validate(self, cube: CubeId) -> CubeId:
        """Raise LatticeError unless the cube lies inside the window"""
        if not self.config.finest_level <= cube.level <= self.config.root_level:
            raise LatticeError(f"cube level {cube.level} outside window levels")
        if len(cube.index) != self.n:
            raise LatticeError(f"cube index {cube.index} does not match dimension {self.n}")
        bound = 2 ** (self.config.root_level - cube.level)
        if any(i < 0 or i >= bound for i in cube.index):
            raise LatticeError(f"cube {cube.label()} lies outside the window root")
        return cube

    def parent(self, cube: CubeId) -> CubeId:
        if cube.level >= self.config.root_level:
            raise LatticeError("no parent in window")
        return CubeId(cube.level + 1, tuple(i >> 1 for i in cube.index))

    def children(self, cube: CubeId) -> List[CubeId]:
        """The 2^n children, first coordinate varying fastest"""
        if cube.level <= self.config.finest_level:
            raise LatticeError("no children")
        base = tuple(2 * i for i in cube.index)
        result = []
        for offsets in itertools.product((0, 1), repeat=self.n):
            offsets = offsets[::-1]
            result.append(CubeId(cube.level - 1, tuple(b + o for b, o in zip(base, offsets))))
        return result

    def contains(self, a: CubeId, b: CubeId) -> bool:
        """True iff cube b is a subset of cube a"""
        if a.level < b.level:
            return False
        shift = a.level - b.level
        return all((j >> shift) == i for i, j in zip(a.index, b.index))

    def overlaps(self, a: CubeId, b: CubeId) -> bool:
        return self.contains(a, b) or self.contains(b, a)

    def ancestors(self, cube: CubeId, include_self: bool = True) -> List[CubeId]:
        """Chain from the cube (or its parent) up to the root"""
        chain = [cube] if include_self else []
        current = cube
        while current.level < self.config.root_level:
            current = self.parent(current)
            chain.append(current)
        return chain

    def cubes_at(self, level: int) -> Iterator[CubeId]:
        """All cubes of one level in row-major order"""
        for index in np.ndindex(*self.config.level_shape(level)):
            yield CubeId(level, index)

    def all_cubes(self) -> Iterator[CubeId]:
        """Every cube of the window, root first"""
        for level in range(self.config.root_level, self.config.finest_level - 1, -1):
            yield from self.cubes_at(level)

    def descendants(self, cube: CubeId, depth: int) -> Iterator[CubeId]:
        """Subcubes of the cube exactly `depth` levels below it"""
        level = cube.level - depth
        if level < self.config.finest_level:
            return
        width = 2 ** depth
        ranges = [range(i * width, (i + 1) * width) for i in cube.index]
        for index in itertools.product(*ranges):
            yield CubeId(level, index)

    def _slices(self, cube: CubeId, pad: int = 0) -> Tuple[slice, ...]:
        width = 2 ** (cube.level - self.config.finest_level)
        top = self.config.side_cells
        return tuple(
            slice(max((i - pad) * width, 0), min((i + 1 + pad) * width, top))
            for i in cube.index
        )

    def cube_slices(self, cube: CubeId) -> Tuple[slice, ...]:
        """Array slices selecting the finest cells of the cube"""
        return self._slices(self.validate(cube))

    def cells(self, cube: CubeId) -> GridSet:
        mask = np.zeros(self.config.shape, dtype=bool)
        mask[self.cube_slices(cube)] = True
        return GridSet(self.config, mask)

    def triple(self, cube: CubeId) -> GridSet:
        """Cells of the concentric cube 3Q clipped to the window"""
        mask = np.zeros(self.config.shape, dtype=bool)
        mask[self._slices(self.validate(cube), pad=1)] = True
        return GridSet(self.config, mask)

    def cube_of_cell(self, cell: int, level: int) -> CubeId:
        """The level-`level` cube containing a row-major flat cell"""
        index = np.unravel_index(cell, self.config.shape)
        shift = level - self.config.finest_level
        return CubeId(level, tuple(int(i) >> shift for i in index))

    def cube_center(self, cube: CubeId) -> Tuple[float, ...]:
        return tuple(a + (i + 0.5) * cube.side for a, i in zip(self.config.anchor, cube.index))

    def cell_center(self, cell: int) -> Tuple[float, ...]:
        index = np.unravel_index(cell, self.config.shape)
        return tuple(float(self.config.axis_centers(a)[i]) for a, i in enumerate(index))

    def ball_mask(self, ball: Ball) -> np.ndarray:
        """Boolean mask of cells whose centers lie strictly inside the open ball"""
        if len(ball.center) != self.n:
            raise LatticeError(f"ball center {ball.center} does not match dimension {self.n}")
        dist2 = np.zeros(self.config.shape)
        for axis in range(self.n):
            delta = (self.config.axis_centers(axis) - ball.center[axis]) ** 2
            shape = [1] * self.n
            shape[axis] = -1
            dist2 = dist2 + delta.reshape(shape)
        return dist2 < ball.radius ** 2

    def ball_cells(self, ball: Ball) -> GridSet:
        return GridSet(self.config, self.ball_mask(ball))

    def covering_cubes_for_ball(self, ball: Ball) -> BallCover:
        """
        Disjoint cubes of one level meeting the ball and covering its cells

        The level satisfies side/2 <= 2r < side. When that level falls outside
        the window it is clamped to the root (or the finest level) and flagged.

        Args:
            ball: Ball to cover

        Returns:
            BallCover with the level, the cubes (row-major) and the clamp flag
        """
        # frexp gives 2r = m * 2^e with m in [0.5, 1), hence 2^(e-1) <= 2r < 2^e
        level = math.frexp(2.0 * ball.radius)[1]
        clamped = False
        if level > self.config.root_level:
            level, clamped = self.config.root_level, True
        elif level < self.config.finest_level:
            level, clamped = self.config.finest_level, True

        side = 2.0 ** level
        count = 2 ** (self.config.root_level - level)
        ranges = []
        for axis in range(self.n):
            rel = ball.center[axis] - self.config.anchor[axis]
            lo = max(int(math.floor((rel - ball.radius) / side)), 0)
            hi = min(int(math.floor((rel + ball.radius) / side)), count - 1)
            ranges.append(range(lo, hi + 1))

        cubes = []
        for index in itertools.product(*ranges):
            # distance from the center to the closed cube
            gap2 = 0.0
            for axis, i in enumerate(index):
                lo = self.config.anchor[axis] + i * side
                nearest = min(max(ball.center[axis], lo), lo + side)
                gap2 += (ball.center[axis] - nearest) ** 2
            if gap2 < ball.radius ** 2:
                cubes.append(CubeId(level, index))
        if clamped:
            logger.debug(f"ball cover clamped to level {level} for radius {ball.radius}")
        return BallCover(level=level, cubes=tuple(sorted(cubes)), clamped=clamped)

    def cubes_mask(self, cubes: List[CubeId]) -> np.ndarray:
        """Union mask of a list of cubes"""
        mask = np.zeros(self.config.shape, dtype=bool)
        for cube in cubes:
            mask[self.cube_slices(cube)] = True
        return mask

    def level_indicator(self, cubes: List[CubeId], level: int) -> np.ndarray:
        """Level array marking the given cubes of that level"""
        marks = np.zeros(self.config.level_shape(level), dtype=bool)
        for cube in cubes:
            if cube.level == level:
                marks[cube.index] = True
        return marks

    def spread(self, level_array: np.ndarray, level: int) -> np.ndarray:
        """Broadcast a per-cube level array down to the finest cells"""
        return upsample(level_array, level - self.config.finest_level)
