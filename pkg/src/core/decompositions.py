"""
Packing selections, Calderon-Zygmund cubes and maximal dyadic partitions
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from src.core.choquet import choquet_integral, cube_averages, cube_integrals
from src.core.grid import GridFunction, GridSet, block_reduce, upsample
from src.core.lattice import CubeId, DyadicLattice
from src.core.reports import PackingCheckReport, PackingIntegralReport
from src.core.set_functions import CubeGauge, SetFunctionHandle
from src.utils.config import TOLERANCE

logger = logging.getLogger(__name__)

PACKING_CONSTANT = 2.0


@dataclass
class PackingSelection:
    """Greedy packing output

    selected: admitted cubes; ancestors: maximal pairwise disjoint witness
    ancestors; witnesses: dropped cube -> the ancestor its admission would
    overload; provenance: dropped cube -> the kept ancestor absorbing it.
    """
    selected: List[CubeId]
    ancestors: List[CubeId]
    witnesses: Dict[CubeId, CubeId] = field(default_factory=dict)
    provenance: Dict[CubeId, CubeId] = field(default_factory=dict)
    pruned: List[CubeId] = field(default_factory=list)
    constant: float = PACKING_CONSTANT

    def to_dict(self) -> dict:
        return {
            "selected": [c.to_dict() for c in self.selected],
            "ancestors": [c.to_dict() for c in self.ancestors],
            "provenance": [
                {"cube": c.to_dict(), "witness": self.witnesses[c].to_dict(), "ancestor": a.to_dict()}
                for c, a in sorted(self.provenance.items())
            ],
            "pruned": [c.to_dict() for c in self.pruned],
            "constant": self.constant,
        }


def check_disjoint(lattice: DyadicLattice, family: List[CubeId]):
    """Raise ValueError if two cubes of the family overlap"""
    members = set()
    for cube in family:
        lattice.validate(cube)
        if cube in members:
            raise ValueError(f"overlapping cubes in family: {cube.label()} appears twice")
        members.add(cube)
    for cube in family:
        for ancestor in lattice.ancestors(cube, include_self=False):
            if ancestor in members:
                raise ValueError(f"overlapping cubes in family: {ancestor.label()} contains {cube.label()}")


def _overloaded(total: float, bound: float, tolerance: float) -> bool:
    if math.isinf(bound):
        return False
    return total > bound * (1 + tolerance) + tolerance


def packing_select(family: List[CubeId], gauge: CubeGauge, constant: float = PACKING_CONSTANT,
                   tolerance: float = TOLERANCE) -> PackingSelection:
    """
    Greedy packing selection of a non-overlapping cube family

    Cubes are scanned coarse first, then by index. A cube is admitted iff
    every ancestor Q' (itself included) keeps sum of admitted lambda inside
    Q' at most constant * lambda(Q'). A rejected cube records the smallest
    overloaded ancestor as its witness; the witnesses are pruned to the
    maximal ones, which are pairwise disjoint.

    Args:
        family: Pairwise disjoint cubes
        gauge: Cube gauge lambda
        constant: Packing constant (2 for contents)

    Returns:
        PackingSelection

    Raises:
        ValueError: if the family overlaps
    """
    lattice = DyadicLattice(gauge.config)
    check_disjoint(lattice, family)

    sums: Dict[CubeId, float] = {}
    selected: List[CubeId] = []
    witnesses: Dict[CubeId, CubeId] = {}

    for cube in sorted(family, key=lambda c: (-c.level, c.index)):
        weight = gauge.value(cube)
        chain = lattice.ancestors(cube)
        violated = [
            a for a in chain
            if _overloaded(sums.get(a, 0.0) + weight, constant * gauge.value(a), tolerance)
        ]
        if violated:
            witnesses[cube] = violated[0]
            continue
        selected.append(cube)
        for a in chain:
            sums[a] = sums.get(a, 0.0) + weight

    distinct = sorted(set(witnesses.values()))
    ancestors = [
        w for w in distinct
        if not any(o != w and lattice.contains(o, w) for o in distinct)
    ]
    pruned = [w for w in distinct if w not in ancestors]
    provenance = {
        cube: next(a for a in ancestors if lattice.contains(a, w))
        for cube, w in witnesses.items()
    }
    if witnesses:
        logger.debug(f"packing: kept {len(selected)} of {len(family)} cubes, "
                     f"{len(ancestors)} ancestors ({len(pruned)} pruned)")
    return PackingSelection(
        selected=sorted(selected, key=lambda c: (-c.level, c.index)),
        ancestors=ancestors,
        witnesses=witnesses,
        provenance=provenance,
        pruned=pruned,
        constant=constant,
    )


def selected_sums(lattice: DyadicLattice, selected: List[CubeId], gauge: CubeGauge) -> Dict[int, np.ndarray]:
    """Sum of lambda over selected cubes inside every lattice cube"""
    config = gauge.config
    sums = {}
    running = None
    for level in config.levels():
        own = np.where(lattice.level_indicator(selected, level), gauge.levels[level], 0.0)
        running = own if running is None else block_reduce(running, np.sum) + own
        sums[level] = running
    return sums


def check_packing_selection(selection: PackingSelection, family: List[CubeId], gauge: CubeGauge,
                            tolerance: float = TOLERANCE) -> PackingCheckReport:
    """Exhaustive certificate for a packing selection over every lattice cube"""
    config = gauge.config
    lattice = DyadicLattice(config)
    constant = selection.constant

    covered = lattice.cubes_mask(selection.selected + selection.ancestors)
    cover_ok = not (lattice.cubes_mask(family) & ~covered).any()

    packing_violations = []
    sums = selected_sums(lattice, selection.selected, gauge)
    cubes_checked = 0
    for level in config.levels():
        bound = constant * gauge.levels[level]
        with np.errstate(invalid="ignore"):
            bad = np.isfinite(bound) & (sums[level] > bound * (1 + tolerance) + tolerance)
        cubes_checked += bad.size
        for index in np.argwhere(bad)[:10]:
            cube = CubeId(level, tuple(int(i) for i in index))
            packing_violations.append({"cube": cube.to_dict(), "sum": float(sums[level][cube.index]),
                                       "bound": float(bound[cube.index])})

    ancestor_violations = []
    for ancestor in selection.ancestors:
        inside = float(sums[ancestor.level][ancestor.index])
        if gauge.value(ancestor) > inside * (1 + tolerance) + tolerance:
            ancestor_violations.append({"cube": ancestor.to_dict(), "lambda": gauge.value(ancestor),
                                        "selected_sum": inside})

    disjoint = all(
        not lattice.overlaps(a, b)
        for i, a in enumerate(selection.ancestors)
        for b in selection.ancestors[i + 1:]
    )
    passed = cover_ok and not packing_violations and not ancestor_violations and disjoint
    if not passed:
        logger.warning(f"packing certificate failed: cover={cover_ok}, "
                       f"{len(packing_violations)} packing, {len(ancestor_violations)} ancestor violations")
    return PackingCheckReport(
        constant=constant,
        cubes_checked=cubes_checked,
        cover_ok=cover_ok,
        packing_violations=packing_violations,
        ancestor_violations=ancestor_violations,
        ancestors_disjoint=disjoint,
        passed=passed,
    )


def packing_integral_check(selection: PackingSelection, f: GridFunction, handle: SetFunctionHandle,
                           constant: float = PACKING_CONSTANT,
                           tolerance: float = TOLERANCE) -> PackingIntegralReport:
    """sum_j integral over Q_j of f  <=  constant * integral over the union of f"""
    cubes = selection.selected if isinstance(selection, PackingSelection) else list(selection)
    integrals = cube_integrals(f, handle)
    lhs = float(sum(integrals[cube.level][cube.index] for cube in cubes))
    union = GridSet(f.config, handle.lattice.cubes_mask(cubes))
    rhs = choquet_integral(f, handle, union)
    passed = lhs <= constant * rhs + tolerance
    return PackingIntegralReport(lhs=lhs, rhs=rhs, constant=constant, passed=passed)


@dataclass
class CZDecomposition:
    """Stopping cubes at height Lambda with their certificates"""
    cubes: List[CubeId]
    height: float
    upper_factor: float
    residual_violations: List[int]
    residual_capacity: float
    averages: Dict[CubeId, float] = field(default_factory=dict)
    parent_averages: Dict[CubeId, float] = field(default_factory=dict)
    root_average: float = 0.0

    def certificate_ok(self, tolerance: float = TOLERANCE) -> bool:
        """Lambda < avg(Q_k) <= M0 * Lambda, parents at most Lambda, null residual"""
        scale = max(1.0, self.height)
        for cube in self.cubes:
            avg = self.averages[cube]
            if not avg > self.height:
                return False
            if avg > self.upper_factor * self.height + tolerance * scale:
                return False
            if cube in self.parent_averages and self.parent_averages[cube] > self.height + tolerance * scale:
                return False
        return self.residual_capacity == 0

    def to_dict(self) -> dict:
        return {
            "cubes": [c.to_dict() for c in self.cubes],
            "height": self.height,
            "M0": self.upper_factor,
            "averages": [{"cube": c.to_dict(), "average": self.averages[c],
                          "parent_average": self.parent_averages.get(c)} for c in self.cubes],
            "root_average": self.root_average,
            "residual_violations": self.residual_violations,
            "residual_capacity": self.residual_capacity,
        }


def upper_factor(handle: SetFunctionHandle, cube: CubeId) -> float:
    """
    Largest H(parent)/H(child) over parent-child pairs inside the cube

    Children of zero capacity are skipped (their averages vanish); a cube
    without children gives 1.
    """
    config = handle.config
    values = handle.cube_values()
    lattice = handle.lattice
    inside = lattice.cells(cube).mask
    factor = 1.0
    for level in range(config.finest_level, cube.level):
        child = values[level]
        parent = upsample(values[level + 1])
        width = 2 ** (level - config.finest_level)
        region = inside[tuple(slice(None, None, width) for _ in range(config.dimension))]
        usable = region & (child > 0)
        if usable.any():
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = parent[usable] / child[usable]
            factor = max(factor, float(ratios.max()))
    return factor


def cz_decompose(f: GridFunction, cube: CubeId, height: float, handle: SetFunctionHandle,
                 tolerance: float = TOLERANCE) -> CZDecomposition:
    """
    Calderon-Zygmund stopping cubes of |f| inside a cube

    Descends from the cube and emits a subcube the first time its average
    exceeds the height.

    Raises:
        ValueError: "height below root average" when avg(|f|, Q') > height
    """
    if not height > 0:
        raise ValueError(f"height must be positive, got {height}")
    config = f.config
    lattice = handle.lattice
    lattice.validate(cube)
    g = f.abs()
    averages = cube_averages(g, handle)

    root_average = float(averages[cube.level][cube.index])
    if root_average > height * (1 + tolerance):
        raise ValueError("height below root average")

    emitted: List[CubeId] = []
    cube_avg: Dict[CubeId, float] = {}
    parent_avg: Dict[CubeId, float] = {}
    frontier = [cube]
    while frontier:
        next_frontier = []
        for parent in frontier:
            if parent.level <= config.finest_level:
                continue
            parent_value = float(averages[parent.level][parent.index])
            for child in lattice.children(parent):
                value = float(averages[child.level][child.index])
                if value > height:
                    emitted.append(child)
                    cube_avg[child] = value
                    parent_avg[child] = parent_value
                else:
                    next_frontier.append(child)
        frontier = next_frontier

    emitted.sort(key=lambda c: (-c.level, c.index))
    covered = lattice.cubes_mask(emitted)
    residual = lattice.cells(cube).mask & ~covered & (g.values > height)
    residual_set = GridSet(config, residual)
    residual_capacity = handle.evaluate(residual_set) if residual.any() else 0.0
    if residual_capacity > 0:
        logger.warning(f"CZ residual set has positive capacity {residual_capacity}")

    return CZDecomposition(
        cubes=emitted,
        height=float(height),
        upper_factor=upper_factor(handle, cube),
        residual_violations=residual_set.cells(),
        residual_capacity=residual_capacity,
        averages=cube_avg,
        parent_averages=parent_avg,
        root_average=root_average,
    )


def maximal_dyadic_partition(region: GridSet) -> List[CubeId]:
    """Maximal dyadic cubes contained in the region (coarse first)"""
    config = region.config
    full = {config.finest_level: region.mask}
    for level in range(config.finest_level + 1, config.root_level + 1):
        full[level] = block_reduce(full[level - 1], np.all)

    cubes = []
    for level in range(config.root_level, config.finest_level - 1, -1):
        keep = full[level]
        if level < config.root_level:
            keep = keep & ~upsample(full[level + 1])
        cubes.extend(CubeId(level, tuple(int(i) for i in idx)) for idx in np.argwhere(keep))
    return cubes
