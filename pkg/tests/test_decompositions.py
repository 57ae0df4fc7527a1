import numpy as np
import pytest

from src.core.choquet import ContentHandle, average
from src.core.decompositions import (
    check_packing_selection,
    cz_decompose,
    maximal_dyadic_partition,
    packing_integral_check,
    packing_select,
    upper_factor,
)
from src.core.grid import GridFunction, GridSet, LatticeConfig, random_set, random_step_function
from src.core.lattice import CubeId, DyadicLattice
from src.core.maximal import dyadic_maximal
from src.core.set_functions import CubeGauge, Gauge
from tests.conftest import built_in_gauges


def random_families(config, rng, count):
    """Non-overlapping families: maximal partitions of random sets"""
    return [maximal_dyadic_partition(random_set(config, rng)) for _ in range(count)]


def test_singleton_family(line16):
    gauge = CubeGauge.from_gauge(line16, Gauge.power(0.5))
    selection = packing_select([CubeId(-2, (1,))], gauge)
    assert selection.selected == [CubeId(-2, (1,))]
    assert selection.ancestors == []


def test_children_of_the_plane_root():
    config = LatticeConfig(dimension=2, finest_level=-2)
    gauge = CubeGauge.from_gauge(config, Gauge.power(0.5))
    root = CubeId(0, (0, 0))
    family = DyadicLattice(config).children(root)
    selection = packing_select(family, gauge)
    assert selection.selected == [CubeId(-1, (0, 0)), CubeId(-1, (0, 1))]
    assert selection.ancestors == [root]
    assert set(selection.provenance) == {CubeId(-1, (1, 0)), CubeId(-1, (1, 1))}
    assert all(a == root for a in selection.provenance.values())
    report = check_packing_selection(selection, family, gauge)
    assert report.passed


def test_family_already_packed(line16):
    gauge = CubeGauge.from_gauge(line16, Gauge.power(1.0))
    family = [CubeId(-4, (i,)) for i in range(0, 16, 3)]
    selection = packing_select(family, gauge)
    assert sorted(selection.selected) == sorted(family)
    assert selection.ancestors == []


def test_overlapping_family_rejected(line16):
    gauge = CubeGauge.from_gauge(line16, Gauge.power(1.0))
    with pytest.raises(ValueError, match="overlapping"):
        packing_select([CubeId(-1, (0,)), CubeId(-3, (1,))], gauge)
    with pytest.raises(ValueError, match="overlapping"):
        packing_select([CubeId(-3, (1,)), CubeId(-3, (1,))], gauge)


def test_packing_certificates_on_random_families(line16, plane16):
    rng = np.random.default_rng(17)
    for config in (line16, plane16):
        for gauge in built_in_gauges(config):
            for family in random_families(config, rng, 30):
                selection = packing_select(family, gauge)
                report = check_packing_selection(selection, family, gauge)
                assert report.passed, (gauge.name, family)


@pytest.mark.slow
def test_packing_acceptance_run(line16):
    rng = np.random.default_rng(2024)
    for gauge in built_in_gauges(line16):
        handle = ContentHandle(gauge)
        for family in random_families(line16, rng, 500):
            selection = packing_select(family, gauge)
            assert check_packing_selection(selection, family, gauge).passed
            for _ in range(10):
                f = random_step_function(line16, rng)
                assert packing_integral_check(selection, f, handle).passed


def test_packing_integral_check(line16, rng):
    gauge = CubeGauge.from_gauge(line16, Gauge.power(0.5))
    handle = ContentHandle(gauge)
    family = [CubeId(-4, (i,)) for i in range(16)]
    selection = packing_select(family, gauge)
    union = GridSet(line16, handle.lattice.cubes_mask(selection.selected))

    indicator = packing_integral_check(selection, GridFunction.indicator(union), handle)
    assert indicator.lhs == pytest.approx(sum(gauge.value(c) for c in selection.selected))
    assert indicator.passed

    zero = packing_integral_check(selection, GridFunction.constant(line16, 0.0), handle)
    assert zero.lhs == 0 and zero.rhs == 0 and zero.passed

    for _ in range(5):
        assert packing_integral_check(selection, random_step_function(line16, rng), handle).passed


def test_cz_decomposition_of_spike(spike, length):
    root = CubeId(0, (0,))
    decomposition = cz_decompose(spike, root, 1.0, length)
    assert decomposition.cubes == [CubeId(-1, (0,))]
    assert decomposition.upper_factor == pytest.approx(2.0)
    assert decomposition.averages[CubeId(-1, (0,))] == pytest.approx(2.0)
    assert decomposition.residual_violations == []
    assert decomposition.certificate_ok()
    assert decomposition.to_dict()["M0"] == pytest.approx(2.0)


def test_cz_height_below_root_average(spike, length):
    with pytest.raises(ValueError, match="height below root average"):
        cz_decompose(spike, CubeId(0, (0,)), 0.5, length)


def test_cz_constant_at_height(line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(0.5))
    f = GridFunction.constant(line16, 2.0)
    decomposition = cz_decompose(f, CubeId(0, (0,)), 2.0, handle)
    assert decomposition.cubes == []
    assert decomposition.residual_violations == []


def test_cz_above_maximal_function(line16, rng):
    handle = ContentHandle.from_gauge(line16, Gauge.power(0.5))
    f = random_step_function(line16, rng)
    height = float(dyadic_maximal(f, handle).values.values.max())
    decomposition = cz_decompose(f, CubeId(0, (0,)), height, handle)
    assert decomposition.cubes == []
    assert decomposition.residual_violations == []


def check_cz_certificates(config, instances, seed):
    rng = np.random.default_rng(seed)
    lattice = DyadicLattice(config)
    for gauge in built_in_gauges(config):
        handle = ContentHandle(gauge)
        for _ in range(instances):
            f = random_step_function(config, rng)
            # anywhere between the root average and twice it
            height = float(rng.uniform(1.0, 2.0)) * average(f, lattice.root, handle)
            if height == 0:
                continue
            decomposition = cz_decompose(f, lattice.root, height, handle)
            assert decomposition.certificate_ok(), gauge.name
            cubes = decomposition.cubes
            assert all(not lattice.overlaps(a, b) for i, a in enumerate(cubes) for b in cubes[i + 1:])


def test_cz_certificates_on_random_functions(line16, plane16):
    for config in (line16, plane16):
        check_cz_certificates(config, instances=10, seed=51)


@pytest.mark.slow
def test_cz_acceptance_run(line16, plane16):
    for config in (line16, plane16):
        check_cz_certificates(config, instances=200, seed=52)


def test_upper_factor_for_power_gauges(line16):
    for beta in (1.0, 0.5):
        handle = ContentHandle.from_gauge(line16, Gauge.power(beta))
        assert upper_factor(handle, CubeId(0, (0,))) == pytest.approx(2 ** beta)
        assert upper_factor(handle, CubeId(-4, (3,))) == 1.0


def test_maximal_dyadic_partition(line4):
    assert maximal_dyadic_partition(GridSet.full(line4)) == [CubeId(0, (0,))]
    assert maximal_dyadic_partition(GridSet.from_cells(line4, [0, 1, 2])) == [CubeId(-1, (0,)), CubeId(-2, (2,))]
    assert maximal_dyadic_partition(GridSet.empty(line4)) == []


def test_maximal_partition_tiles_the_set(plane16, rng):
    lattice = DyadicLattice(plane16)
    region = random_set(plane16, rng)
    cubes = maximal_dyadic_partition(region)
    assert np.array_equal(lattice.cubes_mask(cubes), region.mask)
    assert sum(lattice.cells(c).count() for c in cubes) == region.count()
