import math

import numpy as np
import pytest

from src.core.choquet import ContentHandle
from src.core.equivalence import (
    adversarial_battery,
    capacity_zoo,
    doubling_constants,
    equivalence_check,
    induced_content,
    jn_constants,
    packing_condition_test,
    scattered_set,
    triple_cover_check,
)
from src.core.grid import LatticeConfig, random_set
from src.core.lattice import DyadicLattice
from src.core.set_functions import Gauge, MeasurePowerCapacity, check_subadditivity


@pytest.fixture
def line1024():
    return LatticeConfig(dimension=1, finest_level=-10)


def lebesgue_half(config):
    return MeasurePowerCapacity(config, alpha=config.dimension / 2.0, name="lebesgue-power-0.5")


def test_induced_content_of_a_content_is_itself(line16, plane16, rng):
    for config in (line16, plane16):
        handle = ContentHandle.from_gauge(config, Gauge.power(0.5))
        induced = induced_content(handle)
        assert induced.metadata["induced_from"] == handle.name
        for _ in range(20):
            grid_set = random_set(config, rng)
            assert induced.evaluate(grid_set) == pytest.approx(handle.evaluate(grid_set), rel=1e-12)


def test_induced_content_of_measure_is_measure(plane16, rng):
    measure = MeasurePowerCapacity(plane16, alpha=2.0)
    induced = induced_content(measure)
    for _ in range(20):
        grid_set = random_set(plane16, rng)
        assert induced.evaluate(grid_set) == pytest.approx(measure.evaluate(grid_set), rel=1e-12)


def test_induced_content_agrees_on_cubes(line16):
    lattice = DyadicLattice(line16)
    for name, handle in capacity_zoo(line16).items():
        induced = induced_content(handle)
        for cube in lattice.all_cubes():
            assert induced.evaluate(lattice.cells(cube)) == pytest.approx(handle.cube_value(cube), rel=1e-12), name


def test_capacity_zoo_names(line16, plane16):
    assert sorted(capacity_zoo(line16)) == sorted(
        ["power-1", "power-0.5", "power-0.25", "log-1", "measure", "lebesgue-power-0.5"])
    assert "power-2" in capacity_zoo(plane16)


def test_scattered_set_and_battery(line16):
    assert scattered_set(line16, 4).cells() == [0, 4, 8, 12]
    labels = [label for label, _ in adversarial_battery(line16)]
    assert labels[:4] == ["stride-2", "stride-4", "stride-8", "stride-16"]
    assert all(label.startswith(("stride-", "pair-")) for label in labels)


def test_equivalence_holds_for_contents(line16):
    report = equivalence_check(ContentHandle.from_gauge(line16, Gauge.power(0.5)), samples=50, seed=1)
    assert report.verdict == "pass"
    assert report.min_ratio == pytest.approx(1.0)
    assert report.witnesses == []
    assert report.cubes_checked == 31


def test_lebesgue_power_scattered_set():
    config = LatticeConfig(dimension=1, finest_level=-12)
    capacity = lebesgue_half(config)
    grid_set = scattered_set(config, 64)
    assert capacity.evaluate(grid_set) == pytest.approx(0.125)
    assert induced_content(capacity).evaluate(grid_set) == pytest.approx(1.0)


def test_lebesgue_power_fails_equivalence(line1024):
    report = equivalence_check(lebesgue_half(line1024), samples=5, seed=0)
    assert report.verdict == "fail"
    assert report.min_ratio < 0.25
    labels = [w.get("label") for w in report.witnesses]
    assert "stride-32" in labels
    stride = next(w for w in report.witnesses if w.get("label") == "stride-32")
    assert stride["ratio"] == pytest.approx(math.sqrt(1 / 32))
    assert stride["cells"][:2] == [0, 32]


def test_packing_condition_fails_for_lebesgue_power(line1024):
    report = packing_condition_test(lebesgue_half(line1024), trials=4, seed=0)
    assert report.verdict == "fail"
    assert report.witness is not None
    assert report.witness["lhs"] > 2 * report.witness["rhs"]


def test_packing_condition_holds_for_contents(line16):
    for beta in (1.0, 0.5):
        report = packing_condition_test(ContentHandle.from_gauge(line16, Gauge.power(beta)), trials=30, seed=2)
        assert report.verdict == "pass"
        assert report.max_ratio <= 2 + 1e-9


def test_packing_condition_rejects_small_constant(line16):
    with pytest.raises(ValueError):
        packing_condition_test(ContentHandle.from_gauge(line16, Gauge.power(1.0)), constant=0.5)


def test_doubling_constants(line16):
    full = doubling_constants(ContentHandle.from_gauge(line16, Gauge.power(1.0)), max_radius_cells=4)
    assert full.D == pytest.approx(2.0)
    half = doubling_constants(ContentHandle.from_gauge(line16, Gauge.power(0.5)), max_radius_cells=4)
    assert half.D == pytest.approx(math.sqrt(2.0))
    assert 1.0 <= half.D0 < math.inf
    assert half.witnesses["D"]["parent"]["level"] == half.witnesses["D"]["child"]["level"] + 1


def test_triple_cover_check(line16, plane16, rng):
    for config in (line16, plane16):
        handle = ContentHandle.from_gauge(config, Gauge.power(0.5))
        sets = [random_set(config, rng) for _ in range(20)]
        result = triple_cover_check(handle, sets)
        assert result["bound"] == 3.0 ** config.dimension
        assert result["verdict"] == "pass"
        assert result["sets"] == 20


def test_jn_constants():
    constants = jn_constants(2.0)
    assert constants.cprime == 6.0
    assert constants.Cprime == 2.0
    assert constants.C_jn == pytest.approx(math.exp(1 / (4 * math.e) + 1))
    assert constants.c_jn == pytest.approx(1 / (24 * math.e))
    assert constants.C_decay == pytest.approx(math.exp(1 / (2 * math.e) + 1))
    assert constants.c_decay == pytest.approx(1 / (12 * math.e))


@pytest.mark.slow
def test_zoo_verdicts(line1024):
    for name, handle in capacity_zoo(line1024).items():
        report = equivalence_check(handle, samples=50, seed=3)
        expected = "fail" if name == "lebesgue-power-0.5" else "pass"
        assert report.verdict == expected, name
        assert np.isfinite(report.min_ratio)
        assert report.notes == []
        packing = packing_condition_test(handle, trials=10, seed=3)
        assert packing.verdict == report.verdict, name


def test_shallow_window_carries_a_note(line16, line1024):
    shallow = equivalence_check(lebesgue_half(line16), samples=5, seed=1)
    assert shallow.verdict == "pass"
    assert "finest_level <= -10" in shallow.notes[0]
    deep = equivalence_check(lebesgue_half(line1024), samples=5, seed=1)
    assert deep.notes == []


def test_induced_content_grows_with_the_capacity(line16, plane16):
    rng = np.random.default_rng(71)
    for config in (line16, plane16):
        for alpha in (config.dimension / 4.0, config.dimension / 2.0, float(config.dimension)):
            low = rng.uniform(0.0, 1.0, size=config.shape)
            high = low + rng.uniform(0.0, 1.0, size=config.shape)
            small = induced_content(MeasurePowerCapacity(config, alpha, density=low))
            large = induced_content(MeasurePowerCapacity(config, alpha, density=high))
            for _ in range(30):
                grid_set = random_set(config, rng)
                assert small.evaluate(grid_set) <= large.evaluate(grid_set) + 1e-12


def test_measure_power_is_subadditive_on_disjoint_pairs(line16, plane16):
    rng = np.random.default_rng(73)
    for config in (line16, plane16):
        for alpha in (config.dimension / 4.0, config.dimension / 2.0, float(config.dimension)):
            capacity = MeasurePowerCapacity(config, alpha)
            for _ in range(50):
                a = random_set(config, rng)
                b = random_set(config, rng) - a
                assert capacity.evaluate(a | b) <= capacity.evaluate(a) + capacity.evaluate(b) + 1e-12
            assert check_subadditivity(capacity, trials=50, seed=5).passed
