import csv
import math

import pytest

from src.core.choquet import ContentHandle
from src.core.experiments import (
    CSV_COLUMNS,
    ball_cube_constant,
    differentiation_experiment,
    function_battery,
    inputs_digest,
    jn_experiment,
    leading_zero_bits,
    maximal_comparison_experiment,
    strong_type_cap,
    strong_type_experiment,
    weak_type_experiment,
    write_tail_csv,
)
from src.core.grid import GridFunction, LatticeConfig
from src.core.lattice import CubeId
from src.core.set_functions import Gauge


def test_leading_zero_bits(line4, line16):
    assert leading_zero_bits(line4).flat() == [2, 1, 0, 0]
    values = leading_zero_bits(line16).flat()
    assert values[:5] == [4, 3, 2, 2, 1]
    assert values[8:] == [0] * 8


def test_function_battery_is_seeded(line16):
    first = function_battery(line16, seed=5, count=6)
    second = function_battery(line16, seed=5, count=6)
    assert [name for name, _ in first][:3] == ["spike", "constant", "leading-zero-bits"]
    assert len(first) == 9
    for (name_a, f_a), (name_b, f_b) in zip(first, second):
        assert name_a == name_b
        assert f_a.flat() == f_b.flat()


def test_inputs_digest_is_stable(spike, line4):
    assert inputs_digest("a", spike) == inputs_digest("a", spike)
    assert inputs_digest("a", spike) != inputs_digest("a", GridFunction.constant(line4, 1.0))
    assert len(inputs_digest("a")) == 16


def test_weak_type_spike(spike, length):
    report = weak_type_experiment([("spike", spike)], length, detail=True)
    assert report.experiment == "weak-type-dyadic"
    assert report.verdict == "pass"
    summary = report.measurements[0]
    assert summary["function"] == "spike"
    assert summary["integral"] == pytest.approx(1.0)
    assert summary["max_ratio"] == pytest.approx(1.0)
    rows = {row["t"]: row for row in report.measurements[1:]}
    assert rows[1.5]["level_capacity"] == pytest.approx(0.5)
    assert rows[1.5]["ratio"] == pytest.approx(0.75)
    assert report.runtime_ms is not None


def test_weak_type_without_detail(spike, length):
    report = weak_type_experiment([spike], length)
    assert len(report.measurements) == 1
    assert report.measurements[0]["function"] == "f0"


def test_weak_type_battery_stays_below_two(line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(0.5))
    report = weak_type_experiment(function_battery(line16, seed=1, count=9), handle)
    assert report.passed
    assert report.summary["max_ratio"] <= 2 + 1e-9
    assert report.constants["bound"] == 2.0


def test_weak_type_ball_operators(line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(1.0))
    for operator in ("ball", "ball-uncentered"):
        report = weak_type_experiment(function_battery(line16, seed=2, count=3), handle, operator=operator)
        assert report.experiment == f"weak-type-{operator}"
        assert report.passed
        assert report.constants["bound"] is None


def test_weak_type_unknown_operator(spike, length):
    with pytest.raises(ValueError):
        weak_type_experiment([spike], length, operator="sharp")


def test_strong_type_spike(spike, length):
    report = strong_type_experiment([("spike", spike)], length, p=2)
    assert report.measurements[0]["lhs"] == pytest.approx(5.5)
    assert report.measurements[0]["rhs"] == pytest.approx(4.0)
    assert report.summary["max_ratio"] == pytest.approx(1.375)
    assert report.constants["cap"] == pytest.approx(strong_type_cap(2))
    assert report.passed


def test_strong_type_constant_and_scaling(line16, rng):
    handle = ContentHandle.from_gauge(line16, Gauge.power(0.5))
    constant = strong_type_experiment([GridFunction.constant(line16, 3.0)], handle, p=1.5)
    assert constant.summary["max_ratio"] == pytest.approx(1.0)
    battery = function_battery(line16, seed=3, count=3)
    base = strong_type_experiment(battery, handle, p=3)
    scaled = strong_type_experiment([(name, f.scale(7.0)) for name, f in battery], handle, p=3)
    assert scaled.summary["max_ratio"] == pytest.approx(base.summary["max_ratio"], rel=1e-9)


def test_strong_type_rejects_p_one(spike, length):
    with pytest.raises(ValueError):
        strong_type_experiment([spike], length, p=1.0)


def test_strong_type_cap():
    assert strong_type_cap(2) == pytest.approx(64.0)


def test_differentiation_of_constant():
    report = differentiation_experiment(lambda x: 2.0, Gauge.power(0.5), levels=[-2, -3, -4])
    assert [m["deviation"] for m in report.measurements] == [0.0, 0.0, 0.0]
    assert report.passed


def test_differentiation_of_linear_function():
    report = differentiation_experiment(lambda x: x, Gauge.power(1.0), levels=[-4, -2, -3])
    assert [m["level"] for m in report.measurements] == [-2, -3, -4]
    for m in report.measurements:
        assert m["deviation"] == pytest.approx(2.0 ** m["level"] / 2)
    assert report.summary["non_increasing"]
    assert report.summary["final_within_bound"]
    assert report.experiment == "differentiation-dyadic"


def test_differentiation_over_balls():
    report = differentiation_experiment(lambda x: x, Gauge.power(1.0), levels=[-2, -3, -4], family="ball")
    assert report.experiment == "differentiation-ball"
    assert report.passed


def test_differentiation_in_the_plane():
    report = differentiation_experiment(lambda x, y: x + y, Gauge.power(1.0), levels=[-1, -2, -3],
                                        dimension=2, lipschitz=math.sqrt(2))
    assert report.passed


def test_jn_constant_function(line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(0.5))
    report = jn_experiment(GridFunction.constant(line16, 5.0), handle)
    assert report.verdict == "pass"
    assert report.summary["bmo_norm"] == 0.0
    assert "note" in report.summary
    assert report.measurements == []


def test_jn_leading_zero_bits():
    config = LatticeConfig(dimension=1, finest_level=-6)
    handle = ContentHandle.from_gauge(config, Gauge.power(1.0))
    report = jn_experiment(leading_zero_bits(config), handle, seed=1, exhaustive_depth=3, random_cubes=5)
    assert report.experiment == "john-nirenberg"
    assert report.passed
    assert report.summary["failures"] == 0
    assert report.summary["bmo_norm"] > 0
    assert report.constants["M0"] == pytest.approx(2.0)
    assert report.constants["cprime"] == pytest.approx(6.0)
    assert all(row["tail"] <= row["bound"] + 1e-9 for row in report.measurements)
    assert all(row["tail"] <= row["chebyshev"] + 1e-9 for row in report.measurements)


def test_jn_on_a_subcube(line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(0.5))
    f = leading_zero_bits(line16)
    report = jn_experiment(f, handle, root=CubeId(-1, (0,)), exhaustive_depth=2, random_cubes=2)
    assert report.passed
    prefixes = {row["Qprime_id"] for row in report.measurements}
    assert "-1:0" in prefixes
    assert "-1:1" not in prefixes


@pytest.mark.slow
def test_jn_leading_zero_bits_fine_window():
    config = LatticeConfig(dimension=1, finest_level=-10)
    for beta in (1.0, 0.5):
        handle = ContentHandle.from_gauge(config, Gauge.power(beta))
        report = jn_experiment(leading_zero_bits(config), handle, seed=7)
        assert report.passed
        assert report.summary["decay_rate"] is not None


def test_tail_csv(tmp_path, line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(1.0))
    report = jn_experiment(leading_zero_bits(line16), handle, exhaustive_depth=2, random_cubes=0)
    path = write_tail_csv(report, tmp_path / "tails" / "jn.csv")
    with open(path, newline="", encoding="utf-8") as stream:
        rows = list(csv.reader(stream))
    assert rows[0] == CSV_COLUMNS
    assert len(rows) == len(report.measurements) + 1
    assert rows[1][0] == "0:0"


def test_ball_cube_constant(line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(1.0))
    cprime, witness = ball_cube_constant(handle)
    assert 0 < cprime < math.inf
    assert set(witness) == {"ball", "cube"}


def test_maximal_comparison(line16):
    handle = ContentHandle.from_gauge(line16, Gauge.power(1.0))
    report = maximal_comparison_experiment(function_battery(line16, seed=4, count=3), handle)
    assert report.experiment == "maximal-comparison"
    assert report.passed
    assert math.isfinite(report.summary["C"])
    assert report.summary["centered_le_uncentered"]
    assert report.constants["triple_bound"] == 3.0
    assert report.constants["c"] == pytest.approx(report.constants["Cprime"] / 2)
