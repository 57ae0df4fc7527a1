import io
import json
import math

import pytest
from pydantic import ValidationError

from src.core.choquet import ContentHandle
from src.core.grid import GridSet, LatticeConfig
from src.core.lattice import CubeId, DyadicLattice
from src.core.reports import EquivalenceReport, ExperimentReport, clean_value, dump_report
from src.core.schemas import (
    LatticeConfigModel,
    MeasurePowerSpec,
    PowerSpec,
    build_cube_gauge,
    build_gauge,
    build_handle,
    load_cube,
    load_family,
    load_function,
    load_handle,
    load_set,
    parse_gauge,
    read_document,
)
from src.core.set_functions import MeasurePowerCapacity


def test_parse_gauge_kinds():
    assert isinstance(parse_gauge({"kind": "power", "beta": 0.5}), PowerSpec)
    spec = parse_gauge({"kind": "measure_power", "alpha": 1})
    assert isinstance(spec, MeasurePowerSpec)
    assert spec.density == "uniform"
    with pytest.raises(ValidationError):
        parse_gauge({"kind": "cubic", "beta": 1})
    with pytest.raises(ValidationError):
        parse_gauge({"kind": "power"})


def test_document_config_overrides_window(line16):
    spec = parse_gauge({"kind": "power", "beta": 1, "config": {"dimension": 1, "finest_level": -2}})
    handle = build_handle(spec, line16)
    assert handle.config.num_cells == 4


def test_build_handle_by_kind(line4):
    power = build_handle(parse_gauge({"kind": "log", "beta": 1}), line4)
    assert isinstance(power, ContentHandle)
    measure = build_handle(parse_gauge({"kind": "measure_power", "alpha": 0.5}), line4)
    assert isinstance(measure, MeasurePowerCapacity)
    weighted = build_handle(parse_gauge({"kind": "measure_power", "alpha": 1, "density": [4, 0, 0, 0]}), line4)
    assert weighted.evaluate(GridSet.from_cells(line4, [0])) == pytest.approx(1.0)


def test_side_table_document(line4):
    entries = [{"level": 0, "value": 1}, {"level": -1, "value": 0.5}, {"level": -2, "value": 0.25}]
    spec = parse_gauge({"kind": "side_table", "entries": entries})
    gauge = build_cube_gauge(spec, line4)
    assert gauge.value(CubeId(-1, (1,))) == 0.5
    assert build_gauge(spec) is not None


def test_cube_table_document(line4):
    lattice = DyadicLattice(line4)
    entries = [{"level": c.level, "index": list(c.index), "value": 2.0 ** c.level} for c in lattice.all_cubes()]
    spec = parse_gauge({"kind": "table", "entries": entries})
    assert build_gauge(spec) is None
    handle = build_handle(spec, line4)
    assert handle.evaluate(GridSet.from_cells(line4, [0, 3])) == pytest.approx(0.5)


def test_partial_table_document(line4):
    spec = parse_gauge({"kind": "table", "entries": [{"level": 0, "index": [0], "value": 1}]})
    with pytest.raises(ValueError, match="partial cube table"):
        build_handle(spec, line4)


def test_read_document_sources(tmp_path):
    assert read_document('{"a": 1}') == {"a": 1}
    assert read_document("[1, 2]") == [1, 2]
    path = tmp_path / "doc.json"
    path.write_text('{"b": 2}', encoding="utf-8")
    assert read_document(str(path)) == {"b": 2}
    with pytest.raises(ValueError, match="no such file"):
        read_document(str(tmp_path / "nothing.json"))
    with pytest.raises(json.JSONDecodeError):
        read_document('{"c": ')


def test_read_document_from_stdin(monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO('{"kind": "power", "beta": 1}'))
    assert read_document("-") == {"kind": "power", "beta": 1}


def test_loaders(line4, line16):
    grid_set = load_set('{"cells": [1, 2]}', line4)
    assert grid_set.cells() == [1, 2]
    f = load_function('{"config": {"dimension": 1, "finest_level": -2}, "values": [1, 2, 3, 4]}', line16)
    assert f.config.num_cells == 4
    assert load_cube('{"level": -1, "index": [1]}') == CubeId(-1, (1,))
    assert load_family('{"cubes": [{"level": -2, "index": [0]}]}') == [CubeId(-2, (0,))]
    handle = load_handle('{"kind": "power", "beta": 1}', line4)
    assert handle.evaluate(GridSet.full(line4)) == 1.0


def test_function_values_must_fill_window(line4):
    with pytest.raises(ValueError):
        load_function('{"values": [1, 2]}', line4)


def test_lattice_config_model():
    config = LatticeConfigModel.model_validate({"dimension": 2, "finest_level": -3}).build()
    assert config == LatticeConfig(dimension=2, finest_level=-3)


def test_clean_value():
    assert clean_value({"a": 1.0, "b": math.inf, "c": [0.5, -math.inf], "d": None}) == {
        "a": 1, "b": "inf", "c": [0.5, "-inf"], "d": None}
    assert clean_value(CubeId(-1, (0,))) == {"level": -1, "index": [0]}


def test_dump_report_drops_runtime_unless_timing():
    report = ExperimentReport(experiment="x", inputs_digest="0", verdict="pass", runtime_ms=12)
    assert "runtime_ms" not in dump_report(report)
    assert dump_report(report, timing=True)["runtime_ms"] == 12
    assert report.passed


def test_dump_report_serializes_infinities():
    report = EquivalenceReport(handle="h", min_ratio=math.inf, verdict="fail")
    data = dump_report(report)
    assert data["min_ratio"] == "inf"
    assert json.loads(json.dumps(data)) == data
