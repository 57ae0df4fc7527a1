"""
JSON input models and their conversion to core types

Gauge and capacity documents are discriminated on "kind":

    {"kind": "power", "beta": 0.5}
    {"kind": "log", "beta": 1.0}
    {"kind": "side_table", "entries": [{"level": -1, "value": 0.5}, ...]}
    {"kind": "measure_power", "alpha": 0.5, "density": "uniform"}
    {"kind": "table", "entries": [{"level": -1, "index": [0], "value": 0.5}, ...]}

Any document may carry a "config" window that overrides the command-line one.
"""
import json
import logging
import sys
from pathlib import Path
from typing import Annotated, Any, List, Literal, Optional, Union

from pydantic import BaseModel, Field, TypeAdapter

from src.core.choquet import ContentHandle
from src.core.grid import GridFunction, GridSet, LatticeConfig
from src.core.lattice import CubeId
from src.core.set_functions import CubeGauge, Gauge, MeasurePowerCapacity, SetFunctionHandle
from src.utils.config import DEFAULT_DIMENSION, DEFAULT_FINEST_LEVEL

logger = logging.getLogger(__name__)


class LatticeConfigModel(BaseModel):
    dimension: int = DEFAULT_DIMENSION
    finest_level: int = DEFAULT_FINEST_LEVEL
    root_level: int = 0
    anchor: List[int] = Field(default_factory=list)

    def build(self) -> LatticeConfig:
        return LatticeConfig(
            dimension=self.dimension,
            finest_level=self.finest_level,
            root_level=self.root_level,
            anchor=tuple(self.anchor),
        )


class CubeModel(BaseModel):
    level: int
    index: List[int]

    def build(self) -> CubeId:
        return CubeId(self.level, tuple(self.index))


class CubeFamilyModel(BaseModel):
    config: Optional[LatticeConfigModel] = None
    cubes: List[CubeModel] = Field(default_factory=list)

    def build(self) -> List[CubeId]:
        return [cube.build() for cube in self.cubes]


class GridSetModel(BaseModel):
    config: Optional[LatticeConfigModel] = None
    cells: List[int] = Field(default_factory=list)

    def build(self, config: LatticeConfig) -> GridSet:
        return GridSet.from_cells(config, self.cells)


class GridFunctionModel(BaseModel):
    config: Optional[LatticeConfigModel] = None
    values: List[float]

    def build(self, config: LatticeConfig) -> GridFunction:
        return GridFunction.from_values(config, self.values)


class SideEntry(BaseModel):
    level: int
    value: float


class CubeEntry(BaseModel):
    level: int
    index: List[int]
    value: float


class PowerSpec(BaseModel):
    kind: Literal["power"]
    beta: float
    config: Optional[LatticeConfigModel] = None


class LogSpec(BaseModel):
    kind: Literal["log"]
    beta: float
    config: Optional[LatticeConfigModel] = None


class SideTableSpec(BaseModel):
    kind: Literal["side_table"]
    entries: List[SideEntry]
    config: Optional[LatticeConfigModel] = None


class MeasurePowerSpec(BaseModel):
    kind: Literal["measure_power"]
    alpha: float
    density: Union[Literal["uniform"], List[float]] = "uniform"
    config: Optional[LatticeConfigModel] = None


class TableSpec(BaseModel):
    kind: Literal["table"]
    entries: List[CubeEntry]
    config: Optional[LatticeConfigModel] = None


GaugeSpec = Annotated[
    Union[PowerSpec, LogSpec, SideTableSpec, MeasurePowerSpec, TableSpec],
    Field(discriminator="kind"),
]
gauge_adapter = TypeAdapter(GaugeSpec)


def read_document(source: str) -> Any:
    """
    Parse a JSON document given inline, as a file path, or "-" for stdin

    Raises json.JSONDecodeError for malformed text.
    """
    text = source
    if source == "-":
        text = sys.stdin.read()
    elif not source.lstrip().startswith(("{", "[")):
        path = Path(source)
        if not path.exists():
            raise ValueError(f"no such file: {source}")
        text = path.read_text(encoding="utf-8")
    return json.loads(text)


def resolve_config(model: Optional[LatticeConfigModel], fallback: LatticeConfig) -> LatticeConfig:
    return model.build() if model is not None else fallback


def parse_gauge(document: Any):
    return gauge_adapter.validate_python(document)


def build_gauge(spec) -> Optional[Gauge]:
    """Translation-invariant Gauge for side-based kinds, None otherwise"""
    if isinstance(spec, PowerSpec):
        return Gauge.power(spec.beta)
    if isinstance(spec, LogSpec):
        return Gauge.log(spec.beta)
    if isinstance(spec, SideTableSpec):
        return Gauge.side_table({entry.level: entry.value for entry in spec.entries})
    return None


def build_cube_gauge(spec, config: LatticeConfig) -> CubeGauge:
    gauge = build_gauge(spec)
    if gauge is not None:
        return CubeGauge.from_gauge(config, gauge)
    if isinstance(spec, MeasurePowerSpec):
        return CubeGauge.measure_power(config, spec.alpha, spec.density)
    entries = {CubeId(entry.level, tuple(entry.index)): entry.value for entry in spec.entries}
    return CubeGauge.from_table(config, entries)


def build_handle(spec, config: LatticeConfig) -> SetFunctionHandle:
    """
    Set function for a gauge/capacity document

    measure_power documents give the capacity mu(E)^(alpha/n) itself; every
    other kind gives the dyadic content of its cube gauge.
    """
    config = resolve_config(spec.config, config)
    if isinstance(spec, MeasurePowerSpec):
        return MeasurePowerCapacity(config, spec.alpha, spec.density)
    gauge = build_gauge(spec)
    if gauge is not None:
        return ContentHandle.from_gauge(config, gauge)
    return ContentHandle(build_cube_gauge(spec, config))


def load_handle(source: str, config: LatticeConfig) -> SetFunctionHandle:
    handle = build_handle(parse_gauge(read_document(source)), config)
    logger.debug(f"Loaded set function {handle.name} on {handle.config.num_cells} cells")
    return handle


def load_set(source: str, config: LatticeConfig) -> GridSet:
    model = GridSetModel.model_validate(read_document(source))
    return model.build(resolve_config(model.config, config))


def load_function(source: str, config: LatticeConfig) -> GridFunction:
    model = GridFunctionModel.model_validate(read_document(source))
    return model.build(resolve_config(model.config, config))


def load_family(source: str) -> List[CubeId]:
    return CubeFamilyModel.model_validate(read_document(source)).build()


def load_cube(source: str) -> CubeId:
    return CubeModel.model_validate(read_document(source)).build()
