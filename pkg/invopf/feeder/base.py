import math
from typing import Dict, List, Optional, Tuple
from pydantic import BaseModel, Field, model_validator

from ..common.const import V_MAX, V_MIN
from ..common.types import BusId
from ..inverter import DerSpec

class Bus(BaseModel):
    """
    A feeder bus in per-unit.

    :param p_load: real demand (pu).
    :param q_load: reactive demand (pu).
    :param q_cap: shunt capacitor injection (pu).
    :param v_min2: lower squared voltage bound (pu²).
    :param v_max2: upper squared voltage bound (pu²).
    """
    id: BusId
    p_load: float = 0.0
    q_load: float = 0.0
    q_cap: float = 0.0
    der: Optional[DerSpec] = None
    v_min2: float = V_MIN ** 2
    v_max2: float = V_MAX ** 2

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check(self) -> "Bus":
        for name in ("p_load", "q_load", "q_cap"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"bus {self.id}: {name} must be finite")
        if not self.v_min2 < self.v_max2:
            raise ValueError(f"bus {self.id}: v_min2 must be below v_max2")
        if self.der is not None and self.der.bus != self.id:
            raise ValueError(f"bus {self.id}: attached DER names bus {self.der.bus}")
        return self

class Line(BaseModel):
    from_bus: BusId
    to_bus: BusId
    r: float = Field(ge=0)
    x: float = Field(ge=0)
    i_rated2: float = Field(gt=0)

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check(self) -> "Line":
        if self.r + self.x <= 0:
            raise ValueError(f"line {self.name}: r + x must be positive")
        return self

    @property
    def key(self) -> Tuple[str, str]:
        return self.from_bus, self.to_bus

    @property
    def name(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"

    @property
    def z2(self) -> float:
        return self.r ** 2 + self.x ** 2

class Feeder(BaseModel):
    """
    Balanced radial feeder in per-unit.

    Radiality is not enforced at construction so that `validate_radial` can
    report on malformed inputs; every solver entry point checks it.
    """
    name: str = "feeder"
    buses: Dict[str, Bus]
    lines: List[Line]
    substation: BusId
    v_sub2: float = Field(gt=0)
    s_base: float = Field(gt=0)
    v_base: float = Field(gt=0)
    approximate: bool = False

    class Config:
        frozen = True

    def bus(self, bus_id: str) -> Bus:
        return self.buses[bus_id]

    def line(self, name: str) -> Line:
        for line in self.lines:
            if line.name == name:
                return line
        raise KeyError(name)

    def ders(self) -> List[DerSpec]:
        return [bus.der for bus in self.buses.values() if bus.der is not None]

    def net_load(self, bus_id: str) -> Tuple[float, float]:
        """Load minus capacitor injection, before any DER output."""
        bus = self.buses[bus_id]
        return bus.p_load, bus.q_load - bus.q_cap

    def to_kw(self, value_pu: float) -> float:
        return value_pu * self.s_base / 1e3

    def with_ders(self, specs: List[DerSpec]) -> "Feeder":
        """Copy of the feeder with DER attachments replaced by `specs`."""
        by_bus = {spec.bus: spec for spec in specs}
        buses = {
            bus_id: bus.model_copy(update={"der": by_bus.get(bus_id)})
            for bus_id, bus in self.buses.items()
        }
        return self.model_copy(update={"buses": buses})
