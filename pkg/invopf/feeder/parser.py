import logging
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml
from pydantic import BaseModel, Field, ValidationError

from ..common.const import V_MAX, V_MIN, V_SUBSTATION
from ..common.types import BusId
from ..inverter import (
    DerSpec,
    GridFollowingP,
    GridFollowingQ,
    GridForming,
    GridSupporting,
    PvTypeBus,
)
from .base import Bus, Feeder, Line
from .exceptions import DanglingEndpointError, DuplicateBusError, FeederSchemaError, InvalidBaseError

logger = logging.getLogger(__name__)

# Default line ampacity when a document gives none (pu current).
DEFAULT_I_RATED = 10.0

class MetaSection(BaseModel):
    """
    :param s_base: three-phase base power (VA).
    :param v_base: line-to-line base voltage (V).
    :param v_sub: substation voltage magnitude (pu).
    """
    name: str = "feeder"
    s_base: float
    v_base: float
    substation: BusId
    v_sub: float = V_SUBSTATION
    approximate: bool = False
    description: Optional[str] = None

class BusEntry(BaseModel):
    id: BusId
    p_load: Optional[float] = None
    q_load: Optional[float] = None
    p_kw: Optional[float] = None
    q_kvar: Optional[float] = None
    q_cap: Optional[float] = None
    q_cap_kvar: Optional[float] = None
    v_min: float = V_MIN
    v_max: float = V_MAX

class LineEntry(BaseModel):
    from_bus: BusId = Field(alias="from")
    to_bus: BusId = Field(alias="to")
    r: Optional[float] = None
    x: Optional[float] = None
    r_ohm: Optional[float] = None
    x_ohm: Optional[float] = None
    i_rated: Optional[float] = None
    ampacity_a: Optional[float] = None

class DerEntry(BaseModel):
    bus: BusId
    mode: str
    s_rating: Optional[float] = None
    s_kva: Optional[float] = None
    p_measured: Optional[float] = None
    p_kw: Optional[float] = None
    q_ref: float = 0.0
    v_ref: float = 1.0
    k_q: float = 0.0
    v_set: float = 1.0
    p_set: Optional[float] = None
    p_set_kw: Optional[float] = None
    penalty_m: Optional[float] = None

class FeederDocument(BaseModel):
    meta: MetaSection
    buses: List[BusEntry]
    lines: List[LineEntry]
    ders: List[DerEntry] = []

def _pick(pu: Optional[float], physical: Optional[float], scale: float, default: float = 0.0) -> float:
    if pu is not None:
        return pu
    if physical is not None:
        return physical / scale
    return default

def _der_spec(entry: DerEntry, kw_per_pu: float) -> DerSpec:
    s_rating = _pick(entry.s_rating, entry.s_kva, kw_per_pu, default=math.nan)
    if math.isnan(s_rating):
        raise FeederSchemaError(f"DER at bus {entry.bus} has no rating")
    p_fixed = _pick(entry.p_measured, entry.p_kw, kw_per_pu)

    mode: Any
    if entry.mode == "grid_following_q":
        mode = GridFollowingQ(p_measured=p_fixed)
    elif entry.mode == "grid_following_p":
        mode = GridFollowingP()
    elif entry.mode == "grid_supporting":
        mode = GridSupporting(q_ref=entry.q_ref, v_ref=entry.v_ref, k_q=entry.k_q, p_measured=p_fixed)
    elif entry.mode == "grid_forming":
        mode = GridForming(v_set2=entry.v_set ** 2)
    elif entry.mode == "pv_bus":
        p_set = _pick(entry.p_set, entry.p_set_kw, kw_per_pu, default=p_fixed)
        extra = {} if entry.penalty_m is None else {"penalty_m": entry.penalty_m}
        mode = PvTypeBus(v_set2=entry.v_set ** 2, p_set=p_set, **extra)
    else:
        raise FeederSchemaError(f"DER at bus {entry.bus} has unknown mode '{entry.mode}'")
    return DerSpec(bus=entry.bus, s_rating=s_rating, mode=mode)

def build_feeder(document: Mapping[str, Any]) -> Feeder:
    """Validate a decoded feeder document and convert it to per-unit."""
    try:
        doc = FeederDocument.model_validate(document)
    except ValidationError as e:
        raise FeederSchemaError(str(e)) from e

    meta = doc.meta
    for name, value in (("s_base", meta.s_base), ("v_base", meta.v_base)):
        if not value > 0:
            raise InvalidBaseError(name, value)

    kw_per_pu = meta.s_base / 1e3
    z_base = meta.v_base ** 2 / meta.s_base
    i_base = meta.s_base / (math.sqrt(3) * meta.v_base)

    try:
        ders: Dict[str, DerSpec] = {}
        for entry in doc.ders:
            if entry.bus in ders:
                raise FeederSchemaError(f"more than one DER at bus {entry.bus}")
            ders[entry.bus] = _der_spec(entry, kw_per_pu)

        buses: Dict[str, Bus] = {}
        for bus_entry in doc.buses:
            if bus_entry.id in buses:
                raise DuplicateBusError(bus_entry.id)
            buses[bus_entry.id] = Bus(
                id=bus_entry.id,
                p_load=_pick(bus_entry.p_load, bus_entry.p_kw, kw_per_pu),
                q_load=_pick(bus_entry.q_load, bus_entry.q_kvar, kw_per_pu),
                q_cap=_pick(bus_entry.q_cap, bus_entry.q_cap_kvar, kw_per_pu),
                der=ders.get(bus_entry.id),
                v_min2=bus_entry.v_min ** 2,
                v_max2=bus_entry.v_max ** 2,
            )

        for bus_id in ders:
            if bus_id not in buses:
                raise DanglingEndpointError(f"der@{bus_id}", bus_id)
        if meta.substation not in buses:
            raise FeederSchemaError(f"substation '{meta.substation}' is not listed among buses")

        lines: List[Line] = []
        for line_entry in doc.lines:
            for endpoint in (line_entry.from_bus, line_entry.to_bus):
                if endpoint not in buses:
                    raise DanglingEndpointError(f"{line_entry.from_bus}-{line_entry.to_bus}", endpoint)
            i_rated = _pick(line_entry.i_rated, line_entry.ampacity_a, i_base, default=DEFAULT_I_RATED)
            lines.append(Line(
                from_bus=line_entry.from_bus,
                to_bus=line_entry.to_bus,
                r=_pick(line_entry.r, line_entry.r_ohm, z_base, default=math.nan),
                x=_pick(line_entry.x, line_entry.x_ohm, z_base, default=math.nan),
                i_rated2=i_rated ** 2,
            ))

        return Feeder(
            name=meta.name,
            buses=buses,
            lines=lines,
            substation=meta.substation,
            v_sub2=meta.v_sub ** 2,
            s_base=meta.s_base,
            v_base=meta.v_base,
            approximate=meta.approximate,
        )
    except ValidationError as e:
        raise FeederSchemaError(str(e)) from e

def parse_feeder(source: Union[str, Mapping[str, Any]]) -> Feeder:
    """
    Parse a feeder document.

    :param source: YAML text of the document, or the already decoded mapping.
    :return: the feeder with every quantity in per-unit.
    """
    if isinstance(source, str):
        try:
            document = yaml.safe_load(source)
        except yaml.YAMLError as e:
            raise FeederSchemaError(f"not a valid YAML document: {e}") from e
    else:
        document = source
    if not isinstance(document, Mapping):
        raise FeederSchemaError("top level of a feeder document must be a mapping")
    feeder = build_feeder(document)
    logger.debug(f"Parsed feeder '{feeder.name}': {len(feeder.buses)} buses, {len(feeder.lines)} lines")
    return feeder

def load_feeder(path: Union[str, Path]) -> Feeder:
    with open(path, 'r', encoding='utf-8') as file:
        return parse_feeder(file.read())

def fixture_path(name: str) -> str:
    script_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    return os.path.join(script_dir, 'data', f'{name}.yaml')

def load_fixture(name: str) -> Feeder:
    """Load a feeder shipped with the package, e.g. 'feeder15' or 'ieee123_approx'."""
    return load_feeder(fixture_path(name))
