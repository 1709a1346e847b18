import logging
import math
import os
from pathlib import Path
from typing import Dict, List, Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, Field, ValidationError, model_validator

from ..admm import AdmmOptions
from ..common.const import GFI_RATING_SCALE, PV_PENALTY_WEIGHT
from ..common.types import BusId
from ..distributed import DopfOptions
from ..feeder import (
    AreaPartition,
    Feeder,
    bus_sort_key,
    fixture_path,
    load_feeder,
    load_fixture,
    partition,
    partition_by_roots,
    single_area,
)
from ..inverter import (
    DerSpec,
    GridFollowingP,
    GridFollowingQ,
    GridForming,
    GridSupporting,
    PvPenalty,
    PvTypeBus,
)
from ..nlp import NlpOptions
from ..opf import OpfOptions
from .exceptions import ScenarioError

logger = logging.getLogger(__name__)

Method = Literal["copf", "dopf", "admm"]
METHODS: List[Method] = ["copf", "dopf", "admm"]

class DerAssignment(BaseModel):
    """
    How the feeder's DERs are operated in a run.

    DERs listed in `gfi_buses` become grid-forming (rating scaled by
    `gfi_rating_scale`), those in `pv_buses` PV-type buses. Of the rest, the
    buses in `gsi_buses`, or a seeded random `gsi_percent` share, follow the
    droop curve; the remainder are grid-following in `gfli_mode`.
    """
    gfli_mode: Literal["q", "p"] = "q"
    gsi_percent: float = Field(default=0.0, ge=0, le=100)
    gsi_buses: Optional[List[BusId]] = None
    gfi_buses: List[BusId] = []
    pv_buses: List[BusId] = []
    gfi_rating_scale: float = Field(default=GFI_RATING_SCALE, gt=0)
    v_set: float = Field(default=1.0, gt=0)
    k_q_rel: float = Field(default=10.0, ge=0)
    v_ref: float = 1.0
    q_ref: float = 0.0
    pv_penalty_weight: float = Field(default=PV_PENALTY_WEIGHT, ge=0)
    pv_penalty: PvPenalty = PvPenalty.SQUARED

    @model_validator(mode="after")
    def _check(self) -> "DerAssignment":
        if self.gsi_buses is not None and self.gsi_percent > 0:
            raise ValueError("give either gsi_percent or gsi_buses, not both")
        groups = [set(self.gfi_buses), set(self.pv_buses), set(self.gsi_buses or [])]
        for i in range(len(groups)):
            for j in range(i + 1, len(groups)):
                shared = groups[i] & groups[j]
                if shared:
                    raise ValueError(f"buses {sorted(shared)} are assigned more than one DER mode")
        return self

class PartitionSpec(BaseModel):
    roots: Optional[Dict[str, BusId]] = None
    assignment: Optional[Dict[BusId, str]] = None

    @model_validator(mode="after")
    def _check(self) -> "PartitionSpec":
        if (self.roots is None) == (self.assignment is None):
            raise ValueError("partition needs exactly one of roots or assignment")
        return self

class SolverSection(BaseModel):
    """
    Solver settings of a scenario. Consensus tolerances default to 1e-5,
    a tenth of the dispatch validation tolerance.
    """
    nlp_method: Literal["slsqp", "auglag"] = "slsqp"
    eps_consensus: float = Field(default=1e-5, gt=0)
    max_macro: int = Field(default=60, gt=0)
    damping: float = Field(default=0.0, ge=0, lt=1)
    boundary_prices: bool = True
    rho: float = Field(default=1.0, gt=0)
    eps_pri: float = Field(default=1e-5, gt=0)
    eps_dual: float = Field(default=1e-5, gt=0)
    admm_max_iter: int = Field(default=1000, gt=0)
    parallel_areas: bool = False

class Scenario(BaseModel):
    """
    :param feeder: packaged fixture name or path to a feeder document,
        relative paths resolved against the scenario file.
    """
    name: str
    feeder: str
    description: Optional[str] = None
    ders: DerAssignment = DerAssignment()
    partition: Optional[PartitionSpec] = None
    solver: SolverSection = SolverSection()
    methods: List[Method] = list(METHODS)
    output_dir: str = "runs"
    seed: int = Field(default=0, ge=0)

def scenario_path(name: str) -> str:
    script_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    return os.path.join(script_dir, 'data', 'scenarios', f'{name}.yaml')

def load_scenario(source: Union[str, Path]) -> Scenario:
    """Load a scenario file, or a packaged scenario such as 'case1_gfli'."""
    path = Path(source)
    if not path.is_file():
        path = Path(scenario_path(str(source)))
    if not path.is_file():
        raise ScenarioError(f"Scenario '{source}' is neither a file nor a packaged scenario")
    with open(path, 'r', encoding='utf-8') as file:
        try:
            document = yaml.safe_load(file)
        except yaml.YAMLError as e:
            raise ScenarioError(f"Scenario '{source}' is not valid YAML: {e}") from e
    try:
        scenario = Scenario.model_validate(document)
    except ValidationError as e:
        raise ScenarioError(str(e)) from e
    feeder_path = path.parent / scenario.feeder
    if feeder_path.is_file():
        scenario = scenario.model_copy(update={"feeder": str(feeder_path)})
    return scenario

def scenario_feeder(s: Scenario) -> Feeder:
    if Path(s.feeder).is_file():
        return load_feeder(s.feeder)
    if os.path.isfile(fixture_path(s.feeder)):
        return load_fixture(s.feeder)
    raise ScenarioError(f"Feeder '{s.feeder}' is neither a file nor a packaged fixture")

def _p_fixed(spec: DerSpec) -> float:
    mode = spec.mode
    if isinstance(mode, (GridFollowingQ, GridSupporting)):
        return mode.p_measured
    if isinstance(mode, PvTypeBus):
        return mode.p_set
    return 0.0

def gsi_selection(pool: List[str], percent: float, seed: int) -> List[str]:
    """
    Seeded choice of round(percent% of pool) buses. The permutation depends
    only on the pool and the seed, so a larger share always contains a smaller one.
    """
    count = int(math.floor(percent / 100 * len(pool) + 0.5))
    order = np.random.default_rng(seed).permutation(len(pool))
    return sorted((pool[i] for i in order[:count]), key=bus_sort_key)

def assign_ders(f: Feeder, a: DerAssignment, seed: int = 0) -> List[DerSpec]:
    base = sorted(f.ders(), key=lambda spec: bus_sort_key(spec.bus))
    by_bus = {spec.bus: spec for spec in base}
    for name, buses in (("gfi_buses", a.gfi_buses), ("pv_buses", a.pv_buses), ("gsi_buses", a.gsi_buses or [])):
        missing = [bus for bus in buses if bus not in by_bus]
        if missing:
            raise ScenarioError(f"{name} {missing} have no DER on feeder '{f.name}'")

    pool = [spec.bus for spec in base if spec.bus not in a.gfi_buses and spec.bus not in a.pv_buses]
    gsi = set(a.gsi_buses) if a.gsi_buses is not None else set(gsi_selection(pool, a.gsi_percent, seed))

    specs: List[DerSpec] = []
    for spec in base:
        p = _p_fixed(spec)
        s = spec.s_rating
        if spec.bus in a.gfi_buses:
            specs.append(DerSpec(bus=spec.bus, s_rating=s * a.gfi_rating_scale, mode=GridForming(v_set2=a.v_set ** 2)))
        elif spec.bus in a.pv_buses:
            mode = PvTypeBus(v_set2=a.v_set ** 2, p_set=p, penalty_m=a.pv_penalty_weight)
            specs.append(DerSpec(bus=spec.bus, s_rating=s, mode=mode))
        elif spec.bus in gsi:
            k_q = a.k_q_rel * math.sqrt(max(s ** 2 - p ** 2, 0.0))
            mode = GridSupporting(q_ref=a.q_ref, v_ref=a.v_ref, k_q=k_q, p_measured=p)
            specs.append(DerSpec(bus=spec.bus, s_rating=s, mode=mode))
        elif a.gfli_mode == "p":
            specs.append(DerSpec(bus=spec.bus, s_rating=s, mode=GridFollowingP()))
        else:
            specs.append(DerSpec(bus=spec.bus, s_rating=s, mode=GridFollowingQ(p_measured=p)))
    logger.debug(
        f"Assigned {len(specs)} DERs: {len(gsi)} grid-supporting, {len(a.gfi_buses)} grid-forming, "
        f"{len(a.pv_buses)} PV-type"
    )
    return specs

def scenario_partition(f: Feeder, s: Scenario) -> AreaPartition:
    if s.partition is None:
        return single_area(f)
    if s.partition.roots is not None:
        return partition_by_roots(f, s.partition.roots)
    return partition(f, s.partition.assignment or {})

def opf_options(s: Scenario) -> OpfOptions:
    return OpfOptions(nlp=NlpOptions(method=s.solver.nlp_method), pv_penalty=s.ders.pv_penalty)

def dopf_options(s: Scenario) -> DopfOptions:
    return DopfOptions(
        opf=opf_options(s),
        eps_consensus=s.solver.eps_consensus,
        max_macro=s.solver.max_macro,
        damping=s.solver.damping,
        parallel_areas=s.solver.parallel_areas,
        boundary_prices=s.solver.boundary_prices,
    )

def admm_options(s: Scenario) -> AdmmOptions:
    return AdmmOptions(
        opf=opf_options(s),
        rho=s.solver.rho,
        eps_pri=s.solver.eps_pri,
        eps_dual=s.solver.eps_dual,
        max_iter=s.solver.admm_max_iter,
        parallel_areas=s.solver.parallel_areas,
    )
