from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..feeder import Area, Feeder
from ..inverter import DerSpec
from ..nlp import NlpProblem, NlpSolution, NlpStatus, lagrangian_gradient
from ..opf import OpfModel, OpfOptions, OpfScope, OpfSolution, build_model, check_specs
from .base import AreaBoundary, BoundaryState
from .exceptions import MissingBoundaryValueError

def with_specs(f: Feeder, specs: Optional[Sequence[DerSpec]]) -> Feeder:
    if specs is None:
        return f
    check_specs(f, specs)
    return f.with_ders(list(specs))

def area_scope(area: Area, bs: BoundaryState) -> OpfScope:
    """
    Area closed by its boundary approximations: the root held at the received
    voltage and every downstream shared bus a fixed load at the received demand.
    """
    if area.id not in bs.areas:
        raise MissingBoundaryValueError(area.id, "v0_in")
    state = bs.areas[area.id]
    loads: Dict[str, Optional[Tuple[float, float]]] = {}
    for bus in area.boundary_buses.values():
        if bus not in state.demand_in:
            raise MissingBoundaryValueError(area.id, f"demand_in[{bus}]")
        loads[bus] = state.demand_in[bus]
    return OpfScope(
        buses=area.buses,
        lines=area.lines,
        root=area.root,
        root_v2=state.v0_in,
        boundary_loads=loads,
    )

def area_model(area: Area, f: Feeder, bs: BoundaryState, options: Optional[OpfOptions] = None) -> OpfModel:
    return build_model(f, area_scope(area, bs), options)

def build_subproblem(
    area: Area,
    f: Feeder,
    specs: Optional[Sequence[DerSpec]],
    bs: BoundaryState,
    options: Optional[OpfOptions] = None,
) -> NlpProblem:
    return area_model(area, with_specs(f, specs), bs, options).problem

def root_inflow(f: Feeder, model: OpfModel, x: np.ndarray) -> Tuple[float, float]:
    """(p, q) entering the scope root: outgoing flows plus root net load minus root DER output."""
    vs = model.variables
    root = model.scope.root
    p, q = f.net_load(root)
    for name in model.scope.lines:
        if f.line(name).from_bus == root:
            p += x[vs.P[name]]
            q += x[vs.Q[name]]
    if root in vs.p_der:
        p -= x[vs.p_der[root]]
        q -= x[vs.q_der[root]]
    return float(p), float(q)

def priced_problem(f: Feeder, model: OpfModel, state: AreaBoundary) -> NlpProblem:
    """
    Area program with the received prices added as a linear cost: the upstream
    price on the (p, q) entering the root and the downstream price on v2 at
    every shared bus.
    """
    vs = model.variables
    c = np.zeros(model.problem.n_vars)
    price_p, price_q = state.root_price
    root = model.scope.root
    for name in model.scope.lines:
        if f.line(name).from_bus == root:
            c[vs.P[name]] += price_p
            c[vs.Q[name]] += price_q
    if root in vs.p_der:
        c[vs.p_der[root]] -= price_p
        c[vs.q_der[root]] -= price_q
    for bus, price in state.voltage_price.items():
        if bus in vs.v:
            c[vs.v[bus]] += price
    if not c.any():
        return model.problem
    return model.problem.with_linear_cost(c)

def boundary_sensitivities(
    area: Area,
    model: OpfModel,
    problem: NlpProblem,
    result: NlpSolution,
) -> Tuple[Dict[str, Tuple[float, float]], Optional[float]]:
    """
    Marginal cost of the values an area received, read off its multipliers.

    :return: d(cost)/d(p, q) of the demand at each downstream shared bus, and
        d(cost)/d(v2) of the root voltage (None for an area without upstream).
    """
    rows = {name: i for i, name in enumerate(problem.eq_names)}
    lam = result.eq_multipliers
    demand: Dict[str, Tuple[float, float]] = {}
    for line, bus in area.boundary_buses.items():
        # balance rows are (flow - losses - demand) = 0
        demand[bus] = (-float(lam[rows[f"p_balance[{line}]"]]), -float(lam[rows[f"q_balance[{line}]"]]))
    voltage = None
    if area.upstream is not None:
        grad = lagrangian_gradient(problem, result.x, result.eq_multipliers, result.ineq_multipliers)
        voltage = float(grad[model.variables.v[area.root]])
    return demand, voltage

@dataclass
class AreaOutcome:
    """Picklable result of one area solve."""
    result: Optional[NlpSolution] = None
    error: Optional[str] = None
    demand_prices: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    voltage_price: Optional[float] = None

@dataclass
class AreaResult:
    area: str
    model: OpfModel
    result: NlpSolution
    demand_prices: Dict[str, Tuple[float, float]] = field(default_factory=dict)
    voltage_price: Optional[float] = None

def stitch(results: List[AreaResult], options: OpfOptions, iterations: int) -> OpfSolution:
    """
    Global solution from per-area solutions. Buses, lines and DERs are each
    owned by exactly one area, so objectives and losses add up.
    """
    v2: Dict = {}
    flows: Dict = {}
    ders: Dict = {}
    specs: List[DerSpec] = []
    binding: List[str] = []
    objective = 0.0
    losses = 0.0
    statuses = set()
    for item in results:
        x = item.result.x
        v2.update(item.model.v2(x))
        flows.update(item.model.flows(x))
        ders.update(item.model.ders(x))
        specs.extend(item.model.specs)
        binding.extend(f"{item.area}: {name}" for name in item.model.binding(x, options.binding_tol))
        objective += float(item.model.problem.objective(x))
        losses += item.model.losses(x)
        statuses.add(item.result.status)
    if statuses == {NlpStatus.OPTIMAL}:
        status = NlpStatus.OPTIMAL
    elif NlpStatus.INFEASIBLE in statuses:
        status = NlpStatus.INFEASIBLE
    else:
        status = NlpStatus.MAX_ITER
    return OpfSolution(
        v2=v2,
        flows=flows,
        ders=ders,
        specs=specs,
        objective=objective,
        losses=losses,
        status=status,
        binding=binding,
        iterations=iterations,
    )
