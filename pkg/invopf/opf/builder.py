import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..feeder import Feeder, Line, ordered_lines, subtree_net_load, topological_order
from ..inverter import (
    DerSpec,
    GridFollowingP,
    GridFollowingQ,
    GridForming,
    GridSupporting,
    PvTypeBus,
    droop_q,
    droop_q_slope,
    gfli_p_bounds,
    gfli_q_bounds,
    gfi_constraints,
    pvbus_objective_gradient,
    pvbus_objective_term,
)
from ..nlp import NlpProblem
from ..powerflow import DerDispatch
from .base import LineFlow, OpfOptions
from .exceptions import ConflictingDerModeError, OpfError

logger = logging.getLogger(__name__)

INF = np.inf

@dataclass
class OpfScope:
    """
    The part of a feeder one program covers and how its edges are closed.

    :param buses: buses whose loads and DERs belong to the program, root first.
    :param lines: lines in the program; each sending bus is in `buses`.
    :param root: bus whose voltage is pinned to `root_v2` (free when None).
    :param boundary_loads: receiving buses outside `buses`, each closed by a
        fixed (p, q) demand or, when None, by a free demand variable.
    :param root_inflow: add free (p, q) inflow variables balanced at the root.
    """
    buses: Tuple[str, ...]
    lines: Tuple[str, ...]
    root: str
    root_v2: Optional[float]
    boundary_loads: Dict[str, Optional[Tuple[float, float]]] = field(default_factory=dict)
    root_inflow: bool = False

def full_scope(f: Feeder) -> OpfScope:
    return OpfScope(
        buses=tuple(topological_order(f)),
        lines=tuple(line.name for line in ordered_lines(f)),
        root=f.substation,
        root_v2=f.v_sub2,
    )

@dataclass
class OpfVariables:
    names: List[str] = field(default_factory=list)
    lb: List[float] = field(default_factory=list)
    ub: List[float] = field(default_factory=list)
    P: Dict[str, int] = field(default_factory=dict)
    Q: Dict[str, int] = field(default_factory=dict)
    l: Dict[str, int] = field(default_factory=dict)
    v: Dict[str, int] = field(default_factory=dict)
    p_der: Dict[str, int] = field(default_factory=dict)
    q_der: Dict[str, int] = field(default_factory=dict)
    boundary_p: Dict[str, int] = field(default_factory=dict)
    boundary_q: Dict[str, int] = field(default_factory=dict)
    inflow_p: Optional[int] = None
    inflow_q: Optional[int] = None

    def add(self, name: str, lb: float = -INF, ub: float = INF) -> int:
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        return len(self.names) - 1

    @property
    def size(self) -> int:
        return len(self.names)

class _AffineRows:
    def __init__(self):
        self.coefs: List[Dict[int, float]] = []
        self.rhs: List[float] = []
        self.names: List[str] = []

    def add(self, name: str, coefs: Dict[int, float], rhs: float = 0.0) -> None:
        self.names.append(name)
        self.coefs.append(coefs)
        self.rhs.append(rhs)

    def matrix(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        A = np.zeros((len(self.coefs), n))
        for row, coefs in enumerate(self.coefs):
            for col, value in coefs.items():
                A[row, col] += value
        return A, np.asarray(self.rhs, dtype=float)

@dataclass
class OpfModel:
    """A built program together with its variable map and default start."""
    problem: NlpProblem
    variables: OpfVariables
    scope: OpfScope
    specs: List[DerSpec]
    x0: np.ndarray
    line_r: Dict[str, float]

    def losses(self, x: np.ndarray) -> float:
        return float(sum(r * x[self.variables.l[name]] for name, r in self.line_r.items()))

    def v2(self, x: np.ndarray) -> Dict[str, float]:
        """Squared voltages of the scope buses (boundary buses excluded)."""
        return {bus: float(x[self.variables.v[bus]]) for bus in self.scope.buses}

    def boundary_v2(self, x: np.ndarray) -> Dict[str, float]:
        return {bus: float(x[self.variables.v[bus]]) for bus in self.scope.boundary_loads}

    def flows(self, x: np.ndarray) -> Dict[str, LineFlow]:
        vs = self.variables
        return {
            name: LineFlow(P=float(x[vs.P[name]]), Q=float(x[vs.Q[name]]), l=float(x[vs.l[name]]))
            for name in self.scope.lines
        }

    def ders(self, x: np.ndarray) -> Dict[str, DerDispatch]:
        vs = self.variables
        return {
            bus: DerDispatch(p=float(x[vs.p_der[bus]]), q=float(x[vs.q_der[bus]]))
            for bus in vs.p_der
        }

    def binding(self, x: np.ndarray, tol: float) -> List[str]:
        vs = self.variables
        lb = self.problem.lb
        ub = self.problem.ub
        report: List[str] = []
        for i, name in enumerate(vs.names):
            if ub[i] - lb[i] <= 1e-12:
                continue
            if np.isfinite(lb[i]) and x[i] - lb[i] <= tol:
                report.append(f"{name} at lower bound")
            elif np.isfinite(ub[i]) and ub[i] - x[i] <= tol:
                report.append(f"{name} at upper bound")
        if self.problem.n_ineq:
            g = self.problem.eval_ineq(x)
            report.extend(name for name, value in zip(self.problem.ineq_names, g) if value >= -tol)
        return report

def check_specs(f: Feeder, specs: Sequence[DerSpec]) -> None:
    seen = set()
    for spec in specs:
        if spec.bus in seen:
            raise ConflictingDerModeError(spec.bus)
        if spec.bus not in f.buses:
            raise OpfError(f"DER names unknown bus {spec.bus}")
        seen.add(spec.bus)

def _der_bounds(spec: DerSpec) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    mode = spec.mode
    s = spec.s_rating
    if isinstance(mode, GridFollowingQ):
        return (mode.p_measured, mode.p_measured), gfli_q_bounds(s, mode.p_measured)
    if isinstance(mode, GridFollowingP):
        return gfli_p_bounds(s), (0.0, 0.0)
    if isinstance(mode, GridSupporting):
        # the droop equality alone governs q; the rating bound applies to GFLI DERs only
        return (mode.p_measured, mode.p_measured), (-INF, INF)
    if isinstance(mode, GridForming):
        return (-s, s), (-s, s)
    if isinstance(mode, PvTypeBus):
        return (mode.p_set, mode.p_set), (-s, s)
    raise OpfError(f"Unsupported DER mode at bus {spec.bus}: {mode.kind}")

def _der_start(spec: DerSpec, v2: float) -> Tuple[float, float]:
    (p_lo, p_hi), (q_lo, q_hi) = _der_bounds(spec)
    if isinstance(spec.mode, GridSupporting):
        return p_lo, droop_q(v2, spec.mode)
    return 0.5 * (p_lo + p_hi), 0.5 * (q_lo + q_hi)

def build_model(
    f: Feeder,
    scope: OpfScope,
    options: Optional[OpfOptions] = None,
    v_start: Optional[float] = None,
) -> OpfModel:
    """
    Assemble the branch-flow program over `scope`.

    Variables per line are (P, Q, l), per bus v (including boundary buses),
    per DER (p, q). Equalities per line are the real and reactive balance at
    the receiving bus, the voltage drop and the current definition v_i·l = P² + Q².
    """
    options = options or OpfOptions()
    lines: Dict[str, Line] = {line.name: line for line in f.lines}
    scope_buses = set(scope.buses)
    for name in scope.lines:
        if name not in lines:
            raise OpfError(f"Scope names unknown line {name}")
        line = lines[name]
        if line.from_bus not in scope_buses:
            raise OpfError(f"Line {name} leaves from bus {line.from_bus} outside the scope")
        if line.to_bus not in scope_buses and line.to_bus not in scope.boundary_loads:
            raise OpfError(f"Line {name} reaches bus {line.to_bus} that is neither in scope nor a boundary")
    if scope.root not in scope_buses:
        raise OpfError(f"Root {scope.root} is not a scope bus")

    specs = [f.buses[bus].der for bus in scope.buses if f.buses[bus].der is not None]
    v_init = v_start if v_start is not None else (scope.root_v2 if scope.root_v2 is not None else f.v_sub2)

    vs = OpfVariables()
    for name in scope.lines:
        line = lines[name]
        vs.P[name] = vs.add(f"P[{name}]")
        vs.Q[name] = vs.add(f"Q[{name}]")
        vs.l[name] = vs.add(f"l[{name}]", 0.0, line.i_rated2)
    for bus_id in list(scope.buses) + list(scope.boundary_loads):
        bus = f.buses[bus_id]
        if bus_id == scope.root and scope.root_v2 is not None:
            vs.v[bus_id] = vs.add(f"v[{bus_id}]", scope.root_v2, scope.root_v2)
        else:
            vs.v[bus_id] = vs.add(f"v[{bus_id}]", bus.v_min2, bus.v_max2)
    for spec in specs:
        (p_lo, p_hi), (q_lo, q_hi) = _der_bounds(spec)
        vs.p_der[spec.bus] = vs.add(f"p_D[{spec.bus}]", p_lo, p_hi)
        vs.q_der[spec.bus] = vs.add(f"q_D[{spec.bus}]", q_lo, q_hi)
    for bus_id, demand in scope.boundary_loads.items():
        if demand is None:
            vs.boundary_p[bus_id] = vs.add(f"p_B[{bus_id}]")
            vs.boundary_q[bus_id] = vs.add(f"q_B[{bus_id}]")
    if scope.root_inflow:
        vs.inflow_p = vs.add(f"p_in[{scope.root}]")
        vs.inflow_q = vs.add(f"q_in[{scope.root}]")

    children: Dict[str, List[str]] = {}
    for name in scope.lines:
        children.setdefault(lines[name].from_bus, []).append(name)

    rows = _AffineRows()
    for name in scope.lines:
        line = lines[name]
        j = line.to_bus
        p_row = {vs.P[name]: 1.0, vs.l[name]: -line.r}
        q_row = {vs.Q[name]: 1.0, vs.l[name]: -line.x}
        if j in scope.boundary_loads:
            demand = scope.boundary_loads[j]
            if demand is None:
                p_row[vs.boundary_p[j]] = -1.0
                q_row[vs.boundary_q[j]] = -1.0
                p_rhs, q_rhs = 0.0, 0.0
            else:
                p_rhs, q_rhs = demand
        else:
            p_rhs, q_rhs = f.net_load(j)
            for child in children.get(j, []):
                p_row[vs.P[child]] = -1.0
                q_row[vs.Q[child]] = -1.0
            if j in vs.p_der:
                p_row[vs.p_der[j]] = 1.0
                q_row[vs.q_der[j]] = 1.0
        rows.add(f"p_balance[{name}]", p_row, p_rhs)
        rows.add(f"q_balance[{name}]", q_row, q_rhs)
        rows.add(
            f"voltage_drop[{name}]",
            {
                vs.v[j]: 1.0,
                vs.v[line.from_bus]: -1.0,
                vs.P[name]: 2 * line.r,
                vs.Q[name]: 2 * line.x,
                vs.l[name]: -line.z2,
            },
        )

    if scope.root_inflow:
        root = scope.root
        p_row = {vs.inflow_p: 1.0}
        q_row = {vs.inflow_q: 1.0}
        for child in children.get(root, []):
            p_row[vs.P[child]] = -1.0
            q_row[vs.Q[child]] = -1.0
        if root in vs.p_der:
            p_row[vs.p_der[root]] = 1.0
            q_row[vs.q_der[root]] = 1.0
        p_rhs, q_rhs = f.net_load(root)
        rows.add(f"p_balance[{root}]", p_row, p_rhs)
        rows.add(f"q_balance[{root}]", q_row, q_rhs)

    disks: List[Tuple[str, float]] = []
    pv_specs: List[Tuple[int, PvTypeBus]] = []
    for spec in specs:
        mode = spec.mode
        if isinstance(mode, GridSupporting):
            # q_D + (k_q / 2 v_ref) v = q_ref + k_q v_ref / 2
            rows.add(
                f"droop[{spec.bus}]",
                {vs.q_der[spec.bus]: 1.0, vs.v[spec.bus]: -droop_q_slope(mode)},
                mode.q_ref + mode.k_q * mode.v_ref / 2,
            )
        elif isinstance(mode, GridForming):
            if spec.bus == scope.root and scope.root_v2 is not None:
                raise OpfError(
                    f"Grid-forming DER at bus {spec.bus} conflicts with the pinned root voltage"
                )
            gfi = gfi_constraints(spec)
            rows.add(f"gfi_voltage[{spec.bus}]", {vs.v[spec.bus]: 1.0}, gfi.v_set2)
            disks.append((spec.bus, gfi.disk_radius))
        elif isinstance(mode, PvTypeBus):
            disks.append((spec.bus, spec.s_rating))
            pv_specs.append((vs.v[spec.bus], mode))

    n = vs.size
    A, b = rows.matrix(n)
    quad = [
        (vs.v[lines[name].from_bus], vs.l[name], vs.P[name], vs.Q[name])
        for name in scope.lines
    ]
    qv = np.array([t[0] for t in quad], dtype=int)
    ql = np.array([t[1] for t in quad], dtype=int)
    qP = np.array([t[2] for t in quad], dtype=int)
    qQ = np.array([t[3] for t in quad], dtype=int)
    quad_rows = np.arange(len(quad))

    def eq_fun(x: np.ndarray) -> np.ndarray:
        current = x[qv] * x[ql] - x[qP] ** 2 - x[qQ] ** 2
        return np.concatenate([A @ x - b, current])

    def eq_jac(x: np.ndarray) -> np.ndarray:
        J = np.zeros((len(quad), n))
        J[quad_rows, qv] = x[ql]
        J[quad_rows, ql] = x[qv]
        J[quad_rows, qP] = -2 * x[qP]
        J[quad_rows, qQ] = -2 * x[qQ]
        return np.vstack([A, J])

    disk_p = np.array([vs.p_der[bus] for bus, _ in disks], dtype=int)
    disk_q = np.array([vs.q_der[bus] for bus, _ in disks], dtype=int)
    disk_s2 = np.array([s ** 2 for _, s in disks], dtype=float)
    disk_rows = np.arange(len(disks))

    def ineq_fun(x: np.ndarray) -> np.ndarray:
        return x[disk_p] ** 2 + x[disk_q] ** 2 - disk_s2

    def ineq_jac(x: np.ndarray) -> np.ndarray:
        J = np.zeros((len(disks), n))
        J[disk_rows, disk_p] = 2 * x[disk_p]
        J[disk_rows, disk_q] = 2 * x[disk_q]
        return J

    cost = np.zeros(n)
    line_r = {name: lines[name].r for name in scope.lines}
    for name, r in line_r.items():
        cost[vs.l[name]] = r
    variant = options.pv_penalty

    def objective(x: np.ndarray) -> float:
        value = float(cost @ x)
        for index, mode in pv_specs:
            value += pvbus_objective_term(x[index], mode, variant)
        return value

    def gradient(x: np.ndarray) -> np.ndarray:
        g = cost.copy()
        for index, mode in pv_specs:
            g[index] += pvbus_objective_gradient(x[index], mode, variant)
        return g

    problem = NlpProblem(
        n_vars=n,
        lb=np.asarray(vs.lb, dtype=float),
        ub=np.asarray(vs.ub, dtype=float),
        objective=objective,
        gradient=gradient,
        eq_fun=eq_fun,
        eq_jac=eq_jac,
        ineq_fun=ineq_fun if disks else None,
        ineq_jac=ineq_jac if disks else None,
        var_names=list(vs.names),
        eq_names=rows.names + [f"current[{name}]" for name in scope.lines],
        ineq_names=[f"disk[{bus}]" for bus, _ in disks],
    )

    x0 = _default_start(f, scope, vs, lines, children, specs, v_init)
    logger.debug(
        f"Built OPF over {len(scope.buses)} buses: {n} variables, "
        f"{problem.n_eq} equalities, {problem.n_ineq} inequalities"
    )
    return OpfModel(problem=problem, variables=vs, scope=scope, specs=specs, x0=x0, line_r=line_r)

def _default_start(
    f: Feeder,
    scope: OpfScope,
    vs: OpfVariables,
    lines: Mapping[str, Line],
    children: Mapping[str, List[str]],
    specs: Sequence[DerSpec],
    v_init: float,
) -> np.ndarray:
    """Flat voltage, lossless aggregation of net demand, DERs mid-range."""
    x = np.zeros(vs.size)
    for bus, index in vs.v.items():
        x[index] = v_init
    der_out: Dict[str, Tuple[float, float]] = {}
    for spec in specs:
        v2 = v_init
        if isinstance(spec.mode, GridForming):
            v2 = spec.mode.v_set2
            x[vs.v[spec.bus]] = v2
        der_out[spec.bus] = _der_start(spec, v2)
        x[vs.p_der[spec.bus]], x[vs.q_der[spec.bus]] = der_out[spec.bus]

    def demand(bus: str) -> Tuple[float, float]:
        if bus in scope.boundary_loads:
            fixed = scope.boundary_loads[bus]
            if fixed is not None:
                return fixed
            return subtree_net_load(f, bus)
        p, q = f.net_load(bus)
        p_der, q_der = der_out.get(bus, (0.0, 0.0))
        return p - p_der, q - q_der

    for bus in scope.boundary_loads:
        if bus in vs.boundary_p:
            x[vs.boundary_p[bus]], x[vs.boundary_q[bus]] = demand(bus)

    for name in reversed(scope.lines):
        line = lines[name]
        p, q = demand(line.to_bus)
        for child in children.get(line.to_bus, []):
            p += x[vs.P[child]]
            q += x[vs.Q[child]]
        x[vs.P[name]] = p
        x[vs.Q[name]] = q
        x[vs.l[name]] = min((p ** 2 + q ** 2) / x[vs.v[line.from_bus]], line.i_rated2)

    if scope.root_inflow:
        p, q = demand(scope.root)
        for child in children.get(scope.root, []):
            p += x[vs.P[child]]
            q += x[vs.Q[child]]
        x[vs.inflow_p] = p
        x[vs.inflow_q] = q
    return x

def build_copf(f: Feeder, specs: Optional[Sequence[DerSpec]] = None, options: Optional[OpfOptions] = None) -> NlpProblem:
    """Centralized loss-minimization program over the whole feeder."""
    return copf_model(f, specs, options).problem

def copf_model(f: Feeder, specs: Optional[Sequence[DerSpec]] = None, options: Optional[OpfOptions] = None) -> OpfModel:
    if specs is not None:
        check_specs(f, specs)
        f = f.with_ders(list(specs))
    return build_model(f, full_scope(f), options)
