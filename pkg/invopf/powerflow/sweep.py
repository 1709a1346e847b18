import logging
from typing import Dict, List, Optional, Tuple

from ..feeder import Feeder, children_lines, ordered_lines, topological_order
from ..inverter import DerSpec, GridSupporting, droop_q
from .base import (
    BranchFlowResiduals,
    DerDispatch,
    Dispatch,
    PowerFlowOptions,
    PowerFlowState,
)
from .exceptions import PowerFlowDivergedError, PowerFlowError, VoltageCollapseError

logger = logging.getLogger(__name__)

def _split_dispatch(f: Feeder, dispatch: Dispatch) -> Tuple[Dict[str, DerDispatch], Dict[str, DerSpec]]:
    fixed: Dict[str, DerDispatch] = {}
    droop: Dict[str, DerSpec] = {}
    for bus, entry in dispatch.items():
        if bus not in f.buses:
            raise PowerFlowError(f"Dispatch names unknown bus '{bus}'")
        if isinstance(entry, DerDispatch):
            fixed[bus] = entry
        elif isinstance(entry.mode, GridSupporting):
            droop[bus] = entry
        else:
            raise PowerFlowError(
                f"DER at bus '{bus}' must be dispatched at fixed (p, q); only droop inverters resolve inside the sweep"
            )
    missing = [spec.bus for spec in f.ders() if spec.bus not in dispatch]
    if missing:
        raise PowerFlowError(f"Dispatch misses DERs at buses {missing}")
    return fixed, droop

def _resolve(droop: Dict[str, DerSpec], fixed: Dict[str, DerDispatch], v2: Dict[str, float]) -> Dict[str, DerDispatch]:
    resolved = dict(fixed)
    for bus, spec in droop.items():
        mode = spec.mode
        assert isinstance(mode, GridSupporting)
        resolved[bus] = DerDispatch(p=mode.p_measured, q=droop_q(v2[bus], mode))
    return resolved

def _net_injection(f: Feeder, bus: str, der: Optional[DerDispatch]) -> Tuple[float, float]:
    """Net consumption at a bus: load minus capacitor minus DER output."""
    p, q = f.net_load(bus)
    if der is not None:
        p -= der.p
        q -= der.q
    return p, q

def solve_powerflow(
    f: Feeder,
    dispatch: Dispatch,
    v_sub2: Optional[float] = None,
    options: Optional[PowerFlowOptions] = None,
) -> PowerFlowState:
    """
    Backward/forward sweep on the branch-flow equations.

    The backward pass aggregates sending-end flows with losses; the forward
    pass propagates squared voltages and recomputes squared currents from the
    sending-end voltage, l_ij = (P_ij² + Q_ij²) / v_i. Droop DERs have their
    reactive output re-evaluated from the latest voltages every iteration.
    """
    options = options or PowerFlowOptions()
    v_root = f.v_sub2 if v_sub2 is None else v_sub2
    order = topological_order(f)
    lines = ordered_lines(f)
    children = children_lines(f)
    fixed, droop = _split_dispatch(f, dispatch)

    v2 = {bus: v_root for bus in order}
    P = {line.name: 0.0 for line in lines}
    Q = {line.name: 0.0 for line in lines}
    l = {line.name: 0.0 for line in lines}
    ders = _resolve(droop, fixed, v2)

    update = float("inf")
    for iteration in range(1, options.max_iter + 1):
        ders = _resolve(droop, fixed, v2)

        P_new: Dict[str, float] = {}
        Q_new: Dict[str, float] = {}
        for line in reversed(lines):
            p_net, q_net = _net_injection(f, line.to_bus, ders.get(line.to_bus))
            downstream = children[line.to_bus]
            P_new[line.name] = p_net + sum(P_new[c.name] for c in downstream) + line.r * l[line.name]
            Q_new[line.name] = q_net + sum(Q_new[c.name] for c in downstream) + line.x * l[line.name]

        v2_new = {f.substation: v_root}
        l_new: Dict[str, float] = {}
        for line in lines:
            name = line.name
            v_from = v2_new[line.from_bus]
            v_to = v_from - 2 * (line.r * P_new[name] + line.x * Q_new[name]) + line.z2 * l[name]
            if v_to <= 0:
                raise VoltageCollapseError(line.to_bus, v_to)
            v2_new[line.to_bus] = v_to
            l_new[name] = (P_new[name] ** 2 + Q_new[name] ** 2) / v_from

        update = max(
            [abs(v2_new[bus] - v2[bus]) for bus in order]
            + [abs(P_new[n] - P[n]) for n in P]
            + [abs(Q_new[n] - Q[n]) for n in Q]
            + [abs(l_new[n] - l[n]) for n in l]
        ) if lines else 0.0
        v2, P, Q, l = v2_new, P_new, Q_new, l_new

        if update < options.tol:
            ders = _resolve(droop, fixed, v2)
            state = PowerFlowState(
                v2=v2,
                P=P,
                Q=Q,
                l=l,
                losses=sum(line.r * l[line.name] for line in lines),
                dispatch=ders,
                iterations=iteration,
            )
            state = state.model_copy(update={"residuals": residuals(f, state, ders)})
            logger.debug(f"Sweep converged in {iteration} iterations, losses {state.losses:.6e} pu")
            return state

    raise PowerFlowDivergedError(options.max_iter, update)

def residuals(f: Feeder, s: PowerFlowState, dispatch: Dispatch) -> BranchFlowResiduals:
    """Max absolute violation of each branch-flow equation at state `s`."""
    fixed, droop = _split_dispatch(f, dispatch)
    ders = _resolve(droop, fixed, s.v2)
    children = children_lines(f)

    p_res = q_res = v_res = l_res = 0.0
    for line in f.lines:
        name = line.name
        p_net, q_net = _net_injection(f, line.to_bus, ders.get(line.to_bus))
        downstream = children[line.to_bus]
        p_res = max(p_res, abs(
            s.P[name] - line.r * s.l[name] - p_net - sum(s.P[c.name] for c in downstream)
        ))
        q_res = max(q_res, abs(
            s.Q[name] - line.x * s.l[name] - q_net - sum(s.Q[c.name] for c in downstream)
        ))
        v_res = max(v_res, abs(
            s.v2[line.to_bus] - s.v2[line.from_bus]
            + 2 * (line.r * s.P[name] + line.x * s.Q[name])
            - line.z2 * s.l[name]
        ))
        l_res = max(l_res, abs(s.v2[line.from_bus] * s.l[name] - s.P[name] ** 2 - s.Q[name] ** 2))
    return BranchFlowResiduals(p_balance=p_res, q_balance=q_res, voltage_drop=v_res, current=l_res)

def substation_injection(f: Feeder, s: PowerFlowState) -> Tuple[float, float]:
    """Real and reactive power leaving the substation bus through its lines."""
    root_lines = [line for line in f.lines if line.from_bus == f.substation]
    return sum(s.P[line.name] for line in root_lines), sum(s.Q[line.name] for line in root_lines)

def net_consumption(f: Feeder, s: PowerFlowState) -> Tuple[float, float]:
    """Net consumption of every non-substation bus under the state's DER outputs."""
    p_total = q_total = 0.0
    for bus in f.buses:
        if bus == f.substation:
            continue
        p, q = _net_injection(f, bus, s.dispatch.get(bus))
        p_total += p
        q_total += q
    return p_total, q_total
