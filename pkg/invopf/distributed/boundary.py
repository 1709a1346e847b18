import logging
from typing import Dict, List

from ..feeder import AreaPartition, Feeder, subtree_net_load
from .base import AreaBoundary, BoundaryState
from .exceptions import MissingBoundaryValueError
from .messages import BoundaryKind, BoundaryMessage

logger = logging.getLogger(__name__)

def init_boundary(f: Feeder, p: AreaPartition) -> BoundaryState:
    """
    First-round boundary values: every area root at the substation voltage,
    every boundary demand the lossless sum of the net load below it. DER
    outputs are not known before the first solve and are left out.
    """
    areas: Dict[str, AreaBoundary] = {}
    for area in p.areas:
        areas[area.id] = AreaBoundary(
            v0_in=f.v_sub2,
            demand_in={bus: subtree_net_load(f, bus) for bus in area.boundary_buses.values()},
        )
    return BoundaryState(iteration=0, areas=areas)

def consensus_residual(bs: BoundaryState, p: AreaPartition) -> float:
    """Max absolute mismatch between received and neighbor-computed boundary values."""
    residual = 0.0
    for line, up_id, down_id in p.boundary_edges:
        bus = p.area(up_id).boundary_buses[line]
        up = bs.areas[up_id]
        down = bs.areas[down_id]
        if bus not in up.v_out:
            raise MissingBoundaryValueError(up_id, f"v_out[{bus}]")
        if bus not in up.demand_in:
            raise MissingBoundaryValueError(up_id, f"demand_in[{bus}]")
        if down.root_out is None:
            raise MissingBoundaryValueError(down_id, "root_out")
        p_in, q_in = up.demand_in[bus]
        p_out, q_out = down.root_out
        residual = max(
            residual,
            abs(down.v0_in - up.v_out[bus]),
            abs(p_in - p_out),
            abs(q_in - q_out),
        )
    return residual

def record_outgoing(bs: BoundaryState, messages: List[BoundaryMessage], p: AreaPartition) -> BoundaryState:
    """Store each area's computed values from its outgoing messages."""
    areas = {area_id: state.model_copy(deep=True) for area_id, state in bs.areas.items()}
    for message in messages:
        state = areas[message.area]
        if message.kind == BoundaryKind.VOLTAGE:
            state.v_out[message.bus] = message.values[0]
        else:
            state.root_out = (message.values[0], message.values[1])
    return BoundaryState(iteration=bs.iteration, areas=areas)

def _damped(new: float, old: float, damping: float) -> float:
    return (1 - damping) * new + damping * old

def deliver(bs: BoundaryState, messages: List[BoundaryMessage], p: AreaPartition, damping: float = 0.0) -> BoundaryState:
    """
    Next round's received values: each voltage message goes to the area rooted
    at its bus, each demand message to the upstream area of its sender.
    Prices carried by the messages are delivered and damped the same way.
    """
    root_area = {area.root: area.id for area in p.areas}
    areas = {
        area_id: AreaBoundary(
            v0_in=state.v0_in,
            demand_in=dict(state.demand_in),
            root_price=state.root_price,
            voltage_price=dict(state.voltage_price),
        )
        for area_id, state in bs.areas.items()
    }
    for message in messages:
        if message.kind == BoundaryKind.VOLTAGE:
            target = areas[root_area[message.bus]]
            target.v0_in = _damped(message.values[0], target.v0_in, damping)
            if len(message.values) >= 3:
                old_p, old_q = target.root_price
                target.root_price = (
                    _damped(message.values[1], old_p, damping),
                    _damped(message.values[2], old_q, damping),
                )
        else:
            upstream = p.area(message.area).upstream
            if upstream is None:
                continue
            target = areas[upstream]
            old_p, old_q = target.demand_in[message.bus]
            target.demand_in[message.bus] = (
                _damped(message.values[0], old_p, damping),
                _damped(message.values[1], old_q, damping),
            )
            if len(message.values) >= 3:
                old = target.voltage_price.get(message.bus, 0.0)
                target.voltage_price[message.bus] = _damped(message.values[2], old, damping)
    logger.debug(f"Delivered {len(messages)} boundary messages for round {bs.iteration + 1}")
    return BoundaryState(iteration=bs.iteration + 1, areas=areas)
