from __future__ import annotations
from typing import TYPE_CHECKING
if TYPE_CHECKING:
    from ..opf.base import OpfSolution

import logging
from typing import Dict, List

from ..feeder import Feeder
from ..inverter import (
    GridFollowingP,
    GridFollowingQ,
    GridForming,
    GridSupporting,
    PvTypeBus,
    droop_q,
    gfli_q_bounds,
)
from .base import PowerFlowOptions, ValidationReport
from .exceptions import PowerFlowError
from .sweep import solve_powerflow

logger = logging.getLogger(__name__)

def _setpoint_gaps(spec, der, tol: float) -> List[str]:
    """Outputs the mode holds fixed: p of GFLI-Q, GSI and PV buses, q of GFLI-P."""
    mode = spec.mode
    violations: List[str] = []
    if isinstance(mode, (GridFollowingQ, GridSupporting)) and abs(der.p - mode.p_measured) > tol:
        violations.append(f"DER {spec.bus}: p {der.p:.6g} differs from measured {mode.p_measured:.6g}")
    elif isinstance(mode, GridFollowingP) and abs(der.q) > tol:
        violations.append(f"DER {spec.bus}: q {der.q:.6g} must be 0")
    elif isinstance(mode, PvTypeBus) and abs(der.p - mode.p_set) > tol:
        violations.append(f"DER {spec.bus}: p {der.p:.6g} differs from setpoint {mode.p_set:.6g}")
    return violations

def validate_dispatch(
    f: Feeder,
    sol: "OpfSolution",
    tol: float = 1e-4,
    droop_tol: float = 1e-6,
    gfi_tol: float = 1e-6,
    limit_tol: float = 1e-6,
    options: PowerFlowOptions | None = None,
) -> ValidationReport:
    """
    Re-solve the power flow with the solution's DER outputs held fixed and
    compare against the solution.

    The mismatch is max |v2| difference over all buses. Grid-forming buses are
    re-solved at their dispatched (p, q) like any other DER; their voltage
    setpoint is then checked a posteriori on the solution.
    """
    feeder = f.with_ders(list(sol.specs))
    limit_violations: List[str] = []
    setpoint_violations: List[str] = []
    droop_violations: Dict[str, float] = {}
    gfi_violations: Dict[str, float] = {}

    try:
        state = solve_powerflow(
            feeder,
            sol.to_dispatch(),
            v_sub2=sol.v2[feeder.substation],
            options=options,
        )
    except PowerFlowError as e:
        logger.warning(f"Validation power flow failed: {e}")
        return ValidationReport(ok=False, converged=False, message=str(e))

    mismatch = max(abs(state.v2[bus] - sol.v2[bus]) for bus in feeder.buses)

    for spec in sol.specs:
        der = sol.ders[spec.bus]
        mode = spec.mode
        setpoint_violations.extend(_setpoint_gaps(spec, der, limit_tol))
        if isinstance(mode, GridSupporting):
            gap = abs(der.q - droop_q(sol.v2[spec.bus], mode))
            if gap > droop_tol:
                droop_violations[spec.bus] = gap
        elif isinstance(mode, GridForming):
            gap = abs(sol.v2[spec.bus] - mode.v_set2)
            if gap > gfi_tol:
                gfi_violations[spec.bus] = gap
        elif isinstance(mode, GridFollowingQ):
            _, q_max = gfli_q_bounds(spec.s_rating, mode.p_measured)
            if abs(der.q) > q_max + limit_tol:
                limit_violations.append(f"DER {spec.bus}: |q| {abs(der.q):.6g} above {q_max:.6g}")
        elif isinstance(mode, GridFollowingP):
            if der.p < -limit_tol or der.p > spec.s_rating + limit_tol:
                limit_violations.append(f"DER {spec.bus}: p {der.p:.6g} outside [0, {spec.s_rating:.6g}]")
        if not isinstance(mode, (GridFollowingQ, GridFollowingP, GridSupporting)):
            excess = der.p ** 2 + der.q ** 2 - spec.s_rating ** 2
            if excess > limit_tol:
                limit_violations.append(f"DER {spec.bus}: outside rating disk by {excess:.3e}")

    for bus_id, bus in feeder.buses.items():
        v2 = sol.v2[bus_id]
        if v2 < bus.v_min2 - limit_tol or v2 > bus.v_max2 + limit_tol:
            limit_violations.append(f"bus {bus_id}: v2 {v2:.6g} outside [{bus.v_min2:.6g}, {bus.v_max2:.6g}]")
    for line in feeder.lines:
        l = sol.flows[line.name].l
        if l > line.i_rated2 + limit_tol:
            limit_violations.append(f"line {line.name}: l {l:.6g} above {line.i_rated2:.6g}")

    ok = (
        mismatch < tol
        and not droop_violations
        and not gfi_violations
        and not limit_violations
        and not setpoint_violations
    )
    if not ok:
        logger.warning(
            f"Validation failed: voltage mismatch {mismatch:.3e}, {len(droop_violations)} droop, "
            f"{len(gfi_violations)} GFI, {len(limit_violations)} limit, "
            f"{len(setpoint_violations)} setpoint violations"
        )
    return ValidationReport(
        ok=ok,
        converged=True,
        voltage_mismatch=mismatch,
        droop_violations=droop_violations,
        gfi_violations=gfi_violations,
        limit_violations=limit_violations,
        setpoint_violations=setpoint_violations,
    )
