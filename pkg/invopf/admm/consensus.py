import asyncio
import logging
from dataclasses import replace
from functools import partial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..distributed import (
    AreaOutcome,
    AreaResult,
    AreaSolveError,
    MissingBoundaryValueError,
    area_executor,
    run_barrier,
    stitch,
    with_specs,
)
from ..feeder import Area, AreaPartition, Feeder, single_area, subtree_net_load
from ..inverter import DerSpec
from ..nlp import NlpError, NlpStatus
from ..opf import OpfModel, OpfScope, OpfSolution, build_model, solve_model
from .base import AdmmOptions, AdmmRound, AdmmState, RhoSweepRow, SharedValue

logger = logging.getLogger(__name__)

def admm_scope(f: Feeder, area: Area) -> OpfScope:
    """
    Area with its boundary quantities as free local copies: demand at each
    downstream shared bus, and voltage plus inflow at a non-substation root.
    """
    downstream_root = area.upstream is not None
    return OpfScope(
        buses=area.buses,
        lines=area.lines,
        root=area.root,
        root_v2=None if downstream_root else f.v_sub2,
        boundary_loads={bus: None for bus in area.boundary_buses.values()},
        root_inflow=downstream_root,
    )

def init_admm(f: Feeder, p: AreaPartition, rho: float) -> AdmmState:
    shared: Dict[str, SharedValue] = {}
    for line, up_id, down_id in p.boundary_edges:
        bus = p.area(up_id).boundary_buses[line]
        p_load, q_load = subtree_net_load(f, bus)
        for kind, z in (("v", f.v_sub2), ("p", p_load), ("q", q_load)):
            value = SharedValue(
                bus=bus,
                kind=kind,
                upstream=up_id,
                downstream=down_id,
                z=z,
                u={up_id: 0.0, down_id: 0.0},
            )
            shared[value.key] = value
    return AdmmState(rho=rho, shared=shared)

def copy_index(model: OpfModel, area_id: str, value: SharedValue) -> int:
    """Variable index of `area_id`'s copy of a shared quantity."""
    vs = model.variables
    if area_id == value.upstream:
        return {"v": vs.v, "p": vs.boundary_p, "q": vs.boundary_q}[value.kind][value.bus]
    if value.kind == "v":
        return vs.v[value.bus]
    index = vs.inflow_p if value.kind == "p" else vs.inflow_q
    if index is None:
        raise MissingBoundaryValueError(area_id, f"inflow {value.key}")
    return index

def admm_model(f: Feeder, area: Area, options: AdmmOptions) -> OpfModel:
    return build_model(f, admm_scope(f, area), options.opf)

def solve_area(
    f: Feeder,
    area: Area,
    state: AdmmState,
    options: AdmmOptions,
    x0: Optional[np.ndarray],
) -> AreaOutcome:
    model = admm_model(f, area, options)
    owned = [value for value in state.shared.values() if area.id in (value.upstream, value.downstream)]
    problem = model.problem
    if owned:
        problem = problem.with_quadratic_penalty(
            [copy_index(model, area.id, value) for value in owned],
            [value.z - value.u[area.id] for value in owned],
            state.rho,
        )
    try:
        return AreaOutcome(result=solve_model(model, options.opf, x0, problem))
    except NlpError as e:
        return AreaOutcome(error=e.message)

def collect(model: OpfModel, area_id: str, outcome: AreaOutcome, iteration: int) -> AreaResult:
    if outcome.error is not None:
        raise AreaSolveError(area_id, iteration, outcome.error)
    if outcome.result.status == NlpStatus.INFEASIBLE:
        raise AreaSolveError(area_id, iteration, outcome.result.status.value)
    return AreaResult(area=area_id, model=model, result=outcome.result)

def update_consensus(state: AdmmState, results: List[AreaResult]) -> Tuple[float, float]:
    """
    Record local copies, average them into z, step the scaled duals.

    :return: primal residual max |local - z| and dual residual rho · max |z - z_prev|.
    """
    by_area = {item.area: item for item in results}
    primal = 0.0
    dual = 0.0
    for value in state.shared.values():
        for area_id in (value.upstream, value.downstream):
            item = by_area[area_id]
            value.local[area_id] = float(item.result.x[copy_index(item.model, area_id, value)])
        z_prev = value.z
        value.z = float(np.mean([value.local[value.upstream], value.local[value.downstream]]))
        for area_id in (value.upstream, value.downstream):
            gap = value.local[area_id] - value.z
            value.u[area_id] += gap
            primal = max(primal, abs(gap))
        dual = max(dual, state.rho * abs(value.z - z_prev))
    return primal, dual

async def admm_iterate_async(
    f: Feeder,
    specs: Optional[Sequence[DerSpec]] = None,
    p: Optional[AreaPartition] = None,
    options: Optional[AdmmOptions] = None,
) -> Tuple[OpfSolution, AdmmState]:
    """
    Scaled-form consensus ADMM over the areas of `p`. One round is one
    x-update of every area, one z-update and one dual update.
    """
    options = options or AdmmOptions()
    f = with_specs(f, specs)
    p = p or single_area(f)
    models = {area.id: admm_model(f, area, options) for area in p.areas}
    state = init_admm(f, p, options.rho)
    previous: Dict[str, np.ndarray] = {}
    results: List[AreaResult] = []
    logger.info(f"Starting ADMM on '{f.name}' with {len(p.areas)} areas, rho={options.rho}")

    with area_executor(options.parallel_areas, options.max_workers) as executor:
        for k in range(1, options.max_iter + 1):
            jobs = [partial(solve_area, f, area, state, options, previous.get(area.id)) for area in p.areas]
            outcomes = await run_barrier(jobs, executor)
            try:
                results = [
                    collect(models[area.id], area.id, outcome, k)
                    for area, outcome in zip(p.areas, outcomes)
                ]
            except AreaSolveError as e:
                logger.error(f"ADMM aborted: {e.message}")
                raise
            primal, dual = update_consensus(state, results)
            objective = sum(float(item.model.problem.objective(item.result.x)) for item in results)
            state.history.append(AdmmRound(iteration=k, primal=primal, dual=dual, objective=objective))
            logger.info(f"ADMM round {k}: primal {primal:.3e}, dual {dual:.3e}")
            if options.warm_start:
                previous = {item.area: item.result.x for item in results}
            if primal < options.eps_pri and dual < options.eps_dual:
                state.converged = True
                break

    if not state.converged:
        logger.warning(f"ADMM reached {options.max_iter} rounds without meeting its tolerances")
    solution = stitch(results, options.opf, state.count)
    if not state.converged and solution.optimal:
        solution = solution.model_copy(update={"status": NlpStatus.MAX_ITER})
    return solution, state

def admm_iterate(
    f: Feeder,
    specs: Optional[Sequence[DerSpec]] = None,
    p: Optional[AreaPartition] = None,
    options: Optional[AdmmOptions] = None,
) -> Tuple[OpfSolution, AdmmState]:
    return asyncio.run(admm_iterate_async(f, specs, p, options))

def sweep_rho(
    f: Feeder,
    specs: Optional[Sequence[DerSpec]],
    p: AreaPartition,
    rhos: Sequence[float],
    options: Optional[AdmmOptions] = None,
) -> List[RhoSweepRow]:
    options = options or AdmmOptions()
    rows: List[RhoSweepRow] = []
    for rho in rhos:
        run_options = replace(options, rho=rho)
        solution, state = admm_iterate(f, specs, p, run_options)
        rows.append(RhoSweepRow(rho=rho, iterations=state.count, objective=solution.objective, converged=state.converged))
    return rows
