import asyncio
import logging
import multiprocessing
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import contextmanager
from functools import partial
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from ..feeder import Area, AreaPartition, Feeder, single_area
from ..inverter import DerSpec
from ..nlp import NlpError, NlpStatus
from ..opf import OpfSolution, solve_model
from .base import BoundaryState, DopfOptions, MacroIteration, MacroTrace
from .boundary import consensus_residual, deliver, init_boundary, record_outgoing
from .exceptions import AreaSolveError
from .messages import BoundaryKind, BoundaryMessage
from .subproblem import (
    AreaOutcome,
    AreaResult,
    area_model,
    boundary_sensitivities,
    priced_problem,
    root_inflow,
    stitch,
    with_specs,
)

logger = logging.getLogger(__name__)

T = TypeVar("T")

@contextmanager
def area_executor(parallel: bool, max_workers: int = 4) -> Iterator[Optional[Executor]]:
    """Process pool for concurrent area solves, or None to run them in turn."""
    if not parallel:
        yield None
        return
    with ProcessPoolExecutor(max_workers=max_workers, mp_context=multiprocessing.get_context("spawn")) as pool:
        yield pool

async def run_barrier(jobs: Sequence[Callable[[], T]], executor: Optional[Executor] = None) -> List[T]:
    """
    Run one round of area jobs and wait for all of them. Results come back in
    job order whatever the degree of parallelism. Jobs sent to an executor
    must be picklable.
    """
    if executor is None:
        return [job() for job in jobs]
    loop = asyncio.get_running_loop()
    return list(await asyncio.gather(*(loop.run_in_executor(executor, job) for job in jobs)))

def solve_area(
    area: Area,
    f: Feeder,
    bs: BoundaryState,
    options: DopfOptions,
    x0: Optional[np.ndarray],
) -> AreaOutcome:
    model = area_model(area, f, bs, options.opf)
    problem = priced_problem(f, model, bs.areas[area.id]) if options.boundary_prices else model.problem
    try:
        result = solve_model(model, options.opf, x0, problem)
    except NlpError as e:
        return AreaOutcome(error=e.message)
    outcome = AreaOutcome(result=result)
    if options.boundary_prices:
        outcome.demand_prices, outcome.voltage_price = boundary_sensitivities(area, model, problem, result)
    return outcome

def collect(
    area: Area,
    f: Feeder,
    bs: BoundaryState,
    options: DopfOptions,
    outcome: AreaOutcome,
    iteration: int,
) -> AreaResult:
    """Check one area outcome and pair it with the area's model."""
    if outcome.error is not None:
        raise AreaSolveError(area.id, iteration, outcome.error)
    result = outcome.result
    if result.status == NlpStatus.INFEASIBLE:
        raise AreaSolveError(area.id, iteration, result.status.value)
    if result.status != NlpStatus.OPTIMAL:
        logger.warning(f"Area {area.id} at macro-iteration {iteration}: {result.status.value}")
    return AreaResult(
        area=area.id,
        model=area_model(area, f, bs, options.opf),
        result=result,
        demand_prices=outcome.demand_prices,
        voltage_price=outcome.voltage_price,
    )

def outgoing_messages(f: Feeder, p: AreaPartition, results: List[AreaResult], iteration: int) -> List[BoundaryMessage]:
    messages: List[BoundaryMessage] = []
    for item in results:
        area = p.area(item.area)
        x = item.result.x
        for bus in area.boundary_buses.values():
            values = [float(x[item.model.variables.v[bus]])]
            if bus in item.demand_prices:
                values.extend(item.demand_prices[bus])
            messages.append(BoundaryMessage(
                area=area.id,
                iteration=iteration,
                bus=bus,
                kind=BoundaryKind.VOLTAGE,
                values=values,
            ))
        if area.upstream is not None:
            p_in, q_in = root_inflow(f, item.model, x)
            values = [p_in, q_in]
            if item.voltage_price is not None:
                values.append(item.voltage_price)
            messages.append(BoundaryMessage(
                area=area.id,
                iteration=iteration,
                bus=area.root,
                kind=BoundaryKind.DEMAND,
                values=values,
            ))
    return messages

async def macro_iterate_async(
    f: Feeder,
    specs: Optional[Sequence[DerSpec]] = None,
    p: Optional[AreaPartition] = None,
    options: Optional[DopfOptions] = None,
) -> Tuple[OpfSolution, MacroTrace]:
    """
    Jacobi fixed-point iteration over the areas of `p`.

    Every macro-iteration solves all areas against the previous round's
    boundary values, then exchanges: upstream areas send the voltage they
    computed at each shared bus, downstream areas send the power entering
    their root. With `boundary_prices` each message also carries the sender's
    marginal cost of the value it received, and each area adds the received
    prices to its objective; the reported objectives and losses never include
    them. Stops once the consensus residual drops below `eps_consensus` or
    after `max_macro` rounds. The returned solution's `iterations` is the
    number of macro-iterations.
    """
    options = options or DopfOptions()
    f = with_specs(f, specs)
    p = p or single_area(f)
    bs = init_boundary(f, p)
    trace = MacroTrace()
    previous: Dict[str, np.ndarray] = {}
    results: List[AreaResult] = []
    logger.info(f"Starting D-OPF on '{f.name}' with {len(p.areas)} areas")

    with area_executor(options.parallel_areas, options.max_workers) as executor:
        for n in range(1, options.max_macro + 1):
            jobs = [partial(solve_area, area, f, bs, options, previous.get(area.id)) for area in p.areas]
            outcomes = await run_barrier(jobs, executor)
            try:
                results = [collect(area, f, bs, options, outcome, n) for area, outcome in zip(p.areas, outcomes)]
            except AreaSolveError as e:
                e.trace = trace
                logger.error(f"D-OPF aborted: {e.message}")
                raise

            messages = outgoing_messages(f, p, results, n)
            bs = record_outgoing(bs, messages, p)
            residual = consensus_residual(bs, p)
            trace.iterations.append(MacroIteration(
                iteration=n,
                residual=residual,
                objectives={item.area: float(item.model.problem.objective(item.result.x)) for item in results},
                statuses={item.area: item.result.status.value for item in results},
                messages=messages,
            ))
            logger.info(f"Macro-iteration {n}: consensus residual {residual:.3e}")
            if options.warm_start:
                previous = {item.area: item.result.x for item in results}
            if residual < options.eps_consensus:
                trace.converged = True
                break
            bs = deliver(bs, messages, p, options.damping)

    if not trace.converged:
        logger.warning(f"D-OPF reached {options.max_macro} macro-iterations without consensus")
    solution = stitch(results, options.opf, trace.count)
    if trace.converged:
        logger.info(f"D-OPF converged in {trace.count} macro-iterations: losses {f.to_kw(solution.losses):.4f} kW")
    return solution, trace

def macro_iterate(
    f: Feeder,
    specs: Optional[Sequence[DerSpec]] = None,
    p: Optional[AreaPartition] = None,
    options: Optional[DopfOptions] = None,
) -> Tuple[OpfSolution, MacroTrace]:
    return asyncio.run(macro_iterate_async(f, specs, p, options))
