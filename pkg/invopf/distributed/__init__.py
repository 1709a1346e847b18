from .base import AreaBoundary, BoundaryState, DopfOptions, MacroIteration, MacroTrace
from .boundary import consensus_residual, deliver, init_boundary, record_outgoing
from .coordinator import area_executor, macro_iterate, macro_iterate_async, outgoing_messages, run_barrier, solve_area
from .exceptions import AreaSolveError, BoundaryError, MissingBoundaryValueError
from .messages import BoundaryKind, BoundaryMessage
from .subproblem import (
    AreaOutcome,
    AreaResult,
    area_model,
    area_scope,
    boundary_sensitivities,
    build_subproblem,
    priced_problem,
    root_inflow,
    stitch,
    with_specs,
)

__all__ = [
    "AreaBoundary",
    "BoundaryState",
    "DopfOptions",
    "MacroIteration",
    "MacroTrace",
    "consensus_residual",
    "deliver",
    "init_boundary",
    "record_outgoing",
    "area_executor",
    "macro_iterate",
    "macro_iterate_async",
    "outgoing_messages",
    "run_barrier",
    "solve_area",
    "AreaSolveError",
    "BoundaryError",
    "MissingBoundaryValueError",
    "BoundaryKind",
    "BoundaryMessage",
    "AreaOutcome",
    "AreaResult",
    "area_model",
    "area_scope",
    "boundary_sensitivities",
    "build_subproblem",
    "priced_problem",
    "root_inflow",
    "stitch",
    "with_specs",
]
