import logging
from typing import Optional, Sequence

import numpy as np

from ..feeder import Feeder
from ..inverter import DerSpec
from ..nlp import NlpProblem, NlpSolution, solve_nlp
from .base import OpfOptions, OpfSolution
from .builder import OpfModel, copf_model

logger = logging.getLogger(__name__)

def solve_model(
    model: OpfModel,
    options: OpfOptions,
    x0: Optional[np.ndarray] = None,
    problem: Optional[NlpProblem] = None,
) -> NlpSolution:
    """
    Solve a built model, or a variant of its program over the same variables.
    A warm start x0 falls back to the model's flat start if the engine stalls.
    """
    problem = model.problem if problem is None else problem
    if x0 is None:
        return solve_nlp(problem, model.x0, options.nlp)
    return solve_nlp(problem, x0, options.nlp, fallback=model.x0)

def model_solution(model: OpfModel, result: NlpSolution, options: OpfOptions) -> OpfSolution:
    x = result.x
    return OpfSolution(
        v2=model.v2(x),
        flows=model.flows(x),
        ders=model.ders(x),
        specs=list(model.specs),
        objective=result.objective,
        losses=model.losses(x),
        status=result.status,
        binding=model.binding(x, options.binding_tol),
        iterations=result.iterations,
        kkt=result.kkt,
    )

def solve_copf(
    f: Feeder,
    specs: Optional[Sequence[DerSpec]] = None,
    options: Optional[OpfOptions] = None,
) -> OpfSolution:
    """
    Solve the centralized loss-minimization OPF.

    :param specs: DER set replacing the feeder's own attachments; the feeder's
        DERs are used when omitted.
    """
    options = options or OpfOptions()
    model = copf_model(f, specs, options)
    logger.info(
        f"Solving C-OPF on '{f.name}': {model.problem.n_vars} variables, {len(model.specs)} DERs"
    )
    result = solve_model(model, options)
    solution = model_solution(model, result, options)
    if solution.optimal:
        logger.info(f"C-OPF optimal: losses {f.to_kw(solution.losses):.4f} kW in {result.iterations} iterations")
    else:
        logger.warning(f"C-OPF finished with status {result.status.value}: {result.message}")
    return solution
