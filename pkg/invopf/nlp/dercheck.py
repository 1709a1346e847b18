import logging

import numpy as np

from .base import NlpProblem, Vector

logger = logging.getLogger(__name__)

def _relative_error(analytic: np.ndarray, estimate: np.ndarray) -> float:
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - estimate) / (1.0 + np.abs(analytic))))

def check_gradients(problem: NlpProblem, x: Vector, h: float = 1e-6) -> float:
    """
    Compare the objective gradient and constraint Jacobians against central
    differences with step h.

    :return: max over all entries of |analytic - fd| / (1 + |analytic|).
    """
    x = np.asarray(x, dtype=float)
    n = problem.n_vars
    grad = np.asarray(problem.gradient(x), dtype=float)
    jac_eq = problem.eval_eq_jac(x)
    jac_ineq = problem.eval_ineq_jac(x)

    fd_grad = np.zeros(n)
    fd_eq = np.zeros_like(jac_eq)
    fd_ineq = np.zeros_like(jac_ineq)
    xph = x.copy()
    xmh = x.copy()
    for i in range(n):
        xph[i] += h
        xmh[i] -= h
        fd_grad[i] = (problem.objective(xph) - problem.objective(xmh)) / (2 * h)
        if problem.n_eq:
            fd_eq[:, i] = (problem.eval_eq(xph) - problem.eval_eq(xmh)) / (2 * h)
        if problem.n_ineq:
            fd_ineq[:, i] = (problem.eval_ineq(xph) - problem.eval_ineq(xmh)) / (2 * h)
        xph[i] = xmh[i] = x[i]

    errors = {
        "gradient": _relative_error(grad, fd_grad),
        "eq_jacobian": _relative_error(jac_eq, fd_eq),
        "ineq_jacobian": _relative_error(jac_ineq, fd_ineq),
    }
    worst = max(errors, key=lambda k: errors[k])
    logger.debug(f"Derivative check: {errors} (worst: {worst})")
    return errors[worst]
