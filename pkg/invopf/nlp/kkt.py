"""
Engine-independent first-order certification.

Multipliers are recovered at the returned point by a bounded linear
least-squares fit of the Lagrangian gradient, so the same status rules apply
to every engine.
"""
from typing import Tuple

import numpy as np
from scipy.optimize import lsq_linear

from .base import KktResiduals, NlpOptions, NlpProblem, NlpStatus, Vector

FIXED_TOL = 1e-12

def _active_bounds(problem: NlpProblem, x: Vector, tol: float) -> Tuple[Vector, Vector, Vector]:
    fixed = (problem.ub - problem.lb) <= FIXED_TOL
    at_lb = np.isfinite(problem.lb) & ~fixed & (x - problem.lb <= tol * (1.0 + np.abs(problem.lb)))
    at_ub = np.isfinite(problem.ub) & ~fixed & (problem.ub - x <= tol * (1.0 + np.abs(problem.ub)))
    return fixed, at_lb, at_ub

def kkt_residuals(problem: NlpProblem, x: Vector, options: NlpOptions) -> Tuple[KktResiduals, Vector, Vector]:
    """
    Evaluate stationarity, feasibility and complementarity at x.

    :return: residuals, equality multipliers, inequality multipliers (>= 0,
        zero for inactive rows).
    """
    n = problem.n_vars
    grad = np.asarray(problem.gradient(x), dtype=float)
    h = problem.eval_eq(x)
    jh = problem.eval_eq_jac(x)
    g = problem.eval_ineq(x)
    jg = problem.eval_ineq_jac(x)

    eq_feas = float(np.max(np.abs(h))) if h.size else 0.0
    ineq_feas = float(np.max(np.maximum(g, 0.0))) if g.size else 0.0
    bound_feas = float(max(
        np.max(np.maximum(problem.lb - x, 0.0), initial=0.0),
        np.max(np.maximum(x - problem.ub, 0.0), initial=0.0),
    ))

    active_ineq = np.flatnonzero(g >= -options.active_tol) if g.size else np.zeros(0, dtype=int)
    fixed, at_lb, at_ub = _active_bounds(problem, x, options.active_tol)
    i_fixed = np.flatnonzero(fixed)
    i_lb = np.flatnonzero(at_lb)
    i_ub = np.flatnonzero(at_ub)

    eye = np.eye(n)
    columns = [jh.T, jg[active_ineq].T, -eye[:, i_lb], eye[:, i_ub], eye[:, i_fixed]]
    lower = np.concatenate([
        np.full(jh.shape[0], -np.inf),
        np.zeros(active_ineq.size),
        np.zeros(i_lb.size),
        np.zeros(i_ub.size),
        np.full(i_fixed.size, -np.inf),
    ])
    upper = np.full(lower.size, np.inf)
    A = np.hstack(columns) if lower.size else np.zeros((n, 0))

    if lower.size:
        fit = lsq_linear(A, -grad, bounds=(lower, upper), method="bvls", tol=1e-12)
        y = fit.x
    else:
        y = np.zeros(0)
    residual = grad + A @ y
    scale = max(1.0, float(np.max(np.abs(grad))) if grad.size else 1.0)
    stationarity = float(np.max(np.abs(residual))) / scale if n else 0.0

    n_eq = jh.shape[0]
    lam = y[:n_eq]
    mu_active = y[n_eq:n_eq + active_ineq.size]
    mu = np.zeros(g.size)
    mu[active_ineq] = mu_active
    offset = n_eq + active_ineq.size
    nu_lb = y[offset:offset + i_lb.size]
    nu_ub = y[offset + i_lb.size:offset + i_lb.size + i_ub.size]

    complementarity = 0.0
    if active_ineq.size:
        complementarity = max(complementarity, float(np.max(np.abs(mu_active * g[active_ineq]))))
    if i_lb.size:
        complementarity = max(complementarity, float(np.max(np.abs(nu_lb * (x[i_lb] - problem.lb[i_lb])))))
    if i_ub.size:
        complementarity = max(complementarity, float(np.max(np.abs(nu_ub * (problem.ub[i_ub] - x[i_ub])))))

    residuals = KktResiduals(
        stationarity=stationarity,
        eq_feasibility=eq_feas,
        ineq_feasibility=ineq_feas,
        bound_feasibility=bound_feas,
        complementarity=complementarity,
    )
    return residuals, lam, mu

def lagrangian_gradient(problem: NlpProblem, x: Vector, lam: Vector, mu: Vector) -> Vector:
    """
    ∇f + Jhᵀλ + Jgᵀμ at x. At a certified point the entry of a fixed
    variable is the derivative of the optimal value with respect to the
    value it is fixed at.
    """
    grad = np.asarray(problem.gradient(x), dtype=float)
    if problem.n_eq:
        grad = grad + problem.eval_eq_jac(x).T @ lam
    if problem.n_ineq:
        grad = grad + problem.eval_ineq_jac(x).T @ mu
    return grad

def is_feasible(kkt: KktResiduals, options: NlpOptions) -> bool:
    return kkt.feasibility <= options.tol_feasibility

def classify(kkt: KktResiduals, options: NlpOptions, exhausted: bool) -> NlpStatus:
    """
    optimal when all residuals meet tolerance; otherwise max-iter if the
    engine ran out of iterations, else infeasible-detected.
    """
    if (
        is_feasible(kkt, options)
        and kkt.stationarity <= options.tol_stationarity
        and kkt.complementarity <= options.tol_complementarity
    ):
        return NlpStatus.OPTIMAL
    if exhausted or is_feasible(kkt, options):
        return NlpStatus.MAX_ITER
    return NlpStatus.INFEASIBLE
