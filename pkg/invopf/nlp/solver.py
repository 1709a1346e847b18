import logging
import time
from dataclasses import dataclass, replace
from typing import Callable, Iterator, Optional, Tuple

import numpy as np
from scipy.optimize import Bounds, minimize

from .base import KktResiduals, NlpOptions, NlpProblem, NlpSolution, NlpStatus, Vector
from .exceptions import NlpError, NonFiniteCallbackError
from .kkt import FIXED_TOL, classify, kkt_residuals

logger = logging.getLogger(__name__)

def _finite(name: str, fn: Callable) -> Callable:
    def checked(x):
        value = fn(x)
        if not np.all(np.isfinite(value)):
            raise NonFiniteCallbackError(name)
        return value
    return checked

class _Reduced:
    """View of a problem over its non-fixed variables only."""
    def __init__(self, problem: NlpProblem, x0: Vector):
        self.problem = problem
        self.free = (problem.ub - problem.lb) > FIXED_TOL
        self.base = np.clip(x0, problem.lb, problem.ub)
        self.base[~self.free] = problem.lb[~self.free]
        self.objective = _finite("objective", problem.objective)
        self.gradient = _finite("gradient", problem.gradient)
        self.eq = _finite("eq_fun", problem.eval_eq)
        self.eq_jac = _finite("eq_jac", problem.eval_eq_jac)
        self.ineq = _finite("ineq_fun", problem.eval_ineq)
        self.ineq_jac = _finite("ineq_jac", problem.eval_ineq_jac)

    @property
    def z0(self) -> Vector:
        return self.base[self.free].copy()

    @property
    def bounds(self) -> Bounds:
        return Bounds(self.problem.lb[self.free], self.problem.ub[self.free])

    def full(self, z: Vector) -> Vector:
        x = self.base.copy()
        x[self.free] = z
        return x

    def f(self, z: Vector) -> float:
        return float(self.objective(self.full(z)))

    def df(self, z: Vector) -> Vector:
        return np.asarray(self.gradient(self.full(z)), dtype=float)[self.free]

    def h(self, z: Vector) -> Vector:
        return self.eq(self.full(z))

    def dh(self, z: Vector) -> np.ndarray:
        return self.eq_jac(self.full(z))[:, self.free]

    def g(self, z: Vector) -> Vector:
        return self.ineq(self.full(z))

    def dg(self, z: Vector) -> np.ndarray:
        return self.ineq_jac(self.full(z))[:, self.free]

def _slsqp(reduced: _Reduced, z0: Vector, options: NlpOptions) -> Tuple[Vector, int, bool, str]:
    problem = reduced.problem
    constraints = []
    if problem.n_eq:
        constraints.append({"type": "eq", "fun": reduced.h, "jac": reduced.dh})
    if problem.n_ineq:
        # scipy inequality convention is fun(x) >= 0
        constraints.append({"type": "ineq", "fun": lambda z: -reduced.g(z), "jac": lambda z: -reduced.dg(z)})
    result = minimize(
        reduced.f,
        z0,
        jac=reduced.df,
        method="SLSQP",
        bounds=reduced.bounds,
        constraints=constraints,
        options={"maxiter": options.max_iter, "ftol": options.ftol},
    )
    exhausted = result.status == 9
    return result.x, int(result.nit), exhausted, str(result.message)

def _auglag(reduced: _Reduced, z0: Vector, options: NlpOptions) -> Tuple[Vector, int, bool, str]:
    """
    Powell-Hestenes-Rockafellar augmented Lagrangian: inequalities enter through
    max(0, mu + rho*g), bounds are kept by the L-BFGS-B inner solver.
    """
    problem = reduced.problem
    lam = np.zeros(problem.n_eq)
    mu = np.zeros(problem.n_ineq)
    rho = options.penalty0
    z = z0.copy()
    iterations = 0
    last_violation = np.inf

    for outer in range(options.max_outer):
        def merit(w: Vector) -> float:
            h = reduced.h(w)
            shifted = np.maximum(0.0, mu + rho * reduced.g(w))
            return (
                reduced.f(w) + lam @ h + 0.5 * rho * h @ h
                + (shifted @ shifted - mu @ mu) / (2 * rho)
            )

        def merit_grad(w: Vector) -> Vector:
            h = reduced.h(w)
            shifted = np.maximum(0.0, mu + rho * reduced.g(w))
            return reduced.df(w) + reduced.dh(w).T @ (lam + rho * h) + reduced.dg(w).T @ shifted

        inner = minimize(
            merit,
            z,
            jac=merit_grad,
            method="L-BFGS-B",
            bounds=reduced.bounds,
            options={"maxiter": options.max_iter, "gtol": 1e-12, "ftol": options.ftol},
        )
        z = inner.x
        iterations += int(inner.nit)

        h = reduced.h(z)
        g = reduced.g(z)
        violation = max(
            float(np.max(np.abs(h))) if h.size else 0.0,
            float(np.max(np.abs(np.minimum(-g, mu / rho)))) if g.size else 0.0,
        )
        lam = lam + rho * h
        mu = np.maximum(0.0, mu + rho * g)
        logger.debug(f"auglag outer {outer}: violation={violation:.3e} rho={rho:.1e}")

        kkt, _, _ = kkt_residuals(problem, reduced.full(z), options)
        if classify(kkt, options, exhausted=False) == NlpStatus.OPTIMAL:
            return z, iterations, False, f"converged after {outer + 1} outer iterations"
        if violation > 0.25 * last_violation:
            rho = min(rho * options.penalty_growth, options.penalty_max)
        last_violation = violation

    return z, iterations, True, "outer iteration limit reached"

ENGINES = {
    "slsqp": _slsqp,
    "auglag": _auglag,
}

@dataclass
class _Attempt:
    label: str
    x: Vector
    kkt: KktResiduals
    lam: Vector
    mu: Vector
    iterations: int
    exhausted: bool
    message: str

    def status(self, options: NlpOptions) -> NlpStatus:
        return classify(self.kkt, options, self.exhausted)

def _run(label: str, engine: Callable, reduced: _Reduced, z0: Vector, options: NlpOptions) -> _Attempt:
    problem = reduced.problem
    if reduced.free.any():
        z, iterations, exhausted, message = engine(reduced, z0, options)
    else:
        z, iterations, exhausted, message = z0, 0, False, "all variables fixed"
    x = np.clip(reduced.full(z), problem.lb, problem.ub)
    kkt, lam, mu = kkt_residuals(problem, x, options)
    return _Attempt(label, x, kkt, lam, mu, iterations, exhausted, message)

def _recoveries(reduced: _Reduced, first: _Attempt, options: NlpOptions,
                fallback: Optional[Vector]) -> Iterator[Tuple[str, str, Vector]]:
    """(label, method, start) of each retry after a stalled first attempt."""
    other = "auglag" if options.method == "slsqp" else "slsqp"
    if options.method == "slsqp":
        yield "warm restart", "slsqp", first.x[reduced.free]
    cold = reduced.z0
    if fallback is not None:
        cold = np.clip(np.asarray(fallback, dtype=float), reduced.problem.lb, reduced.problem.ub)[reduced.free]
        if not np.allclose(cold, reduced.z0):
            yield "fallback start", options.method, cold
    yield f"{other} retry", other, cold

def solve_nlp(problem: NlpProblem, x0: Vector, options: Optional[NlpOptions] = None,
              fallback: Optional[Vector] = None) -> NlpSolution:
    """
    Solve a smooth program and certify the result.

    Fixed variables (lb == ub) are eliminated before the engine runs. The
    returned status comes from the KKT residuals at the final point, not
    from the engine's own exit flag.

    When the engine stops short of a certified point without exhausting its
    iterations, it is retried: warm from where it stopped, then from
    `fallback` (if given), then with the other engine. infeasible-detected is
    reported only when every attempt ends infeasible.

    :param fallback: a second starting point, typically the flat start when
        x0 is a warm start.
    """
    options = options or NlpOptions()
    engine = ENGINES.get(options.method)
    if engine is None:
        raise NlpError(f"Unknown NLP method: {options.method}")
    if len(x0) != problem.n_vars:
        raise NlpError(f"Initial point has {len(x0)} entries, expected {problem.n_vars}")
    if fallback is not None and len(fallback) != problem.n_vars:
        raise NlpError(f"Fallback point has {len(fallback)} entries, expected {problem.n_vars}")

    reduced = _Reduced(problem, np.asarray(x0, dtype=float))
    start = time.perf_counter()
    best = _run(options.method, engine, reduced, reduced.z0, options)
    status = best.status(options)
    iterations = best.iterations

    if status != NlpStatus.OPTIMAL and not best.exhausted and reduced.free.any():
        first = best
        for label, method, z0 in _recoveries(reduced, first, options, fallback):
            attempt = _run(label, ENGINES[method], reduced, z0, replace(options, method=method))
            iterations += attempt.iterations
            logger.debug(
                f"{label}: feasibility={attempt.kkt.feasibility:.2e} "
                f"stationarity={attempt.kkt.stationarity:.2e}"
            )
            if attempt.status(options) == NlpStatus.OPTIMAL:
                best = attempt
                break
            if (attempt.kkt.feasibility, attempt.kkt.stationarity) < (best.kkt.feasibility, best.kkt.stationarity):
                best = attempt
        # the other engine may exhaust its own limits; only the residuals decide here
        status = classify(best.kkt, options, exhausted=False)

    elapsed = time.perf_counter() - start
    logger.debug(
        f"{options.method}: {status.value} in {iterations} iterations ({elapsed:.3f}s), "
        f"stationarity={best.kkt.stationarity:.2e} feasibility={best.kkt.feasibility:.2e}"
    )
    return NlpSolution(
        x=best.x,
        objective=float(problem.objective(best.x)),
        kkt=best.kkt,
        iterations=iterations,
        status=status,
        message=best.message if best.label == options.method else f"{best.label}: {best.message}",
        eq_multipliers=best.lam,
        ineq_multipliers=best.mu,
    )
