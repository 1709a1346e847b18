from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel

Vector = NDArray[np.float64]
Matrix = NDArray[np.float64]
ScalarFn = Callable[[Vector], float]
VectorFn = Callable[[Vector], Vector]
MatrixFn = Callable[[Vector], Matrix]

class NlpStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max-iter"
    INFEASIBLE = "infeasible-detected"

@dataclass
class NlpOptions:
    """
    :param method: "slsqp" (sequential quadratic programming) or "auglag"
        (augmented Lagrangian with bound-constrained quasi-Newton inner solves).
    :param tol_stationarity: Lagrangian gradient tolerance, scaled by max(1, |∇f|).
    :param tol_feasibility: equality, inequality and bound violation tolerance.
    :param tol_complementarity: max |multiplier × slack| tolerance.
    :param active_tol: slack below which an inequality or bound counts as active.
    :param penalty_max: cap on the augmented Lagrangian penalty.
    """
    method: str = "slsqp"
    tol_stationarity: float = 1e-6
    tol_feasibility: float = 1e-6
    tol_complementarity: float = 1e-6
    active_tol: float = 1e-7
    max_iter: int = 500
    ftol: float = 1e-12
    penalty0: float = 10.0
    penalty_growth: float = 10.0
    penalty_max: float = 1e12
    max_outer: int = 60

class NlpProblem(BaseModel):
    """
    Smooth program: min f(x) s.t. h(x) = 0, g(x) <= 0, lb <= x <= ub.

    Equality and inequality callbacks return vectors with one entry per name
    in `eq_names` / `ineq_names`; Jacobians are dense (rows x n_vars).
    """
    n_vars: int
    lb: Vector
    ub: Vector
    objective: ScalarFn
    gradient: VectorFn
    eq_fun: Optional[VectorFn] = None
    eq_jac: Optional[MatrixFn] = None
    ineq_fun: Optional[VectorFn] = None
    ineq_jac: Optional[MatrixFn] = None
    var_names: List[str]
    eq_names: List[str] = []
    ineq_names: List[str] = []

    class Config:
        arbitrary_types_allowed = True

    @property
    def n_eq(self) -> int:
        return len(self.eq_names)

    @property
    def n_ineq(self) -> int:
        return len(self.ineq_names)

    def eval_eq(self, x: Vector) -> Vector:
        if self.eq_fun is None:
            return np.zeros(0)
        return self.eq_fun(x)

    def eval_eq_jac(self, x: Vector) -> Matrix:
        if self.eq_jac is None:
            return np.zeros((0, self.n_vars))
        return self.eq_jac(x)

    def eval_ineq(self, x: Vector) -> Vector:
        if self.ineq_fun is None:
            return np.zeros(0)
        return self.ineq_fun(x)

    def eval_ineq_jac(self, x: Vector) -> Matrix:
        if self.ineq_jac is None:
            return np.zeros((0, self.n_vars))
        return self.ineq_jac(x)

    def with_quadratic_penalty(self, indices: Sequence[int], targets: Sequence[float], weight: float) -> "NlpProblem":
        """Copy with (weight/2)·Σ (x_i - target_i)² added to the objective."""
        idx = np.asarray(indices, dtype=int)
        target = np.asarray(targets, dtype=float)
        objective = self.objective
        gradient = self.gradient

        def penalized_objective(x: Vector) -> float:
            return objective(x) + 0.5 * weight * float(np.sum((x[idx] - target) ** 2))

        def penalized_gradient(x: Vector) -> Vector:
            g = np.array(gradient(x), dtype=float)
            g[idx] += weight * (x[idx] - target)
            return g

        return self.model_copy(update={"objective": penalized_objective, "gradient": penalized_gradient})

    def with_linear_cost(self, coefficients: Vector) -> "NlpProblem":
        """Copy with c·x added to the objective."""
        c = np.asarray(coefficients, dtype=float)
        if c.shape != (self.n_vars,):
            raise ValueError(f"Expected {self.n_vars} cost coefficients, got {c.shape}")
        objective = self.objective
        gradient = self.gradient

        def priced_objective(x: Vector) -> float:
            return objective(x) + float(c @ x)

        def priced_gradient(x: Vector) -> Vector:
            return np.asarray(gradient(x), dtype=float) + c

        return self.model_copy(update={"objective": priced_objective, "gradient": priced_gradient})

    def reordered(self, perm: Sequence[int]) -> "NlpProblem":
        """Same program with variable k of the copy being variable perm[k] of this one."""
        order = np.asarray(perm, dtype=int)
        n = self.n_vars

        def to_old(x: Vector) -> Vector:
            old = np.empty(n)
            old[order] = x
            return old

        def wrap_jac(jac: Optional[MatrixFn]) -> Optional[MatrixFn]:
            if jac is None:
                return None
            return lambda x: jac(to_old(x))[:, order]

        def wrap_fun(fun: Optional[VectorFn]) -> Optional[VectorFn]:
            if fun is None:
                return None
            return lambda x: fun(to_old(x))

        objective = self.objective
        gradient = self.gradient
        return self.model_copy(update={
            "lb": self.lb[order],
            "ub": self.ub[order],
            "objective": lambda x: objective(to_old(x)),
            "gradient": lambda x: gradient(to_old(x))[order],
            "eq_fun": wrap_fun(self.eq_fun),
            "eq_jac": wrap_jac(self.eq_jac),
            "ineq_fun": wrap_fun(self.ineq_fun),
            "ineq_jac": wrap_jac(self.ineq_jac),
            "var_names": [self.var_names[i] for i in order],
        })

class KktResiduals(BaseModel):
    stationarity: float
    eq_feasibility: float
    ineq_feasibility: float
    bound_feasibility: float
    complementarity: float

    @property
    def feasibility(self) -> float:
        return max(self.eq_feasibility, self.ineq_feasibility, self.bound_feasibility)

class NlpSolution(BaseModel):
    x: Vector
    objective: float
    kkt: KktResiduals
    iterations: int
    status: NlpStatus
    message: str = ""
    eq_multipliers: Vector
    ineq_multipliers: Vector

    class Config:
        arbitrary_types_allowed = True

    @property
    def optimal(self) -> bool:
        return self.status == NlpStatus.OPTIMAL
