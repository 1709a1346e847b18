import numpy as np
import pytest

from conftest import droop_specs
from invopf.inverter import DerSpec, GridForming, PvTypeBus
from invopf.nlp import (
    NlpError,
    NlpOptions,
    NlpProblem,
    NlpStatus,
    NonFiniteCallbackError,
    check_gradients,
    kkt_residuals,
    lagrangian_gradient,
    solve_nlp,
)
from invopf.opf import copf_model

INF = np.inf

def bounded_parabola() -> NlpProblem:
    """min (x - 1)² with x >= 2."""
    return NlpProblem(
        n_vars=1,
        lb=np.array([2.0]),
        ub=np.array([INF]),
        objective=lambda x: float((x[0] - 1.0) ** 2),
        gradient=lambda x: np.array([2.0 * (x[0] - 1.0)]),
        var_names=["x"],
    )

def circle_on_line(lb=(-INF, -INF), ub=(INF, INF)) -> NlpProblem:
    """min x² + y² with x + y = 1."""
    return NlpProblem(
        n_vars=2,
        lb=np.array(lb, dtype=float),
        ub=np.array(ub, dtype=float),
        objective=lambda x: float(x @ x),
        gradient=lambda x: 2.0 * x,
        eq_fun=lambda x: np.array([x[0] + x[1] - 1.0]),
        eq_jac=lambda x: np.array([[1.0, 1.0]]),
        var_names=["x", "y"],
        eq_names=["sum"],
    )

def test_bound_constrained_minimum():
    sol = solve_nlp(bounded_parabola(), np.array([5.0]))
    assert sol.status == NlpStatus.OPTIMAL
    assert sol.optimal
    assert sol.x[0] == pytest.approx(2.0, abs=1e-8)
    assert sol.objective == pytest.approx(1.0, abs=1e-7)

def test_inequality_multiplier():
    problem = NlpProblem(
        n_vars=1,
        lb=np.array([-INF]),
        ub=np.array([INF]),
        objective=lambda x: float((x[0] - 1.0) ** 2),
        gradient=lambda x: np.array([2.0 * (x[0] - 1.0)]),
        ineq_fun=lambda x: np.array([2.0 - x[0]]),
        ineq_jac=lambda x: np.array([[-1.0]]),
        var_names=["x"],
        ineq_names=["x_at_least_2"],
    )
    sol = solve_nlp(problem, np.array([3.0]))
    assert sol.optimal
    assert sol.x[0] == pytest.approx(2.0, abs=1e-7)
    assert sol.ineq_multipliers[0] == pytest.approx(2.0, abs=1e-5)

def test_equality_constrained_minimum():
    sol = solve_nlp(circle_on_line(), np.array([1.0, 0.0]))
    assert sol.optimal
    assert sol.x == pytest.approx([0.5, 0.5], abs=1e-7)
    assert sol.objective == pytest.approx(0.5, abs=1e-7)
    assert sol.eq_multipliers[0] == pytest.approx(-1.0, abs=1e-6)
    assert sol.kkt.eq_feasibility < 1e-8

def test_kkt_residuals_at_known_optimum():
    kkt, lam, mu = kkt_residuals(circle_on_line(), np.array([0.5, 0.5]), NlpOptions())
    assert kkt.stationarity < 1e-10
    assert kkt.feasibility == 0.0
    assert lam[0] == pytest.approx(-1.0)
    assert mu.size == 0

def test_kkt_residuals_away_from_optimum():
    kkt, _, _ = kkt_residuals(circle_on_line(), np.array([1.0, 0.0]), NlpOptions())
    assert kkt.stationarity > 0.1
    assert kkt.eq_feasibility == 0.0

def test_augmented_lagrangian():
    options = NlpOptions(method="auglag")
    sol = solve_nlp(circle_on_line(), np.array([1.0, 0.0]), options)
    assert sol.optimal
    assert sol.x == pytest.approx([0.5, 0.5], abs=1e-5)
    bounded = solve_nlp(bounded_parabola(), np.array([5.0]), options)
    assert bounded.optimal
    assert bounded.x[0] == pytest.approx(2.0, abs=1e-6)

def test_fixed_variables_are_eliminated():
    problem = circle_on_line(lb=(-INF, 0.3), ub=(INF, 0.3))
    sol = solve_nlp(problem, np.array([0.0, 0.0]))
    assert sol.optimal
    assert sol.x[1] == 0.3
    assert sol.x[0] == pytest.approx(0.7, abs=1e-7)

def test_all_variables_fixed():
    problem = circle_on_line(lb=(0.4, 0.6), ub=(0.4, 0.6))
    sol = solve_nlp(problem, np.array([0.0, 0.0]))
    assert sol.iterations == 0
    assert sol.optimal
    assert sol.x == pytest.approx([0.4, 0.6])
    assert sol.objective == pytest.approx(0.52)

def test_max_iter_status():
    rosenbrock = NlpProblem(
        n_vars=2,
        lb=np.array([-INF, -INF]),
        ub=np.array([INF, INF]),
        objective=lambda x: float(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2),
        gradient=lambda x: np.array([
            -400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]),
            200 * (x[1] - x[0] ** 2),
        ]),
        var_names=["x", "y"],
    )
    sol = solve_nlp(rosenbrock, np.array([-1.2, 1.0]), NlpOptions(max_iter=2))
    assert sol.status == NlpStatus.MAX_ITER
    assert not sol.optimal

def test_infeasible_status():
    problem = NlpProblem(
        n_vars=1,
        lb=np.array([-INF]),
        ub=np.array([INF]),
        objective=lambda x: float(x[0] ** 2),
        gradient=lambda x: np.array([2.0 * x[0]]),
        ineq_fun=lambda x: np.array([2.0 - x[0], x[0] - 1.0]),
        ineq_jac=lambda x: np.array([[-1.0], [1.0]]),
        var_names=["x"],
        ineq_names=["x_at_least_2", "x_at_most_1"],
    )
    sol = solve_nlp(problem, np.array([0.0]))
    assert sol.status == NlpStatus.INFEASIBLE
    assert sol.kkt.ineq_feasibility > 1e-3

def test_non_finite_callback():
    problem = NlpProblem(
        n_vars=1,
        lb=np.array([-1.0]),
        ub=np.array([1.0]),
        objective=lambda x: float("nan"),
        gradient=lambda x: np.array([0.0]),
        var_names=["x"],
    )
    with pytest.raises(NonFiniteCallbackError) as e:
        solve_nlp(problem, np.array([0.0]))
    assert e.value.callback == "objective"

def test_bad_arguments():
    with pytest.raises(NlpError):
        solve_nlp(bounded_parabola(), np.array([5.0]), NlpOptions(method="ipopt"))
    with pytest.raises(NlpError):
        solve_nlp(bounded_parabola(), np.array([5.0, 1.0]))

def test_solution_is_deterministic():
    first = solve_nlp(circle_on_line(), np.array([1.0, 0.0]))
    second = solve_nlp(circle_on_line(), np.array([1.0, 0.0]))
    assert np.array_equal(first.x, second.x)
    assert first.iterations == second.iterations

def test_quadratic_penalty():
    base = NlpProblem(
        n_vars=2,
        lb=np.array([-INF, -INF]),
        ub=np.array([INF, INF]),
        objective=lambda x: 0.0,
        gradient=lambda x: np.zeros(2),
        var_names=["a", "b"],
    )
    penalized = base.with_quadratic_penalty([0], [3.0], 2.0)
    x = np.array([5.0, 7.0])
    assert penalized.objective(x) == pytest.approx(4.0)
    assert penalized.gradient(x) == pytest.approx([4.0, 0.0])
    assert base.objective(x) == 0.0
    sol = solve_nlp(penalized, np.array([0.0, 0.0]))
    assert sol.x[0] == pytest.approx(3.0, abs=1e-6)

def test_reordered_problem():
    weights = np.array([1.0, 2.0, 3.0])
    problem = NlpProblem(
        n_vars=3,
        lb=np.array([0.0, 1.0, 2.0]),
        ub=np.array([10.0, 11.0, 12.0]),
        objective=lambda x: float(weights @ x),
        gradient=lambda x: weights.copy(),
        eq_fun=lambda x: np.array([x[0] - x[2]]),
        eq_jac=lambda x: np.array([[1.0, 0.0, -1.0]]),
        var_names=["a", "b", "c"],
        eq_names=["tie"],
    )
    moved = problem.reordered([2, 0, 1])
    y = np.array([4.0, 5.0, 6.0])
    assert moved.var_names == ["c", "a", "b"]
    assert moved.lb == pytest.approx([2.0, 0.0, 1.0])
    assert moved.objective(y) == pytest.approx(5.0 + 2 * 6.0 + 3 * 4.0)
    assert moved.gradient(y) == pytest.approx([3.0, 1.0, 2.0])
    assert moved.eval_eq(y) == pytest.approx([5.0 - 4.0])
    assert moved.eval_eq_jac(y) == pytest.approx(np.array([[-1.0, 1.0, 0.0]]))
    assert solve_nlp(moved, y).objective == pytest.approx(solve_nlp(problem, np.array([5.0, 6.0, 4.0])).objective, abs=1e-6)

def test_affine_derivatives_are_exact():
    A = np.array([[1.0, -2.0, 0.5], [0.0, 3.0, 1.0]])
    c = np.array([0.3, -0.7, 1.1])
    problem = NlpProblem(
        n_vars=3,
        lb=np.full(3, -INF),
        ub=np.full(3, INF),
        objective=lambda x: float(c @ x),
        gradient=lambda x: c.copy(),
        eq_fun=lambda x: A @ x - 1.0,
        eq_jac=lambda x: A.copy(),
        var_names=["a", "b", "c"],
        eq_names=["r0", "r1"],
    )
    assert check_gradients(problem, np.array([0.2, -0.4, 0.9]), h=1e-3) <= 1e-10

def test_wrong_gradient_is_caught():
    problem = bounded_parabola().model_copy(update={"gradient": lambda x: np.array([x[0]])})
    assert check_gradients(problem, np.array([3.0])) > 0.1

def test_feeder_jacobians_match_finite_differences(feeder15):
    model = copf_model(feeder15)
    rng = np.random.default_rng(3)
    for _ in range(20):
        x = model.x0 + rng.normal(scale=0.01, size=model.problem.n_vars)
        assert check_gradients(model.problem, x) < 1e-5

def test_disk_and_droop_rows_match_finite_differences(feeder15):
    specs = []
    for spec in droop_specs(feeder15):
        if spec.bus == "10":
            spec = DerSpec(bus="10", s_rating=0.2, mode=GridForming(v_set2=1.0))
        elif spec.bus == "12":
            spec = DerSpec(bus="12", s_rating=spec.s_rating, mode=PvTypeBus(v_set2=1.0, p_set=0.01, penalty_m=100.0))
        specs.append(spec)
    model = copf_model(feeder15, specs)
    problem = model.problem
    assert "droop[5]" in problem.eq_names
    assert "gfi_voltage[10]" in problem.eq_names
    assert {"disk[10]", "disk[12]"} <= set(problem.ineq_names)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = model.x0 + rng.normal(scale=0.01, size=problem.n_vars)
        assert check_gradients(problem, x) < 1e-5

def ring_equality() -> NlpProblem:
    """min x² s.t. x² = 1; x = 0 is a stationary point of both functions."""
    return NlpProblem(
        n_vars=1,
        lb=np.array([-INF]),
        ub=np.array([INF]),
        objective=lambda x: float(x[0] ** 2),
        gradient=lambda x: np.array([2.0 * x[0]]),
        eq_fun=lambda x: np.array([x[0] ** 2 - 1.0]),
        eq_jac=lambda x: np.array([[2.0 * x[0]]]),
        var_names=["x"],
        eq_names=["ring"],
    )

def test_stalled_start_recovers_from_fallback():
    sol = solve_nlp(ring_equality(), np.array([0.0]), fallback=np.array([2.0]))
    assert sol.status == NlpStatus.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-6)
    assert sol.message.startswith("fallback start")

def test_stall_without_recovery_is_infeasible():
    sol = solve_nlp(ring_equality(), np.array([0.0]))
    assert sol.status == NlpStatus.INFEASIBLE
    assert sol.kkt.eq_feasibility == pytest.approx(1.0)

def test_fallback_must_match_problem_size():
    with pytest.raises(NlpError):
        solve_nlp(bounded_parabola(), np.array([5.0]), fallback=np.array([1.0, 2.0]))

def test_linear_cost_shifts_the_minimizer():
    problem = circle_on_line().with_linear_cost(np.array([1.0, 0.0]))
    sol = solve_nlp(problem, np.array([1.0, 0.0]))
    assert sol.optimal
    # 2x + 1 = 2y on x + y = 1
    assert sol.x == pytest.approx([0.25, 0.75], abs=1e-6)
    assert sol.objective == pytest.approx(0.25 ** 2 + 0.75 ** 2 + 0.25, abs=1e-8)
    with pytest.raises(ValueError):
        circle_on_line().with_linear_cost(np.array([1.0]))

def test_fixed_variable_sensitivity():
    # y held at c: optimal value (1 - c)² + c² changes at rate 4c - 2
    problem = circle_on_line(lb=(-INF, 0.3), ub=(INF, 0.3))
    sol = solve_nlp(problem, np.array([0.5, 0.3]))
    assert sol.optimal
    grad = lagrangian_gradient(problem, sol.x, sol.eq_multipliers, sol.ineq_multipliers)
    assert grad[1] == pytest.approx(4 * 0.3 - 2, abs=1e-6)
    assert grad[0] == pytest.approx(0.0, abs=1e-6)
