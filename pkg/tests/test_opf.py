import math

import numpy as np
import pytest

from conftest import droop_specs, feeder_document
from invopf.feeder import parse_feeder
from invopf.inverter import (
    DerSpec,
    GridFollowingP,
    GridFollowingQ,
    GridForming,
    GridSupporting,
    PvTypeBus,
    droop_q,
)
from invopf.nlp import NlpOptions, NlpStatus
from invopf.opf import (
    ConflictingDerModeError,
    OpfError,
    OpfOptions,
    build_copf,
    copf_model,
    solve_copf,
)
from invopf.powerflow import DerDispatch, solve_powerflow, validate_dispatch

def test_two_bus_counts(feeder2):
    problem = build_copf(feeder2, specs=[])
    assert problem.n_vars == 5
    assert problem.n_eq == 4
    assert problem.n_ineq == 0
    assert problem.var_names == ["P[0-1]", "Q[0-1]", "l[0-1]", "v[0]", "v[1]"]
    assert problem.lb[3] == problem.ub[3] == pytest.approx(feeder2.v_sub2)

def test_mode_counts(feeder2):
    gsi = build_copf(feeder2, specs=[DerSpec(bus="1", s_rating=0.15, mode=GridSupporting(k_q=0.5))])
    assert gsi.n_vars == 7
    assert gsi.n_eq == 5
    assert "droop[1]" in gsi.eq_names

    gfi = build_copf(feeder2, specs=[DerSpec(bus="1", s_rating=0.15, mode=GridForming(v_set2=1.0))])
    assert gfi.n_vars == 7
    assert gfi.n_eq == 5
    assert gfi.ineq_names == ["disk[1]"]

    gfli = build_copf(feeder2)
    assert gfli.n_vars == 7
    assert gfli.n_eq == 4

def test_conflicting_modes(feeder2):
    specs = [
        DerSpec(bus="1", s_rating=0.15, mode=GridFollowingQ(p_measured=0.1)),
        DerSpec(bus="1", s_rating=0.15, mode=GridForming()),
    ]
    with pytest.raises(ConflictingDerModeError) as e:
        build_copf(feeder2, specs=specs)
    assert e.value.bus == "1"

def test_unknown_der_bus(feeder2):
    with pytest.raises(OpfError):
        build_copf(feeder2, specs=[DerSpec(bus="9", s_rating=0.1, mode=GridFollowingP())])

def test_grid_forming_at_substation(feeder2):
    with pytest.raises(OpfError):
        build_copf(feeder2, specs=[DerSpec(bus="0", s_rating=0.1, mode=GridForming())])

def test_zero_load_has_zero_losses():
    f = parse_feeder(feeder_document(
        buses=[{"id": 0}, {"id": 1}],
        lines=[{"from": 0, "to": 1, "r": 0.01, "x": 0.02}],
    ))
    sol = solve_copf(f)
    assert sol.optimal
    assert sol.objective == pytest.approx(0.0, abs=1e-10)
    assert sol.v2["1"] == pytest.approx(1.0, abs=1e-8)

def test_two_bus_matches_grid_search():
    f = parse_feeder(feeder_document(
        buses=[{"id": 0}, {"id": 1, "p_load": 0.5, "q_load": 0.3}],
        lines=[{"from": 0, "to": 1, "r": 0.01, "x": 0.02}],
        ders=[{"bus": 1, "mode": "grid_following_q", "s_rating": 0.3, "p_measured": 0.1}],
    ))
    q_max = math.sqrt(0.3 ** 2 - 0.1 ** 2)
    best = min(
        solve_powerflow(f, {"1": DerDispatch(p=0.1, q=q)}).losses
        for q in np.linspace(-q_max, q_max, 401)
    )
    sol = solve_copf(f)
    assert sol.optimal
    assert sol.losses == pytest.approx(best, rel=1e-3)
    assert sol.losses <= best * (1 + 1e-6)
    assert sol.ders["1"].q == pytest.approx(q_max, abs=1e-6)
    assert "q_D[1] at upper bound" in sol.binding

def test_feeder15_copf_validates(feeder15):
    sol = solve_copf(feeder15)
    assert sol.optimal
    assert sol.status == NlpStatus.OPTIMAL
    assert set(sol.v2) == set(feeder15.buses)
    assert set(sol.flows) == {line.name for line in feeder15.lines}
    assert sol.objective == pytest.approx(sol.losses)
    report = validate_dispatch(feeder15, sol)
    assert report.ok
    assert report.voltage_mismatch < 1e-4

def test_droop_costs_more_than_free_reactive_dispatch(feeder15):
    gfli = solve_copf(feeder15)
    gsi = solve_copf(feeder15, specs=droop_specs(feeder15))
    assert gfli.optimal and gsi.optimal
    assert gsi.losses > gfli.losses
    for spec in droop_specs(feeder15):
        assert abs(gsi.ders[spec.bus].q - droop_q(gsi.v2[spec.bus], spec.mode)) < 1e-6
    assert validate_dispatch(feeder15, gsi).ok

def test_grid_forming_contract(chain3):
    spec = DerSpec(bus="2", s_rating=0.2, mode=GridForming(v_set2=1.0))
    sol = solve_copf(chain3, specs=[spec])
    assert sol.optimal
    assert sol.v2["2"] == pytest.approx(1.0, abs=1e-6)
    der = sol.ders["2"]
    assert der.p ** 2 + der.q ** 2 <= 0.2 ** 2 + 1e-6
    assert validate_dispatch(chain3, sol).ok

def test_grid_following_p_dispatch(chain3):
    spec = DerSpec(bus="2", s_rating=0.05, mode=GridFollowingP())
    sol = solve_copf(chain3, specs=[spec])
    assert sol.optimal
    assert sol.ders["2"].q == 0.0
    assert sol.ders["2"].p == pytest.approx(0.05, abs=1e-6)

def test_pv_bus_penalty(chain3):
    spec = DerSpec(bus="2", s_rating=0.06, mode=PvTypeBus(v_set2=1.0, p_set=0.03, penalty_m=100.0))
    sol = solve_copf(chain3, specs=[spec])
    assert sol.optimal
    assert sol.ders["2"].p == pytest.approx(0.03)
    assert sol.objective >= sol.losses
    deviation = sol.v2["2"] - 1.0
    assert sol.objective == pytest.approx(sol.losses + 100.0 * deviation ** 2, abs=1e-9)

def test_without_ders_matches_powerflow(feeder15):
    sol = solve_copf(feeder15, specs=[])
    state = solve_powerflow(feeder15.with_ders([]), {})
    assert sol.optimal
    assert sol.losses == pytest.approx(state.losses, rel=1e-5)
    for bus, v2 in state.v2.items():
        assert sol.v2[bus] == pytest.approx(v2, abs=1e-6)

def test_bus_labels_do_not_matter(chain3):
    document = feeder_document(
        buses=[
            {"id": "b0"},
            {"id": "b1", "p_load": 0.05, "q_load": 0.02},
            {"id": "b2", "p_load": 0.08, "q_load": 0.04},
        ],
        lines=[
            {"from": "b0", "to": "b1", "r": 0.01, "x": 0.02, "i_rated": 2.0},
            {"from": "b1", "to": "b2", "r": 0.02, "x": 0.03, "i_rated": 2.0},
        ],
        ders=[{"bus": "b2", "mode": "grid_following_q", "s_rating": 0.06, "p_measured": 0.03}],
    )
    document["meta"]["substation"] = "b0"
    relabeled = solve_copf(parse_feeder(document))
    original = solve_copf(chain3)
    assert relabeled.objective == pytest.approx(original.objective, rel=1e-7)

def test_augmented_lagrangian_agrees(chain3):
    slsqp = solve_copf(chain3)
    auglag = solve_copf(chain3, options=OpfOptions(nlp=NlpOptions(method="auglag")))
    assert auglag.optimal
    assert auglag.objective == pytest.approx(slsqp.objective, rel=1e-4)

def test_default_start_is_within_bounds(feeder15):
    model = copf_model(feeder15)
    assert np.all(model.x0 >= model.problem.lb - 1e-12)
    assert np.all(model.x0 <= model.problem.ub + 1e-12)

def test_corrupted_droop_output_is_flagged(feeder15):
    specs = droop_specs(feeder15)
    sol = solve_copf(feeder15, specs=specs)
    ders = dict(sol.ders)
    ders["5"] = DerDispatch(p=ders["5"].p, q=ders["5"].q + 0.1)
    report = validate_dispatch(feeder15, sol.model_copy(update={"ders": ders}))
    assert not report.ok
    assert set(report.droop_violations) == {"5"}

def test_trivial_solution_validates():
    f = parse_feeder(feeder_document(
        buses=[{"id": 0}, {"id": 1}],
        lines=[{"from": 0, "to": 1, "r": 0.01, "x": 0.02}],
    ))
    report = validate_dispatch(f, solve_copf(f))
    assert report.ok
    assert report.converged

def test_voltage_mismatch_is_in_squared_voltage(feeder15):
    sol = solve_copf(feeder15)
    baseline = validate_dispatch(feeder15, sol).voltage_mismatch
    v2 = dict(sol.v2)
    v2["7"] += 5e-5
    report = validate_dispatch(feeder15, sol.model_copy(update={"v2": v2}))
    assert report.voltage_mismatch == pytest.approx(5e-5, abs=baseline + 1e-7)
    assert report.ok

@pytest.mark.parametrize("mode, p, q", [
    (GridFollowingQ(p_measured=0.03), 0.04, None),
    (GridFollowingP(), None, 0.01),
    (PvTypeBus(v_set2=1.0, p_set=0.03), 0.02, None),
])
def test_fixed_output_is_checked(chain3, mode, p, q):
    spec = DerSpec(bus="2", s_rating=0.06, mode=mode)
    sol = solve_copf(chain3, specs=[spec])
    assert validate_dispatch(chain3, sol).ok
    der = sol.ders["2"]
    ders = {"2": DerDispatch(p=der.p if p is None else p, q=der.q if q is None else q)}
    report = validate_dispatch(chain3, sol.model_copy(update={"ders": ders}))
    assert not report.ok
    assert len(report.setpoint_violations) == 1
    assert report.setpoint_violations[0].startswith("DER 2:")
