import asyncio

import pandas as pd
import pytest
import yaml
from pydantic import ValidationError

from invopf.experiment import (
    DerAssignment,
    MethodResult,
    PartitionSpec,
    RunReport,
    Scenario,
    ScenarioError,
    ScenarioMismatchError,
    assign_ders,
    compare_methods,
    emit_plotdata,
    gsi_selection,
    load_scenario,
    run_scenario,
    run_sweep,
    scenario_feeder,
    scenario_partition,
)
from invopf.experiment.cli import main, run
from invopf.experiment.report import method_table
from invopf.experiment.runner import report_path
from invopf.inverter import GridForming, GridSupporting, PvTypeBus

POOL = [str(k) for k in (1, 3, 5, 6, 7, 8, 9, 10, 12, 14)]

def write_scenario(tmp_path, **fields):
    document = {"name": "tiny", "feeder": "feeder2", "methods": ["copf", "dopf", "admm"]}
    document.update(fields)
    path = tmp_path / f"{document['name']}.yaml"
    path.write_text(yaml.safe_dump(document), encoding="utf-8")
    return path

def method_result(method, objective_kw, iterations, residuals=(), voltages=None):
    return MethodResult(
        method=method,
        status="optimal",
        objective_kw=objective_kw,
        iterations=iterations,
        converged=True,
        voltages=voltages or {},
        residuals=list(residuals),
    )

def report_for(scenario, results):
    return RunReport(
        scenario=scenario,
        feeder="feeder15",
        s_base=1e6,
        seed=scenario.seed,
        version="",
        der_modes={},
        results=results,
        status="ok",
    )

def test_gsi_selection_is_nested():
    levels = [gsi_selection(POOL, percent, seed=7) for percent in (0, 10, 50, 100)]
    assert [len(level) for level in levels] == [0, 1, 5, 10]
    for smaller, larger in zip(levels, levels[1:]):
        assert set(smaller) <= set(larger)
    assert levels[-1] == POOL
    assert gsi_selection(POOL, 50, seed=7) == gsi_selection(POOL, 50, seed=7)

def test_assign_ders_mixed_case(feeder15):
    s = load_scenario("case3_mixed")
    specs = assign_ders(feeder15, s.ders, s.seed)
    by_bus = {spec.bus: spec for spec in specs}
    assert sorted(by_bus) == sorted(POOL)
    assert isinstance(by_bus["10"].mode, GridForming)
    assert by_bus["10"].s_rating == pytest.approx(10 * feeder15.bus("10").der.s_rating)
    assert isinstance(by_bus["12"].mode, PvTypeBus)
    assert by_bus["12"].mode.p_set == pytest.approx(feeder15.bus("12").der.mode.p_measured)
    droop = [spec for spec in specs if isinstance(spec.mode, GridSupporting)]
    assert len(droop) == 1
    assert droop[0].bus not in ("10", "12")

def test_droop_gain_scales_with_reactive_capacity(feeder15):
    specs = assign_ders(feeder15, DerAssignment(gsi_buses=["1"], k_q_rel=10.0))
    spec = next(spec for spec in specs if spec.bus == "1")
    s = spec.s_rating
    p = spec.mode.p_measured
    assert spec.mode.k_q == pytest.approx(10.0 * (s ** 2 - p ** 2) ** 0.5)

def test_assignment_validation(feeder15):
    with pytest.raises(ValidationError):
        DerAssignment(gsi_percent=10, gsi_buses=["1"])
    with pytest.raises(ValidationError):
        DerAssignment(gfi_buses=["1"], pv_buses=["1"])
    with pytest.raises(ValidationError):
        PartitionSpec()
    with pytest.raises(ValidationError):
        PartitionSpec(roots={"A1": "0"}, assignment={"0": "A1"})
    with pytest.raises(ScenarioError):
        assign_ders(feeder15, DerAssignment(gfi_buses=["2"]))

def test_packaged_scenarios():
    for name in ("case1_gfli", "case2_gsi", "case3_mixed"):
        s = load_scenario(name)
        assert s.name == name
        assert s.seed == 7
        assert s.methods == ["copf", "dopf", "admm"]
        assert [area.id for area in scenario_partition(scenario_feeder(s), s).areas] == ["A1", "A2", "A3", "A4"]
    with pytest.raises(ScenarioError):
        load_scenario("no_such_case")

def test_partition_by_assignment(tmp_path, feeder2):
    s = load_scenario(write_scenario(tmp_path, partition={"assignment": {0: "A", 1: "B"}}))
    p = scenario_partition(feeder2, s)
    assert [area.id for area in p.areas] == ["A", "B"]

def test_run_is_deterministic(tmp_path):
    s = load_scenario(write_scenario(tmp_path))
    first = asyncio.run(run_scenario(s, out_dir=str(tmp_path / "first")))
    second = asyncio.run(run_scenario(s, out_dir=str(tmp_path / "second")))
    assert first.ok
    assert [item.method for item in first.results] == ["copf", "dopf", "admm"]
    assert all(item.validated for item in first.results)
    assert first.der_modes == {"1": "grid_following_q"}
    copf = first.result("copf")
    assert first.result("dopf").objective_kw == pytest.approx(copf.objective_kw, rel=1e-6)
    assert copf.objective_kw == pytest.approx(1e3 * copf.objective_pu)
    for name in ("tiny.report.json", "tiny.voltages.csv", "tiny.residuals.csv"):
        assert (tmp_path / "first" / name).read_bytes() == (tmp_path / "second" / name).read_bytes()
    assert report_path(first, str(tmp_path / "first")).endswith("tiny.report.json")

def test_feeder_without_ders(tmp_path):
    feeder = {
        "meta": {"name": "bare", "s_base": 1e6, "v_base": 4160.0, "substation": 0, "v_sub": 1.0},
        "buses": [{"id": 0}, {"id": 1, "p_load": 0.1, "q_load": 0.05}],
        "lines": [{"from": 0, "to": 1, "r": 0.01, "x": 0.02}],
    }
    (tmp_path / "bare.yaml").write_text(yaml.safe_dump(feeder), encoding="utf-8")
    s = load_scenario(write_scenario(tmp_path, name="bare-run", feeder="bare.yaml", methods=["copf"]))
    report = asyncio.run(run_scenario(s, write=False))
    assert report.ok
    assert report.der_modes == {}
    assert report.result("copf").losses_pu > 0

def test_failed_method_is_recorded(tmp_path):
    s = load_scenario(write_scenario(tmp_path, solver={"nlp_method": "slsqp", "max_macro": 1}))
    s = s.model_copy(update={"solver": s.solver.model_copy(update={"nlp_method": "ipopt"})})
    report = asyncio.run(run_scenario(s, write=False))
    assert not report.ok
    assert report.status == "failed-validation"
    assert all(item.status == "failed" and item.error for item in report.results)

def test_compare_methods():
    s = Scenario(name="case", feeder="feeder15", seed=7)
    results = [method_result("copf", 10.0, 1), method_result("dopf", 10.05, 15)]
    reports = [report_for(s, results), report_for(s.model_copy(update={"name": "again"}), results)]
    table = compare_methods(reports, reference_method="copf")
    assert list(table.columns) == ["report", "method", "objective_kw", "iterations", "delta_kw", "iteration_ratio"]
    assert len(table) == 4
    dopf = table[(table["report"] == 0) & (table["method"] == "dopf")].iloc[0]
    assert dopf["iteration_ratio"] == 15
    assert dopf["delta_kw"] == pytest.approx(0.05)
    same_method = compare_methods(reports)
    assert same_method["delta_kw"].tolist() == pytest.approx([0.0, 0.0, 0.0, 0.0])

def test_compare_rejects_different_scenarios():
    s = Scenario(name="case", feeder="feeder15", seed=7)
    results = [method_result("copf", 10.0, 1)]
    with pytest.raises(ScenarioMismatchError):
        compare_methods([report_for(s, results), report_for(s.model_copy(update={"seed": 8}), results)])
    with pytest.raises(ScenarioError):
        compare_methods([report_for(s, results)])

def test_method_table():
    s = Scenario(name="case", feeder="feeder15")
    report = report_for(s, [method_result("copf", 10.0, 1), method_result("admm", 10.1, 120)])
    table = method_table(report, "copf")
    assert table["iteration_ratio"].tolist() == [1.0, 120.0]
    with pytest.raises(ScenarioError):
        method_table(report, "dopf")

def test_emit_plotdata(tmp_path):
    s = Scenario(name="plots", feeder="feeder15")
    report = report_for(s, [
        method_result("copf", 10.0, 1, voltages={"0": 1.03, "1": 1.01}),
        method_result("dopf", 10.0, 2, residuals=[0.1, 1e-5], voltages={"0": 1.03, "1": 1.0101}),
    ])
    voltage_path, residual_path = emit_plotdata(report, str(tmp_path))
    voltages = pd.read_csv(voltage_path, dtype={"bus": str})
    assert list(voltages.columns) == ["bus", "v_copf", "v_dopf"]
    assert voltages["bus"].tolist() == ["0", "1"]
    residuals = pd.read_csv(residual_path)
    assert residuals.to_dict("records") == [
        {"method": "dopf", "iteration": 1, "residual": 0.1},
        {"method": "dopf", "iteration": 2, "residual": 1e-5},
    ]

def test_cli_validate(capsys):
    assert run(["validate", "--scenario", "case1_gfli"]) == 0
    out = capsys.readouterr().out
    assert "feeder feeder15: 15 buses, 14 lines" in out
    assert "areas: A1@0, A2@4, A3@8, A4@11" in out

def test_cli_single_method_and_compare(tmp_path, capsys):
    path = write_scenario(tmp_path)
    assert run(["copf", "--scenario", str(path), "--out", str(tmp_path / "a")]) == 0
    assert run(["copf", "--scenario", str(path), "--out", str(tmp_path / "b")]) == 0
    reports = [str(tmp_path / d / "tiny.report.json") for d in ("a", "b")]
    capsys.readouterr()
    assert run(["compare", "--reports", *reports]) == 0
    assert "iteration_ratio" in capsys.readouterr().out

def test_cli_bad_scenario_exits_with_error(monkeypatch):
    monkeypatch.setattr("sys.argv", ["invopf", "copf", "--scenario", "no_such_case"])
    with pytest.raises(SystemExit) as e:
        main()
    assert e.value.code == 2

@pytest.mark.slow
def test_droop_share_raises_losses(tmp_path):
    s = load_scenario("case2_gsi").model_copy(update={"methods": ["copf"]})
    levels = [0, 10, 50, 100]
    reports = asyncio.run(run_sweep(s, levels, str(tmp_path)))
    losses = [reports[level].result("copf").objective_kw for level in levels]
    assert all(report.ok for report in reports.values())
    assert losses == sorted(losses)
    assert losses[0] < losses[1]
    assert losses[2] < losses[3]

@pytest.mark.slow
@pytest.mark.parametrize("name", ["case1_gfli", "case2_gsi", "case3_mixed"])
def test_packaged_cases_agree(name, tmp_path):
    report = asyncio.run(run_scenario(load_scenario(name), out_dir=str(tmp_path)))
    copf = report.result("copf")
    dopf = report.result("dopf")
    admm = report.result("admm")
    assert copf.validated
    assert dopf.converged
    assert dopf.validated
    assert admm.validated
    assert dopf.objective_kw == pytest.approx(copf.objective_kw, rel=1e-2)
    assert report.ok

def test_cli_sweep_writes_table(tmp_path, capsys):
    path = write_scenario(tmp_path)
    out = tmp_path / "sweep"
    assert run(["sweep", "--scenario", str(path), "--levels", "0", "100", "--out", str(out)]) == 0
    table = pd.read_csv(out / "tiny.sweep.csv")
    assert list(table.columns) == ["gsi_percent", "method", "objective_kw", "iterations", "status"]
    assert table["gsi_percent"].tolist() == [0.0, 100.0]
    assert table["method"].tolist() == ["copf", "copf"]
    assert table["objective_kw"].iloc[0] <= table["objective_kw"].iloc[1]
    for level in (0, 100):
        assert (out / f"tiny-gsi{level}.report.json").exists()
    assert "gsi_percent" in capsys.readouterr().out

def test_cli_method_flag(tmp_path, capsys):
    path = write_scenario(tmp_path)
    assert run(["validate", "--scenario", str(path), "--method", "dopf"]) == 0
    assert "methods: dopf" in capsys.readouterr().out
    assert run(["compare", "--scenario", str(path), "--method", "dopf", "--out", str(tmp_path / "c")]) == 0
    report = RunReport.model_validate_json((tmp_path / "c" / "tiny.report.json").read_text(encoding="utf-8"))
    assert [item.method for item in report.results] == ["dopf"]
    assert run(["copf", "--scenario", str(path), "--method", "copf", "--out", str(tmp_path / "d")]) == 0
    with pytest.raises(SystemExit) as e:
        run(["copf", "--scenario", str(path), "--method", "admm"])
    assert e.value.code == 2

def test_cli_missing_report_exits_with_error(tmp_path, monkeypatch):
    monkeypatch.setattr("sys.argv", ["invopf", "compare", "--reports", str(tmp_path / "missing.report.json")])
    with pytest.raises(SystemExit) as e:
        main()
    assert e.value.code == 2
    with pytest.raises(ScenarioError):
        run(["compare", "--reports", str(tmp_path / "missing.report.json")])
