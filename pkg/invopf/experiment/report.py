import logging
import math
import os
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel

from ..powerflow import ValidationReport
from .exceptions import ScenarioError, ScenarioMismatchError
from .scenario import Scenario

logger = logging.getLogger(__name__)

RESIDUAL_COLUMNS = ["method", "iteration", "residual"]

class MethodResult(BaseModel):
    """
    Outcome of one method on one scenario.

    :param iterations: macro-iterations for D-OPF and ADMM, 1 for C-OPF.
    :param residuals: consensus residual per macro-iteration (D-OPF) or
        primal residual per round (ADMM); empty for C-OPF.
    :param voltages: voltage magnitude per bus (pu).
    """
    method: str
    status: str
    objective_pu: Optional[float] = None
    objective_kw: Optional[float] = None
    losses_pu: Optional[float] = None
    losses_kw: Optional[float] = None
    iterations: int = 0
    nlp_iterations: int = 0
    converged: bool = False
    voltages: Dict[str, float] = {}
    residuals: List[float] = []
    dual_residuals: List[float] = []
    validation: Optional[ValidationReport] = None
    error: Optional[str] = None

    @property
    def validated(self) -> bool:
        return self.error is None and self.validation is not None and self.validation.ok

class RunReport(BaseModel):
    scenario: Scenario
    feeder: str
    s_base: float
    seed: int
    version: str
    der_modes: Dict[str, str]
    results: List[MethodResult]
    status: str

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def result(self, method: str) -> Optional[MethodResult]:
        for item in self.results:
            if item.method == method:
                return item
        return None

def _scenario_key(report: RunReport) -> str:
    return report.scenario.model_dump_json(exclude={"name", "description", "methods", "output_dir", "solver"})

def compare_methods(reports: Sequence[RunReport], reference_method: Optional[str] = None) -> pd.DataFrame:
    """
    Objective deltas and iteration ratios across reports of one scenario.

    Without `reference_method` each method is compared with the same method in
    the first report; with it, every row is compared with that method's
    result in the first report.

    :return: one row per (report, method) with columns report, method,
        objective_kw, iterations, delta_kw, iteration_ratio.
    """
    if len(reports) < 2:
        raise ScenarioError("compare_methods needs at least two reports")
    first = reports[0]
    key = _scenario_key(first)
    for other in reports[1:]:
        if _scenario_key(other) != key:
            raise ScenarioMismatchError(first.scenario.name, other.scenario.name)

    rows = []
    for index, report in enumerate(reports):
        for item in report.results:
            ref = first.result(reference_method or item.method)
            delta = math.nan
            ratio = math.nan
            if ref is not None and ref.error is None and item.error is None:
                if item.objective_kw is not None and ref.objective_kw is not None:
                    delta = item.objective_kw - ref.objective_kw
                if ref.iterations > 0:
                    ratio = item.iterations / ref.iterations
            rows.append({
                "report": index,
                "method": item.method,
                "objective_kw": item.objective_kw,
                "iterations": item.iterations,
                "delta_kw": delta,
                "iteration_ratio": ratio,
            })
    return pd.DataFrame(rows, columns=["report", "method", "objective_kw", "iterations", "delta_kw", "iteration_ratio"])

def plotdata_frames(report: RunReport) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Per-bus voltages with one `v_<method>` column per method, and the
    residual history as rows (method, iteration, residual).
    """
    solved = [item for item in report.results if item.voltages]
    buses: List[str] = []
    for item in solved:
        buses.extend(bus for bus in item.voltages if bus not in buses)
    voltages = pd.DataFrame({"bus": buses})
    for item in solved:
        voltages[f"v_{item.method}"] = [item.voltages.get(bus, math.nan) for bus in buses]

    residual_rows = [
        {"method": item.method, "iteration": n, "residual": value}
        for item in report.results
        for n, value in enumerate(item.residuals, start=1)
    ]
    residuals = pd.DataFrame(residual_rows, columns=RESIDUAL_COLUMNS)
    return voltages, residuals

def plotdata_paths(report: RunReport, out_dir: str) -> Tuple[str, str]:
    name = report.scenario.name
    return (
        os.path.join(out_dir, f"{name}.voltages.csv"),
        os.path.join(out_dir, f"{name}.residuals.csv"),
    )

def emit_plotdata(report: RunReport, out_dir: str) -> Tuple[str, str]:
    """
    Write `<name>.voltages.csv` (bus, v_<method>...) and
    `<name>.residuals.csv` (method, iteration, residual).
    """
    os.makedirs(out_dir, exist_ok=True)
    voltages, residuals = plotdata_frames(report)
    voltage_path, residual_path = plotdata_paths(report, out_dir)
    voltages.to_csv(voltage_path, index=False)
    residuals.to_csv(residual_path, index=False)
    logger.info(f"Wrote plot data to {voltage_path} and {residual_path}")
    return voltage_path, residual_path

def method_table(report: RunReport, reference_method: str) -> pd.DataFrame:
    """Methods of a single report against one of them."""
    ref = report.result(reference_method)
    if ref is None:
        raise ScenarioError(f"Report has no '{reference_method}' result")
    rows = []
    for item in report.results:
        delta = math.nan
        ratio = math.nan
        if item.objective_kw is not None and ref.objective_kw is not None:
            delta = item.objective_kw - ref.objective_kw
        if ref.iterations > 0:
            ratio = item.iterations / ref.iterations
        rows.append({
            "method": item.method,
            "objective_kw": item.objective_kw,
            "iterations": item.iterations,
            "delta_kw": delta,
            "iteration_ratio": ratio,
        })
    return pd.DataFrame(rows, columns=["method", "objective_kw", "iterations", "delta_kw", "iteration_ratio"])
