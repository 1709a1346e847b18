import asyncio
import importlib.metadata
import logging
import os
from typing import Dict, List, Optional, Sequence

import aiofiles

from ..admm import admm_iterate_async
from ..common.exceptions import InvopfError
from ..distributed import macro_iterate_async
from ..feeder import AreaPartition, Feeder
from ..inverter import DerSpec, der_mode_name
from ..opf import OpfSolution, solve_copf
from ..powerflow import validate_dispatch
from .report import MethodResult, RunReport, plotdata_frames, plotdata_paths
from .scenario import (
    Scenario,
    admm_options,
    assign_ders,
    dopf_options,
    opf_options,
    scenario_feeder,
    scenario_partition,
)

logger = logging.getLogger(__name__)

try:
    VERSION = importlib.metadata.version("invopf")
except importlib.metadata.PackageNotFoundError:
    VERSION = ""

def _result(f: Feeder, method: str, solution: OpfSolution, iterations: int, converged: bool,
            residuals: List[float], dual_residuals: Optional[List[float]] = None) -> MethodResult:
    validation = validate_dispatch(f, solution)
    if not validation.ok:
        logger.warning(f"{method}: solution failed validation ({validation.message or 'see report'})")
    return MethodResult(
        method=method,
        status=solution.status.value,
        objective_pu=solution.objective,
        objective_kw=f.to_kw(solution.objective),
        losses_pu=solution.losses,
        losses_kw=f.to_kw(solution.losses),
        iterations=iterations,
        nlp_iterations=solution.iterations if method == "copf" else 0,
        converged=converged,
        voltages=solution.voltages(),
        residuals=residuals,
        dual_residuals=dual_residuals or [],
        validation=validation,
    )

async def run_method(s: Scenario, f: Feeder, specs: Sequence[DerSpec], p: AreaPartition, method: str) -> MethodResult:
    """Run one method; solver failures are recorded in the result, not raised."""
    try:
        if method == "copf":
            solution = await asyncio.to_thread(solve_copf, f, specs, opf_options(s))
            return _result(f, method, solution, 1, solution.optimal, [])
        if method == "dopf":
            solution, trace = await macro_iterate_async(f, specs, p, dopf_options(s))
            return _result(f, method, solution, trace.count, trace.converged, trace.residuals)
        if method == "admm":
            solution, state = await admm_iterate_async(f, specs, p, admm_options(s))
            return _result(f, method, solution, state.count, state.converged,
                           state.primal_residuals, state.dual_residuals)
    except InvopfError as e:
        logger.error(f"{method} failed: {e.message}")
        return MethodResult(method=method, status="failed", error=e.message)
    raise ValueError(f"Unknown method: {method}")

def report_path(report: RunReport, out_dir: str) -> str:
    return os.path.join(out_dir, f"{report.scenario.name}.report.json")

async def write_report(report: RunReport, out_dir: str) -> List[str]:
    """Write the report document and its two plot-data files."""
    os.makedirs(out_dir, exist_ok=True)
    path = report_path(report, out_dir)
    async with aiofiles.open(path, 'w', encoding='utf-8') as file:
        await file.write(report.model_dump_json(indent=2))
    voltages, residuals = plotdata_frames(report)
    voltage_path, residual_path = plotdata_paths(report, out_dir)
    for frame, target in ((voltages, voltage_path), (residuals, residual_path)):
        async with aiofiles.open(target, 'w', encoding='utf-8') as file:
            await file.write(frame.to_csv(index=False))
    logger.info(f"Wrote {path}")
    return [path, voltage_path, residual_path]

async def run_scenario(s: Scenario, out_dir: Optional[str] = None, write: bool = True) -> RunReport:
    """
    Run every requested method on the scenario, cross-validate each solution
    with the power-flow oracle and write the report files.

    The report carries no timestamps, so identical scenario, seed and
    version give byte-identical files.
    """
    f = scenario_feeder(s)
    specs = assign_ders(f, s.ders, s.seed)
    f = f.with_ders(specs)
    p = scenario_partition(f, s)
    logger.info(f"Running scenario '{s.name}' on '{f.name}': methods {', '.join(s.methods)}")

    results = [await run_method(s, f, specs, p, method) for method in s.methods]
    report = RunReport(
        scenario=s,
        feeder=f.name,
        s_base=f.s_base,
        seed=s.seed,
        version=VERSION,
        der_modes={spec.bus: der_mode_name(spec) for spec in specs},
        results=results,
        status="ok" if all(item.validated for item in results) else "failed-validation",
    )
    if write:
        await write_report(report, out_dir or s.output_dir)
    return report

async def run_sweep(s: Scenario, levels: Sequence[float], out_dir: Optional[str] = None) -> Dict[float, RunReport]:
    """One run per GSI percentage; later levels select supersets of earlier ones."""
    reports: Dict[float, RunReport] = {}
    for level in levels:
        ders = s.ders.model_copy(update={"gsi_percent": float(level), "gsi_buses": None})
        variant = s.model_copy(update={"name": f"{s.name}-gsi{int(level)}", "ders": ders})
        reports[level] = await run_scenario(variant, out_dir)
    return reports
