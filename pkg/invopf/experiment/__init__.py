from .exceptions import ScenarioError, ScenarioMismatchError
from .report import MethodResult, RunReport, compare_methods, emit_plotdata, method_table, plotdata_frames
from .runner import run_method, run_scenario, run_sweep, write_report
from .scenario import (
    DerAssignment,
    PartitionSpec,
    Scenario,
    SolverSection,
    admm_options,
    assign_ders,
    dopf_options,
    gsi_selection,
    load_scenario,
    opf_options,
    scenario_feeder,
    scenario_partition,
)

__all__ = [
    "ScenarioError",
    "ScenarioMismatchError",
    "MethodResult",
    "RunReport",
    "compare_methods",
    "emit_plotdata",
    "method_table",
    "plotdata_frames",
    "run_method",
    "run_scenario",
    "run_sweep",
    "write_report",
    "DerAssignment",
    "PartitionSpec",
    "Scenario",
    "SolverSection",
    "admm_options",
    "assign_ders",
    "dopf_options",
    "gsi_selection",
    "load_scenario",
    "opf_options",
    "scenario_feeder",
    "scenario_partition",
]
