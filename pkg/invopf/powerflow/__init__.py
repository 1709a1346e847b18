from .base import (
    BranchFlowResiduals,
    DerDispatch,
    Dispatch,
    DispatchEntry,
    PowerFlowOptions,
    PowerFlowState,
    ValidationReport,
)
from .exceptions import PowerFlowDivergedError, PowerFlowError, VoltageCollapseError
from .sweep import net_consumption, residuals, solve_powerflow, substation_injection
from .validate import validate_dispatch

__all__ = [
    'BranchFlowResiduals',
    'DerDispatch',
    'Dispatch',
    'DispatchEntry',
    'PowerFlowDivergedError',
    'PowerFlowError',
    'PowerFlowOptions',
    'PowerFlowState',
    'ValidationReport',
    'VoltageCollapseError',
    'net_consumption',
    'residuals',
    'solve_powerflow',
    'substation_injection',
    'validate_dispatch',
]
