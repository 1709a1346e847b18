from .base import LineFlow, OpfOptions, OpfSolution
from .builder import OpfModel, OpfScope, OpfVariables, build_copf, build_model, check_specs, copf_model, full_scope
from .exceptions import ConflictingDerModeError, OpfError
from .solve import model_solution, solve_copf, solve_model

__all__ = [
    "LineFlow",
    "OpfOptions",
    "OpfSolution",
    "OpfModel",
    "OpfScope",
    "OpfVariables",
    "build_copf",
    "build_model",
    "check_specs",
    "copf_model",
    "full_scope",
    "ConflictingDerModeError",
    "OpfError",
    "model_solution",
    "solve_copf",
    "solve_model",
]
