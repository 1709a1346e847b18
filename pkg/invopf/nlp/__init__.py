from .base import KktResiduals, NlpOptions, NlpProblem, NlpSolution, NlpStatus
from .dercheck import check_gradients
from .exceptions import NlpError, NonFiniteCallbackError
from .kkt import kkt_residuals, lagrangian_gradient
from .solver import solve_nlp

__all__ = [
    "KktResiduals",
    "NlpOptions",
    "NlpProblem",
    "NlpSolution",
    "NlpStatus",
    "check_gradients",
    "NlpError",
    "NonFiniteCallbackError",
    "kkt_residuals",
    "lagrangian_gradient",
    "solve_nlp",
]
