from typing import Optional, TYPE_CHECKING

from ..common.exceptions import InvopfError

if TYPE_CHECKING:
    from .base import MacroTrace

class BoundaryError(InvopfError):
    """Base exception for boundary exchange errors"""

class MissingBoundaryValueError(BoundaryError):
    """Raised when a boundary value needed by an area or a residual is absent"""
    def __init__(self, area: str, key: str):
        self.area = area
        self.key = key
        super().__init__(f"Area {area} is missing boundary value '{key}'")

class AreaSolveError(BoundaryError):
    """Raised when an area sub-problem fails; carries the trace so far"""
    def __init__(self, area: str, iteration: int, status: str, trace: Optional["MacroTrace"] = None):
        self.area = area
        self.iteration = iteration
        self.status = status
        self.trace = trace
        super().__init__(f"Area {area} failed at macro-iteration {iteration}: {status}")
