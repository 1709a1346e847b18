from ..common.exceptions import InvopfError

class OpfError(InvopfError):
    """Base exception for OPF construction errors"""

class ConflictingDerModeError(OpfError):
    """Raised when more than one DER is attached to the same bus"""
    def __init__(self, bus: str):
        self.bus = bus
        super().__init__(f"Conflicting DER modes at bus {bus}: at most one DER per bus")
