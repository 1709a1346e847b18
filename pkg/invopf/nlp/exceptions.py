from ..common.exceptions import InvopfError

class NlpError(InvopfError):
    """Base exception for nonlinear programming errors"""

class NonFiniteCallbackError(NlpError):
    """Raised when a problem callback returns NaN or infinity"""
    def __init__(self, callback: str):
        self.callback = callback
        super().__init__(f"Callback '{callback}' returned a non-finite value")
