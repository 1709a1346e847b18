from ..common.exceptions import InvopfError

class DerSpecError(InvopfError):
    """Base exception for invalid DER parameters"""

class RatingExceededError(DerSpecError):
    """Raised when a measured real output exceeds the DER rating"""
    def __init__(self, p_measured: float, s_rating: float):
        self.p_measured = p_measured
        self.s_rating = s_rating
        super().__init__(
            f"Measured real output {p_measured} exceeds apparent power rating {s_rating}"
        )
