from ..common.exceptions import InvopfError

class PowerFlowError(InvopfError):
    """Base exception for power flow failures"""

class PowerFlowDivergedError(PowerFlowError):
    def __init__(self, iterations: int, update: float):
        self.iterations = iterations
        self.update = update
        super().__init__(
            f"Sweep did not converge in {iterations} iterations (last update {update:.3e} pu)"
        )

class VoltageCollapseError(PowerFlowError):
    def __init__(self, bus: str, v2: float):
        self.bus = bus
        self.v2 = v2
        super().__init__(f"Voltage collapse at bus '{bus}': squared voltage {v2:.6g}")
