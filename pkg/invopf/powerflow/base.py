from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Union
from pydantic import BaseModel

from ..inverter import DerSpec

class DerDispatch(BaseModel):
    """Real and reactive DER output (pu, generator convention)."""
    p: float
    q: float

# A DER is either dispatched at fixed (p, q) or, for droop inverters, given by
# its spec so the sweep resolves q from the bus voltage.
DispatchEntry = Union[DerDispatch, DerSpec]
Dispatch = Mapping[str, DispatchEntry]

@dataclass
class PowerFlowOptions:
    tol: float = 1e-10
    max_iter: int = 200

class BranchFlowResiduals(BaseModel):
    """Max absolute violation of the real balance, reactive balance, voltage drop and current equations."""
    p_balance: float
    q_balance: float
    voltage_drop: float
    current: float

    def max(self) -> float:
        return max(self.p_balance, self.q_balance, self.voltage_drop, self.current)

class PowerFlowState(BaseModel):
    """
    Branch-flow state of a radial feeder.

    :param v2: squared voltage per bus (pu²).
    :param P: sending-end real flow per line name (pu).
    :param Q: sending-end reactive flow per line name (pu).
    :param l: squared current per line name (pu²).
    :param losses: total real loss, sum of r·l (pu).
    :param dispatch: DER outputs used, with droop outputs resolved.
    """
    v2: Dict[str, float]
    P: Dict[str, float]
    Q: Dict[str, float]
    l: Dict[str, float]
    losses: float
    dispatch: Dict[str, DerDispatch] = {}
    iterations: int = 0
    residuals: Optional[BranchFlowResiduals] = None

class ValidationReport(BaseModel):
    ok: bool
    converged: bool
    voltage_mismatch: float = 0.0
    droop_violations: Dict[str, float] = {}
    gfi_violations: Dict[str, float] = {}
    limit_violations: List[str] = []
    setpoint_violations: List[str] = []
    message: Optional[str] = None
