import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional
from pydantic import BaseModel

from ..inverter import DerSpec, PvPenalty
from ..nlp import KktResiduals, NlpOptions, NlpStatus
from ..powerflow import DerDispatch

@dataclass
class OpfOptions:
    """
    :param binding_tol: distance to a bound under which a constraint is reported as binding.
    :param pv_penalty: PV-type bus voltage penalty form.
    """
    nlp: NlpOptions = field(default_factory=NlpOptions)
    binding_tol: float = 1e-5
    pv_penalty: PvPenalty = PvPenalty.SQUARED

class LineFlow(BaseModel):
    P: float
    Q: float
    l: float

class OpfSolution(BaseModel):
    """
    :param objective: solved objective, losses plus any PV-type bus penalty (pu).
    :param losses: Σ r·l over all lines (pu).
    :param binding: constraints within `binding_tol` of their bound.
    """
    v2: Dict[str, float]
    flows: Dict[str, LineFlow]
    ders: Dict[str, DerDispatch] = {}
    specs: List[DerSpec] = []
    objective: float
    losses: float
    status: NlpStatus
    binding: List[str] = []
    iterations: int = 0
    kkt: Optional[KktResiduals] = None

    @property
    def optimal(self) -> bool:
        return self.status == NlpStatus.OPTIMAL

    def voltages(self) -> Dict[str, float]:
        return {bus: math.sqrt(max(v2, 0.0)) for bus, v2 in self.v2.items()}

    def to_dispatch(self) -> Dict[str, DerDispatch]:
        return dict(self.ders)
