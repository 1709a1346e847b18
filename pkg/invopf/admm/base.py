from dataclasses import dataclass, field
from typing import Dict, List
from pydantic import BaseModel

from ..opf import OpfOptions

@dataclass
class AdmmOptions:
    """
    :param rho: penalty on boundary copies, in pu of the loss objective.
    :param eps_pri: tolerance on max |local copy - consensus value|.
    :param eps_dual: tolerance on rho · max |consensus change|.

    The stitched dispatch differs from its power flow by a few times eps_pri
    in v2.
    """
    opf: OpfOptions = field(default_factory=OpfOptions)
    rho: float = 1.0
    eps_pri: float = 1e-5
    eps_dual: float = 1e-5
    max_iter: int = 1000
    parallel_areas: bool = False
    max_workers: int = 4
    warm_start: bool = True

class SharedValue(BaseModel):
    """
    One boundary quantity duplicated in its two neighboring areas.

    :param kind: "v" for the shared bus squared voltage, "p"/"q" for the
        power crossing the boundary into the downstream area.
    :param local: latest copy per area.
    :param u: scaled dual per area.
    """
    bus: str
    kind: str
    upstream: str
    downstream: str
    z: float
    local: Dict[str, float] = {}
    u: Dict[str, float] = {}

    @property
    def key(self) -> str:
        return f"{self.kind}[{self.bus}]"

class AdmmRound(BaseModel):
    iteration: int
    primal: float
    dual: float
    objective: float

class AdmmState(BaseModel):
    rho: float
    shared: Dict[str, SharedValue] = {}
    history: List[AdmmRound] = []
    converged: bool = False

    @property
    def primal_residuals(self) -> List[float]:
        return [record.primal for record in self.history]

    @property
    def dual_residuals(self) -> List[float]:
        return [record.dual for record in self.history]

    @property
    def count(self) -> int:
        return len(self.history)

class RhoSweepRow(BaseModel):
    rho: float
    iterations: int
    objective: float
    converged: bool
