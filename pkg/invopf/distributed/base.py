from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple
from pydantic import BaseModel

from ..opf import OpfOptions
from .messages import BoundaryMessage

@dataclass
class DopfOptions:
    """
    :param eps_consensus: absolute pu tolerance on every boundary mismatch.
    :param damping: weight kept on the previous received value, 0 for plain fixed-point.
    :param parallel_areas: solve the areas of one macro-iteration concurrently,
        in a pool of `max_workers` processes.
    :param warm_start: start each area from its previous solution after the first round.
    :param boundary_prices: exchange marginal costs with the boundary values, so
        that each area also prices the effect of its boundary values on its
        neighbors. Without them the fixed point is a compromise between
        areas that each minimize their own losses.
    """
    opf: OpfOptions = field(default_factory=OpfOptions)
    eps_consensus: float = 1e-4
    max_macro: int = 40
    damping: float = 0.0
    parallel_areas: bool = False
    max_workers: int = 4
    warm_start: bool = True
    boundary_prices: bool = True

class AreaBoundary(BaseModel):
    """
    Boundary values held for one area.

    :param v0_in: received squared voltage for the area root (pu²).
    :param demand_in: received (p, q) demand per downstream shared bus.
    :param v_out: computed squared voltage per downstream shared bus.
    :param root_out: computed (p, q) entering the area root.
    :param root_price: received upstream marginal cost of (p, q) entering the root.
    :param voltage_price: received downstream marginal cost of v2 per shared bus.
    """
    v0_in: float
    demand_in: Dict[str, Tuple[float, float]] = {}
    v_out: Dict[str, float] = {}
    root_out: Optional[Tuple[float, float]] = None
    root_price: Tuple[float, float] = (0.0, 0.0)
    voltage_price: Dict[str, float] = {}

class BoundaryState(BaseModel):
    iteration: int = 0
    areas: Dict[str, AreaBoundary]

    def area(self, area_id: str) -> AreaBoundary:
        return self.areas[area_id]

class MacroIteration(BaseModel):
    iteration: int
    residual: float
    objectives: Dict[str, float]
    statuses: Dict[str, str]
    messages: List[BoundaryMessage]

class MacroTrace(BaseModel):
    iterations: List[MacroIteration] = []
    converged: bool = False

    @property
    def residuals(self) -> List[float]:
        return [record.residual for record in self.iterations]

    @property
    def count(self) -> int:
        return len(self.iterations)
