from enum import Enum
from typing import List
from pydantic import BaseModel

class BoundaryKind(Enum):
    VOLTAGE = "voltage"
    DEMAND = "demand"

class BoundaryMessage(BaseModel):
    """
    One value sent across an area boundary.

    A voltage message carries [v2] computed by the upstream area at the shared
    bus; a demand message carries [p, q] computed by the downstream area for
    the power entering its root. With boundary prices on, a voltage message
    appends the sender's marginal cost of (p, q) drawn at the bus and a demand
    message appends the sender's marginal cost of its root v2.
    """
    area: str
    iteration: int
    bus: str
    kind: BoundaryKind
    values: List[float]

    class Config:
        frozen = True
