from enum import Enum
from typing import Annotated, Literal, Union
from pydantic import BaseModel, Field, model_validator

from ..common.const import PV_PENALTY_WEIGHT, V_MAX, V_MIN
from ..common.types import BusId

class DerMode(Enum):
    GRID_FOLLOWING_Q = "grid_following_q"
    GRID_FOLLOWING_P = "grid_following_p"
    GRID_SUPPORTING = "grid_supporting"
    GRID_FORMING = "grid_forming"
    PV_BUS = "pv_bus"

class PvPenalty(Enum):
    SQUARED = "squared"
    LINEAR = "linear"

class GridFollowingQ(BaseModel):
    """Reactive output is the decision; real output is a measured input."""
    kind: Literal["grid_following_q"] = "grid_following_q"
    p_measured: float = Field(default=0.0, ge=0)

    class Config:
        frozen = True

class GridFollowingP(BaseModel):
    """Real output is the decision in [0, rating]; reactive output is pinned to zero."""
    kind: Literal["grid_following_p"] = "grid_following_p"

    class Config:
        frozen = True

class GridSupporting(BaseModel):
    """
    Q-V droop inverter.

    :param q_ref: reactive output at the reference voltage (pu).
    :param v_ref: reference voltage magnitude (pu).
    :param k_q: droop gain, the negative of the Q-V slope (pu reactive per pu voltage).
    :param p_measured: real output, fixed for the snapshot (pu).
    """
    kind: Literal["grid_supporting"] = "grid_supporting"
    q_ref: float = 0.0
    v_ref: float = Field(default=1.0, ge=V_MIN, le=V_MAX)
    k_q: float = Field(default=0.0, ge=0)
    p_measured: float = Field(default=0.0, ge=0)

    class Config:
        frozen = True

class GridForming(BaseModel):
    """Holds its bus at a fixed squared voltage; p and q are both decisions."""
    kind: Literal["grid_forming"] = "grid_forming"
    v_set2: float = Field(default=1.0, gt=0)

    class Config:
        frozen = True

class PvTypeBus(BaseModel):
    """Generator-style bus: fixed real output, voltage target enforced through an objective penalty."""
    kind: Literal["pv_bus"] = "pv_bus"
    v_set2: float = Field(default=1.0, gt=0)
    p_set: float = 0.0
    penalty_m: float = Field(default=PV_PENALTY_WEIGHT, ge=0)

    class Config:
        frozen = True

DerModeSpec = Annotated[
    Union[GridFollowingQ, GridFollowingP, GridSupporting, GridForming, PvTypeBus],
    Field(discriminator="kind"),
]

class DerSpec(BaseModel):
    bus: BusId
    s_rating: float = Field(gt=0)
    mode: DerModeSpec

    class Config:
        frozen = True

    @model_validator(mode="after")
    def _check_rating(self) -> "DerSpec":
        p_fixed = None
        if isinstance(self.mode, (GridFollowingQ, GridSupporting)):
            p_fixed = self.mode.p_measured
        elif isinstance(self.mode, PvTypeBus):
            p_fixed = abs(self.mode.p_set)
        if p_fixed is not None and p_fixed > self.s_rating:
            raise ValueError(
                f"DER at bus {self.bus}: fixed real output {p_fixed} exceeds rating {self.s_rating}"
            )
        return self

    @property
    def kind(self) -> DerMode:
        return DerMode(self.mode.kind)
