import math
from dataclasses import dataclass
from typing import Tuple

from .base import DerSpec, GridForming, GridSupporting, PvPenalty, PvTypeBus
from .exceptions import RatingExceededError

# Relative slack when comparing a measured output to the rating.
_RATING_RTOL = 1e-12

def gfli_q_bounds(s_rating: float, p_measured: float) -> Tuple[float, float]:
    """Reactive limits of a grid-following DER whose real output is measured."""
    if p_measured < 0 or p_measured > s_rating * (1 + _RATING_RTOL):
        raise RatingExceededError(p_measured, s_rating)
    q_max = math.sqrt(max(s_rating ** 2 - p_measured ** 2, 0.0))
    return -q_max, q_max

def gfli_p_bounds(s_rating: float) -> Tuple[float, float]:
    """Real limits of a grid-following DER dispatched on p (q is pinned to zero)."""
    return 0.0, s_rating

def droop_q_exact(v_mag: float, spec: GridSupporting) -> float:
    return spec.q_ref + spec.k_q * (spec.v_ref - v_mag)

def droop_q(v2: float, spec: GridSupporting) -> float:
    """Droop curve expressed in squared voltage, linearized around v_ref."""
    return spec.q_ref + spec.k_q * (spec.v_ref ** 2 - v2) / (2 * spec.v_ref)

def droop_q_slope(spec: GridSupporting) -> float:
    """d q / d v2 of the linearized droop curve."""
    return -spec.k_q / (2 * spec.v_ref)

@dataclass(frozen=True)
class GfiConstraintSet:
    bus: str
    v_set2: float
    disk_radius: float

    def voltage_residual(self, v2: float) -> float:
        return v2 - self.v_set2

    def disk_value(self, p: float, q: float) -> float:
        """p² + q² - S²; feasible when <= 0."""
        return p ** 2 + q ** 2 - self.disk_radius ** 2

def gfi_constraints(spec: DerSpec) -> GfiConstraintSet:
    if not isinstance(spec.mode, GridForming):
        raise ValueError(f"DER at bus {spec.bus} is not grid-forming")
    return GfiConstraintSet(bus=spec.bus, v_set2=spec.mode.v_set2, disk_radius=spec.s_rating)

def pvbus_objective_term(v2: float, spec: PvTypeBus, variant: PvPenalty = PvPenalty.SQUARED) -> float:
    deviation = v2 - spec.v_set2
    if variant == PvPenalty.LINEAR:
        return spec.penalty_m * deviation
    return spec.penalty_m * deviation ** 2

def pvbus_objective_gradient(v2: float, spec: PvTypeBus, variant: PvPenalty = PvPenalty.SQUARED) -> float:
    if variant == PvPenalty.LINEAR:
        return spec.penalty_m
    return 2 * spec.penalty_m * (v2 - spec.v_set2)

def der_mode_name(spec: DerSpec) -> str:
    return spec.mode.kind
