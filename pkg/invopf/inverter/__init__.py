from .base import (
    DerMode,
    DerModeSpec,
    DerSpec,
    GridFollowingP,
    GridFollowingQ,
    GridForming,
    GridSupporting,
    PvPenalty,
    PvTypeBus,
)
from .exceptions import DerSpecError, RatingExceededError
from .models import (
    GfiConstraintSet,
    der_mode_name,
    droop_q,
    droop_q_exact,
    droop_q_slope,
    gfi_constraints,
    gfli_p_bounds,
    gfli_q_bounds,
    pvbus_objective_gradient,
    pvbus_objective_term,
)

__all__ = [
    'DerMode',
    'DerModeSpec',
    'DerSpec',
    'DerSpecError',
    'GfiConstraintSet',
    'GridFollowingP',
    'GridFollowingQ',
    'GridForming',
    'GridSupporting',
    'PvPenalty',
    'PvTypeBus',
    'RatingExceededError',
    'der_mode_name',
    'droop_q',
    'droop_q_exact',
    'droop_q_slope',
    'gfi_constraints',
    'gfli_p_bounds',
    'gfli_q_bounds',
    'pvbus_objective_gradient',
    'pvbus_objective_term',
]
