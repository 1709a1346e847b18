from .base import AdmmOptions, AdmmRound, AdmmState, RhoSweepRow, SharedValue
from .consensus import (
    admm_iterate,
    admm_iterate_async,
    admm_model,
    admm_scope,
    copy_index,
    init_admm,
    sweep_rho,
    update_consensus,
)

__all__ = [
    "AdmmOptions",
    "AdmmRound",
    "AdmmState",
    "RhoSweepRow",
    "SharedValue",
    "admm_iterate",
    "admm_iterate_async",
    "admm_model",
    "admm_scope",
    "copy_index",
    "init_admm",
    "sweep_rho",
    "update_consensus",
]
