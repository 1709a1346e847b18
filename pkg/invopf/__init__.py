import logging
import os

logger = logging.getLogger(__name__)
logger.setLevel(os.getenv("INVOPF_LOG_LEVEL", "INFO").upper())

if not logger.hasHandlers():
    handler = logging.StreamHandler()
    formatter = logging.Formatter(
        f'%(asctime)s - {__name__} - %(levelname)s - %(message)s'
    )
    handler.setFormatter(formatter)
    logger.addHandler(handler)

from .feeder import Feeder, load_fixture, parse_feeder, partition, partition_by_roots
from .inverter import DerSpec
from .powerflow import solve_powerflow, validate_dispatch
from .opf import OpfOptions, OpfSolution, build_copf, solve_copf
from .distributed import DopfOptions, macro_iterate
from .admm import AdmmOptions, admm_iterate

__all__ = [
    'AdmmOptions',
    'DerSpec',
    'DopfOptions',
    'Feeder',
    'OpfOptions',
    'OpfSolution',
    'admm_iterate',
    'build_copf',
    'load_fixture',
    'macro_iterate',
    'parse_feeder',
    'partition',
    'partition_by_roots',
    'solve_copf',
    'solve_powerflow',
    'validate_dispatch',
]
