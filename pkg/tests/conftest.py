import math

import pytest

from invopf.feeder import Feeder, load_fixture, parse_feeder, partition_by_roots
from invopf.inverter import DerSpec, GridSupporting

FOUR_AREA_ROOTS = {"A1": "0", "A2": "4", "A3": "8", "A4": "11"}

def feeder_document(buses, lines, ders=(), v_sub=1.0, name="test"):
    return {
        "meta": {"name": name, "s_base": 1e6, "v_base": 4160.0, "substation": "0", "v_sub": v_sub},
        "buses": list(buses),
        "lines": list(lines),
        "ders": list(ders),
    }

@pytest.fixture
def feeder2() -> Feeder:
    return load_fixture("feeder2")

@pytest.fixture
def chain3() -> Feeder:
    return parse_feeder(feeder_document(
        buses=[
            {"id": 0},
            {"id": 1, "p_load": 0.05, "q_load": 0.02},
            {"id": 2, "p_load": 0.08, "q_load": 0.04},
        ],
        lines=[
            {"from": 0, "to": 1, "r": 0.01, "x": 0.02, "i_rated": 2.0},
            {"from": 1, "to": 2, "r": 0.02, "x": 0.03, "i_rated": 2.0},
        ],
        ders=[{"bus": 2, "mode": "grid_following_q", "s_rating": 0.06, "p_measured": 0.03}],
    ))

@pytest.fixture
def star() -> Feeder:
    return parse_feeder(feeder_document(
        buses=[{"id": 0}] + [{"id": k, "p_load": 0.02 * k, "q_load": 0.01 * k} for k in (1, 2, 3)],
        lines=[{"from": 0, "to": k, "r": 0.01, "x": 0.02} for k in (1, 2, 3)],
    ))

@pytest.fixture
def feeder15() -> Feeder:
    return load_fixture("feeder15")

@pytest.fixture
def four_areas(feeder15):
    return partition_by_roots(feeder15, FOUR_AREA_ROOTS)

def droop_specs(f, k_q_rel=10.0):
    """Every DER of `f` switched to a Q-V droop at its measured real output."""
    specs = []
    for spec in f.ders():
        p = spec.mode.p_measured
        specs.append(DerSpec(
            bus=spec.bus,
            s_rating=spec.s_rating,
            mode=GridSupporting(
                q_ref=0.0,
                v_ref=1.0,
                k_q=k_q_rel * math.sqrt(spec.s_rating ** 2 - p ** 2),
                p_measured=p,
            ),
        ))
    return specs
