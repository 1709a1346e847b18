import logging
import re
from typing import Dict, List, Tuple

import networkx as nx
from pydantic import BaseModel

from .base import Feeder, Line
from .exceptions import NonRadialError

logger = logging.getLogger(__name__)

class RadialReport(BaseModel):
    ok: bool
    violations: List[str] = []

def bus_sort_key(bus_id: str) -> Tuple[Tuple[int, int, str], ...]:
    """Natural ordering: numeric runs compare as numbers, so '2' < '10'."""
    return tuple(
        (0, int(token), "") if token.isdigit() else (1, 0, token)
        for token in re.split(r"(\d+)", bus_id)
        if token
    )

def _digraph(f: Feeder) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(f.buses)
    graph.add_edges_from(line.key for line in f.lines)
    return graph

def validate_radial(f: Feeder) -> RadialReport:
    violations: List[str] = []
    n_buses = len(f.buses)
    n_lines = len(f.lines)

    if f.substation not in f.buses:
        violations.append(f"substation '{f.substation}' is not a bus")

    for line in f.lines:
        for endpoint in line.key:
            if endpoint not in f.buses:
                violations.append(f"line {line.name} has dangling endpoint '{endpoint}'")
        if line.from_bus == line.to_bus:
            violations.append(f"line {line.name} is a self loop")
    if violations:
        return RadialReport(ok=False, violations=violations)

    if n_lines != n_buses - 1:
        violations.append(f"|E| ≠ |N|−1: {n_lines} lines for {n_buses} buses")

    parents: Dict[str, List[str]] = {}
    for line in f.lines:
        parents.setdefault(line.to_bus, []).append(line.from_bus)
    if f.substation in parents:
        violations.append(f"substation '{f.substation}' has a parent: {sorted(parents[f.substation], key=bus_sort_key)}")
    for bus, ups in sorted(parents.items(), key=lambda item: bus_sort_key(item[0])):
        if len(ups) > 1:
            violations.append(f"bus '{bus}' has {len(ups)} parents: {sorted(ups, key=bus_sort_key)}")

    graph = _digraph(f)
    if not nx.is_weakly_connected(graph):
        components = sorted(
            (sorted(c, key=bus_sort_key) for c in nx.weakly_connected_components(graph)),
            key=lambda c: bus_sort_key(c[0]),
        )
        violations.append(f"disconnected: {len(components)} components {components}")
    else:
        reached = nx.descendants(graph, f.substation) | {f.substation}
        unreached = sorted(set(f.buses) - reached, key=bus_sort_key)
        if unreached:
            violations.append(f"buses not reachable downstream of the substation: {unreached}")

    return RadialReport(ok=not violations, violations=violations)

def _require_radial(f: Feeder) -> None:
    report = validate_radial(f)
    if not report.ok:
        raise NonRadialError(report.violations)

def topological_order(f: Feeder) -> List[str]:
    """Buses root-first, each after its parent; ties broken by natural bus id order."""
    _require_radial(f)
    return list(nx.lexicographical_topological_sort(_digraph(f), key=bus_sort_key))

def parent_lines(f: Feeder) -> Dict[str, Line]:
    """Map from each non-root bus to the line feeding it."""
    return {line.to_bus: line for line in f.lines}

def children_lines(f: Feeder) -> Dict[str, List[Line]]:
    """Map from each bus to its outgoing lines, children in natural id order."""
    children: Dict[str, List[Line]] = {bus_id: [] for bus_id in f.buses}
    for line in f.lines:
        children[line.from_bus].append(line)
    for lines in children.values():
        lines.sort(key=lambda line: bus_sort_key(line.to_bus))
    return children

def ordered_lines(f: Feeder) -> List[Line]:
    """Lines in the topological order of their receiving bus."""
    feeding = parent_lines(f)
    return [feeding[bus] for bus in topological_order(f) if bus in feeding]

def subtree_buses(f: Feeder, bus: str) -> List[str]:
    graph = _digraph(f)
    return sorted(nx.descendants(graph, bus) | {bus}, key=bus_sort_key)

def subtree_net_load(f: Feeder, bus: str) -> Tuple[float, float]:
    """Lossless aggregate of net load (load minus capacitors) in the subtree rooted at `bus`."""
    p_total = 0.0
    q_total = 0.0
    for member in subtree_buses(f, bus):
        p, q = f.net_load(member)
        p_total += p
        q_total += q
    return p_total, q_total
