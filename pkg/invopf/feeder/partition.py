import logging
from typing import Dict, List, Mapping, Optional, Set, Tuple

import networkx as nx
from pydantic import BaseModel

from .base import Feeder
from .exceptions import PartitionError
from .topology import bus_sort_key, parent_lines, topological_order

logger = logging.getLogger(__name__)

class Area(BaseModel):
    """
    One area of a partitioned feeder.

    The area root is the shared bus with its upstream area. It is stored once,
    here, and the upstream area refers to it through `upstream_line`; the
    upstream sub-problem treats it as a fixed load node while this area pins
    its voltage. Lines are owned by the area of their sending bus, so the
    boundary line feeding this root belongs to the upstream area.
    """
    id: str
    buses: Tuple[str, ...]
    lines: Tuple[str, ...]
    root: str
    upstream: Optional[str] = None
    upstream_line: Optional[str] = None
    downstream: Dict[str, str] = {}
    boundary_buses: Dict[str, str] = {}

    class Config:
        frozen = True

class AreaPartition(BaseModel):
    areas: List[Area]

    class Config:
        frozen = True

    def area(self, area_id: str) -> Area:
        for area in self.areas:
            if area.id == area_id:
                return area
        raise KeyError(area_id)

    @property
    def root_area(self) -> Area:
        return self.areas[0]

    @property
    def boundary_edges(self) -> List[Tuple[str, str, str]]:
        """(line name, upstream area, downstream area) for every shared boundary."""
        return [
            (area.upstream_line, area.upstream, area.id)
            for area in self.areas
            if area.upstream is not None and area.upstream_line is not None
        ]

    def area_of(self) -> Dict[str, str]:
        return {bus: area.id for area in self.areas for bus in area.buses}

def partition(f: Feeder, assignment: Mapping[str, str]) -> AreaPartition:
    order = topological_order(f)
    missing = [bus for bus in order if bus not in assignment]
    if missing:
        raise PartitionError(f"assignment misses buses {missing}")
    unknown = sorted(set(assignment) - set(f.buses), key=bus_sort_key)
    if unknown:
        raise PartitionError(f"assignment names unknown buses {unknown}")

    feeding = parent_lines(f)
    position = {bus: index for index, bus in enumerate(order)}
    members: Dict[str, List[str]] = {}
    for bus in order:
        members.setdefault(str(assignment[bus]), []).append(bus)

    roots: Dict[str, str] = {}
    for area_id, buses in members.items():
        area_roots = [
            bus for bus in buses
            if bus == f.substation or assignment[feeding[bus].from_bus] != assignment[bus]
        ]
        if len(area_roots) != 1:
            raise PartitionError(
                f"area '{area_id}' is not connected: it has {len(area_roots)} entry buses {area_roots}"
            )
        roots[area_id] = area_roots[0]

    quotient = nx.DiGraph()
    quotient.add_nodes_from(members)
    for area_id, root in roots.items():
        if root != f.substation:
            quotient.add_edge(str(assignment[feeding[root].from_bus]), area_id)
    if not nx.is_tree(quotient):
        raise PartitionError("quotient graph over areas is not a tree")

    areas: List[Area] = []
    area_order = list(nx.lexicographical_topological_sort(quotient, key=bus_sort_key))
    for area_id in area_order:
        bus_set = set(members[area_id])
        owned = [line for line in f.lines if line.from_bus in bus_set]
        owned.sort(key=lambda line: position[line.to_bus])
        root = roots[area_id]
        upstream_line = feeding.get(root) if root != f.substation else None
        areas.append(Area(
            id=area_id,
            buses=tuple(members[area_id]),
            lines=tuple(line.name for line in owned),
            root=root,
            upstream=str(assignment[upstream_line.from_bus]) if upstream_line else None,
            upstream_line=upstream_line.name if upstream_line else None,
            downstream={
                line.name: str(assignment[line.to_bus])
                for line in owned
                if line.to_bus not in bus_set
            },
            boundary_buses={
                line.name: line.to_bus
                for line in owned
                if line.to_bus not in bus_set
            },
        ))

    logger.debug(f"Partitioned feeder '{f.name}' into {len(areas)} areas")
    return AreaPartition(areas=areas)

def partition_by_roots(f: Feeder, roots: Mapping[str, str]) -> AreaPartition:
    """
    Partition by area root buses: every bus joins the area of its nearest
    ancestor listed in `roots` (area id -> root bus). The substation must be
    one of the roots.
    """
    by_root = {str(bus): area_id for area_id, bus in roots.items()}
    if f.substation not in by_root:
        raise PartitionError(f"substation '{f.substation}' must be an area root")
    unknown = sorted(set(by_root) - set(f.buses), key=bus_sort_key)
    if unknown:
        raise PartitionError(f"area roots {unknown} are not buses")

    feeding = parent_lines(f)
    assignment: Dict[str, str] = {}
    for bus in topological_order(f):
        if bus in by_root:
            assignment[bus] = by_root[bus]
        else:
            assignment[bus] = assignment[feeding[bus].from_bus]
    return partition(f, assignment)

def single_area(f: Feeder, area_id: str = "A1") -> AreaPartition:
    return partition(f, {bus: area_id for bus in f.buses})

def merge_partition(p: AreaPartition) -> Tuple[Set[str], Set[str]]:
    """Union of area bus and line sets; inverse of `partition`."""
    buses: Set[str] = set()
    lines: Set[str] = set()
    for area in p.areas:
        buses.update(area.buses)
        lines.update(area.lines)
    return buses, lines
