from .base import Bus, Feeder, Line
from .exceptions import (
    DanglingEndpointError,
    DuplicateBusError,
    FeederError,
    FeederSchemaError,
    InvalidBaseError,
    NonRadialError,
    PartitionError,
)
from .parser import build_feeder, fixture_path, load_feeder, load_fixture, parse_feeder
from .partition import Area, AreaPartition, merge_partition, partition, partition_by_roots, single_area
from .topology import (
    RadialReport,
    bus_sort_key,
    children_lines,
    ordered_lines,
    parent_lines,
    subtree_buses,
    subtree_net_load,
    topological_order,
    validate_radial,
)

__all__ = [
    'Area',
    'AreaPartition',
    'Bus',
    'DanglingEndpointError',
    'DuplicateBusError',
    'Feeder',
    'FeederError',
    'FeederSchemaError',
    'InvalidBaseError',
    'Line',
    'NonRadialError',
    'PartitionError',
    'RadialReport',
    'build_feeder',
    'bus_sort_key',
    'children_lines',
    'fixture_path',
    'load_feeder',
    'load_fixture',
    'merge_partition',
    'ordered_lines',
    'parent_lines',
    'parse_feeder',
    'partition',
    'partition_by_roots',
    'single_area',
    'subtree_buses',
    'subtree_net_load',
    'topological_order',
    'validate_radial',
]
