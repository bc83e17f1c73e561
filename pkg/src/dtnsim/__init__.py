"""Deterministic store-carry-forward network simulator.

Nodes walk shortest paths over a road map, exchange single-copy messages
over short-range contacts, and report delivery statistics per routing
policy. Runs with the same configuration and seed are byte-identical.
"""

from .config import GroupSpec, ScenarioConfig, TrafficSpec, load_config, parse_config
from .engine import World, transfer_duration
from .mapgraph import RoadGraph, generate_grid_map, parse_map, shortest_path
from .mobility import ScriptedPath
from .reports import RunStats, compute_stats
from .routing import POLICIES, make_policy

__version__ = "0.1.0"

__all__ = [
    "GroupSpec",
    "POLICIES",
    "RoadGraph",
    "RunStats",
    "ScenarioConfig",
    "ScriptedPath",
    "TrafficSpec",
    "World",
    "compute_stats",
    "generate_grid_map",
    "load_config",
    "make_policy",
    "parse_config",
    "parse_map",
    "shortest_path",
    "transfer_duration",
    "__version__",
]
