"""Slot-level simulator of a reconfigurable AWGR-based optical data center network."""
from .engine import SimConfig, SimulationResult, Simulator, run
from .exceptions import ConfigError
from .reconfig import GreedyMutualClustering, ReconfigParams, greedy_cluster
from .topology import ClusterAssignment, TopologyParams
from .traffic import TrafficParams

__all__ = [
    "ClusterAssignment",
    "ConfigError",
    "GreedyMutualClustering",
    "ReconfigParams",
    "SimConfig",
    "SimulationResult",
    "Simulator",
    "TopologyParams",
    "TrafficParams",
    "greedy_cluster",
    "run",
]

__version__ = "0.1.0"
