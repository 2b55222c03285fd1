"""Capacity estimators for critical bond percolation on Z^d."""

from .lattice import Edge, GraphSpec, Region
from .percolation import Cluster, Configuration, ConnectivityVerdict, connects, edge_state, explore

__version__ = "0.1.0"

__all__ = [
    "Cluster",
    "Configuration",
    "ConnectivityVerdict",
    "Edge",
    "GraphSpec",
    "Region",
    "connects",
    "edge_state",
    "explore",
]
