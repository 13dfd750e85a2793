"""Routing on spatial networks whose edge travel times are random.

Main entry points:

* :mod:`stochroute.distributions` -- discretized travel-time distributions
* :mod:`stochroute.spatial_graph` -- networks, generators and TNTP I/O
* :mod:`stochroute.centralized` -- full-knowledge routing tables
* :mod:`stochroute.decentralized` -- routing on the discovered subgraph only
* :mod:`stochroute.experiments` -- configuration-driven experiment runners
"""

__version__ = "0.1.0"

from .centralized import ConvergenceParams, RoutingTable, route_with_table, solve
from .criteria import Criterion
from .decentralized import DecentralizedRouter, KnownSubgraph, local_value_iteration, route_decentralized
from .distributions import DiscreteDistribution, LogNormalParams, TimeGrid, convolve, discretize_lognormal
from .estimation import DistanceModel, Mode
from .records import TrialRecord
from .spatial_graph import SpatialNetwork, generate_kleinberg_variant, load_tntp

__all__ = [
    "ConvergenceParams", "RoutingTable", "route_with_table", "solve", "Criterion",
    "DecentralizedRouter", "KnownSubgraph", "local_value_iteration", "route_decentralized",
    "DiscreteDistribution", "LogNormalParams", "TimeGrid", "convolve", "discretize_lognormal",
    "DistanceModel", "Mode", "TrialRecord", "SpatialNetwork", "generate_kleinberg_variant", "load_tntp",
]
