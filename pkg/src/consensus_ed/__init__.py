"""Consensus-based distributed economic dispatch.

DGs agree on the system power mismatch by neighbour averaging, integrate it
into a local incremental cost, and clear the market without a central
coordinator. A centralised bisection oracle checks the result.
"""

from .config import EngineConfig
from .engine import DispatchSolution, IterationTrace, run
from .kernels import BACKEND
from .market import ConsumerParams, DgParams
from .oracle import kkt_residuals, solve_centralized
from .scenario import Scenario, builtin_case1, generate_random, load_scenario, save_scenario

__all__ = [
    "BACKEND", "ConsumerParams", "DgParams", "DispatchSolution", "EngineConfig",
    "IterationTrace", "Scenario", "builtin_case1", "generate_random", "kkt_residuals",
    "load_scenario", "run", "save_scenario", "solve_centralized",
]
