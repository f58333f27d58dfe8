"""Side-by-side comparison of the distributed run and the centralised oracle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .config import EngineConfig
from .engine import DispatchSolution, run
from .oracle import CentralSolution, solve_centralized


@dataclass(frozen=True)
class AgentComparison:
    kind: str  # "dg" or "consumer"
    id: object
    distributed: float
    centralized: float

    @property
    def abs_error(self) -> float:
        return abs(self.distributed - self.centralized)

    @property
    def rel_error(self) -> float:
        return self.abs_error / max(abs(self.centralized), 1.0)


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple
    lambda_star: float
    lambda_min: float
    lambda_max: float
    welfare_distributed: float
    welfare_centralized: float
    converged: bool
    iterations: int
    consensus_rounds: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def max_rel_error(self) -> float:
        return max((r.rel_error for r in self.rows), default=0.0)

    @property
    def lambda_error(self) -> float:
        return max(abs(self.lambda_min - self.lambda_star), abs(self.lambda_max - self.lambda_star))

    @property
    def welfare_rel_error(self) -> float:
        return abs(self.welfare_distributed - self.welfare_centralized) / max(
            abs(self.welfare_centralized), 1.0)


def build_report(scenario, dist: DispatchSolution, central: CentralSolution,
                 wall_time: float = 0.0) -> ComparisonReport:
    rows = [AgentComparison("dg", d.id, float(p), float(q))
            for d, p, q in zip(scenario.dgs, dist.dispatch, central.dispatch)]
    rows += [AgentComparison("consumer", c.id, float(p), float(q))
             for c, p, q in zip(scenario.consumers, dist.demand, central.demand)]
    return ComparisonReport(
        rows=tuple(rows),
        lambda_star=central.lambda_star,
        lambda_min=float(np.min(dist.lambda_final)),
        lambda_max=float(np.max(dist.lambda_final)),
        welfare_distributed=dist.welfare,
        welfare_centralized=central.welfare,
        converged=dist.converged,
        iterations=dist.iterations_used,
        consensus_rounds=dist.consensus_rounds,
        wall_time=wall_time,
    )


def compare(scenario, config: Optional[EngineConfig] = None, seed: Optional[int] = None):
    """Run both solvers; returns ``(report, distributed_solution, central_solution)``."""
    t0 = time.perf_counter()
    dist, _ = run(scenario, config, seed=seed)
    wall = time.perf_counter() - t0
    central = solve_centralized(scenario)
    return build_report(scenario, dist, central, wall), dist, central
