"""Synchronous-round simulation of the distributed economic dispatch.

Only DGs talk to each other, and the only thing they exchange is an
estimate of the average system power mismatch (demand minus generation).
One iteration of agent ``i`` is:

1. average the shared estimates with its neighbours until the network
   agrees; ``n`` times the agreed value is the agent's view of the total
   mismatch ``T_i``;
2. integrate ``T_i`` into the incremental cost ``lam_i`` (trapezoid rule,
   plus an optional proportional term);
3. set its output to the clamped profit-maximising level at ``lam_i``;
4. send ``lam_i`` to its attached consumers, who reply with their clamped
   surplus-maximising demand;
5. correct its shared estimate by the change in its own local mismatch, so
   the network-wide sum of estimates always equals the true total mismatch.

Prices are never exchanged between DGs. Because every DG integrates the same
agreed total from an empty accumulator, all prices follow one trajectory
regardless of the starting prices.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .analysis import suggest_gain
from .config import AUTO, EngineConfig
from .graph import WeightMatrix, build_weights
from .market import consumer_response, dg_response, social_welfare

TRACE_HEADER = ("iteration", "agent_kind", "agent_id", "lambda", "delta_p_total",
                "p_gen_or_demand", "p_local_load")


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, agent, detail: str):
        self.iteration = iteration
        self.agent = agent
        super().__init__(f"iteration {iteration}, agent {agent!r}: {detail}")


@dataclass(frozen=True)
class AgentState:
    dg_id: object
    lam: float
    p_gen: float
    p_local_load: float
    demands: tuple  # attached consumers, ascending consumer index
    local_mismatch: float  # attached demand minus own generation
    shared_estimate: float  # exchanged with neighbours; tracks the mean mismatch
    total_mismatch_estimate: float
    integral_acc: float
    prev_total_mismatch: float
    prev_lam: float


@dataclass(frozen=True)
class DispatchSolution:
    converged: bool
    iterations_used: int
    lambda_final: np.ndarray
    dispatch: np.ndarray
    demand: np.ndarray
    total_generation: float
    total_demand: float
    welfare: float
    k_i: float
    consensus_rounds: int


class IterationTrace:
    """Per-iteration snapshots, row 0 being the initial state."""

    def __init__(self, dg_ids: Sequence, consumer_ids: Sequence):
        self.dg_ids = list(dg_ids)
        self.consumer_ids = list(consumer_ids)
        self._rows = []

    def record(self, states: Sequence[AgentState], scenario) -> None:
        demand = np.zeros(scenario.n_consumer)
        for s, idx in zip(states, scenario.attached):
            demand[idx] = s.demands
        self._rows.append((
            np.array([s.lam for s in states]),
            np.array([s.total_mismatch_estimate for s in states]),
            np.array([s.p_gen for s in states]),
            np.array([s.p_local_load for s in states]),
            demand,
        ))

    def __len__(self):
        return len(self._rows)

    def _col(self, k):
        return np.array([r[k] for r in self._rows])

    @property
    def lam(self) -> np.ndarray:
        return self._col(0)

    @property
    def total_mismatch(self) -> np.ndarray:
        return self._col(1)

    @property
    def p_gen(self) -> np.ndarray:
        return self._col(2)

    @property
    def p_local_load(self) -> np.ndarray:
        return self._col(3)

    @property
    def demand(self) -> np.ndarray:
        return self._col(4)

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for k, (lam, tot, gen, load, dem) in enumerate(self._rows):
            for i, dg in enumerate(self.dg_ids):
                w.writerow((k, "dg", dg, repr(float(lam[i])), repr(float(tot[i])),
                            repr(float(gen[i])), repr(float(load[i]))))
            for j, c in enumerate(self.consumer_ids):
                w.writerow((k, "consumer", c, "", "", repr(float(dem[j])), ""))

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.write_csv(fh)


def resolve_gain(scenario, config: EngineConfig) -> float:
    if config.k_i == AUTO:
        return suggest_gain(scenario, config.safety)
    return float(config.k_i)


def _respond(lam: float, dg, consumers):
    p_gen = dg_response(lam, dg)
    demands = tuple(consumer_response(lam, c) for c in consumers)
    p_load = 0.0
    for q in demands:
        p_load += q
    return p_gen, demands, p_load


def init_states(scenario, seed: Optional[int] = None) -> list[AgentState]:
    """Initial operating point at the scenario's starting prices.

    Each DG's shared estimate starts at its own local mismatch, and its
    integrator and mismatch history start empty.
    """
    lam0 = scenario.initial_lambdas(seed)
    states = []
    for i, dg in enumerate(scenario.dgs):
        consumers = [scenario.consumers[j] for j in scenario.attached[i]]
        lam = float(lam0[i])
        p_gen, demands, p_load = _respond(lam, dg, consumers)
        d = p_load - p_gen
        states.append(AgentState(
            dg_id=dg.id, lam=lam, p_gen=p_gen, p_local_load=p_load, demands=demands,
            local_mismatch=d, shared_estimate=d, total_mismatch_estimate=0.0,
            integral_acc=0.0, prev_total_mismatch=0.0, prev_lam=lam,
        ))
    return states


def consensus_tolerance(config: EngineConfig, n_dg: int) -> float:
    if config.consensus_tol is not None:
        return config.consensus_tol
    return config.tolerance / (10.0 * n_dg)


def step(states: Sequence[AgentState], weights: WeightMatrix, scenario, config: EngineConfig,
         *, iteration: int = 0, k_i: Optional[float] = None,
         order: Optional[Sequence[int]] = None) -> tuple[list[AgentState], int]:
    """Advance every DG by one synchronous iteration.

    All reads come from the round-``k`` snapshot, so ``order`` (the sequence
    in which agents are evaluated) cannot affect the result. Returns the new
    states and the number of neighbour-averaging rounds used.
    """
    n = len(states)
    if n != scenario.n_dg or weights.n != n:
        raise ValueError("states, weights and scenario disagree on the number of DGs")
    k = resolve_gain(scenario, config) if k_i is None else k_i
    est = np.array([s.shared_estimate for s in states])
    agreed, rounds = kernels.average_rounds(
        weights.indptr, weights.indices, weights.data, est,
        consensus_tolerance(config, n), config.max_consensus_rounds,
    )
    trapezoid = config.integrator == "trapezoid"
    dx, k_p = config.dx, config.k_p
    out: list = [None] * n
    for i in (range(n) if order is None else order):
        s = states[i]
        dg = scenario.dgs[i]
        total = n * float(agreed[i])
        if trapezoid:
            acc = s.integral_acc + (total + s.total_mismatch_estimate) * dx / 2.0
        else:
            acc = s.integral_acc + total * dx
        lam = k * acc + k_p * total
        if not (math.isfinite(total) and math.isfinite(lam)):
            raise DivergenceError(iteration, dg.id, f"non-finite state (lambda={lam}, mismatch={total})")
        consumers = [scenario.consumers[j] for j in scenario.attached[i]]
        p_gen, demands, p_load = _respond(lam, dg, consumers)
        d = p_load - p_gen
        out[i] = AgentState(
            dg_id=dg.id, lam=lam, p_gen=p_gen, p_local_load=p_load, demands=demands,
            local_mismatch=d,
            shared_estimate=float(agreed[i]) + (d - s.local_mismatch),
            total_mismatch_estimate=total, integral_acc=acc,
            prev_total_mismatch=s.total_mismatch_estimate, prev_lam=s.lam,
        )
    if any(s is None for s in out):
        raise ValueError("order must be a permutation of the agent indices")
    return out, rounds


def check_convergence(states: Sequence[AgentState], tolerance: float,
                      lambda_deadband: float) -> bool:
    """Mismatch estimates inside the tolerance and prices no longer moving."""
    return (max(abs(s.total_mismatch_estimate) for s in states) < tolerance
            and max(abs(s.lam - s.prev_lam) for s in states) < lambda_deadband)


def run(scenario, config: Optional[EngineConfig] = None, *,
        weights: Optional[WeightMatrix] = None, seed: Optional[int] = None,
        ) -> tuple[DispatchSolution, IterationTrace]:
    """Iterate until convergence or ``max_iterations``.

    Hitting the iteration cap is reported through ``converged=False``; only
    non-finite states raise (:class:`DivergenceError`).
    """
    config = config or scenario.engine
    k = resolve_gain(scenario, config)
    config = replace(config, k_i=k)
    if weights is None:
        weights = build_weights(scenario.graph())
    deadband = config.tolerance * k * config.dx
    states = init_states(scenario, seed)
    trace = IterationTrace(scenario.dg_ids, [c.id for c in scenario.consumers])
    trace.record(states, scenario)
    converged = False
    total_rounds = 0
    it = 0
    for it in range(1, config.max_iterations + 1):
        states, rounds = step(states, weights, scenario, config, iteration=it, k_i=k)
        total_rounds += rounds
        trace.record(states, scenario)
        if check_convergence(states, config.tolerance, deadband):
            converged = True
            break
    dispatch = np.array([s.p_gen for s in states])
    demand = trace.demand[-1]
    return DispatchSolution(
        converged=converged,
        iterations_used=it,
        lambda_final=np.array([s.lam for s in states]),
        dispatch=dispatch,
        demand=demand,
        total_generation=float(dispatch.sum()),
        total_demand=float(demand.sum()),
        welfare=social_welfare(dispatch, demand, scenario),
        k_i=k,
        consensus_rounds=total_rounds,
    ), trace
