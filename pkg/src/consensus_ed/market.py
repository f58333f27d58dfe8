"""Cost, utility and best-response models for DGs and consumers.

Units are fixed throughout the package: power in kW, prices in $/kWh and
costs/utilities in $/h.

The ``*_output``/``*_demand`` helpers operate on raw coefficients and accept
numpy arrays, which is what the oracle and engine use in bulk. The
parameter-object functions below them are the scalar public API.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

# slack for built-in rows whose listed p_max is a rounded omega/(2b)
PMAX_ROUNDING_SLACK = 0.5


class DomainError(ValueError):
    """Raised when a power value lies outside an agent's feasible range."""


@dataclass(frozen=True)
class DgParams:
    """Quadratic-cost distributed generator: C(p) = alpha p^2 + beta p + gamma."""

    id: str
    alpha: float
    beta: float
    p_max: float
    gamma: float = 0.0

    def __post_init__(self):
        for name in ("alpha", "beta", "p_max", "gamma"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"DG {self.id!r}: {name} must be finite")
        if not self.alpha > 0:
            raise ValueError(f"DG {self.id!r}: alpha must be > 0, got {self.alpha}")
        if not self.p_max > 0:
            raise ValueError(f"DG {self.id!r}: p_max must be > 0, got {self.p_max}")
        if self.gamma < 0:
            raise ValueError(f"DG {self.id!r}: gamma must be >= 0, got {self.gamma}")


@dataclass(frozen=True)
class ConsumerParams:
    """Consumer with saturating quadratic utility U(p) = omega p - b p^2.

    ``p_max`` defaults to the saturation point omega/(2b).
    """

    id: str
    omega: float
    b: float
    attached_dg: str
    p_max: Optional[float] = None

    def __post_init__(self):
        for name in ("omega", "b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"consumer {self.id!r}: {name} must be finite")
        if not self.omega > 0:
            raise ValueError(f"consumer {self.id!r}: omega must be > 0, got {self.omega}")
        if not self.b > 0:
            raise ValueError(f"consumer {self.id!r}: b must be > 0, got {self.b}")
        if self.p_max is None:
            object.__setattr__(self, "p_max", self.saturation)
        if not (math.isfinite(self.p_max) and self.p_max > 0):
            raise ValueError(f"consumer {self.id!r}: p_max must be > 0, got {self.p_max}")
        if self.p_max > self.saturation + PMAX_ROUNDING_SLACK:
            raise ValueError(
                f"consumer {self.id!r}: p_max {self.p_max} exceeds the utility "
                f"saturation point {self.saturation:.4f} kW"
            )

    @property
    def saturation(self) -> float:
        return self.omega / (2.0 * self.b)


# -- vectorised kernels on raw coefficients ---------------------------------

def dg_output(lam, alpha, beta, p_max):
    """Clamped profit-maximising output ``clip((lam - beta) / 2 alpha, 0, p_max)``."""
    return np.minimum(np.maximum((lam - beta) / (2.0 * alpha), 0.0), p_max)


def consumer_demand(lam, omega, b, p_max):
    """Clamped surplus-maximising demand ``clip((omega - lam) / 2 b, 0, p_max)``."""
    return np.minimum(np.maximum((omega - lam) / (2.0 * b), 0.0), p_max)


def cost_value(p, alpha, beta, gamma):
    return alpha * p * p + beta * p + gamma


def utility_value(p, omega, b):
    sat = omega / (2.0 * b)
    p = np.minimum(p, sat)
    return omega * p - b * p * p


def marginal_cost(p, alpha, beta):
    return 2.0 * alpha * p + beta


def marginal_utility(p, omega, b):
    return np.maximum(omega - 2.0 * b * p, 0.0)


# -- scalar API -------------------------------------------------------------

def _check_range(p: float, upper: float, who: str) -> None:
    if not math.isfinite(p) or p < 0 or p > upper:
        raise DomainError(f"{who}: power {p} outside [0, {upper}]")


def _check_lambda(lam: float) -> None:
    if not math.isfinite(lam):
        raise DomainError(f"lambda must be finite, got {lam}")


def cost(p: float, dg: DgParams) -> float:
    _check_range(p, dg.p_max, f"DG {dg.id!r}")
    return float(cost_value(p, dg.alpha, dg.beta, dg.gamma))


def utility(p: float, c: ConsumerParams) -> float:
    """Utility of consuming ``p``; constant at omega^2/(4b) past saturation."""
    if not math.isfinite(p) or p < 0:
        raise DomainError(f"consumer {c.id!r}: power must be >= 0, got {p}")
    if p >= c.saturation:
        return c.omega * c.omega / (4.0 * c.b)
    return float(utility_value(p, c.omega, c.b))


def dg_response(lam: float, dg: DgParams) -> float:
    _check_lambda(lam)
    return float(dg_output(lam, dg.alpha, dg.beta, dg.p_max))


def consumer_response(lam: float, c: ConsumerParams) -> float:
    _check_lambda(lam)
    return float(consumer_demand(lam, c.omega, c.b, c.p_max))


def dg_surplus(p: float, lam: float, dg: DgParams) -> float:
    """Profit ``lam * p - C(p)`` of selling ``p`` at price ``lam``."""
    return lam * p - cost(p, dg)


def consumer_surplus(p: float, lam: float, c: ConsumerParams) -> float:
    _check_range(p, c.p_max, f"consumer {c.id!r}")
    return utility(p, c) - lam * p


def social_welfare(dispatch: Sequence[float], demand: Sequence[float], scenario) -> float:
    """Total utility minus total generation cost, in $/h."""
    dgs, consumers = scenario.dgs, scenario.consumers
    if len(dispatch) != len(dgs) or len(demand) != len(consumers):
        raise ValueError(
            f"dimension mismatch: got {len(dispatch)} dispatch / {len(demand)} demand "
            f"values for {len(dgs)} DGs / {len(consumers)} consumers"
        )
    total_u = sum(utility(float(p), c) for p, c in zip(demand, consumers))
    total_c = sum(cost(float(p), g) for p, g in zip(dispatch, dgs))
    return total_u - total_c
