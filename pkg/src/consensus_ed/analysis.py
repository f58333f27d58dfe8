"""Linearised convergence algebra of the mismatch-integrating controller.

With every agent interior, DG i's generation is ``phi_gen * lam - theta_gen``
and its attached load is ``theta_load - phi_load * lam``, so the system
mismatch is affine in the price with slope ``phi_sum``. An integral gain
``k_i`` then scales the mismatch by ``1 - k_i * phi_sum`` per iteration
(forward-Euler accumulation). Gains in ``(0, 2 / phi_sum)`` are stable.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .oracle import solve_centralized


@dataclass(frozen=True)
class GainReport:
    phi_gen: np.ndarray
    phi_load: np.ndarray
    theta_gen: np.ndarray
    theta_load: np.ndarray
    psi: np.ndarray
    phi_sum: float
    chosen_k_i: float
    clamped_dgs: tuple = ()
    clamped_consumers: tuple = ()
    effective_phi_sum: Optional[float] = None

    @property
    def phi_c(self) -> np.ndarray:
        return self.phi_gen + self.phi_load

    @property
    def theta_c(self) -> np.ndarray:
        return self.theta_gen + self.theta_load

    @property
    def admissible_interval(self) -> tuple[float, float]:
        return (0.0, 2.0 / self.phi_sum)

    @property
    def contraction_factor(self) -> float:
        return contraction_factor(self.chosen_k_i, self)


def compute_phi(scenario, safety: float = 1.0, diagnostics: bool = True) -> GainReport:
    """Slope/intercept aggregates per DG plus the suggested gain.

    ``psi`` is the slope-weighted share of price-responsive load each DG
    carries. With ``diagnostics`` the report also lists the agents that
    sit on a capacity limit at the centralised optimum, and the slope that
    remains once they are removed.
    """
    if scenario.n_dg == 0:
        raise ValueError("no DGs")
    a = scenario.arrays
    phi_gen = 1.0 / (2.0 * a["alpha"])
    theta_gen = a["beta"] / (2.0 * a["alpha"])
    att = scenario.attachment
    slope = 1.0 / (2.0 * a["b"])
    phi_load = np.bincount(att, weights=slope, minlength=scenario.n_dg).astype(float)
    theta_load = np.bincount(att, weights=a["omega"] * slope, minlength=scenario.n_dg).astype(float)
    total_slope = phi_load.sum()
    if total_slope > 0:
        psi = phi_load / total_slope
    else:
        psi = np.full(scenario.n_dg, 1.0 / scenario.n_dg)
    phi_sum = float(phi_gen.sum() + total_slope)
    report = GainReport(
        phi_gen=phi_gen, phi_load=phi_load, theta_gen=theta_gen, theta_load=theta_load,
        psi=psi, phi_sum=phi_sum, chosen_k_i=_gain(phi_sum, safety),
    )
    if not diagnostics:
        return report
    sol = solve_centralized(scenario)
    gen_clamped = (sol.dispatch <= 0.0) | (sol.dispatch >= a["p_gen_max"])
    load_clamped = (sol.demand <= 0.0) | (sol.demand >= a["p_load_max"])
    eff = float(phi_gen[~gen_clamped].sum() + slope[~load_clamped].sum())
    ids = scenario.dg_ids
    cids = [c.id for c in scenario.consumers]
    return GainReport(
        **{**report.__dict__,
           "clamped_dgs": tuple(ids[i] for i in np.flatnonzero(gen_clamped)),
           "clamped_consumers": tuple(cids[j] for j in np.flatnonzero(load_clamped)),
           "effective_phi_sum": eff},
    )


def _gain(phi_sum: float, safety: float) -> float:
    if not 0.0 < safety < 2.0:
        raise ValueError(f"safety must lie in (0, 2), got {safety}")
    return safety / phi_sum


def suggest_gain(scenario_or_report, safety: float = 1.0) -> float:
    """Integral gain ``safety / phi_sum``; safety 1 is deadbeat in the linear model."""
    if isinstance(scenario_or_report, GainReport):
        return _gain(scenario_or_report.phi_sum, safety)
    return _gain(compute_phi(scenario_or_report, diagnostics=False).phi_sum, safety)


def contraction_factor(k_i: float, report: GainReport, dx: float = 1.0) -> float:
    """``|1 - k_i * dx * phi_sum|``: per-iteration mismatch ratio, Euler accumulation."""
    return abs(1.0 - k_i * dx * report.phi_sum)


def trapezoid_contraction_factor(k_i: float, report: GainReport, dx: float = 1.0) -> float:
    """Spectral radius of the mismatch recursion under trapezoid accumulation.

    With ``c = k_i * dx * phi_sum`` the total mismatch obeys
    ``m[k+2] = (1 - c/2) m[k+1] - (c/2) m[k]``. The stable range is the
    same (0, 2) as for Euler, but the decay ratio differs except at c = 1/2.
    """
    c = k_i * dx * report.phi_sum
    p = 1.0 - 0.5 * c
    disc = cmath.sqrt(p * p - 2.0 * c)
    return max(abs(0.5 * (p + disc)), abs(0.5 * (p - disc)))
