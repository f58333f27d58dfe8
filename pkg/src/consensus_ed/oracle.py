"""Centralised market-clearing benchmark and KKT verification.

The problem is separable, so its KKT system collapses to a single price at
which aggregate demand equals aggregate supply. The excess demand curve is
continuous, piecewise linear and non-increasing in the price, which makes
bisection exact up to floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import (
    consumer_demand,
    cost_value,
    dg_output,
    marginal_cost,
    marginal_utility,
    utility_value,
)

WIDTH_TOL = 1e-12
KKT_TOL = 1e-6


@dataclass(frozen=True)
class CentralSolution:
    lambda_star: float
    dispatch: np.ndarray
    demand: np.ndarray
    excess: float
    welfare: float
    boundary: bool = False  # True when nothing is traded

    @property
    def total_generation(self) -> float:
        return float(self.dispatch.sum())

    @property
    def total_demand(self) -> float:
        return float(self.demand.sum())


def excess_demand(lam: float, scenario) -> float:
    a = scenario.arrays
    d = consumer_demand(lam, a["omega"], a["b"], a["p_load_max"]).sum()
    g = dg_output(lam, a["alpha"], a["beta"], a["p_gen_max"]).sum()
    return float(d - g)


def price_bracket(scenario) -> tuple[float, float]:
    a = scenario.arrays
    lo = min(0.0, float(a["beta"].min()))
    hi = float(np.max(a["beta"] + 2.0 * a["alpha"] * a["p_gen_max"]))
    if scenario.n_consumer:
        hi = max(hi, float(a["omega"].max()))
    return lo, hi


def _bisect(f, lo, hi, tol):
    # invariant: f(lo) is True, f(hi) is False
    while hi - lo > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid):
            lo = mid
        else:
            hi = mid
    return lo, hi


def clearing_price(scenario, bracket=None, tol: float = WIDTH_TOL) -> float:
    """Price at which excess demand crosses zero.

    If excess demand is zero on a whole interval (everyone clamped), the
    midpoint of that interval is returned.
    """
    lo, hi = bracket if bracket is not None else price_bracket(scenario)
    ex = lambda x: excess_demand(x, scenario)
    if ex(lo) < 0:
        raise ValueError(f"bracket lower end {lo} already has negative excess demand")
    if ex(hi) > 0:
        raise ValueError(f"bracket upper end {hi} still has positive excess demand")
    # left end of the zero set: last price with strictly positive excess
    left_lo, left_hi = _bisect(lambda x: ex(x) > 0, lo, hi, tol) if ex(lo) > 0 else (lo, lo)
    # right end: last price with non-negative excess
    right_lo, right_hi = _bisect(lambda x: ex(x) >= 0, lo, hi, tol) if ex(hi) < 0 else (hi, hi)
    return 0.5 * (0.5 * (left_lo + left_hi) + 0.5 * (right_lo + right_hi))


def solve_centralized(scenario) -> CentralSolution:
    a = scenario.arrays
    lam = clearing_price(scenario)
    dispatch = dg_output(lam, a["alpha"], a["beta"], a["p_gen_max"])
    demand = consumer_demand(lam, a["omega"], a["b"], a["p_load_max"])
    welfare = float(utility_value(demand, a["omega"], a["b"]).sum()
                    - cost_value(dispatch, a["alpha"], a["beta"], a["gamma"]).sum())
    return CentralSolution(
        lambda_star=lam,
        dispatch=dispatch,
        demand=demand,
        excess=float(demand.sum() - dispatch.sum()),
        welfare=welfare,
        boundary=bool(demand.sum() == 0.0),
    )


@dataclass(frozen=True)
class KktReport:
    """Recovered multipliers and residuals of the optimality conditions.

    Multipliers are signed so that dual feasibility is a real check: an
    agent clamped at the wrong bound shows up as a negative mu or zeta.
    """

    stationarity_dg: np.ndarray
    stationarity_consumer: np.ndarray
    mu_dg: np.ndarray
    zeta_dg: np.ndarray
    mu_consumer: np.ndarray
    zeta_consumer: np.ndarray
    slackness_dg: np.ndarray
    slackness_consumer: np.ndarray
    balance_residual: float
    dual_feasibility_ok: bool
    primal_feasibility_ok: bool

    @property
    def stationarity_residuals(self) -> np.ndarray:
        return np.concatenate([self.stationarity_dg, self.stationarity_consumer])

    @property
    def complementary_slackness_residuals(self) -> np.ndarray:
        return np.concatenate([self.slackness_dg, self.slackness_consumer])

    @property
    def max_stationarity(self) -> float:
        r = self.stationarity_residuals
        return float(r.max()) if r.size else 0.0

    @property
    def max_slackness(self) -> float:
        r = self.complementary_slackness_residuals
        return float(r.max()) if r.size else 0.0

    def passes(self, tol: float = KKT_TOL) -> bool:
        return (self.max_stationarity < tol and self.max_slackness < tol
                and self.dual_feasibility_ok and self.primal_feasibility_ok)


def _multipliers(p, p_max, slope_at, lam, sign, bound_atol):
    """Recover (mu, zeta) for one side of the market.

    ``slope_at(p)`` is the marginal cost (sign=+1) or marginal utility
    (sign=-1). Stationarity reads sign*slope - sign*lam + mu - zeta = 0.
    """
    at_top = p >= p_max - bound_atol
    at_zero = p <= bound_atol
    mu = np.where(at_top, sign * (lam - slope_at(p_max)), 0.0)
    zeta = np.where(at_zero & ~at_top, sign * (slope_at(np.zeros_like(p)) - lam), 0.0)
    grad = sign * (slope_at(p) - lam)
    stat = np.abs(grad + mu - zeta)
    slack = np.abs(mu * (p - p_max)) + np.abs(zeta * p)
    return mu, zeta, stat, slack


def kkt_residuals(dispatch, demand, lam: float, scenario, *, balance_tol: float = KKT_TOL,
                  bound_atol: float = 1e-9, dual_atol: float = KKT_TOL) -> KktReport:
    """Check a candidate (dispatch, demand, price) against the KKT system."""
    a = scenario.arrays
    dispatch = np.asarray(dispatch, dtype=float)
    demand = np.asarray(demand, dtype=float)
    if dispatch.shape != (scenario.n_dg,) or demand.shape != (scenario.n_consumer,):
        raise ValueError(
            f"dimension mismatch: dispatch {dispatch.shape}, demand {demand.shape} for "
            f"{scenario.n_dg} DGs / {scenario.n_consumer} consumers"
        )
    lam = float(lam)
    mu_g, zeta_g, stat_g, slack_g = _multipliers(
        dispatch, a["p_gen_max"], lambda p: marginal_cost(p, a["alpha"], a["beta"]),
        lam, 1.0, bound_atol)
    # consumer stationarity: -U'(p) + lam + mu - zeta = 0
    mu_c, zeta_c, stat_c, slack_c = _multipliers(
        demand, a["p_load_max"], lambda p: marginal_utility(p, a["omega"], a["b"]),
        lam, -1.0, bound_atol)
    dual_ok = bool(np.all(mu_g >= -dual_atol) and np.all(zeta_g >= -dual_atol)
                   and np.all(mu_c >= -dual_atol) and np.all(zeta_c >= -dual_atol))
    balance = float(demand.sum() - dispatch.sum())
    primal_ok = bool(
        np.all(dispatch >= -bound_atol) and np.all(dispatch <= a["p_gen_max"] + bound_atol)
        and np.all(demand >= -bound_atol) and np.all(demand <= a["p_load_max"] + bound_atol)
        and abs(balance) <= balance_tol
    )
    return KktReport(
        stationarity_dg=stat_g,
        stationarity_consumer=stat_c,
        mu_dg=mu_g,
        zeta_dg=zeta_g,
        mu_consumer=mu_c,
        zeta_consumer=zeta_c,
        slackness_dg=slack_g,
        slackness_consumer=slack_c,
        balance_residual=balance,
        dual_feasibility_ok=dual_ok,
        primal_feasibility_ok=primal_ok,
    )
