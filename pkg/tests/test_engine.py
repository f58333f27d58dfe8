import csv
import io
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from consensus_ed.analysis import compute_phi, suggest_gain, trapezoid_contraction_factor
from consensus_ed.config import EngineConfig
from consensus_ed.engine import (
    TRACE_HEADER,
    AgentState,
    DivergenceError,
    check_convergence,
    init_states,
    run,
    step,
)
from consensus_ed.graph import CommGraph, build_weights
from consensus_ed.market import ConsumerParams, DgParams, consumer_response, dg_response
from consensus_ed.oracle import solve_centralized
from consensus_ed.scenario import InitialLambda, Scenario, builtin_case1, generate_random


def interior_scenario(n=6, n_c=12):
    """Complete DG graph, beta=0 and loose limits, so no clamp binds along a run."""
    dgs = [DgParams(f"G{i}", alpha=0.01 * (1 + i / 5), beta=0.0, p_max=1e4) for i in range(n)]
    cons = [ConsumerParams(f"C{j}", omega=20.0 + j, b=0.05 * (1 + j / 10), attached_dg=f"G{j % n}")
            for j in range(n_c)]
    edges = [(f"G{i}", f"G{j}") for i in range(n) for j in range(i + 1, n)]
    return Scenario(dgs=dgs, consumers=cons, edges=edges,
                    initial_lambda=InitialLambda(values=tuple((f"G{i}", 5.0) for i in range(n))))


def decay_ratio(trace):
    total = trace.total_mismatch.sum(axis=1)
    start = np.hypot(total[4], total[5])
    if start <= 1e-9 * abs(total[1]):
        return 0.0
    return float((np.hypot(total[24], total[25]) / start) ** (1 / 20))


def test_initial_prices_at_beta_give_zero_output(case1):
    s = replace(case1, initial_lambda=InitialLambda(values=tuple((d.id, d.beta) for d in case1.dgs)))
    states = init_states(s)
    assert [st_.p_gen for st_ in states] == [0.0] * 10
    for st_, idx in zip(states, s.attached):
        assert st_.p_local_load == pytest.approx(sum(consumer_response(st_.lam, s.consumers[j]) for j in idx),
                                                 abs=1e-9)


def test_seeded_init_reproducible(case1):
    a = [s.lam for s in init_states(case1, seed=5)]
    b = [s.lam for s in init_states(case1, seed=5)]
    c = [s.lam for s in init_states(case1, seed=6)]
    assert a == b and a != c
    assert all(0.0 <= x <= 20.0 for x in a)


def test_fixed_point_is_stationary():
    # two DGs, only the first has a consumer, so local mismatches are nonzero
    s = Scenario(dgs=[DgParams("A", 1.0, 0.0, 100.0), DgParams("B", 1.0, 0.0, 100.0)],
                 consumers=[ConsumerParams("c", 10.0, 1.0, "A")])
    cfg = EngineConfig(k_i=0.25)
    lam = solve_centralized(s).lambda_star
    assert lam == pytest.approx(10 / 3)
    states = []
    for dg in s.dgs:
        p = dg_response(lam, dg)
        dem = tuple(consumer_response(lam, c) for c in s.consumers if c.attached_dg == dg.id)
        load = sum(dem)
        states.append(AgentState(dg.id, lam, p, load, dem, load - p, 0.0, 0.0, lam / 0.25, 0.0, lam))
    new, _ = step(states, build_weights(s.graph()), s, cfg)
    for a, b in zip(states, new):
        assert b.lam == pytest.approx(a.lam, abs=1e-12)
        assert b.p_gen == pytest.approx(a.p_gen, abs=1e-12)
        assert b.local_mismatch == pytest.approx(a.local_mismatch, abs=1e-12)
        assert b.shared_estimate == pytest.approx(0.0, abs=1e-12)
        assert b.total_mismatch_estimate == pytest.approx(0.0, abs=1e-12)


def test_single_pair_converges(single_pair):
    sol, trace = run(single_pair)
    assert sol.converged
    assert sol.lambda_final[0] == pytest.approx(5.0, abs=5e-3)
    assert len(trace) == sol.iterations_used + 1
    tight, _ = run(single_pair, EngineConfig(tolerance=1e-10))
    assert tight.converged
    assert tight.lambda_final[0] == pytest.approx(5.0, abs=1e-8)
    assert tight.dispatch[0] == pytest.approx(2.5, abs=1e-8)
    assert tight.demand[0] == pytest.approx(2.5, abs=1e-8)


def test_zero_consumers():
    s = Scenario(dgs=[DgParams(f"G{i}", 0.01, 2.0 + i, 50.0) for i in range(4)],
                 initial_lambda=InitialLambda(values=tuple((f"G{i}", 15.0) for i in range(4))))
    sol, _ = run(s)
    assert sol.converged
    assert sol.dispatch.tolist() == [0.0] * 4
    assert sol.lambda_final.max() <= 2.0


def test_case1_matches_oracle(case1):
    sol, _ = run(case1)
    central = solve_centralized(case1)
    assert sol.converged
    assert 20 <= sol.iterations_used <= 100
    assert np.abs(sol.lambda_final - 8.175).max() <= 0.01
    assert sol.total_generation == pytest.approx(750.4, abs=0.1)
    np.testing.assert_allclose(sol.dispatch, central.dispatch, rtol=0, atol=1e-2)
    np.testing.assert_allclose(sol.demand, central.demand, rtol=0, atol=1e-2)


@pytest.mark.parametrize("lam0", [0.0, 5.0, 20.0])
def test_case1_any_start(case1, lam0):
    s = replace(case1, initial_lambda=InitialLambda(values=tuple((d.id, lam0) for d in case1.dgs)))
    sol, _ = run(s)
    assert sol.converged
    assert np.abs(sol.lambda_final - solve_centralized(s).lambda_star).max() <= 0.01


def test_converged_invariants(case1):
    sol, trace = run(case1)
    cfg = case1.engine
    for i, dg in enumerate(case1.dgs):
        assert sol.dispatch[i] == dg_response(sol.lambda_final[i], dg)
        for j in case1.attached[i]:
            assert sol.demand[j] == consumer_response(sol.lambda_final[i], case1.consumers[j])
    assert abs(sol.total_generation - sol.total_demand) <= case1.n_dg * cfg.tolerance


def test_lambda_agreement_without_clamps():
    s = interior_scenario()
    sol, _ = run(s)
    assert sol.converged
    spread = sol.lambda_final.max() - sol.lambda_final.min()
    assert spread <= 10 * s.engine.tolerance * sol.k_i * s.engine.dx
    assert np.abs(sol.lambda_final - solve_centralized(s).lambda_star).max() <= 0.01


def test_attachment_does_not_change_dispatch(case1):
    rng = np.random.default_rng(1)
    moved = tuple(replace(c, attached_dg=f"DG{rng.integers(1, 11)}") for c in case1.consumers)
    s = replace(case1, consumers=moved)
    a, _ = run(case1)
    b, _ = run(s)
    assert b.converged
    np.testing.assert_allclose(a.dispatch, b.dispatch, rtol=0, atol=1e-2)
    np.testing.assert_allclose(a.demand, b.demand, rtol=0, atol=1e-2)


def test_step_order_independent(case1):
    w = build_weights(case1.graph())
    states = init_states(case1, seed=3)
    rng = np.random.default_rng(0)
    for _ in range(5):
        ref, r1 = step(states, w, case1, case1.engine)
        perm, r2 = step(states, w, case1, case1.engine, order=rng.permutation(10))
        rev, _ = step(states, w, case1, case1.engine, order=range(9, -1, -1))
        assert ref == perm == rev and r1 == r2
        states = ref


def test_step_rejects_bad_order(case1):
    w = build_weights(case1.graph())
    with pytest.raises(ValueError):
        step(init_states(case1), w, case1, case1.engine, order=[0, 1, 2])


def test_step_shape_mismatch(case1):
    w = build_weights(CommGraph.ring(range(3)))
    with pytest.raises(ValueError):
        step(init_states(case1), w, case1, case1.engine)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10**6))
def test_seeded_runs_bit_identical(seed):
    s = generate_random(5, 9, seed)
    a, ta = run(s, seed=seed)
    b, tb = run(s, seed=seed)
    assert ta.to_csv() == tb.to_csv()
    assert (a.lambda_final == b.lambda_final).all()


def test_iteration_cap_is_not_an_error(case1):
    sol, trace = run(case1, replace(case1.engine, max_iterations=2))
    assert not sol.converged
    assert sol.iterations_used == 2
    assert len(trace) == 3


def test_divergence_raises(case1):
    with pytest.raises(DivergenceError) as exc:
        run(case1, EngineConfig(k_i=1e308))
    assert exc.value.iteration >= 1


def test_check_convergence():
    base = AgentState("g", 1.0, 0.0, 0.0, (), 0.0, 0.0, 0.0, 0.0, 0.0, 1.0)
    assert check_convergence([base], 0.001, 1e-6)
    assert not check_convergence([replace(base, total_mismatch_estimate=0.002)], 0.001, 1e-6)
    assert not check_convergence([replace(base, prev_lam=0.9)], 0.001, 1e-6)


def test_trace_csv_format(single_pair):
    sol, trace = run(single_pair)
    rows = list(csv.reader(io.StringIO(trace.to_csv())))
    assert tuple(rows[0]) == TRACE_HEADER
    body = rows[1:]
    assert len(body) == (sol.iterations_used + 1) * 2
    dg_row, c_row = body[-2], body[-1]
    assert dg_row[1] == "dg" and c_row[1] == "consumer"
    assert c_row[3] == c_row[4] == c_row[6] == ""
    assert float(dg_row[3]) == sol.lambda_final[0]
    assert float(c_row[5]) == sol.demand[0]
    assert all("," not in f for r in body for f in r)


def test_contraction_matches_trapezoid_model():
    s = interior_scenario()
    rep = compute_phi(s)
    for safety in (0.25, 0.5, 1.0, 1.5):
        k = suggest_gain(rep, safety)
        cfg = EngineConfig(k_i=k, tolerance=1e-14, max_iterations=25, consensus_tol=1e-15)
        _, trace = run(s, cfg)
        assert (trace.p_gen[1:] > 0).all() and (trace.demand[1:] > 0).all()
        assert decay_ratio(trace) == pytest.approx(trapezoid_contraction_factor(k, rep), abs=0.05)


@pytest.mark.parametrize("safety", [0.25, 0.5, 1.0, 1.5])
def test_contraction_matches_euler_model(safety):
    s = interior_scenario()
    rep = compute_phi(s)
    k = suggest_gain(rep, safety)
    cfg = EngineConfig(k_i=k, tolerance=1e-14, max_iterations=25, consensus_tol=1e-15, integrator="euler")
    _, trace = run(s, cfg)
    assert decay_ratio(trace) == pytest.approx(abs(1 - safety), abs=0.05)


def test_gain_outside_bound_does_not_settle():
    s = interior_scenario()
    k = 3.0 / compute_phi(s).phi_sum
    sol, trace = run(s, EngineConfig(k_i=k, max_iterations=200))
    assert not sol.converged
    total = np.abs(trace.total_mismatch.sum(axis=1))
    # clamps bound the swing, but it never damps out
    assert total[-20:].min() >= total[1]
