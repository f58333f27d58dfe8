"""Command-line front end.

Exit codes: 0 success, 1 error (unreadable/invalid input, divergence, failed
self-check), 2 the distributed run hit its iteration cap.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace

from . import kernels
from .analysis import compute_phi, contraction_factor, trapezoid_contraction_factor
from .compare import compare
from .config import AUTO
from .engine import DivergenceError, run
from .oracle import kkt_residuals, solve_centralized
from .scenario import ScenarioError, generate_random, resolve_scenario, save_scenario

EXIT_OK, EXIT_ERROR, EXIT_NOT_CONVERGED = 0, 1, 2


def _k_i(text: str):
    if text == AUTO:
        return AUTO
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None


def _engine_config(scenario, args):
    cfg = scenario.engine
    over = {}
    for name in ("k_i", "k_p", "tolerance", "max_iterations"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = v
    return replace(cfg, **over) if over else cfg


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _emit_json(obj) -> None:
    print(json.dumps(obj, sort_keys=False))


def cmd_run(args) -> int:
    scenario = resolve_scenario(args.scenario)
    config = _engine_config(scenario, args)
    sol, trace = run(scenario, config, seed=args.seed)
    if args.out:
        trace.save_csv(args.out)
    summary = {
        "converged": sol.converged,
        "iterations": sol.iterations_used,
        "lambda_min": float(sol.lambda_final.min()),
        "lambda_max": float(sol.lambda_final.max()),
        "total_generation": sol.total_generation,
        "total_demand": sol.total_demand,
        "welfare": sol.welfare,
        "k_i": sol.k_i,
        "consensus_rounds": sol.consensus_rounds,
    }
    if args.format == "json-lines":
        _emit_json(summary)
        for d, lam, p in zip(scenario.dgs, sol.lambda_final, sol.dispatch):
            _emit_json({"kind": "dg", "id": d.id, "lambda": float(lam), "power": float(p)})
        for c, p in zip(scenario.consumers, sol.demand):
            _emit_json({"kind": "consumer", "id": c.id, "power": float(p)})
    elif args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("agent_kind", "agent_id", "lambda", "power"))
        for d, lam, p in zip(scenario.dgs, sol.lambda_final, sol.dispatch):
            w.writerow(("dg", d.id, repr(float(lam)), repr(float(p))))
        for c, p in zip(scenario.consumers, sol.demand):
            w.writerow(("consumer", c.id, "", repr(float(p))))
    else:
        print(f"converged        {str(sol.converged).lower()}")
        print(f"iterations       {sol.iterations_used}")
        print(f"lambda range     {sol.lambda_final.min():.6f} .. {sol.lambda_final.max():.6f} $/kWh")
        print(f"total generation {sol.total_generation:.4f} kW")
        print(f"total demand     {sol.total_demand:.4f} kW")
        print(f"welfare          {sol.welfare:.4f} $/h")
        print(f"k_i              {_fmt(sol.k_i)}")
        print(f"consensus rounds {sol.consensus_rounds}")
    return EXIT_OK if sol.converged else EXIT_NOT_CONVERGED


def cmd_solve(args) -> int:
    scenario = resolve_scenario(args.scenario)
    sol = solve_centralized(scenario)
    kkt = kkt_residuals(sol.dispatch, sol.demand, sol.lambda_star, scenario)
    ok = kkt.passes()
    max_res = max(kkt.max_stationarity, kkt.max_slackness)
    if args.format == "json-lines":
        _emit_json({"lambda_star": sol.lambda_star, "total_generation": sol.total_generation,
                    "total_demand": sol.total_demand, "welfare": sol.welfare,
                    "boundary": sol.boundary, "kkt_pass": ok, "kkt_max_residual": max_res})
        for d, p in zip(scenario.dgs, sol.dispatch):
            _emit_json({"kind": "dg", "id": d.id, "power": float(p)})
        for c, p in zip(scenario.consumers, sol.demand):
            _emit_json({"kind": "consumer", "id": c.id, "power": float(p)})
    elif args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("agent_kind", "agent_id", "power"))
        for d, p in zip(scenario.dgs, sol.dispatch):
            w.writerow(("dg", d.id, repr(float(p))))
        for c, p in zip(scenario.consumers, sol.demand):
            w.writerow(("consumer", c.id, repr(float(p))))
    else:
        print(f"lambda*          {sol.lambda_star:.6f} $/kWh")
        print(f"total generation {sol.total_generation:.4f} kW")
        print(f"total demand     {sol.total_demand:.4f} kW")
        print(f"welfare          {sol.welfare:.4f} $/h")
        if sol.boundary:
            print("note             no demand clears; boundary solution")
        print(f"KKT              {'pass' if ok else 'FAIL'} (max residual {max_res:.3g})")
    if not ok:
        print("error: centralised solution failed its KKT self-check", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


def cmd_compare(args) -> int:
    scenario = resolve_scenario(args.scenario)
    config = _engine_config(scenario, args)
    report, _, _ = compare(scenario, config, seed=args.seed)
    if args.format == "json-lines":
        _emit_json({"lambda_star": report.lambda_star, "lambda_min": report.lambda_min,
                    "lambda_max": report.lambda_max, "max_rel_error": report.max_rel_error,
                    "welfare_distributed": report.welfare_distributed,
                    "welfare_centralized": report.welfare_centralized,
                    "converged": report.converged, "iterations": report.iterations})
        for r in report.rows:
            _emit_json({"kind": r.kind, "id": r.id, "distributed": r.distributed,
                        "centralized": r.centralized, "rel_error": r.rel_error})
    elif args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("agent_kind", "agent_id", "distributed", "centralized", "abs_error", "rel_error"))
        for r in report.rows:
            w.writerow((r.kind, r.id, repr(r.distributed), repr(r.centralized),
                        repr(r.abs_error), repr(r.rel_error)))
    else:
        print(f"{'agent':<10}{'distributed':>14}{'centralized':>14}{'rel. error':>12}")
        for r in report.rows:
            print(f"{str(r.id):<10}{r.distributed:>14.4f}{r.centralized:>14.4f}{r.rel_error:>12.2e}")
        print(f"{'total gen':<10}{sum(r.distributed for r in report.rows if r.kind == 'dg'):>14.4f}"
              f"{sum(r.centralized for r in report.rows if r.kind == 'dg'):>14.4f}")
        print(f"{'total load':<10}{sum(r.distributed for r in report.rows if r.kind == 'consumer'):>14.4f}"
              f"{sum(r.centralized for r in report.rows if r.kind == 'consumer'):>14.4f}")
        print()
        print(f"lambda distributed {report.lambda_min:.6f} .. {report.lambda_max:.6f}, "
              f"centralized {report.lambda_star:.6f} $/kWh")
        print(f"welfare distributed {report.welfare_distributed:.4f}, "
              f"centralized {report.welfare_centralized:.4f} $/h")
        print(f"max relative error {report.max_rel_error:.3e}")
        print(f"converged {str(report.converged).lower()} after {report.iterations} iterations "
              f"({report.consensus_rounds} averaging rounds)")
        if args.timing:
            print(f"wall time {report.wall_time:.3f} s")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_analyze(args) -> int:
    scenario = resolve_scenario(args.scenario)
    rep = compute_phi(scenario)
    k = rep.chosen_k_i
    if args.format == "json-lines":
        _emit_json({"phi_sum": rep.phi_sum, "admissible_interval": list(rep.admissible_interval),
                    "suggested_k_i": k, "contraction_factor": contraction_factor(k, rep),
                    "trapezoid_contraction_factor": trapezoid_contraction_factor(k, rep),
                    "effective_phi_sum": rep.effective_phi_sum,
                    "clamped_dgs": list(rep.clamped_dgs),
                    "clamped_consumers": list(rep.clamped_consumers)})
        for i, d in enumerate(scenario.dgs):
            _emit_json({"id": d.id, "phi_gen": float(rep.phi_gen[i]), "phi_load": float(rep.phi_load[i]),
                        "phi_c": float(rep.phi_c[i]), "theta_c": float(rep.theta_c[i]),
                        "psi": float(rep.psi[i])})
        return EXIT_OK
    if args.format == "csv":
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("dg_id", "phi_gen", "phi_load", "phi_c", "theta_c", "psi"))
        for i, d in enumerate(scenario.dgs):
            w.writerow((d.id, *(repr(float(v[i])) for v in
                                (rep.phi_gen, rep.phi_load, rep.phi_c, rep.theta_c, rep.psi))))
        return EXIT_OK
    print(f"{'dg':<8}{'phi_gen':>10}{'phi_load':>10}{'phi_c':>10}{'theta_c':>11}{'psi':>8}")
    for i, d in enumerate(scenario.dgs):
        print(f"{str(d.id):<8}{rep.phi_gen[i]:>10.3f}{rep.phi_load[i]:>10.3f}{rep.phi_c[i]:>10.3f}"
              f"{rep.theta_c[i]:>11.3f}{rep.psi[i]:>8.4f}")
    lo, hi = rep.admissible_interval
    print()
    print(f"phi_sum              {rep.phi_sum:.6g}")
    print(f"admissible k_i       ({lo:g}, {hi:.6g})")
    print(f"suggested k_i        {k:.6g}")
    print(f"contraction (euler)  {contraction_factor(k, rep):.4f}")
    print(f"contraction (trapz)  {trapezoid_contraction_factor(k, rep):.4f}")
    print(f"effective phi_sum    {rep.effective_phi_sum:.6g} (agents off their limits at the optimum)")
    print(f"clamped DGs          {', '.join(map(str, rep.clamped_dgs)) or '-'}")
    print(f"clamped consumers    {', '.join(map(str, rep.clamped_consumers)) or '-'}")
    return EXIT_OK


def cmd_generate(args) -> int:
    scenario = generate_random(args.n_dg, args.n_consumer, args.seed)
    save_scenario(scenario, args.out)
    print(f"wrote {args.out}: {scenario.n_dg} DGs, {scenario.n_consumer} consumers")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="consensus-ed", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version",
                   version=f"%(prog)s 0.1.0 (kernel backend: {kernels.BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp, engine=True):
        sp.add_argument("--scenario", required=True,
                        help="scenario file, or a built-in name (case1)")
        sp.add_argument("--format", choices=("text", "csv", "json-lines"), default="text")
        if engine:
            sp.add_argument("--k-i", dest="k_i", type=_k_i, help="integral gain or 'auto'")
            sp.add_argument("--k-p", dest="k_p", type=float, help="proportional gain")
            sp.add_argument("--tolerance", type=float, help="mismatch tolerance in kW")
            sp.add_argument("--max-iterations", dest="max_iterations", type=int)
            sp.add_argument("--seed", type=int, help="seed for random initial prices")

    sp = sub.add_parser("run", help="distributed solve; writes the iteration trace")
    scenario_args(sp)
    sp.add_argument("--out", help="trace CSV path")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("solve", help="centralised solve with KKT self-check")
    scenario_args(sp, engine=False)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("compare", help="distributed vs centralised, per agent")
    scenario_args(sp)
    sp.add_argument("--timing", action="store_true", help="also print wall time")
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("analyze", help="gain analysis")
    scenario_args(sp, engine=False)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("generate", help="write a random scenario document")
    sp.add_argument("--n-dg", dest="n_dg", type=int, required=True)
    sp.add_argument("--n-consumer", dest="n_consumer", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, DivergenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
