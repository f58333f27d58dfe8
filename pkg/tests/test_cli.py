import json
import re

import pytest

from consensus_ed.cli import main
from consensus_ed.scenario import generate_random, load_scenario


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_run_case1(capsys, tmp_path):
    trace = tmp_path / "trace.csv"
    code, out, _ = _run(capsys, "run", "--scenario", "case1", "--k-i", "auto", "--out", str(trace))
    assert code == 0
    lo, hi = map(float, re.search(r"lambda range\s+(\S+) \.\. (\S+)", out).groups())
    assert abs(lo - 8.175) <= 0.01 and abs(hi - 8.175) <= 0.01
    assert trace.read_text().startswith("iteration,agent_kind,agent_id,lambda,")


def test_run_unreadable_path(capsys, tmp_path):
    code, _, err = _run(capsys, "run", "--scenario", str(tmp_path / "missing.yaml"))
    assert code == 1
    assert err.startswith("error:")


def test_run_iteration_cap(capsys):
    code, out, _ = _run(capsys, "run", "--scenario", "case1", "--max-iterations", "2")
    assert code == 2
    assert "converged        false" in out


def test_run_bad_gain(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--scenario", "case1", "--k-i", "fast"])
    code, _, _ = _run(capsys, "run", "--scenario", "case1", "--k-i", "-1")
    assert code == 1


def test_run_formats(capsys):
    code, out, _ = _run(capsys, "run", "--scenario", "case1", "--format", "json-lines")
    lines = [json.loads(x) for x in out.splitlines()]
    assert code == 0 and lines[0]["converged"] is True and len(lines) == 30
    code, out, _ = _run(capsys, "run", "--scenario", "case1", "--format", "csv")
    assert out.splitlines()[0] == "agent_kind,agent_id,lambda,power"
    assert len(out.splitlines()) == 30


def test_solve_case1(capsys):
    code, out, _ = _run(capsys, "solve", "--scenario", "case1", "--format", "json-lines")
    head = json.loads(out.splitlines()[0])
    assert code == 0
    assert abs(head["lambda_star"] - 8.175) <= 0.005
    assert abs(head["total_generation"] - 750.4) <= 0.1
    assert head["kkt_pass"] and head["kkt_max_residual"] < 1e-6
    code, out, _ = _run(capsys, "solve", "--scenario", "case1")
    assert "KKT              pass" in out


def test_solve_no_consumers(capsys, tmp_path):
    path = tmp_path / "s.yaml"
    path.write_text("dgs:\n- {id: G, alpha: 1.0, beta: 2.0, p_max: 5.0}\n")
    code, out, _ = _run(capsys, "solve", "--scenario", str(path), "--format", "json-lines")
    head = json.loads(out.splitlines()[0])
    assert code == 0
    assert head["total_generation"] == 0.0 and head["total_demand"] == 0.0


def test_compare_deterministic(capsys):
    first = _run(capsys, "compare", "--scenario", "case1", "--format", "json-lines")
    second = _run(capsys, "compare", "--scenario", "case1", "--format", "json-lines")
    assert first == second
    head = json.loads(first[1].splitlines()[0])
    assert first[0] == 0 and head["max_rel_error"] <= 1e-4


def test_compare_generated(capsys, tmp_path):
    path = tmp_path / "g.yaml"
    assert main(["generate", "--n-dg", "20", "--n-consumer", "40", "--seed", "3", "--out", str(path)]) == 0
    capsys.readouterr()
    code, out, _ = _run(capsys, "compare", "--scenario", str(path), "--timing")
    assert code == 0
    err = float(re.search(r"max relative error (\S+)", out).group(1))
    assert err <= 1e-4
    assert "wall time" in out


def test_analyze_single_pair(capsys, tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text("dgs:\n- {id: G, alpha: 0.5, beta: 1.0, p_max: 10.0}\n"
                    "consumers:\n- {id: c, omega: 10.0, b: 0.5, attached_dg: G}\n")
    code, out, _ = _run(capsys, "analyze", "--scenario", str(path), "--format", "json-lines")
    head = json.loads(out.splitlines()[0])
    assert code == 0
    assert head["phi_sum"] == 2.0 and head["admissible_interval"] == [0.0, 1.0]


def test_analyze_case1_and_no_consumers(capsys, tmp_path):
    code, out, _ = _run(capsys, "analyze", "--scenario", "case1")
    assert code == 0 and "admissible k_i" in out and "L4, L12" in out
    path = tmp_path / "s.yaml"
    path.write_text("dgs:\n- {id: A, alpha: 1.0, beta: 2.0, p_max: 5.0}\n"
                    "- {id: B, alpha: 1.0, beta: 2.0, p_max: 5.0}\n")
    code, out, _ = _run(capsys, "analyze", "--scenario", str(path), "--format", "csv")
    rows = [r.split(",") for r in out.splitlines()[1:]]
    assert code == 0 and [float(r[2]) for r in rows] == [0.0, 0.0]


def test_generate_reproducible(capsys, tmp_path):
    a, b = tmp_path / "a.yaml", tmp_path / "b.yaml"
    for p in (a, b):
        assert main(["generate", "--n-dg", "400", "--n-consumer", "1000", "--seed", "42", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_scenario(a) == generate_random(400, 1000, 42)


def test_generate_minimal_and_pipeline(capsys, tmp_path):
    path = tmp_path / "m.yaml"
    assert main(["generate", "--n-dg", "1", "--n-consumer", "0", "--seed", "0", "--out", str(path)]) == 0
    s = load_scenario(path)
    assert s.n_dg == 1 and s.n_consumer == 0
    assert main(["solve", "--scenario", str(path)]) == 0
    assert main(["run", "--scenario", str(path)]) == 0


def test_generate_bad_counts(capsys, tmp_path):
    code, _, err = _run(capsys, "generate", "--n-dg", "0", "--n-consumer", "1", "--out", str(tmp_path / "x"))
    assert code == 1 and "n_dg" in err


def test_run_trace_deterministic(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["run", "--scenario", "case1", "--seed", "9", "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
