import csv
import io
import json
import math

import pytest

from rstre.cli import ConfigError, HEADER, evaluate_expression, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.mark.parametrize("expr,value", [
    ("log(n)", math.log(1000)),
    ("n/log(n)^2", 1000 / math.log(1000) ** 2),
    ("n*log(n)^3", 1000 * math.log(1000) ** 3),
    ("2.5", 2.5),
    ("1e-3*n", 1.0),
    ("-(2-5)", 3.0),
    ("2^3^2", 512.0),
    ("(log(n)+5)/n", (math.log(1000) + 5) / 1000),
])
def test_expressions_at_n_1000(expr, value):
    assert evaluate_expression(expr, 1000) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("expr,pos", [("log(n", 5), ("2**3", 2), ("m+1", 0), ("", 0), ("3 4", 2)])
def test_expression_errors_report_position(expr, pos):
    with pytest.raises(ConfigError, match=f"position {pos}"):
        evaluate_expression(expr, 10)


def test_overlap_small_cell(capsys):
    code, out, err = run(capsys, "overlap", "--n", "6", "--beta", "1", "--env-reps", "3", "--mc", "400",
                         "--sigma", "4")
    assert code == 0, err
    assert out.splitlines()[0] == ",".join(HEADER)
    rows = rows_of(out)
    exact = [r for r in rows if r["observable"] == "overlap_exact"]
    assert len(exact) == 3 and all(r["status"] == "ok" for r in exact)
    assert [r["replicate"] for r in exact] == ["0", "1", "2"]
    assert rows[-1]["replicate"] == "-1"


def test_refusal_rows_have_no_value(capsys):
    code, out, _ = run(capsys, "length", "--n", "30", "--beta", "n*log(n)^2", "--env-reps", "1", "--mc", "5")
    assert code == 0
    refused = [r for r in rows_of(out) if r["observable"] == "length_exact"]
    assert refused[0]["status"] == "conditioning_refused" and refused[0]["value"] == ""


def test_threshold_failure_exit_code(capsys):
    code, _, err = run(capsys, "overlap", "--n", "8", "--beta", "1", "--env-reps", "2", "--mc", "0",
                       "--ratio-band", "2,3")
    assert code == 1 and "FAIL" in err


@pytest.mark.parametrize("argv", [
    ["overlap", "--n", ""],
    ["overlap", "--n", "5", "--beta", "log(n"],
    ["overlap", "--n", "5", "--beta", "-1"],
    ["local", "--n", "5", "--radius", "-1"],
    ["verify", "--n", "9"],
    ["graph", "--n", "10", "--p", "2"],
    ["overlap", "--n", "5000"],
    ["bogus"],
])
def test_config_errors(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"n": [5], "beta": ["1"], "env_reps": 2, "mc": 10, "seed": 4}))
    out = tmp_path / "a.csv"
    code, _, _ = run(capsys, "overlap", "--config", str(cfg), "--env-reps", "1", "--out", str(out))
    assert code == 0
    rows = rows_of(out.read_text())
    assert {r["replicate"] for r in rows} == {"0", "-1"}
    side = json.loads((tmp_path / "a.csv.json").read_text())
    assert side["config"]["master_seed"] == 4 and side["config"]["env_replicates"] == 1
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"nn": 3}))
    assert run(capsys, "overlap", "--config", str(bad))[0] == 2


def test_output_independent_of_workers(tmp_path, capsys):
    args = ["length", "--n", "6,9", "--beta", "1,log(n)", "--env-reps", "3", "--mc", "20", "--seed", "11"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(capsys, *args, "--out", str(a), "--workers", "1")[0] == 0
    assert run(capsys, *args, "--out", str(b), "--workers", "2")[0] == 0
    assert a.read_bytes() == b.read_bytes()
    assert b"\r" not in a.read_bytes()


def test_local_radius_zero(capsys):
    code, out, _ = run(capsys, "local", "--n", "20", "--radius", "0", "--env-reps", "2", "--mc", "5")
    assert code == 0
    tv = [r for r in rows_of(out) if r["observable"] == "tv_poisson_survive"]
    assert float(tv[0]["value"]) == 0.0


def test_graph_sweep(capsys):
    code, out, err = run(capsys, "graph", "--n", "500", "--p", "2/n,(log(n)+5)/n", "--env-reps", "3",
                         "--c2-factor", "50", "--degree-factor", "60")
    assert code == 0, err
    rows = rows_of(out)
    names = {r["observable"] for r in rows}
    assert {"largest_component", "second_component", "connected", "mst_max_degree",
            "disconnected_fraction", "second_component_max", "mst_max_degree_max"} <= names


def test_graph_sweep_uses_low_weight_env_for_huge_n(capsys):
    code, out, err = run(capsys, "graph", "--n", "20000", "--p", "2/n", "--env-reps", "1")
    assert code == 0, err
    deg = [r for r in rows_of(out) if r["observable"] == "mst_max_degree"]
    assert deg[0]["status"] == "ok" and int(deg[0]["value"]) > 2


def test_verify_and_fault(capsys):
    code, out, err = run(capsys, "verify")
    assert code == 0 and err.count("PASS") == 7
    code, _, err = run(capsys, "verify", "--inject-fault", "weight-perturbation")
    assert code == 1 and "FAIL determinant_vs_enumeration" in err
