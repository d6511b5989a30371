import csv
import json
import math

import pytest

from hctest import __version__
from hctest.cli import main, parse_grid
from hctest.exact import mu_uniform


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), err


def test_uniformity_accepts_uniform(capsys):
    code, rep, _ = run(capsys, "test-uniformity", "--n", "100", "--epsilon", "0.3", "--delta", "0.05", "--seed", "1")
    assert code == 0
    assert rep["command"] == "test-uniformity" and rep["version"] == __version__
    assert rep["result"]["decision"] == "YES" and rep["exit_code"] == 0
    assert set(rep) == {"command", "version", "seed", "config", "result", "exit_code", "timing"}


def test_uniformity_rejects_far_source(capsys):
    code, rep, _ = run(
        capsys, "test-uniformity", "--n", "100", "--epsilon", "0.3", "--from", "family:k=10", "--seed", "2"
    )
    assert code == 3 and rep["result"]["decision"] == "NO"


def test_missing_option_is_a_usage_error(capsys):
    code, rep, err = run(capsys, "test-uniformity", "--n", "100")
    assert code == 2 and rep is None
    assert "usage:" in err and "--epsilon" in err


def test_unknown_command(capsys):
    assert main(["frobnicate"]) == 2


def test_samples_from_file(tmp_path, capsys):
    path = tmp_path / "s.txt"
    path.write_text(" ".join(str(i % 10) for i in range(500)))
    code, rep, _ = run(capsys, "test-uniformity", "--n", "10", "--epsilon", "0.5", "--from", f"file:{path}")
    assert code == 0 and rep["result"]["m"] == 500 and rep["result"]["statistic"] == 0
    path.write_text("0 1 12")
    code, _, err = run(capsys, "test-uniformity", "--n", "10", "--epsilon", "0.5", "--from", f"file:{path}")
    assert code == 2 and "indices" in err


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 50, "epsilon": 0.4, "delta": 0.1, "m": 80, "seed": 4}))
    code, rep, _ = run(capsys, "test-uniformity", "--config", str(cfg))
    assert rep["result"]["n"] == 50 and rep["result"]["m"] == 80 and rep["seed"] == 4
    code, rep, _ = run(capsys, "test-uniformity", "--config", str(cfg), "--m", "120", "--seed", "5")
    assert rep["result"]["m"] == 120 and rep["seed"] == 5 and rep["result"]["n"] == 50


def test_output_is_reproducible(tmp_path, capsys):
    args = ["eval-worst-case", "--n", "20", "--epsilon", "0.4", "--delta", "0.1", "--trials", "200", "--seed", "9"]
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(args + ["--output", str(a), "--csv", str(tmp_path / "a.csv")])
    main(args + ["--output", str(b), "--csv", str(tmp_path / "a.csv")])
    capsys.readouterr()
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    for r in (ra, rb):
        r.pop("timing")
        r["config"].pop("output")
    assert ra == rb


def test_eval_worst_case_all_writes_csv(tmp_path, capsys):
    out = tmp_path / "wc.json"
    code, rep, _ = run(
        capsys,
        "eval-worst-case", "--n", "20", "--epsilon", "0.4", "--delta", "0.1",
        "--statistic", "all", "--trials", "200", "--output", str(out),
    )
    assert code == 0
    stats = rep["result"]["statistics"]
    assert [s["statistic"] for s in stats] == ["empirical_tv", "collisions", "distinct", "chi_squared"]
    assert not next(s for s in stats if s["statistic"] == "distinct")["convex"]
    with open(tmp_path / "wc.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and "statistic" in rows[0] and "k" in rows[0]
    assert len({r["statistic"] for r in rows}) == 4
    assert json.loads(out.read_text())["result"] == rep["result"]


def test_dominance_check(capsys):
    code, rep, _ = run(
        capsys, "dominance-check", "--p", "family:k=3", "--n", "12", "--epsilon", "0.3",
        "--m", "20", "--trials", "5000", "--seed", "3",
    )
    assert code == 0 and rep["result"]["pass"] and rep["result"]["majorized"]
    code, rep, _ = run(capsys, "dominance-check", "--p", "uniform", "--q", "point", "--n", "8", "--m", "10", "--trials", "1000")
    assert code == 1 and not rep["result"]["majorized"]


def test_lb_instance(capsys):
    code, rep, _ = run(capsys, "lb-instance", "--n", "40", "--epsilon", "0.3", "--seed", "6")
    assert code == 0
    w = rep["result"]["instance"]["weights"]
    assert len(w) == 40
    assert all(math.isclose(x, 1.3 / 40) or math.isclose(x, 0.7 / 40) for x in w)
    code, rep, _ = run(
        capsys, "lb-instance", "--n", "40", "--epsilon", "0.3", "--witness", "--trials", "2000", "--seed", "6"
    )
    wit = rep["result"]["witness"]
    assert 0 <= wit["best_total_error"] <= 1 and wit["tv_bound"] <= 1


def test_exact_queries(capsys):
    code, rep, _ = run(capsys, "exact", "mu-uniform", "--n", "2", "--m", "2")
    assert code == 0 and rep["result"]["value"] == pytest.approx(0.25)
    _, rep, _ = run(capsys, "exact", "mu-t", "--p", "uniform:5", "--m", "10", "--t", "2")
    assert rep["result"]["value"] == pytest.approx(mu_uniform(5, 10))
    _, rep, _ = run(capsys, "exact", "hessian", "--m", "3", "--t", "1", "--p", "0.5")
    assert rep["result"]["value"] == pytest.approx(1.0)
    _, rep, _ = run(capsys, "exact", "gap", "--n", "100", "--m", "400", "--epsilon", "0.1")
    assert rep["result"]["value"] == pytest.approx(0.02) and rep["result"]["regime"] == "MID"
    _, rep, _ = run(capsys, "exact", "threshold", "--n", "2", "--m", "2", "--epsilon", "1.0")
    assert rep["result"]["value"] == pytest.approx(0.75)
    _, rep, _ = run(capsys, "exact", "tail", "--form", "mcdiarmid", "--z", "0.1", "--m", "100", "--B", "0.01")
    assert rep["result"]["value"] == pytest.approx(math.exp(-2))
    _, rep, _ = run(capsys, "exact", "tail", "--form", "bernstein", "--z", "0", "--B", "1", "--sum-sigma2", "1")
    assert rep["result"]["value"] == 1
    code, _, _ = run(capsys, "exact", "hessian", "--m", "2", "--t", "1", "--p", "0.5")
    assert code == 2


def test_identity_command(capsys):
    code, rep, _ = run(capsys, "test-identity", "--n", "4", "--epsilon", "0.45", "--delta", "0.1", "--seed", "2")
    assert code == 0 and rep["result"]["decision"] == "YES"
    code, rep, _ = run(
        capsys, "test-identity", "--n", "4", "--epsilon", "0.45", "--delta", "0.1", "--from", "point", "--seed", "2"
    )
    assert code == 3


def test_calibrate_single_cell(tmp_path, capsys):
    target = tmp_path / "cal.json"
    code, rep, err = run(capsys, "calibrate", "--grid", "50,0.4,0.1", "--trials", "300", "--save", str(target))
    assert code == 0 and target.exists()
    saved = json.loads(target.read_text())
    assert saved["constant_C"] == rep["result"]["constant_C"]
    assert saved["grid"] == [[50, 0.4, 0.1]]
    assert "sample_constant" in err
    code, rep, _ = run(
        capsys, "test-uniformity", "--n", "50", "--epsilon", "0.4", "--delta", "0.1", "--calibration", str(target)
    )
    assert rep["result"]["constants"]["constant_C"] == saved["constant_C"]


def test_parse_grid():
    assert parse_grid("50,0.4,0.1; 100,0.3,0.05;") == [(50, 0.4, 0.1), (100, 0.3, 0.05)]
