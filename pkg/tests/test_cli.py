import json
import subprocess
import sys

import pytest

from revlog.cli import main
from revlog.instance import serialize_instance
from revlog.oracle import micro_instances
from revlog.reports import read_csv


@pytest.fixture
def small(tmp_path):
    inst = next(i for i in micro_instances(20) if i.n_scenarios == 2)
    path = tmp_path / "small.json"
    path.write_text(serialize_instance(inst))
    return path


def test_solve_writes_itemized_document(small, tmp_path):
    out = tmp_path / "sol.json"
    assert main(["solve", "--instance", str(small), "--alpha", "0.9", "--lambda", "0.3",
                 "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert set(doc["terms"]) == {"revenue_reman", "revenue_scrap", "fixed_cost", "incentive_reman",
                                 "incentive_scrap", "transport", "remanufacturing", "risk"}
    assert sum(doc["terms"].values()) == pytest.approx(doc["objective"], abs=1e-6)
    assert doc["alpha"] == 0.9 and doc["lambda"] == 0.3


def test_solve_is_byte_identical(small, tmp_path):
    outs = []
    for n in range(2):
        out = tmp_path / f"sol{n}.json"
        main(["solve", "--instance", str(small), "--alpha", "0.9", "--lambda", "1",
              "--scenario-mode", "sample", "--seed", "5", "--out", str(out)])
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_alpha_one_is_invalid(small):
    assert main(["solve", "--instance", str(small), "--alpha", "1.0", "--lambda", "0"]) == 2


def test_negative_lambda_is_invalid(small):
    assert main(["solve", "--instance", str(small), "--alpha", "0.5", "--lambda", "-1"]) == 2


def test_corrupted_instance(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nodes": [1,,]')
    assert main(["solve", "--instance", str(bad), "--alpha", "0.5", "--lambda", "0"]) == 2
    assert "line 1" in capsys.readouterr().err
    assert main(["check", "--instance", str(bad), "--micro", "0", "--distributions", "1"]) == 2


def test_missing_flags_are_usage_errors():
    with pytest.raises(SystemExit) as err:
        main(["solve", "--alpha", "0.5"])
    assert err.value.code == 1
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 1


def test_eval_report(small, capsys):
    assert main(["eval", "--instance", str(small), "--alpha", "0.9", "--lambda", "1"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["mrvss"] == doc["mrrp"] - doc["mrev"]
    assert doc["mrvss"] >= -1e-6


def test_sweep_tables(small, tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--instance", str(small), "--alphas", "0.9,0.5",
                 "--lambdas", "1,0", "--out-dir", str(out)]) == 0
    rows = read_csv(out / "sweep.csv")
    assert [(r["alpha"], r["lambda"]) for r in rows] == [(0.5, 0), (0.5, 1), (0.9, 0), (0.9, 1)]
    assert rows[0]["objective"] == rows[2]["objective"]
    curve = read_csv(out / "objective_by_lambda.csv")
    assert [r["objective"] for r in curve] == [r["objective"] for r in rows]
    metrics = read_csv(out / "mrvss.csv")
    assert all(m["mrvss"] >= -1e-6 for m in metrics)
    assert all(m["mrvss"] == m["mrrp"] - m["mrev"] for m in metrics)
    first = {p.name: p.read_bytes() for p in out.iterdir()}
    main(["sweep", "--instance", str(small), "--alphas", "0.5,0.9",
          "--lambdas", "0,1", "--out-dir", str(out)])
    assert first == {p.name: p.read_bytes() for p in out.iterdir()}


def test_single_cell_sweep_matches_solve(small, tmp_path, capsys):
    out = tmp_path / "one"
    main(["sweep", "--instance", str(small), "--alphas", "0.9", "--lambdas", "0.3",
          "--out-dir", str(out), "--no-mrvss"])
    assert not (out / "mrvss.csv").exists()
    capsys.readouterr()
    main(["solve", "--instance", str(small), "--alpha", "0.9", "--lambda", "0.3"])
    doc = json.loads(capsys.readouterr().out)
    (row,) = read_csv(out / "sweep.csv")
    assert row["objective"] == doc["objective"]
    assert row["cvar"] == doc["risk"]["cvar"]
    assert row["eta"] == doc["risk"]["var_threshold"]
    assert row["open_centers"] == doc["design"]["open_centers"]
    for node, price in doc["prices"].items():
        assert row[f"v_r:{node}"] == price["v_r"] and row[f"v_s:{node}"] == price["v_s"]


def test_check_passes_on_a_few_instances(capsys):
    assert main(["check", "--micro", "3", "--distributions", "100", "--grid-step", "0.01"]) == 0
    assert "all checks passed" in capsys.readouterr().out


def test_check_coarse_step_still_passes():
    assert main(["check", "--micro", "2", "--distributions", "10", "--grid-step", "10"]) == 0


def test_check_budget_refusal():
    assert main(["check", "--micro", "1", "--distributions", "1", "--budget", "10"]) == 3


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "revlog", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("solve", "sweep", "eval", "check"):
        assert cmd in res.stdout
