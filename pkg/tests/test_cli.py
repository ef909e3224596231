import csv
import json

import numpy as np
import pytest

from exphmm.cli import main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert run("simulate", "--t", 300, "--seed", 4, "--out", out) == 0
    return out


@pytest.fixture(scope="module")
def fitted(simulated, tmp_path_factory):
    out = tmp_path_factory.mktemp("fit")
    code = run("fit", "--data", simulated / "simulated.csv", "--response", "y", "--covariates", "x",
               "--input-kind", "returns", "--tau", 0.5, "--states", 2, "--starts", 3, "--out", out)
    assert code == 0
    return out / "fit.json"


def test_simulate_outputs(simulated):
    rows = list(csv.reader(open(simulated / "simulated.csv")))
    assert rows[0] == ["date", "y", "x"] and len(rows) == 301
    assert json.load(open(simulated / "simulate.json"))["result"]["T"] == 300


def test_fit_report(fitted):
    doc = json.load(open(fitted))
    res = doc["result"]
    assert res["converged"] and len(res["params"]["beta"]) == 2
    assert res["criteria"]["n_params"] == 9
    assert doc["manifest"]["config"]["K"] == 2
    assert all(len(v) == 64 for v in doc["manifest"]["inputs"].values())


def test_decode_rows(fitted, tmp_path):
    assert run("decode", "--fit", fitted, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "decode.csv")))
    assert len(rows) == 300
    g = np.array([[float(r["gamma_1"]), float(r["gamma_2"])] for r in rows])
    np.testing.assert_allclose(g.sum(1), 1, atol=1e-10)


def test_bootstrap_table(fitted, tmp_path):
    assert run("bootstrap", "--fit", fitted, "--replicates", 6, "--starts", 1, "--seed", 2, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "bootstrap.csv")))
    assert [r["parameter"] for r in rows] == ["intercept", "x", "sigma"] * 2
    doc = json.load(open(tmp_path / "bootstrap.json"))
    assert doc["result"]["R"] == 6


def test_select_table(simulated, tmp_path):
    code = run("select", "--data", simulated / "simulated.csv", "--response", "y", "--covariates", "x",
               "--input-kind", "returns", "--kmin", 1, "--kmax", 2, "--tau", 0.3, "--tau", 0.7,
               "--starts", 2, "--out", tmp_path)
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "criteria.csv")))
    assert len(rows) == 4
    sel = json.load(open(tmp_path / "select.json"))["result"]["selected"]
    assert set(sel) == {"0.3", "0.7"}


def test_mc_study_byte_identical(tmp_path):
    args = ["mc-study", "--scenario", "gaussian", "--t", 120, "--replications", 2, "--tau", 0.5,
            "--starts", 1, "--seed", 11]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    for name in ("mc-study.json", "mc_table.csv", "mc_ari.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "mc-study.timing.json").exists()


def test_exit_codes(simulated, tmp_path):
    assert run("fit", "--bogus") == 1
    assert run("nonsense") == 1
    assert run("fit", "--data", tmp_path / "missing.csv", "--response", "y", "--covariates", "x",
               "--out", tmp_path / "o") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("date,y,x\n2020-01-01,1,oops\n")
    assert run("fit", "--data", bad, "--response", "y", "--covariates", "x", "--out", tmp_path / "o") == 2
    assert run("fit", "--data", simulated / "simulated.csv", "--response", "y", "--covariates", "x",
               "--input-kind", "returns", "--tau", 1.5, "--out", tmp_path / "o") == 1
    # prices must be positive; simulated returns are not
    assert run("fit", "--data", simulated / "simulated.csv", "--response", "y", "--covariates", "x",
               "--out", tmp_path / "o") == 2
    assert not (tmp_path / "o").exists() or not any((tmp_path / "o").iterdir())


def test_numerical_failure_exit(tmp_path):
    f = tmp_path / "tiny.csv"
    rows = ["date,y,x"] + [f"2020-01-{i + 1:02d},{1 + i},{2 + (i % 3)}" for i in range(8)]
    f.write_text("\n".join(rows) + "\n")
    code = run("fit", "--data", f, "--response", "y", "--covariates", "x", "--states", 3,
               "--starts", 2, "--out", tmp_path / "o")
    assert code in (2, 3)


def test_config_file(simulated, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n_starts": 2, "em_tolerance": 1e-6, "K": 1}))
    assert run("fit", "--data", simulated / "simulated.csv", "--response", "y", "--covariates", "x",
               "--input-kind", "returns", "--config", cfg, "--out", tmp_path / "o") == 0
    doc = json.load(open(tmp_path / "o" / "fit.json"))
    assert doc["manifest"]["config"]["em_tolerance"] == 1e-6
    cfg.write_text(json.dumps({"bogus": 1}))
    assert run("fit", "--data", simulated / "simulated.csv", "--response", "y", "--covariates", "x",
               "--input-kind", "returns", "--config", cfg, "--out", tmp_path / "o2") == 1
