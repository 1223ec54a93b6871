import json
import os

import pytest

from kramers.cli import main

R = 2 * 2 ** 0.5 / 3.141592653589793


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


@pytest.fixture
def run(tmp_path):
    out = str(tmp_path / "run")
    assert main(["analyze", "--potential", "doublewell1d", "--out", out]) == 0
    assert main(["reduce", "--out", out]) == 0
    return out


def test_analyze_counts(run):
    g = json.load(open(os.path.join(run, "landscape_graph.json")))
    assert g["schema_version"] == "1.0"
    assert len(g["minima"]) == 2 and len(g["saddles"]) == 1


def test_reduce_generator(run):
    ch = json.load(open(os.path.join(run, "reduced_chain.json")))
    assert abs(ch["L"][0][1] - R) < 1e-9 and abs(ch["L"][1][0] - R) < 1e-9
    cs = json.load(open(os.path.join(run, "chain_structure.json")))
    assert cs["schema_version"] == "1.0" and cs["transient"] == []


def test_idempotent_stages(run):
    names = ["landscape_graph.json", "reduced_chain.json", "chain_structure.json"]
    before = [_read(os.path.join(run, n)) for n in names]
    meta = json.load(open(os.path.join(run, "metadata.json")))
    assert set(meta["stages"]) == {"analyze", "reduce"}
    assert main(["analyze", "--potential", "doublewell1d", "--out", run]) == 0
    assert main(["reduce", "--out", run]) == 0
    assert [_read(os.path.join(run, n)) for n in names] == before


def test_simulate_and_verify(run):
    args = ["simulate", "--out", run, "--experiment", "exit", "--eps", "0.25", "--paths", "40",
            "--seed", "3"]
    assert main(args) == 0
    stats = _read(os.path.join(run, "stats.json"))
    events = _read(os.path.join(run, "events.csv"))
    assert main(args + ["--threads", "2"]) == 0
    assert _read(os.path.join(run, "stats.json")) == stats
    assert _read(os.path.join(run, "events.csv")) == events
    s = json.loads(stats)
    assert s["result"]["mean"] > 0 and s["result"]["ci95"] > 0
    assert events.splitlines()[0] == b"path,time,label"
    assert main(["verify", "--out", run]) == 0
    rep = json.load(open(os.path.join(run, "verify_report.json")))
    assert rep["passed"] and rep["schema_version"] == "1.0"


def test_verify_detects_tampering(run):
    p = os.path.join(run, "reduced_chain.json")
    doc = json.load(open(p))
    doc["L"][0][1] = 1.0
    json.dump(doc, open(p, "w"))
    assert main(["verify", "--out", run]) == 1


def test_verify_single_check(run):
    assert main(["verify", "--out", run, "--check", "1", "--check", "3"]) == 0
    rep = json.load(open(os.path.join(run, "verify_report.json")))
    assert [c["id"] for c in rep["checks"]] == ["run", "1", "3"]


def test_report_outputs(run):
    assert main(["report", "--out", run]) == 0
    rows = open(os.path.join(run, "testfn_samples.csv")).read().splitlines()
    assert rows[0] == "x0,p,label" and len(rows) > 100
    manifest = json.load(open(os.path.join(run, "plot_manifest.json")))
    assert any(p["name"] == "test_function" for p in manifest["plots"])


def test_unknown_potential_exit_3(tmp_path, capsys):
    assert main(["analyze", "--potential", "nope", "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert "doublewell1d" in err and "threewell2d" in err


def test_missing_stage_exit_4(tmp_path):
    assert main(["reduce", "--out", str(tmp_path / "empty")]) == 4


def test_assumption_violation_exit_2(tmp_path):
    pot = {"name": "broken", "dim": 2, "box": [[-2, 2], [-2, 2]],
           "monomials": [{"coeff": 1.0, "exponents": [4, 0]}, {"coeff": -2.0, "exponents": [2, 0]},
                         {"coeff": 1.0, "exponents": [0, 2]}],
           "ell": [[{"coeff": 4.0, "exponents": [3, 0]}, {"coeff": -4.0, "exponents": [1, 0]}],
                   [{"coeff": 2.0, "exponents": [0, 1]}]]}
    path = tmp_path / "pot.json"
    path.write_text(json.dumps(pot))
    assert main(["analyze", "--potential", str(path), "--out", str(tmp_path / "o")]) == 2


def test_rotated_same_minima(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["analyze", "--potential", "threewell2d", "--out", a]) == 0
    assert main(["analyze", "--potential", "threewell2d", "--ell", "rot90:0.5", "--out", b]) == 0
    ma = json.load(open(os.path.join(a, "landscape_graph.json")))["minima"]
    mb = json.load(open(os.path.join(b, "landscape_graph.json")))["minima"]
    assert ma == mb


def test_config_file_and_env_threads(tmp_path, monkeypatch, run):
    cfg = tmp_path / "experiment.json"
    cfg.write_text(json.dumps({"kind": "exit", "potential": "doublewell1d", "seed": 3,
                               "config": {"eps": 0.25, "n_paths": 40}}))
    monkeypatch.setenv("KRAMERS_THREADS", "2")
    assert main(["simulate", "--out", run, "--config", str(cfg)]) == 0
    s = json.load(open(os.path.join(run, "stats.json")))
    assert s["experiment"] == "exit" and s["result"]["n_paths"] == 40 and s["seed"] == 3
    meta = json.load(open(os.path.join(run, "metadata.json")))
    assert meta["stages"]["simulate"]["threads"] == 2
    # flags override the file
    assert main(["simulate", "--out", run, "--config", str(cfg), "--paths", "20"]) == 0
    assert json.load(open(os.path.join(run, "stats.json")))["result"]["n_paths"] == 20
