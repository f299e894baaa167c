import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from helpers import free_ports
from ssperm import cli


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_bench_report(tmp_path):
    out = tmp_path / "r.json"
    assert run("bench", "--model", "dnn1", "--batch", 64, "--infer", "--out", out) == 0
    r = json.loads(out.read_text())
    assert r["model"]["arch"] == "100-50-relu-1-sigmoid"
    cap = r["per_op"]["cap"]
    assert cap["calls"] == 2
    assert cap["payload_bits"] - cap["clip_bits"] == 3 * 64 * 64 * (50 + 1)
    assert r["per_op"]["matmul"]["payload_bits"] >= 2 * 64 * 64 * 100
    assert sum(l["payload_bits"] for l in r["links"].values()) == r["total_payload_bits"]
    assert r["links"]["P2->P1"]["raw_bytes"] == 0
    assert r["reference_relu_costs"][0]["protocol"] == "Ours"


def test_bench_rerun_identical_traffic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert run("bench", "--model", "lr", "--dim", 20, "--batch", 8, "--train", "--steps", 2, "--out", p) == 0
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ra["per_op"] == rb["per_op"] and ra["links"] == rb["links"]


def test_bench_errors(capsys):
    assert run("bench", "--batch", 0) == 2
    assert run("bench", "--model", "custom") == 2
    assert run("bench", "--model", "custom", "--arch", "4-x") == 2
    with pytest.raises(SystemExit) as e:
        run("bench", "--model", "huge")
    assert e.value.code == 2


def test_train_csv_and_report(tmp_path):
    out, rep = tmp_path / "acc.csv", tmp_path / "rep.json"
    assert run("train", "--n", 200, "--dim", 5, "--arch", "5-4-relu-1-sigmoid", "--epochs", 2,
               "--batch", 32, "--compare-plaintext", "--out", out, "--report", rep) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["epoch"] for r in rows] == ["0", "1", "2"]
    assert all(abs(float(r["shared_acc"]) - float(r["float_acc"])) < 0.05 for r in rows)
    assert json.loads(rep.read_text())["traffic"]["total_payload_bits"] > 0


def test_train_epochs_zero_and_data_file(tmp_path):
    X = np.random.default_rng(0).normal(size=(40, 3))
    p = tmp_path / "d.csv"
    with p.open("w") as fh:
        fh.write("a,b,c,y\n")
        for row in X:
            fh.write(",".join(map(str, row)) + f",{int(row[0] > 0)}\n")
    out = tmp_path / "acc.csv"
    assert run("train", "--data", p, "--label", "y", "--epochs", 0, "--out", out) == 0
    assert len(list(csv.DictReader(out.open()))) == 1
    assert run("train", "--data", p, "--arch", "7-1-sigmoid") == 2
    assert run("train", "--data", tmp_path / "missing.csv") == 2


def test_privacy_subcommands(tmp_path):
    out = tmp_path / "p.csv"
    assert run("privacy", "perm-stats", "--n", 6, "--enumerate", "--trials", 2, "--out", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 2 and rows[0]["count"] == "720"
    assert abs(float(rows[0]["mean"])) < 1e-12
    assert run("privacy", "flip-test", "--trials", 20, "--json", tmp_path / "f.json") == 0
    f = json.loads((tmp_path / "f.json").read_text())[0]
    assert abs(f["p_negative"] - 0.5) < 0.02
    assert run("privacy", "attack", "--batch", 1, "--batch", 10, "--n", 200, "--targets", 20,
               "--out", out) == 0
    assert [r["batch_size"] for r in csv.DictReader(out.open())] == ["none", "1", "10"]
    assert run("privacy", "dcor-sim", "--n", 50, "--d", 8, "--h", 8, "--repeats", 2,
               "--dists", "normal,sparse", "--out", out) == 0
    assert len(list(csv.DictReader(out.open()))) == 4
    assert run("privacy", "dcor-sim", "--dists", "cauchy") == 2


def test_party_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as e:
        run("party", "--role", "p7", "--config", "x.json")
    assert e.value.code == 2
    assert run("party", "--role", "p0", "--config", tmp_path / "missing.json") == 2
    (tmp_path / "nojob.json").write_text("{}")
    assert run("party", "--role", "p0", "--config", tmp_path / "nojob.json") == 2


def test_three_processes_over_tcp_match_local(tmp_path):
    ports = free_ports(3)
    cfg = {
        "mode": "tcp",
        "addresses": {f"p{i}": f"127.0.0.1:{p}" for i, p in enumerate(ports)},
        "data_seed": 3,
        "job": {"kind": "infer", "arch": "10-1-sigmoid", "batch": 6, "seed": 5},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    procs = [
        subprocess.Popen([sys.executable, "-m", "ssperm.cli", "party", "--role", f"p{i}",
                          "--config", str(path), "--out", str(tmp_path / f"p{i}.json")])
        for i in range(3)
    ]
    assert [p.wait(timeout=120) for p in procs] == [0, 0, 0]
    got = json.loads((tmp_path / "p0.json").read_text())["result"]

    from ssperm import jobs
    from ssperm.runtime import SessionConfig, run_local

    local_cfg = SessionConfig.from_dict({**cfg, "mode": "local-sim"})
    local = run_local(lambda p: jobs.run_job(p, cfg["job"]), local_cfg).outputs[0]
    assert got["predictions"] == local["predictions"]
    np.testing.assert_allclose(got["predictions"], got["reference"], atol=1e-5)
    p1 = json.loads((tmp_path / "p1.json").read_text())["result"]
    assert p1["predictions"] == got["predictions"]
