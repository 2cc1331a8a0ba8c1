import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import EXAMPLE_PI
from dtgo.cli import main
from dtgo.graphs import example_digraph

CONFIG = """scenario = gilbert-sweep
points = 0.5, 1.0
replications = 2
rounds = 15
warmup_rounds = 128
n_nodes = 5
objective = quadratic
step_size = 0.1
"""


@pytest.fixture
def graph_file(tmp_path):
    p = tmp_path / "example.txt"
    p.write_text(example_digraph().to_edge_list())
    return p


def test_analyze_graph_prints_spectral_summary(graph_file, capsys, tmp_path):
    assert main(["analyze-graph", "--graph-file", str(graph_file), "--out", str(tmp_path / "o")]) == 0
    out = capsys.readouterr().out
    pi_line = next(ln for ln in out.splitlines() if ln.startswith("pi = "))
    pi = np.array([float(v) for v in pi_line[5:].split()])
    assert len(pi) == 5 and np.allclose(pi, EXAMPLE_PI, atol=1e-13)
    assert "rho = " in out and "mixing_tau = " in out
    assert np.allclose(np.loadtxt(tmp_path / "o" / "pi.csv"), EXAMPLE_PI)


def test_analyze_matrix_file(tmp_path, capsys):
    from dtgo.gossip import inverse_indegree_matrix

    p = tmp_path / "w.csv"
    p.write_text(inverse_indegree_matrix(example_digraph()).to_csv())
    assert main(["analyze-graph", "--matrix-file", str(p)]) == 0
    bad = tmp_path / "bad.csv"
    w = np.loadtxt(p, delimiter=",")
    w[0] *= 2
    np.savetxt(bad, w, delimiter=",")
    assert main(["analyze-graph", "--matrix-file", str(bad)]) == 1
    assert "(i)" in capsys.readouterr().out


def test_analyze_rejects_disconnected(tmp_path):
    p = tmp_path / "chain.txt"
    p.write_text("3\n0 1\n1 2\n")
    assert main(["analyze-graph", "--graph-file", str(p)]) == 1


def test_unknown_flag_exits_one(capsys):
    assert main(["analyze-graph", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err
    assert main([]) == 1
    assert main(["frobnicate"]) == 1


def test_bad_graph_file_exits_one(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("3\n0 7\n")
    assert main(["analyze-graph", "--graph-file", str(p)]) == 1
    assert main(["analyze-graph", "--graph-file", str(tmp_path / "missing.txt")]) == 1


def test_warmup_demo_writes_trajectories(graph_file, tmp_path):
    out = tmp_path / "demo"
    assert main(["warmup-demo", "--graph-file", str(graph_file), "--seed", "4", "--out", str(out)]) == 0
    lines = (out / "warmup_demo.csv").read_text().splitlines()
    assert lines[0] == "round,node,plain,corrected"
    assert len(lines) == 1 + 61 * 5
    assert (out / "warmup_trace.csv").exists()


def test_run_writes_curves_and_manifest(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(CONFIG)
    out = tmp_path / "res"
    assert main(["run", "--config", str(cfg), "--seed", "5", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 5 and len(manifest["points"]) == 2
    for p in manifest["points"]:
        assert (out / p["file"]).exists()
    assert "consensus_subopt[15]" in capsys.readouterr().out


def test_run_with_total_edge_loss_warns_and_proceeds(tmp_path):
    cfg = tmp_path / "tv.cfg"
    cfg.write_text(CONFIG.replace("gilbert-sweep", "timevarying").replace("0.5, 1.0", "1.0"))
    with pytest.warns(UserWarning) as rec:
        assert main(["run", "--config", str(cfg)]) == 0
    messages = " ".join(str(w.message) for w in rec)
    assert "never communicate" in messages and "no unique stationary weights" in messages


def test_run_abort_exits_two(tmp_path):
    cfg = tmp_path / "hot.cfg"
    cfg.write_text(CONFIG.replace("step_size = 0.1", "step_size = 50"))
    with pytest.warns(UserWarning):
        assert main(["run", "--config", str(cfg)]) == 2


def test_run_bad_config_exits_one(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("scenario = gilbert-sweep\npoints = 1.0\nwhatever = 3\n")
    assert main(["run", "--config", str(cfg)]) == 1
    missing = tmp_path / "nope.cfg"
    assert main(["run", "--config", str(missing)]) == 1
    logit = tmp_path / "logit.cfg"
    logit.write_text("scenario = gilbert-sweep\npoints = 1.0\n")
    assert main(["run", "--config", str(logit), "--dataset", str(tmp_path / "absent.libsvm")]) == 1


def test_selftest_subprocess():
    done = subprocess.run([sys.executable, "-m", "dtgo.cli", "selftest"], capture_output=True, text=True)
    assert done.returncode == 0, done.stdout + done.stderr
    assert "7/7 checks passed" in done.stdout
