import json
import subprocess
import sys

import numpy as np
import pytest

from stochroute.cli import main
from stochroute.experiments import read_csv


def write_config(path, text):
    path.write_text(text)
    return str(path)


def test_generate_then_route_on_the_files(tmp_path, capsys):
    assert main(["generate", "--side", "4", "--seed", "3", "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "nodes.tntp").exists() and (tmp_path / "edges.tntp").exists()
    capsys.readouterr()
    code = main(["route", "--nodes", str(tmp_path / "nodes.tntp"), "--edges", str(tmp_path / "edges.tntp"),
                 "--origin", "0", "--target", "15", "--budget", "30", "--bins", "200",
                 "--algorithm", "decentralized-LE", "--out-dir", str(tmp_path)])
    assert code == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["path"][0] == 0 and rec["target"] == 15
    assert rec["success"] == (rec["path"][-1] == 15 and rec["travel_time"] <= 30)


def test_route_is_seeded(capsys):
    args = ["route", "--side", "5", "--origin", "0,0", "--target", "4,4", "--budget", "20", "--bins", "200",
            "--seed", "9"]
    outs = []
    for _ in range(2):
        assert main(args) == 0
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]


def test_solve_writes_table(tmp_path):
    assert main(["solve", "--side", "4", "--target", "3,3", "--horizon", "30", "--bins", "150",
                 "--out-dir", str(tmp_path)]) == 0
    with np.load(tmp_path / "routing_table.npz") as z:
        assert z["cdf"].shape == (16, 150) and int(z["target"]) == 15
        assert np.all(z["cdf"][15] == 1)


def test_convergence_failure_exit_code(tmp_path, capsys):
    code = main(["solve", "--side", "4", "--target", "15", "--bins", "150", "--epsilon", "1e-15",
                 "--max-iterations", "2", "--out-dir", str(tmp_path)])
    assert code == 3
    assert "did not converge" in capsys.readouterr().err


def test_experiment_and_config_errors(tmp_path, capsys):
    cfg = write_config(tmp_path / "exp.yaml", """
experiment: arrival
network: {kind: kleinberg, side: 4}
endpoints: {origin: [0, 0], target: [3, 3]}
budgets: [5, 15]
trials: 50
algorithms: [centralized, decentralized-LE]
bins: 150
""")
    out = tmp_path / "out"
    assert main(["experiment", cfg, "--trials", "6", "--seed", "2", "--out-dir", str(out), "--threads", "2"]) == 0
    rows = read_csv(out / "summary.csv")
    assert len(rows) == 4 and all(r["trials"] == "6" for r in rows)

    bad = write_config(tmp_path / "bad.yaml", "experiment: threshold\nthetas: [0.8]\n")
    capsys.readouterr()
    assert main(["experiment", bad]) == 2
    assert "thetas" in capsys.readouterr().err
    assert main(["experiment", str(tmp_path / "missing.yaml")]) == 1
    assert main(["solve", "--nodes", "only-nodes.tntp", "--target", "1"]) == 2


def test_distance_analysis_and_bench(tmp_path, capsys):
    assert main(["distance-analysis", "--side", "4", "--bootstrap", "20", "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "euclidean:" in out and "lattice:" in out
    assert (tmp_path / "distance_fit.csv").exists()
    assert main(["bench-scaling", "--sides", "3", "4", "5", "--runs", "1", "--budget", "10", "--bins", "100",
                 "--out-dir", str(tmp_path)]) == 0
    assert "exponent" in capsys.readouterr().out
    assert main(["bench-scaling", "--sides", "3", "4", "--runs", "1", "--out-dir", str(tmp_path)]) == 2


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "stochroute.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("generate", "solve", "route", "experiment", "distance-analysis", "bench-scaling"):
        assert cmd in proc.stdout
    with pytest.raises(SystemExit) as exc:
        main(["experiment"])
    assert exc.value.code != 0
