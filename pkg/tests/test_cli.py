"""End-to-end checks of the command-line front end.

Runs go through main() in-process (fast, same code path as the console
script) except one subprocess test that exercises the installed script.
Determinism is asserted at the byte level: same config and seed, same files.
"""
import csv
import hashlib
import json
import subprocess
import sys

import pytest

from freqsim.cli import EXIT_CONFIG, EXIT_POSITIVITY, EXIT_SCALING, load_config, main


REF_MODEL = {
    "c1": 0.5, "c2": 0.25, "eta1": 0.3, "eta2": 0.1,
    "b11": [0.0, 0.4], "b12": [0.0, 0.2], "b21": [0.0, 0.05], "b22": [0.0, 0.1],
    "mu1": [[1.0, 0.0, 0.3]], "mu2": [[0.0, 0.5, 0.2]], "nu": [[0.2, 0.1, 0.5]],
}


def write_config(tmp_path, doc, name="run.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run_cli(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    out = json.loads(captured.out) if captured.out.strip() else None
    err = json.loads(captured.err) if captured.err.strip() else None
    return code, out, err


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def tree_digest(outdir):
    digests = {}
    for f in sorted(outdir.iterdir()):
        digests[f.name] = hashlib.sha256(f.read_bytes()).hexdigest()
    return digests


def test_null_model_constant_trajectory(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": {}, "z": 1.0, "r0": 0.37,
        "path": {"dt": 0.01, "horizon": 0.5, "seed": 3, "n_paths": 8},
        "output": {"dir": str(tmp_path / "out")},
    })
    code, report, _ = run_cli(["simulate", "--config", cfg], capsys)
    assert code == 0
    assert report["warnings"] == []
    header, rows = read_csv(tmp_path / "out" / "trajectory.csv")
    assert header == ["time", "value"]
    assert all(row[1] == "0.37" for row in rows)
    _, summary = read_csv(tmp_path / "out" / "summary.csv")
    assert summary[0][1] == "0.37"  # mean
    assert summary[0][7] == "0"  # clamp_count


def test_simulate_repeat_byte_identical(tmp_path, capsys):
    doc = {
        "model": REF_MODEL, "z": 1.0, "r0": 0.6,
        "path": {"dt": 0.005, "horizon": 0.3, "seed": 11, "n_paths": 40},
    }
    cfg = write_config(tmp_path, doc)
    for sub in ("a", "b"):
        code, _, _ = run_cli(
            ["simulate", "--config", cfg, "--out", str(tmp_path / sub)], capsys
        )
        assert code == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")


def test_malformed_r0_exit_2(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": {}, "z": 1.0, "r0": 1.5,
        "path": {"dt": 0.01, "horizon": 0.5, "seed": 3},
    })
    code, _, err = run_cli(["simulate", "--config", cfg], capsys)
    assert code == EXIT_CONFIG
    assert err["error"]["path"] == "r0"


def test_unknown_key_reports_field_path(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": {}, "z": 1.0, "r0": 0.5,
        "dual": {"n0": 1, "nmax": 5, "t": 0.2},
        "path": {"dt": 0.01, "horizon": 0.5, "seed": 3},
    })
    code, _, err = run_cli(["duality", "--config", cfg], capsys)
    assert code == EXIT_CONFIG
    assert err["error"]["path"] == "dual.nmax"


def test_duality_reference_model_passes(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": REF_MODEL, "z": 1.0, "r0": 0.6,
        "dual": {"n0": 2, "n_max": 10, "t": 0.3},
        "path": {"dt": 0.002, "horizon": 0.3, "seed": 5, "n_paths": 2000},
        "output": {"dir": str(tmp_path / "out")},
    })
    code, report, _ = run_cli(["duality", "--config", cfg], capsys)
    assert code == 0
    assert report["warnings"] == []
    header, rows = read_csv(tmp_path / "out" / "duality.csv")
    row = dict(zip(header, rows[0]))
    assert float(row["residual"]) <= 1e-9
    assert float(row["z_score"]) <= 4.0


def test_duality_positivity_exit_3(tmp_path, capsys):
    # stronger type-2 diffusion makes the up-move rate n(c1 - c2) negative
    cfg = write_config(tmp_path, {
        "model": {"c1": 0.2, "c2": 0.5}, "z": 1.0, "r0": 0.5,
        "dual": {"n0": 1, "n_max": 6, "t": 0.2},
        "path": {"dt": 0.01, "horizon": 0.2, "seed": 1, "n_paths": 10},
    })
    code, _, err = run_cli(["duality", "--config", cfg], capsys)
    assert code == EXIT_POSITIVITY
    first = err["error"]["violations"][0]
    assert first[0] == 1 and first[1] == 2
    assert first[2] == pytest.approx(-0.6)


def test_dual_rates_dagger_literal(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": REF_MODEL, "z": 1.0,
        "dual": {"n_max": 4},
        "output": {"dir": str(tmp_path / "out")},
    })
    code, _, _ = run_cli(["dual-rates", "--config", cfg], capsys)
    assert code == 0
    header, rows = read_csv(tmp_path / "out" / "rates.csv")
    assert header == ["n", "m", "rate"]
    kills = [r for r in rows if r[1] == "dagger"]
    assert len(kills) == 4  # one dagger row per n
    assert all(float(r[2]) > 0.0 for r in rows)


def test_ode_case_with_interior_stable_point(tmp_path, capsys):
    # both cross terms positive and a weak self-advantage: one interior sink
    cfg = write_config(tmp_path, {
        "model": {"b11": [0.0, 0.3], "b12": [0.0, 1.0], "b21": [0.0, 1.0]},
        "ode": {"scaling": "linear", "grid_size": 21},
        "output": {"dir": str(tmp_path / "out")},
    })
    code, report, _ = run_cli(["ode", "--config", cfg], capsys)
    assert code == 0
    text = (tmp_path / "out" / "equilibria.txt").read_text()
    assert "case: 1g" in text
    payload = json.loads((tmp_path / "out" / "equilibria.json").read_text())
    assert payload["closed_form"]["case"] == "1g"
    for side in ("numeric", "closed_form"):
        eqs = payload[side]["equilibria"]
        assert len(eqs) == 1
        assert eqs[0]["stability"] == "stable"
        assert 0.0 < eqs[0]["r"] < 1.0
    header, rows = read_csv(tmp_path / "out" / "phase.csv")
    assert header == ["r", "rhs"] and len(rows) == 21


def test_ode_logistic_interior_three_quarters(tmp_path, capsys):
    # c11 = -2, a11 = 1.5: d1 = -2, d2 = -1.5, interior sink at 0.75
    cfg = write_config(tmp_path, {
        "model": {"b11": [0.0, 1.5, -2.0]},
        "ode": {"scaling": "logistic"},
        "output": {"dir": str(tmp_path / "out")},
    })
    code, _, _ = run_cli(["ode", "--config", cfg], capsys)
    assert code == 0
    payload = json.loads((tmp_path / "out" / "equilibria.json").read_text())
    assert payload["coefficients"] == {"d1": -2.0, "d2": -1.5}
    interior = [e for e in payload["numeric"]["equilibria"] if 0.0 < e["r"] < 1.0]
    assert len(interior) == 1
    assert interior[0]["r"] == pytest.approx(0.75, abs=1e-8)
    assert interior[0]["stability"] == "stable"


def test_ode_logistic_cross_charging_exit_4(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": {"b11": [0.0, 0.3], "mu2": [[1.0, 0.5, 0.2]]},
        "ode": {"scaling": "logistic"},
        "output": {"dir": str(tmp_path / "out")},
    })
    code, _, err = run_cli(["ode", "--config", cfg], capsys)
    assert code == EXIT_SCALING
    assert "mu2" in err["error"]["message"]


def test_seed_env_and_flag_precedence(tmp_path, capsys, monkeypatch):
    doc = {
        "model": {}, "z": 1.0, "r0": 0.5,
        "path": {"dt": 0.01, "horizon": 0.2},
        "output": {"dir": str(tmp_path / "out")},
    }
    cfg = write_config(tmp_path, doc)
    monkeypatch.delenv("FREQSIM_SEED", raising=False)
    code, _, err = run_cli(["simulate", "--config", cfg], capsys)
    assert code == EXIT_CONFIG
    assert err["error"]["path"] == "path.seed"
    monkeypatch.setenv("FREQSIM_SEED", "21")
    code, report, _ = run_cli(["simulate", "--config", cfg], capsys)
    assert code == 0 and report["seed"] == 21
    code, report, _ = run_cli(["simulate", "--config", cfg, "--seed", "5"], capsys)
    assert code == 0 and report["seed"] == 5
    assert report["config"]["path"]["seed"] == 5


def test_config_round_trip_revalidates(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": REF_MODEL, "z": 1.0, "r0": 0.6,
        "path": {"dt": 0.01, "horizon": 0.2, "seed": 2, "n_paths": 4},
        "output": {"dir": str(tmp_path / "out"), "format": "csv"},
    })
    code, report, _ = run_cli(["simulate", "--config", cfg], capsys)
    assert code == 0
    echoed = load_config(report["config"])
    assert echoed.config_hash == report["config_hash"]


def test_json_format_trajectory(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": {}, "z": 1.0, "r0": 0.25,
        "path": {"dt": 0.05, "horizon": 0.2, "seed": 1},
        "output": {"dir": str(tmp_path / "out"), "format": "json"},
    })
    code, report, _ = run_cli(["simulate", "--config", cfg], capsys)
    assert code == 0
    assert str(tmp_path / "out" / "trajectory.json") in report["outputs"]
    rows = json.loads((tmp_path / "out" / "trajectory.json").read_text())
    assert rows[0] == {"time": 0.0, "value": 0.25}


def test_converge_cull_threads_do_not_change_bytes(tmp_path, capsys):
    doc = {
        "model": REF_MODEL, "z": 1.0, "r0": 0.6, "band": [1e-6, 1e6],
        "n_list": [2, 4],
        "path": {"dt": 0.01, "horizon": 0.2, "seed": 3, "n_paths": 30},
    }
    cfg = write_config(tmp_path, doc)
    for sub, threads in (("a", "1"), ("b", "2")):
        code, _, _ = run_cli(
            ["converge-cull", "--config", cfg, "--out", str(tmp_path / sub),
             "--threads", threads],
            capsys,
        )
        assert code == 0
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    header, rows = read_csv(tmp_path / "a" / "cull_convergence.csv")
    assert header == ["n", "mean_r", "se_r", "mean_r2", "se_r2"]
    assert [r[0] for r in rows] == ["2", "4", "limit"]


def test_converge_z_table(tmp_path, capsys):
    cfg = write_config(tmp_path, {
        "model": {"c1": 0.4, "c2": 0.4, "b11": [0.0, 0.3], "b12": [0.0, 0.5],
                  "b21": [0.0, 0.5]},
        "r0": 0.5,
        "ode": {"scaling": "linear", "z_list": [5.0, 50.0]},
        "path": {"dt": 0.01, "horizon": 0.5, "seed": 9, "n_paths": 60},
        "output": {"dir": str(tmp_path / "out")},
    })
    code, _, _ = run_cli(["converge-z", "--config", cfg], capsys)
    assert code == 0
    header, rows = read_csv(tmp_path / "out" / "z_convergence.csv")
    assert header == ["z", "mean_sup2", "se"]
    assert [r[0] for r in rows] == ["5.0", "50.0"]
    # more noise damping at larger z
    assert float(rows[1][1]) < float(rows[0][1])


def test_installed_script_runs(tmp_path):
    cfg = write_config(tmp_path, {
        "model": {}, "z": 1.0, "r0": 0.5,
        "path": {"dt": 0.05, "horizon": 0.2, "seed": 1},
        "output": {"dir": str(tmp_path / "out")},
    })
    proc = subprocess.run(
        ["freqsim", "simulate", "--config", cfg],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    assert report["command"] == "simulate"
    proc = subprocess.run(
        [sys.executable, "-m", "freqsim.cli", "bogus"], capture_output=True, text=True
    )
    assert proc.returncode == 2  # argparse rejects unknown subcommands
