"""Acceptance gate: one test per promised behavior, at the stated tolerance.

Every test prints a single [criterion N] PASS/FAIL line with the measured
quantity next to its gate, so a log scrape shows the whole scorecard.
Monte Carlo criteria use the frozen module seed; criterion 2 is allowed one
re-seed before it counts as a defect.
"""
import json
import math
import subprocess
import time

import numpy as np
import pytest

from freqsim.dual import build_rates, duality_check, generator_identity_residual
from freqsim.ode import (
    ModelFamily,
    find_equilibria,
    large_population_experiment,
    linear_case_closed_form,
    linear_limit_params,
    logistic_limit_params,
)
from freqsim.simulate import (
    StopBand,
    coupled_ensemble,
    culled_frequency_ensemble,
    culling_chain_ensemble,
    sample_moment,
)

SEED = 20260824


def _line(num, name, ok, detail):
    verdict = "PASS" if ok else "FAIL"
    print(f"[criterion {num}] {name}: {verdict} ({detail})")
    assert ok, f"criterion {num} {name}: {detail}"


def test_criterion_1_generator_identity(ref_params):
    t0 = time.perf_counter()
    grid = np.linspace(0.0, 1.0, 21)
    residual = generator_identity_residual(ref_params, 1.0, 6, grid)
    elapsed = time.perf_counter() - t0
    ok = residual <= 1e-9 and elapsed < 1.0
    _line(1, "generator identity", ok,
          f"max residual {residual:.3e} <= 1e-09, {elapsed:.3f}s < 1s")


def test_criterion_2_moment_duality(ref_params):
    t0 = time.perf_counter()
    results = []
    for n0 in (1, 2, 3):
        for attempt, seed in enumerate((SEED, SEED + 1)):
            rep = duality_check(
                ref_params, 1.0, 0.6, n0, 0.5, 50_000, seed + 10 * n0, dt=5e-4
            )
            if rep.z_score <= 3.0:
                break
        results.append((n0, rep.z_score, attempt))
    elapsed = time.perf_counter() - t0
    ok = all(z <= 3.0 for _, z, _ in results) and elapsed < 300.0
    detail = ", ".join(
        f"n0={n0}: z={z:.2f}" + (" (re-seeded)" if a else "") for n0, z, a in results
    )
    _line(2, "Monte Carlo moment duality", ok, f"{detail}; {elapsed:.0f}s < 300s")


def test_criterion_3_culling_convergence(ref_params):
    band = StopBand(1e-6, 1e6)
    direct = culled_frequency_ensemble(
        ref_params, 1.0, 0.6, horizon=0.5, dt=1e-3, n_paths=10_000, seed=SEED
    )
    gaps = {1: [], 2: []}
    ses = {1: [], 2: []}
    for i, n in enumerate((4, 16, 64)):
        chain = culling_chain_ensemble(
            ref_params, 1.0, 0.6, float(n),
            horizon=0.5, dt=1e-3, band=band, n_paths=10_000, seed=SEED, region=3 + i,
        )
        for order in (1, 2):
            cm, cse = sample_moment(chain.r, order)
            dm, dse = sample_moment(direct.r, order)
            gaps[order].append(abs(cm - dm))
            ses[order].append(math.hypot(cse, dse))
    ok = True
    details = []
    for order in (1, 2):
        g, s = gaps[order], ses[order]
        for k in (1, 2):
            # slack: combined standard error of the two gap estimates
            slack = 2.0 * math.hypot(s[k - 1], s[k])
            ok = ok and g[k] <= g[k - 1] + slack
        details.append("f=r" + ("" if order == 1 else "^2")
                       + " gaps " + "/".join(f"{v:.4f}" for v in g))
    _line(3, "culling convergence", ok,
          "; ".join(details) + " non-increasing up to 2 combined SE")


def test_criterion_4_large_population_limit(ref_params):
    family = ModelFamily(ref_params, "linear")
    rows = large_population_experiment(
        family, 0.6, 1.0, (10.0, 100.0, 1000.0), dt=1e-3, n_paths=1000, seed=SEED
    )
    (z1, m1, s1), (z2, m2, s2), (z3, m3, s3) = rows
    drop_12 = m1 - m2 > 2.0 * math.hypot(s1, s2)
    drop_23 = m2 - m3 > 2.0 * math.hypot(s2, s3)
    quarter = m3 <= 0.25 * m1
    ok = drop_12 and drop_23 and quarter
    _line(4, "large-population limit", ok,
          f"sup2 means {m1:.4g} > {m2:.4g} > {m3:.4g} beyond 2 SE, "
          f"z=1000 at {m3 / m1:.3f} of z=10 <= 0.25")


# representative (d1, d2, d3) triples, one per enumerated linear case
LINEAR_CASES = {
    "1a": (-1.0, 0.0, 0.0),
    "1b": (1.0, 0.0, 0.0),
    "1c": (-0.5, 0.0, 1.0),
    "1d": (0.5, 1.0, 0.0),
    "1e": (1.0, 0.0, 1.0),
    "1f": (-1.0, 1.0, 0.0),
    "1g": (0.3, 1.0, 1.0),
    "2a": (-1.0, 0.0, 1.0),
    "2b": (1.0, 1.0, 0.0),
    "2c": (0.0, 1.0, 1.0),
}


def test_criterion_5_linear_equilibrium_table():
    t0 = time.perf_counter()
    worst = 0.0
    ok = True
    for label, (d1, d2, d3) in LINEAR_CASES.items():
        closed = linear_case_closed_form(d1, d2, d3)
        numeric = find_equilibria(linear_limit_params(d1, d2, d3))
        ok = ok and closed.case_label == label
        ok = ok and len(closed.equilibria) == len(numeric.equilibria)
        if not ok:
            break
        for (lc, sc), (ln, sn) in zip(closed.equilibria, numeric.equilibria):
            worst = max(worst, abs(lc - ln))
            ok = ok and abs(lc - ln) <= 1e-8 and sc == sn
    symmetric = linear_case_closed_form(0.0, 1.0, 1.0)
    ok = ok and symmetric.equilibria == ((0.5, "stable"),)
    elapsed = time.perf_counter() - t0
    _line(5, "linear equilibrium table", ok,
          f"10 cases agree, worst gap {worst:.2e} <= 1e-08, symmetric root exactly "
          f"0.5 stable, {elapsed:.3f}s < 1s")
    assert elapsed < 1.0


def test_criterion_6_logistic_equilibria():
    stable = find_equilibria(logistic_limit_params(-2.0, -1.5))
    unstable = find_equilibria(logistic_limit_params(2.0, 1.5))

    def interior(report):
        return [(r, s) for r, s in report.equilibria if 0.0 < r < 1.0]

    ok = interior(stable) == [(pytest.approx(0.75, abs=1e-9), "stable")]
    ok = ok and interior(unstable) == [(pytest.approx(0.75, abs=1e-9), "unstable")]
    none_cases = [(1.0, 1.5), (-1.0, -1.0), (2.0, 2.0), (-0.5, -3.0)]
    for d1, d2 in none_cases:
        ok = ok and not interior(find_equilibria(logistic_limit_params(d1, d2)))
    _line(6, "logistic equilibria", ok,
          "0.75 stable for (-2,-1.5), 0.75 unstable for (2,1.5), "
          f"no interior point in {len(none_cases)} |d1|<=|d2| cases")


def test_criterion_7_range_invariant(ref_params):
    coarse = culled_frequency_ensemble(
        ref_params, 1.0, 0.6, horizon=0.5, dt=1e-3, n_paths=1000, seed=SEED
    )
    fine = culled_frequency_ensemble(
        ref_params, 1.0, 0.6, horizon=0.5, dt=2.5e-4, n_paths=1000, seed=SEED
    )
    shrink_ok = fine.max_overshoot <= 0.5 * coarse.max_overshoot
    ok = (
        coarse.jump_exit_count == 0
        and coarse.max_overshoot <= 1e-2
        and coarse.clamp_count >= 1  # otherwise the shrink ratio is vacuous
        and shrink_ok
    )
    _line(7, "range invariant", ok,
          f"jump exits {coarse.jump_exit_count} == 0, overshoot "
          f"{coarse.max_overshoot:.2e} <= 1e-02, quartered dt gives "
          f"{fine.max_overshoot:.2e} (>= 2x shrink)")


def test_criterion_8_lipschitz_initial_condition(ref_params):
    khats = []
    for i, delta in enumerate((0.2, 0.1, 0.05)):
        r0, s0 = 0.5 - delta / 2.0, 0.5 + delta / 2.0
        r, s = coupled_ensemble(
            ref_params, 1.0, r0, s0,
            horizon=0.5, dt=1e-3, n_pairs=10_000, seed=SEED, region=3 + i,
        )
        khats.append(float(np.abs(r - s).mean()) / delta)
    spread = max(khats) / min(khats)
    ok = spread <= 2.0
    _line(8, "Lipschitz in the initial condition", ok,
          "K-hat " + "/".join(f"{k:.3f}" for k in khats)
          + f", spread factor {spread:.2f} <= 2")


def test_criterion_9_cli_determinism(tmp_path):
    doc = {
        "model": {
            "c1": 0.5, "c2": 0.25, "eta1": 0.3, "eta2": 0.1,
            "b11": [0.0, 0.4], "b12": [0.0, 0.2], "b21": [0.0, 0.05],
            "b22": [0.0, 0.1],
            "mu1": [[1.0, 0.0, 0.3]], "mu2": [[0.0, 0.5, 0.2]],
            "nu": [[0.2, 0.1, 0.5]],
        },
        "z": 1.0, "r0": 0.6,
        "path": {"dt": 0.005, "horizon": 0.3, "seed": SEED, "n_paths": 50},
    }
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(doc))
    payload = {}
    for sub in ("a", "b"):
        outdir = tmp_path / sub
        proc = subprocess.run(
            ["freqsim", "simulate", "--config", str(cfg), "--out", str(outdir)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        payload[sub] = {f.name: f.read_bytes() for f in sorted(outdir.iterdir())}
    ok = payload["a"] == payload["b"] and len(payload["a"]) == 4
    _line(9, "CLI determinism", ok,
          f"{len(payload['a'])} output files byte-identical across repeated runs")
