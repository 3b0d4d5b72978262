"""End-to-end acceptance suite: one test per headline claim, at the stated
tolerances. These are the gates; unit-level coverage lives in the per-module
test files."""

import math
import subprocess
import sys
import time

import numpy as np
import pytest

from dbqsp.experiment_harness import run_experiment
from dbqsp.pauli_algebra import random_observable, to_dense
from dbqsp.sampling_estimators import (
    ShotAllocation,
    allocate_shots,
    allocation_cap,
    estimator_variance_formula,
    resample_estimators,
    true_expectations,
)
from dbqsp.statevector import StateVector, energy_stats


def test_exact_synthesis_100_instances_under_60s():
    t0 = time.time()
    result = run_experiment("verify_exact_synthesis")
    elapsed = time.time() - t0
    real = [r for r in result.rows if not r["expected_failure"]]
    assert len(result.rows) == 100
    assert all(r["dist_raw"] < 1e-9 for r in real)
    assert result.passed
    assert elapsed < 60.0


def test_effective_idempotence_200_triples():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 7))
        H = random_observable(n, int(rng.integers(2, 2 * n + 2)), rng)
        psi = StateVector.random(n, rng)
        v = StateVector.random(n, rng).amplitudes
        proj = np.outer(psi.amplitudes, psi.amplitudes.conj())
        W = proj @ to_dense(H) - to_dense(H) @ proj
        V = energy_stats(psi, H).variance
        residual = W @ W @ (W @ v) + V * (W @ v)
        assert np.linalg.norm(residual) < 1e-10


def test_gc_convergence_order_under_5min():
    t0 = time.time()
    result = run_experiment("gc_error_scaling", jobs=4)
    elapsed = time.time() - t0
    assert len(result.summary["slopes"]) >= 5
    assert all(-0.6 <= s <= -0.4 for s in result.summary["slopes"])
    assert all(r["under_bound"] for r in result.rows)
    assert max(r["N"] for r in result.rows) == 4096
    assert elapsed < 300.0


def test_depth_ledger_full_grid_and_spots():
    result = run_experiment(
        "depth_accounting", {"k_max": 4, "n_values": list(range(1, 33))}
    )
    assert all(r["equal"] for r in result.rows)
    assert result.summary["spot_values_ok"]
    assert result.passed


def test_duration_bound_every_accepted_step():
    result = run_experiment("verify_exact_synthesis")
    real = [r for r in result.rows if not r["expected_failure"]]
    # min_duration_margin is min over steps of 1/|E-z| - |s| where |E-z| > 1e-9
    assert all(r["min_duration_margin"] >= -1e-9 for r in real)


def test_parameter_stability_every_trial():
    result = run_experiment("stability_experiments")
    param_rows = [r for r in result.rows if r["kind"] == "parameter"]
    assert {r["delta"] for r in param_rows} == {1e-3, 1e-2}
    assert max(r["K"] for r in param_rows) == 3
    assert all(r["within"] for r in param_rows)


def test_estimator_suite_at_1e5_resamples_under_10min():
    t0 = time.time()
    rng = np.random.default_rng(8)
    H = random_observable(2, 3, rng, normalize=False)
    state = StateVector.random(2, rng)
    v_true = energy_stats(state, H).variance
    alloc = ShotAllocation.uniform(H, 60)
    exp = true_expectations(state, H)
    draws = resample_estimators(H, exp, alloc, 100_000, seed=8)
    for name in ("unbiased", "alternative"):
        vals = draws[name]
        se = vals.std() / math.sqrt(vals.size)
        assert abs(vals.mean() - v_true) <= 4 * se
        formula = estimator_variance_formula(H, exp, alloc, name)
        assert abs(vals.var() / formula - 1.0) <= 0.05
    w = H.weights
    bias = sum(w[i] ** 2 * (1 - exp["singles"][i] ** 2) / n for i, n in alloc.singles.items())
    naive = draws["naive"]
    se = naive.std() / math.sqrt(naive.size)
    assert abs(naive.mean() - (v_true - bias)) <= 4 * se
    assert time.time() - t0 < 600.0


def test_shot_allocation_kkt_and_total_cap():
    rng = np.random.default_rng(9)
    H = random_observable(3, 4, rng, normalize=False)
    eps = 0.05
    alloc, total = allocate_shots(H, eps)
    w = np.abs(H.weights)
    # proportionality within rounding for all streams above the floor
    ratios = []
    for (i, j), n in alloc.joints.items():
        f = w[i] * w[j]
        if n > 2 and f > 0:
            ratios.append(n / f)
    for (i, j), n in alloc.pairs.items():
        f = w[i] * w[j]
        if n > 2 and f > 0:
            ratios.append(n / f)
    assert max(ratios) / min(ratios) <= 1.05
    # ideal (pre-rounding) total bounded by (4/eps^2)(sum |w|)^4
    pair_f = sum(w[i] * w[j] for i, j in alloc.pairs)
    joint_f = sum(w[i] * w[j] for i, j in alloc.joints)
    ideal_total = (pair_f + joint_f) ** 2 / eps**2
    assert ideal_total <= allocation_cap(H, eps) + 1e-9
    # achieved variance at the planning guess meets the target
    zero = {"singles": {i: 0.0 for i in alloc.singles},
            "pairs": {ij: 0.0 for ij in alloc.pairs}}
    assert estimator_variance_formula(H, zero, alloc, "alternative") <= eps**2


def test_dbqite_ising_ground_state():
    result = run_experiment("qite_groundstate")
    energies = [r["E"] for r in result.rows]
    assert all(b < a for a, b in zip(energies, energies[1:]))
    assert any(r["fidelity"] >= 0.99 and r["step"] <= 10 for r in result.rows)
    # the N=1, theta=0 compiled step reproduces the three-exponential form
    assert all(r["three_exp_dist"] <= r["three_exp_bound"] for r in result.rows[1:])
    assert result.passed


def test_matrix_inversion_within_2eps():
    result = run_experiment("matrix_inversion_demo")
    row = result.rows[0]
    assert row["kappa"] == 2.0 and row["epsilon"] == 0.1
    assert row["aligned_dist"] <= 2 * 0.1
    assert result.passed


def test_postselection_contrast():
    result = run_experiment("postselection_comparison")
    by_gamma = {r["gamma"]: r for r in result.rows}
    assert by_gamma[1e-3]["p_succ"] < 1e-2
    assert by_gamma[1e-3]["dbqsp_depth"] == by_gamma[0.5]["dbqsp_depth"]
    assert result.passed


def test_figures_render_and_report(tmp_path):
    pytest.importorskip("dbqsp_figures")
    csv_dir = tmp_path / "csv"
    names = [
        "verify_exact_synthesis", "gc_error_scaling", "depth_accounting",
        "stability_experiments", "qite_groundstate", "matrix_inversion_demo",
        "postselection_comparison", "estimator_validation",
    ]
    slopes = None
    for name in names:
        result = run_experiment(name, output_dir=str(csv_dir), jobs=4)
        if name == "gc_error_scaling":
            slopes = result.summary["slopes"]
    fig_dir = tmp_path / "fig"
    fig_dir.mkdir()
    for name in names:
        out = fig_dir / f"{name}.png"
        proc = subprocess.run(
            [sys.executable, "-m", "dbqsp_figures.cli", "--kind", name,
             "--in", str(csv_dir / f"{name}.csv"), "--out", str(out)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        assert out.exists() and out.stat().st_size > 0
    # annotated slope is computed from the CSV and matches the harness value
    from dbqsp_figures.render import gc_slopes_from_csv

    csv_slopes = gc_slopes_from_csv(str(csv_dir / "gc_error_scaling.csv"))
    assert len(csv_slopes) == len(slopes)
    for a, b in zip(csv_slopes, slopes):
        assert round(a, 3) == round(b, 3)
    # the report page lists every headline margin
    report = tmp_path / "report.html"
    proc = subprocess.run(
        [sys.executable, "-m", "dbqsp_figures.cli", "--kind", "report",
         "--in", *[str(csv_dir / f"{n}_summary.json") for n in names],
         "--out", str(report)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    text = report.read_text()
    for name in names:
        assert name in text
    # schema mismatch exits nonzero with a column diagnostic
    proc = subprocess.run(
        [sys.executable, "-m", "dbqsp_figures.cli", "--kind", "gc_error_scaling",
         "--in", str(csv_dir / "depth_accounting.csv"), "--out", str(fig_dir / "x.png")],
        capture_output=True, text=True,
    )
    assert proc.returncode != 0
    assert "column" in (proc.stderr + proc.stdout).lower()
