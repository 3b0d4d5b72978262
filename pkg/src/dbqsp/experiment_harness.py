"""Named, seeded experiments. Every experiment is a pure function of its
config dict, emits sorted CSV rows (byte-identical re-run to re-run) plus a
pass/fail summary, and evaluates each asserted bound next to its measurement.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .dbqsp_engine import (
    EigenstateBreakdown,
    dbqsp_run,
    depth_exact,
    exact_qsp,
    gc_step,
    postselect_success_prob,
    replay_with_params,
    stability_bounds,
    step_params,
)
from .pauli_algebra import Observable, observable_from_dense, one_norm, random_observable, to_dense
from .poly_toolkit import PolynomialSpec, apply_poly_oracle, hermitian_dilation, inverse_approx
from .sampling_estimators import (
    ShotAllocation,
    allocate_shots,
    allocation_cap,
    estimator_variance_formula,
    resample_estimators,
    true_expectations,
)
from .statevector import (
    StateVector,
    apply_evolution,
    apply_reflection,
    energy_stats,
    state_distance,
)


@dataclass(frozen=True)
class ExperimentResult:
    experiment: str
    rows: list[dict]
    summary: dict
    provenance: str

    @property
    def passed(self) -> bool:
        return bool(self.summary.get("pass", False))

    def write_csv(self, path: str) -> None:
        if not self.rows:
            raise ValueError("no rows to write")
        columns = list(self.rows[0].keys())
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(columns)
            for row in self.rows:
                writer.writerow([_format_cell(row[c]) for c in columns])

    def write_summary(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(
                {"experiment": self.experiment, "pass": self.passed,
                 "provenance": self.provenance, **self.summary},
                fh, indent=2, sort_keys=True,
            )
            fh.write("\n")


def _format_cell(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def config_hash(config: dict) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True).encode()).hexdigest()[:16]


def _merge_config(defaults: dict, config: Optional[dict]) -> dict:
    merged = dict(defaults)
    if config:
        unknown = set(config) - set(defaults)
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        merged.update(config)
    return merged


def _instance_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def _random_roots(rng: np.random.Generator, degree: int) -> tuple[complex, ...]:
    roots = []
    for _ in range(degree):
        if rng.random() < 0.4:
            roots.append(complex(rng.uniform(-1.5, 1.5)))
        else:
            roots.append(
                complex(rng.uniform(-1.0, 1.0), rng.choice([-1, 1]) * rng.uniform(0.05, 0.6))
            )
    return tuple(roots)


def _map_cells(fn: Callable, cells: list, jobs: int) -> list:
    if jobs <= 1 or len(cells) <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cells))


def verify_exact_synthesis(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """Random-ensemble check that the exact recursion reproduces the dense
    polynomial oracle, with the per-step duration bound alongside."""
    cfg = _merge_config(
        {"seed": 0, "instances": 100, "n_min": 2, "n_max": 6, "max_degree": 6, "tolerance": 1e-9},
        config,
    )

    def run_cell(idx: int) -> dict:
        rng = _instance_rng(cfg["seed"], idx)
        n = int(rng.integers(cfg["n_min"], cfg["n_max"] + 1))
        H = random_observable(n, int(rng.integers(2, 2 * n + 2)), rng)
        state = StateVector.random(n, rng)
        degree = int(rng.integers(1, cfg["max_degree"] + 1))
        poly = PolynomialSpec(1.0, _random_roots(rng, degree))
        try:
            rep = exact_qsp(state, H, poly)
        except EigenstateBreakdown as e:
            return {"instance": idx, "n": n, "degree": degree, "dist_raw": float("nan"),
                    "dist_aligned": float("nan"), "min_duration_margin": float("nan"),
                    "expected_failure": True, "pass": True, "note": f"eigenstate at step {e.step}"}
        margins = [
            1.0 / abs(s.energy - s.root) - abs(s.duration)
            for s in rep.steps
            if abs(s.energy - s.root) > 1e-9
        ]
        ok = rep.oracle_distance_raw < cfg["tolerance"] and all(m >= -1e-9 for m in margins)
        return {"instance": idx, "n": n, "degree": degree,
                "dist_raw": rep.oracle_distance_raw, "dist_aligned": rep.oracle_distance_aligned,
                "min_duration_margin": min(margins) if margins else float("inf"),
                "expected_failure": False, "pass": ok, "note": ""}

    rows = _map_cells(run_cell, list(range(cfg["instances"])), jobs)
    rows.sort(key=lambda r: r["instance"])
    n_pass = sum(r["pass"] for r in rows)
    summary = {
        "pass": n_pass == len(rows),
        "instances": len(rows),
        "passed": n_pass,
        "tolerance": cfg["tolerance"],
        "worst_distance": max((r["dist_raw"] for r in rows if not r["expected_failure"]), default=0.0),
    }
    return ExperimentResult("verify_exact_synthesis", rows, summary, config_hash(cfg))


def gc_error_scaling(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """Distance of the group-commutator compilation to the exact recursion as
    a function of N: fitted log-log slope near -1/2, every point under the
    (4/3) sqrt(zeta) (1+6 zeta)^K / sqrt(N) bound."""
    cfg = _merge_config(
        {"seed": 7, "instances": 5, "n_qubits": 2, "degree": 2,
         "n_powers": [2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12],
         "slope_window": [-0.6, -0.4]},
        config,
    )

    def run_cell(idx: int) -> list[dict]:
        rng = _instance_rng(cfg["seed"], idx)
        n = cfg["n_qubits"]
        H = random_observable(n, int(rng.integers(3, 6)), rng)
        state = StateVector.random(n, rng)
        poly = PolynomialSpec(1.0, _random_roots(rng, cfg["degree"]))
        ex = exact_qsp(state, H, poly)
        zeta = ex.zeta
        K = poly.degree
        out = []
        for p in cfg["n_powers"]:
            N = 2**p
            rep = dbqsp_run(state, H, poly, N)
            dist = state_distance(rep.final_state, ex.final_state)
            bound = 4.0 / 3.0 * math.sqrt(zeta) * (1 + 6 * zeta) ** K / math.sqrt(N)
            out.append({"instance": idx, "N": N, "dist": dist, "bound": bound,
                        "under_bound": dist <= bound, "zeta": zeta, "K": K})
        logs = np.log([r["N"] for r in out]), np.log([r["dist"] for r in out])
        slope = float(np.polyfit(logs[0], logs[1], 1)[0])
        for r in out:
            r["slope"] = slope
        return out

    cells = _map_cells(run_cell, list(range(cfg["instances"])), jobs)
    rows = [r for cell in cells for r in cell]
    rows.sort(key=lambda r: (r["instance"], r["N"]))
    lo, hi = cfg["slope_window"]
    slopes = sorted({r["instance"]: r["slope"] for r in rows}.items())
    ok = all(lo <= s <= hi for _, s in slopes) and all(r["under_bound"] for r in rows)
    summary = {"pass": ok, "slopes": [s for _, s in slopes], "slope_window": cfg["slope_window"],
               "all_under_bound": all(r["under_bound"] for r in rows)}
    return ExperimentResult("gc_error_scaling", rows, summary, config_hash(cfg))


def depth_accounting(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """Closed-form depth vs the unrolled recursion on the (K, N) grid, with
    run-counted depths from dbqsp_run on a small sub-grid."""
    cfg = _merge_config({"k_max": 4, "n_values": [1, 2, 4, 8, 16, 32], "seed": 2}, config)
    rows = []
    rng = _instance_rng(cfg["seed"], 0)
    H = random_observable(2, 4, rng)
    state = StateVector.random(2, rng)
    for K in range(cfg["k_max"] + 1):
        for N in cfg["n_values"]:
            closed = depth_exact(K, N)
            depth = 0
            for _ in range(K):
                depth = (4 * N + 3) * depth + 4 * N + 1
            counted = depth
            if K <= 2 and N <= 4 and K > 0:
                poly = PolynomialSpec(1.0, _random_roots(rng, K))
                counted = dbqsp_run(state, H, poly, N).total_depth
            rows.append({"K": K, "N": N, "closed_form": closed, "recursion": depth,
                         "counted": counted, "equal": closed == depth == counted})
    ok = all(r["equal"] for r in rows)
    spots = {(1, 1): 5, (2, 1): 40, (3, 1): 285}
    spot_ok = all(depth_exact(k, n) == v for (k, n), v in spots.items())
    summary = {"pass": ok and spot_ok, "grid_equal": ok, "spot_values_ok": spot_ok}
    return ExperimentResult("depth_accounting", rows, summary, config_hash(cfg))


def stability_experiments(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """(a) parameter perturbation vs the (1/(3 zeta))(1+6 zeta)^K bound,
    (b) Hamiltonian perturbation vs the (1/3)(1+6 zeta)^K bound,
    (c) sampled-estimation deviation vs shot budget (reported, not asserted)."""
    cfg = _merge_config(
        {"seed": 3, "deltas": [1e-3, 1e-2], "trials": 10, "k_max": 3, "n_qubits": 2,
         "shot_budgets": [1000, 10000, 100000, 1000000], "gc_repetitions": 64},
        config,
    )
    rng = _instance_rng(cfg["seed"], 0)
    n = cfg["n_qubits"]
    H = random_observable(n, 4, rng)
    state = StateVector.random(n, rng)
    rows = []
    for K in range(1, cfg["k_max"] + 1):
        poly = PolynomialSpec(1.0, _random_roots(rng, K))
        ex = exact_qsp(state, H, poly)
        zeta = ex.zeta
        params = [(s.duration, s.phase) for s in ex.steps]
        for delta in cfg["deltas"]:
            for trial in range(cfg["trials"]):
                trng = _instance_rng(cfg["seed"], 1000 + 97 * K + trial)
                perturbed = [
                    (s + trng.uniform(-delta, delta), t + trng.uniform(-delta, delta))
                    for s, t in params
                ]
                dev = state_distance(replay_with_params(state, H, perturbed), ex.final_state)
                bound = stability_bounds(K, zeta, delta_s=delta, delta_theta=delta)["parameter"]
                rows.append({"kind": "parameter", "K": K, "delta": delta, "trial": trial,
                             "deviation": dev, "bound": bound, "within": dev <= bound})
        for delta in cfg["deltas"]:
            for trial in range(cfg["trials"]):
                trng = _instance_rng(cfg["seed"], 2000 + 97 * K + trial)
                raw = trng.normal(size=(2**n, 2**n)) + 1j * trng.normal(size=(2**n, 2**n))
                herm = (raw + raw.conj().T) / 2
                herm *= delta / np.linalg.norm(herm, ord=2)
                H2 = observable_from_dense(to_dense(H) + herm)
                dev = state_distance(replay_with_params(state, H2, params), ex.final_state)
                bound = stability_bounds(K, zeta, delta_H=delta)["hamiltonian"]
                rows.append({"kind": "hamiltonian", "K": K, "delta": delta, "trial": trial,
                             "deviation": dev, "bound": bound, "within": dev <= bound})
    # (c) sampled estimation: deviation vs budget, sqrt-law reported only
    poly = PolynomialSpec(1.0, _random_roots(_instance_rng(cfg["seed"], 5), 2))
    N = cfg["gc_repetitions"]
    ref = dbqsp_run(state, H, poly, N)
    for trial, budget in enumerate(cfg["shot_budgets"]):
        alloc = ShotAllocation.uniform(H, budget)
        rep = dbqsp_run(state, H, poly, N, estimation="sampled", alloc=alloc,
                        seed=cfg["seed"] + trial)
        dev = state_distance(rep.final_state, ref.final_state)
        rows.append({"kind": "sampled", "K": poly.degree, "delta": float(budget), "trial": trial,
                     "deviation": dev, "bound": float("nan"), "within": True})
    asserted = [r for r in rows if r["kind"] in ("parameter", "hamiltonian")]
    ok = all(r["within"] for r in asserted)
    summary = {"pass": ok, "asserted_trials": len(asserted),
               "max_ratio": max(r["deviation"] / r["bound"] for r in asserted)}
    return ExperimentResult("stability_experiments", rows, summary, config_hash(cfg))


def _ising_chain(n: int, g: float) -> Observable:
    terms = []
    for i in range(n - 1):
        s = ["I"] * n
        s[i] = s[i + 1] = "Z"
        terms.append((1.0, "".join(s)))
    for i in range(n):
        s = ["I"] * n
        s[i] = "X"
        terms.append((g, "".join(s)))
    return Observable.from_terms(n, terms)


def qite_groundstate(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """Imaginary-time-style ground-state preparation by iterating the
    degree-1 filter H - alpha I (alpha above the spectrum, theta = 0 via the
    signed single-exponential branch), in exact mode and with the N=1
    group-commutator step that reduces to the three-exponential scheme."""
    cfg = _merge_config(
        {"seed": 4, "n_qubits": 4, "g": 1.0, "steps": 10, "alpha_margin": 0.01,
         "target_fidelity": 0.99},
        config,
    )
    n = cfg["n_qubits"]
    H = _ising_chain(n, cfg["g"])
    evals, evecs = np.linalg.eigh(to_dense(H))
    ground = evecs[:, 0]
    alpha = float(evals[-1]) + cfg["alpha_margin"]
    minus = np.array([1.0, -1.0]) / math.sqrt(2.0)
    amp = minus
    for _ in range(n - 1):
        amp = np.kron(amp, minus)
    state = StateVector.from_amplitudes(amp)
    gc_state = state
    poly = PolynomialSpec(1.0, (complex(alpha),))
    rows = []
    prev_e = energy_stats(state, H).energy
    prev_fid = abs(np.vdot(ground, state.amplitudes)) ** 2
    rows.append({"step": 0, "E": prev_e, "fidelity": prev_fid, "V": energy_stats(state, H).variance,
                 "E_gc": prev_e, "fidelity_gc": prev_fid, "three_exp_dist": 0.0,
                 "three_exp_bound": 0.0, "monotone": True})
    for step in range(1, cfg["steps"] + 1):
        rep = exact_qsp(state, H, poly, real_root_mode="signed")
        assert rep.steps[0].phase == 0.0
        state = rep.final_state
        stats = energy_stats(state, H)
        fid = abs(np.vdot(ground, state.amplitudes)) ** 2
        # GC trajectory: N=1, theta=0 four-exponential step, compared against
        # the cited three-exponential ordering e^{is'H} e^{is'psi} e^{-is'H}|psi>
        s, theta = step_params(energy_stats(gc_state, H), complex(alpha), real_root_mode="signed")
        assert theta == 0.0
        new_gc, _ = gc_step(gc_state, gc_state, H, s, theta, 1)
        sp = math.sqrt(abs(s))
        three = apply_evolution(gc_state, H, -sp)
        three = apply_reflection(three, gc_state, sp)
        three = apply_evolution(three, H, sp)
        three_dist = state_distance(new_gc, three, phase_aligned=True)
        three_bound = 16.0 * abs(s) ** 1.5
        gc_state = new_gc
        rows.append({"step": step, "E": stats.energy, "fidelity": fid, "V": stats.variance,
                     "E_gc": energy_stats(gc_state, H).energy,
                     "fidelity_gc": abs(np.vdot(ground, gc_state.amplitudes)) ** 2,
                     "three_exp_dist": three_dist, "three_exp_bound": three_bound,
                     "monotone": stats.energy < prev_e and fid >= prev_fid})
        prev_e, prev_fid = stats.energy, fid
    ok = (
        all(r["monotone"] for r in rows)
        and max(r["fidelity"] for r in rows) >= cfg["target_fidelity"]
        and all(r["three_exp_dist"] <= r["three_exp_bound"] for r in rows[1:])
    )
    summary = {"pass": ok, "final_fidelity": rows[-1]["fidelity"],
               "final_energy": rows[-1]["E"], "ground_energy": float(evals[0]),
               "alpha": alpha, "target_fidelity": cfg["target_fidelity"]}
    return ExperimentResult("qite_groundstate", rows, summary, config_hash(cfg))


def matrix_inversion_demo(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """Apply the odd inverse-approximation polynomial to a Hermitian dilation
    of A = diag(1, 1/kappa) and compare against the dense normalized A^{-1}b."""
    cfg = _merge_config(
        {"kappa": 2.0, "epsilon": 0.1, "b": [0.6, 0.8], "kappa_table": [1.5, 2.0, 3.0]},
        config,
    )
    kappa, eps = cfg["kappa"], cfg["epsilon"]
    _, spec = inverse_approx(kappa, eps)
    A = np.diag([1.0, 1.0 / kappa])
    dil = hermitian_dilation(A)
    Hobs = dil.to_observable()
    b = np.asarray(cfg["b"], dtype=float)
    # ancilla |0> block input (b, 0): H^{-1}(b, 0) = (0, A^{-1} b)
    inp = StateVector.from_amplitudes(np.concatenate([b, np.zeros_like(b)]))
    rep = exact_qsp(inp, Hobs, spec)
    target = StateVector.from_amplitudes(np.concatenate([np.zeros_like(b), np.linalg.inv(A) @ b]))
    dist = state_distance(rep.final_state, target, phase_aligned=True)
    tol = 2.0 * eps + 1e-6
    rows = [{"kappa": kappa, "epsilon": eps, "degree": spec.degree,
             "aligned_dist": dist, "tolerance": tol, "within": dist <= tol,
             "depth_n1": depth_exact(spec.degree, 1)}]
    for kt in cfg["kappa_table"]:
        _, st = inverse_approx(kt, eps)
        rows.append({"kappa": kt, "epsilon": eps, "degree": st.degree,
                     "aligned_dist": float("nan"), "tolerance": float("nan"), "within": True,
                     "depth_n1": depth_exact(st.degree, 1)})
    summary = {"pass": dist <= tol, "aligned_dist": dist, "tolerance": tol,
               "degree": spec.degree}
    return ExperimentResult("matrix_inversion_demo", rows, summary, config_hash(cfg))


def postselection_comparison(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """Post-selected QSP comparators for an imaginary-time-like filter on
    states with small ground overlap: success probability, the LCU per-step
    product, expected repetitions, against DB-QSP's overlap-independent depth."""
    cfg = _merge_config(
        {"gammas": [1e-3, 0.5], "gc_repetitions": 1, "alpha": 1.0}, config
    )
    H = Observable.from_terms(1, [(1.0, "Z")])
    poly = PolynomialSpec(0.5, (1.0,))  # (H - I)/2 annihilates the excited |0>
    rows = []
    norm_w = one_norm(H)
    for gamma in cfg["gammas"]:
        # ground state of Z is |1>; overlap gamma with the ground state
        state = StateVector.from_amplitudes([math.sqrt(1 - gamma), math.sqrt(gamma)])
        p_succ = postselect_success_prob(state, H, cfg["alpha"], poly)
        # LCU per-step product and its telescoped single-shot form
        dense = to_dense(H) / cfg["alpha"]
        v = state.amplitudes.copy()
        product = 1.0
        for z in poly.roots:
            new = dense @ v - z * v
            product *= float(np.vdot(new, new).real / np.vdot(v, v).real) / (abs(z) + norm_w) ** 2
            v = new
        single_shot = float(np.vdot(v, v).real) / np.prod(
            [(abs(z) + norm_w) ** 2 for z in poly.roots]
        )
        depth = depth_exact(poly.degree, cfg["gc_repetitions"])
        rows.append({"gamma": gamma, "p_succ": p_succ,
                     "expected_repetitions": 1.0 / p_succ if p_succ > 0 else float("inf"),
                     "lcu_step_product": product, "lcu_single_shot": single_shot,
                     "telescoping_err": abs(product - single_shot),
                     "dbqsp_depth": depth})
    small = min(rows, key=lambda r: r["gamma"])
    depths = {r["dbqsp_depth"] for r in rows}
    ok = (
        small["p_succ"] < 1e-2
        and len(depths) == 1
        and all(r["telescoping_err"] < 1e-12 for r in rows)
    )
    summary = {"pass": ok, "small_gamma_p_succ": small["p_succ"],
               "depth_values": sorted(depths)}
    return ExperimentResult("postselection_comparison", rows, summary, config_hash(cfg))


def estimator_validation(config: Optional[dict] = None, jobs: int = 1) -> ExperimentResult:
    """Monte-Carlo distributions of the three variance estimators on a seeded
    instance, with the closed-form variances alongside (plumbing for the
    estimator-distribution figures; the exhaustive assertions live in tests)."""
    cfg = _merge_config(
        {"seed": 5, "n_qubits": 2, "n_terms": 3, "shots": 50, "resamples": 20000}, config
    )
    rng = _instance_rng(cfg["seed"], 0)
    H = random_observable(cfg["n_qubits"], cfg["n_terms"], rng, normalize=False)
    state = StateVector.random(cfg["n_qubits"], rng)
    v_true = energy_stats(state, H).variance
    alloc = ShotAllocation.uniform(H, cfg["shots"])
    exp = true_expectations(state, H)
    draws = resample_estimators(H, exp, alloc, cfg["resamples"], seed=cfg["seed"])
    rows = []
    summary = {"pass": True, "true_variance": v_true, "shots": cfg["shots"],
               "resamples": cfg["resamples"]}
    for name, vals in sorted(draws.items()):
        formula = (
            float("nan")
            if name == "naive"
            else estimator_variance_formula(H, exp, alloc, name)
        )
        se = float(vals.std() / math.sqrt(vals.size))
        for q in (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99):
            rows.append({"estimator": name, "quantile": q,
                         "value": float(np.quantile(vals, q)),
                         "mean": float(vals.mean()), "std_error": se,
                         "empirical_var": float(vals.var()), "formula_var": formula,
                         "true_variance": v_true})
        summary[f"{name}_mean"] = float(vals.mean())
        summary[f"{name}_empirical_var"] = float(vals.var())
        if name != "naive":
            summary[f"{name}_formula_var"] = formula
            if abs(vals.mean() - v_true) > 4 * se:
                summary["pass"] = False
    return ExperimentResult("estimator_validation", rows, summary, config_hash(cfg))


EXPERIMENTS: dict[str, Callable[..., ExperimentResult]] = {
    "verify_exact_synthesis": verify_exact_synthesis,
    "gc_error_scaling": gc_error_scaling,
    "depth_accounting": depth_accounting,
    "stability_experiments": stability_experiments,
    "qite_groundstate": qite_groundstate,
    "matrix_inversion_demo": matrix_inversion_demo,
    "postselection_comparison": postselection_comparison,
    "estimator_validation": estimator_validation,
}


def run_experiment(name: str, config: Optional[dict] = None, output_dir: Optional[str] = None,
                   jobs: int = 1) -> ExperimentResult:
    if name not in EXPERIMENTS:
        raise KeyError(f"unknown experiment {name!r}")
    result = EXPERIMENTS[name](config, jobs=jobs)
    if output_dir is not None:
        os.makedirs(output_dir, exist_ok=True)
        result.write_csv(os.path.join(output_dir, f"{name}.csv"))
        result.write_summary(os.path.join(output_dir, f"{name}_summary.json"))
    return result
