"""Figure renderers, one per experiment CSV kind, plus the summary report.

Annotations (fitted slopes, margins) are computed from the loaded files, never
recomputed from first principles. Multiple input CSVs of the same kind overlay
on shared axes, labelled by file stem.
"""

from __future__ import annotations

import html
import json
import os
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, load_csv

plt.rcParams.update({"figure.dpi": 110, "font.size": 9, "axes.grid": True,
                     "grid.alpha": 0.3, "svg.hashsalt": "dbqsp"})

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def _stem(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def gc_slopes_from_csv(path: str) -> list[float]:
    """Per-instance least-squares slope of log(dist) vs log(N), from the CSV."""
    rows = load_csv(path, "gc_error_scaling")
    by_instance = defaultdict(list)
    for r in rows:
        by_instance[r["instance"]].append((r["N"], r["dist"]))
    slopes = []
    for inst in sorted(by_instance):
        pts = sorted(by_instance[inst])
        logn = np.log([n for n, _ in pts])
        logd = np.log([d for _, d in pts])
        slopes.append(float(np.polyfit(logn, logd, 1)[0]))
    return slopes


def _render_gc(datasets, ax):
    for di, (label, rows) in enumerate(datasets):
        by_instance = defaultdict(list)
        for r in rows:
            by_instance[r["instance"]].append(r)
        for inst in sorted(by_instance):
            pts = sorted(by_instance[inst], key=lambda r: r["N"])
            ns = [r["N"] for r in pts]
            ax.loglog(ns, [r["dist"] for r in pts], "o-", ms=3, lw=1,
                      color=_COLORS[(di + inst) % len(_COLORS)],
                      label=f"{label} inst {inst}" if len(datasets) > 1 else f"instance {inst}")
            if di == 0 and inst == min(by_instance):
                ax.loglog(ns, [r["bound"] for r in pts], "k--", lw=1, label="bound")
        ns_all = sorted({r["N"] for r in rows})
        anchor = max(r["dist"] for r in rows if r["N"] == ns_all[0])
        ref = [anchor * (n / ns_all[0]) ** -0.5 for n in ns_all]
        ax.loglog(ns_all, ref, ":", color="gray", lw=1.2,
                  label="reference slope $-1/2$" if di == 0 else None)
    slopes = []
    for label, rows in datasets:
        by_instance = defaultdict(list)
        for r in rows:
            by_instance[r["instance"]].append((r["N"], r["dist"]))
        for inst in sorted(by_instance):
            pts = sorted(by_instance[inst])
            slopes.append(float(np.polyfit(np.log([n for n, _ in pts]),
                                           np.log([d for _, d in pts]), 1)[0]))
    ax.set_xlabel("group-commutator repetitions N")
    ax.set_ylabel("distance to exact recursion")
    ax.set_title("fitted slopes: " + ", ".join(f"{s:.3f}" for s in slopes))
    ax.legend(fontsize=6, ncol=2)


def _render_verify(datasets, ax):
    for label, rows in datasets:
        dists = [r["dist_raw"] for r in rows if not r["expected_failure"]]
        ax.hist(np.log10(dists), bins=30, alpha=0.6, label=label)
    ax.axvline(-9, color="red", ls="--", lw=1, label="tolerance 1e-9")
    ax.set_xlabel("log10 oracle distance")
    ax.set_ylabel("instances")
    ax.set_title("exact synthesis: oracle distances")
    ax.legend(fontsize=7)


def _render_depth(datasets, ax):
    for label, rows in datasets:
        by_k = defaultdict(list)
        for r in rows:
            by_k[r["K"]].append((r["N"], r["closed_form"]))
        for K in sorted(by_k):
            pts = sorted(by_k[K])
            ax.semilogy([n for n, _ in pts], [max(d, 0.5) for _, d in pts], "o-",
                        ms=3, lw=1, label=f"{label + ' ' if len(datasets) > 1 else ''}K={K}")
        mismatches = sum(1 - r["equal"] for r in rows)
        ax.set_title(f"depth closed form vs recursion ({mismatches} mismatches)")
    ax.set_xlabel("N")
    ax.set_ylabel("circuit depth")
    ax.legend(fontsize=7)


def _render_stability(datasets, ax):
    markers = {"parameter": "o", "hamiltonian": "s", "sampled": "x"}
    for label, rows in datasets:
        for kind in sorted({r["kind"] for r in rows}):
            sel = [r for r in rows if r["kind"] == kind]
            devs = [r["deviation"] for r in sel]
            bounds = [r["bound"] for r in sel]
            if kind == "sampled":
                continue
            ax.scatter(bounds, devs, s=12, marker=markers[kind],
                       label=f"{label + ' ' if len(datasets) > 1 else ''}{kind}")
    lims = ax.get_xlim()
    grid = np.linspace(max(lims[0], 1e-12), lims[1], 50)
    ax.plot(grid, grid, "k--", lw=1, label="deviation = bound")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("stability bound")
    ax.set_ylabel("measured deviation")
    ax.set_title("perturbation deviation vs bound")
    ax.legend(fontsize=7)


def _render_qite(datasets, ax):
    ax2 = ax.twinx()
    ax2.grid(False)
    for label, rows in datasets:
        steps = [r["step"] for r in rows]
        pre = label + " " if len(datasets) > 1 else ""
        ax.plot(steps, [r["E"] for r in rows], "o-", ms=3, label=f"{pre}energy (exact)")
        ax.plot(steps, [r["E_gc"] for r in rows], "s--", ms=3, label=f"{pre}energy (compiled)")
        ax2.plot(steps, [r["fidelity"] for r in rows], "^-", ms=3, color="green",
                 label=f"{pre}ground fidelity")
    ax.set_xlabel("step")
    ax.set_ylabel("energy")
    ax2.set_ylabel("ground-state fidelity")
    ax2.set_ylim(0, 1.02)
    h1, l1 = ax.get_legend_handles_labels()
    h2, l2 = ax2.get_legend_handles_labels()
    ax.legend(h1 + h2, l1 + l2, fontsize=7, loc="center right")
    ax.set_title("imaginary-time ground-state preparation")


def _render_invert(datasets, ax):
    for label, rows in datasets:
        demo = [r for r in rows if r["aligned_dist"] == r["aligned_dist"]]  # non-NaN
        for r in demo:
            ax.bar([f"dist (κ={r['kappa']})", "tolerance"],
                   [r["aligned_dist"], r["tolerance"]],
                   color=["tab:blue", "tab:red"], alpha=0.7)
        table = sorted((r["kappa"], r["degree"], r["depth_n1"]) for r in rows)
        text = "\n".join(f"κ={k:g}: degree {d}, depth {p}" for k, d, p in table)
        ax.text(0.98, 0.95, text, transform=ax.transAxes, ha="right", va="top",
                fontsize=7, bbox=dict(fc="white", alpha=0.8))
    ax.set_ylabel("aligned distance")
    ax.set_title("matrix inversion: achieved distance vs tolerance")


def _render_compare(datasets, ax):
    for label, rows in datasets:
        gammas = [f"γ={r['gamma']:g}" for r in rows]
        ax.bar(gammas, [max(r["p_succ"], 1e-12) for r in rows], alpha=0.7, label=label)
        for x, r in enumerate(rows):
            ax.text(x, max(r["p_succ"], 1e-12) * 1.1,
                    f"depth={r['dbqsp_depth']}", ha="center", fontsize=7)
    ax.set_yscale("log")
    ax.set_ylabel("post-selection success probability")
    ax.set_title("post-selected comparator vs overlap (depth is overlap-independent)")
    if len(datasets) > 1:
        ax.legend(fontsize=7)


def _render_estimator(datasets, ax):
    for label, rows in datasets:
        by_est = defaultdict(list)
        for r in rows:
            by_est[r["estimator"]].append((r["quantile"], r["value"]))
        for est in sorted(by_est):
            pts = sorted(by_est[est])
            pre = label + " " if len(datasets) > 1 else ""
            ax.plot([q for q, _ in pts], [v for _, v in pts], "o-", ms=3, label=f"{pre}{est}")
        truth = rows[0]["true_variance"]
        ax.axhline(truth, color="black", ls="--", lw=1, label="true variance")
    ax.set_xlabel("quantile")
    ax.set_ylabel("estimator value")
    ax.set_title("variance estimator sampling distributions")
    ax.legend(fontsize=7)


RENDERERS = {
    "verify_exact_synthesis": _render_verify,
    "gc_error_scaling": _render_gc,
    "depth_accounting": _render_depth,
    "stability_experiments": _render_stability,
    "qite_groundstate": _render_qite,
    "matrix_inversion_demo": _render_invert,
    "postselection_comparison": _render_compare,
    "estimator_validation": _render_estimator,
}


def render(kind: str, inputs: list[str], out: str) -> None:
    if kind not in RENDERERS:
        raise SchemaError(f"unknown kind {kind!r}; known: {sorted(RENDERERS)}")
    datasets = [(_stem(path), load_csv(path, kind)) for path in inputs]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    try:
        RENDERERS[kind](datasets, ax)
        fig.tight_layout()
        fig.savefig(out)
    finally:
        plt.close(fig)


def render_report(inputs: list[str], out: str, figure_dir: str | None = None) -> None:
    """One HTML page with every summary's pass/fail and numeric margins, plus
    thumbnails when a sibling figure directory is supplied."""
    summaries = []
    for path in inputs:
        try:
            with open(path) as fh:
                summaries.append(json.load(fh))
        except (OSError, json.JSONDecodeError) as e:
            raise SchemaError(f"{path}: {e}")
    if not summaries:
        raise SchemaError("no summary files given")
    parts = ["<html><head><title>dbqsp experiment report</title><style>",
             "table{border-collapse:collapse}td,th{border:1px solid #999;padding:4px 8px}",
             ".pass{background:#d8f5d8}.fail{background:#f5d8d8;font-weight:bold}",
             "</style></head><body><h1>dbqsp experiment report</h1><table>",
             "<tr><th>experiment</th><th>status</th><th>margins</th></tr>"]
    for s in sorted(summaries, key=lambda s: s.get("experiment", "")):
        name = html.escape(str(s.get("experiment", "?")))
        ok = bool(s.get("pass"))
        margins = {k: v for k, v in s.items()
                   if k not in ("experiment", "pass", "provenance")
                   and isinstance(v, (int, float, bool))}
        body = "<br>".join(
            f"{html.escape(k)} = {v:.6g}" if isinstance(v, float) else f"{html.escape(k)} = {v}"
            for k, v in sorted(margins.items())
        )
        cls = "pass" if ok else "fail"
        status = "PASS" if ok else "FAIL (bound violated)"
        parts.append(f'<tr class="{cls}"><td>{name}</td><td>{status}</td><td>{body}</td></tr>')
    parts.append("</table>")
    if figure_dir and os.path.isdir(figure_dir):
        for fn in sorted(os.listdir(figure_dir)):
            if fn.endswith((".png", ".svg")):
                parts.append(f'<h2>{html.escape(fn)}</h2><img src="{html.escape(fn)}" width="640">')
    parts.append("</body></html>")
    with open(out, "w") as fh:
        fh.write("\n".join(parts) + "\n")
