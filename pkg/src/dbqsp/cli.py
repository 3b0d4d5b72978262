"""Command-line entry point. Parses a YAML config plus dotted --set
overrides, echoes the effective config as JSON into the output directory (the
echo is the reproducibility artifact), dispatches experiments or one-off runs,
and maps outcomes to stable exit codes: 0 pass, 1 assertion failure, 2 usage,
3 resource cap.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional

import numpy as np
import yaml

from .dbqsp_engine import EigenstateBreakdown, dbqsp_run, exact_qsp
from .experiment_harness import EXPERIMENTS, config_hash, run_experiment
from .pauli_algebra import Observable, ResourceCapError, random_observable
from .poly_toolkit import PolynomialSpec
from .statevector import StateVector

EXIT_PASS = 0
EXIT_ASSERTION = 1
EXIT_USAGE = 2
EXIT_RESOURCE = 3

SUBCOMMAND_EXPERIMENTS = {
    "verify": ["verify_exact_synthesis"],
    "sweep": ["gc_error_scaling", "depth_accounting", "stability_experiments"],
    "estimate": ["estimator_validation"],
    "qite": ["qite_groundstate"],
    "invert": ["matrix_inversion_demo"],
    "compare": ["postselection_comparison"],
}


class UsageError(Exception):
    pass


def _parse_scalar(text: str):
    for cast in (int, float):  # YAML 1.1 rejects floats like "1e-20"
        try:
            return cast(text)
        except ValueError:
            pass
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError:
        return text


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise UsageError(f"malformed config {path}{where}: {getattr(e, 'problem', e)}")
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"config root must be a mapping, got {type(data).__name__}")
    return data


def apply_overrides(config: dict, overrides: list[str], subcommand: str) -> dict:
    """Apply dotted key=value overrides; a leading '<subcommand>.' prefix is
    accepted and stripped so overrides can name the tree they target."""
    out = json.loads(json.dumps(config))  # deep copy, JSON-safe
    for item in overrides:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        parts = key.split(".")
        if parts[0] == subcommand and len(parts) > 1:
            parts = parts[1:]
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise UsageError(f"override {key!r} descends through a non-mapping")
        node[parts[-1]] = _parse_scalar(value)
    return out


def _echo_config(config: dict, subcommand: str, output_dir: str) -> None:
    os.makedirs(output_dir, exist_ok=True)
    with open(os.path.join(output_dir, f"{subcommand}_config.json"), "w") as fh:
        json.dump({"subcommand": subcommand, "config": config,
                   "provenance": config_hash(config)}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _rows_to_json(path: str, rows: list[dict]) -> None:
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def _run_experiments(names: list[str], config: dict, args) -> int:
    worst = EXIT_PASS
    for name in names:
        sub_cfg = config.get(name, {k: v for k, v in config.items() if k not in EXPERIMENTS})
        if args.seed is not None:
            sub_cfg = {**sub_cfg, "seed": args.seed}
        try:
            result = run_experiment(name, sub_cfg or None, output_dir=args.output, jobs=args.jobs)
        except KeyError as e:
            raise UsageError(f"{name}: {e.args[0]}")
        if args.format == "json":
            _rows_to_json(os.path.join(args.output, f"{name}.json"), result.rows)
        status = "PASS" if result.passed else "FAIL"
        print(f"{name}: {status}  rows={len(result.rows)}  provenance={result.provenance}")
        if not result.passed:
            worst = EXIT_ASSERTION
    return worst


def _build_observable(spec, default_seed: int) -> Observable:
    if isinstance(spec, str):
        with open(spec) as fh:
            return Observable.from_json_dict(json.load(fh))
    if isinstance(spec, dict) and "random" in spec:
        r = spec["random"]
        rng = np.random.default_rng(r.get("seed", default_seed))
        return random_observable(r["n_qubits"], r.get("n_terms", 4), rng)
    if isinstance(spec, dict):
        return Observable.from_json_dict(spec)
    raise UsageError("config key 'observable' must be a path, inline dict, or {random: {...}}")


def _build_state(spec, n_qubits: int, default_seed: int) -> StateVector:
    if spec == "plus" or spec is None:
        return StateVector.plus(n_qubits)
    if spec == "random":
        return StateVector.random(n_qubits, np.random.default_rng(default_seed))
    if isinstance(spec, str):
        with open(spec) as fh:
            return StateVector.from_json_dict(json.load(fh))
    if isinstance(spec, dict):
        return StateVector.from_json_dict(spec)
    raise UsageError("config key 'state' must be 'plus', 'random', a path, or an inline dict")


def _build_poly(spec) -> PolynomialSpec:
    if isinstance(spec, str):
        with open(spec) as fh:
            return PolynomialSpec.from_json_dict(json.load(fh))
    if isinstance(spec, dict):
        return PolynomialSpec.from_json_dict(spec)
    raise UsageError("config key 'poly' must be a path or an inline {leading, roots} dict")


def _cmd_run(config: dict, args) -> int:
    known = {"observable", "state", "poly", "mode", "N", "estimation", "shots",
             "ordering", "real_root_mode", "seed", "tolerance"}
    unknown = set(config) - known
    if unknown:
        raise UsageError(f"run: unknown config keys: {sorted(unknown)}")
    if "observable" not in config or "poly" not in config:
        raise UsageError("run requires 'observable' and 'poly' config keys")
    seed = args.seed if args.seed is not None else int(config.get("seed", 0))
    H = _build_observable(config["observable"], seed)
    state = _build_state(config.get("state"), H.n_qubits, seed)
    poly = _build_poly(config["poly"])
    mode = config.get("mode", "exact")
    ordering = config.get("ordering", "given")
    real_root_mode = config.get("real_root_mode", "reflection")
    try:
        if mode == "exact":
            report = exact_qsp(state, H, poly, ordering=ordering, real_root_mode=real_root_mode)
        elif mode == "group_commutator":
            estimation = config.get("estimation", "exact")
            alloc = None
            if estimation == "sampled":
                from .sampling_estimators import ShotAllocation

                alloc = ShotAllocation.uniform(H, int(config.get("shots", 1000)))
            report = dbqsp_run(state, H, poly, int(config.get("N", 1)), estimation=estimation,
                               alloc=alloc, seed=seed, ordering=ordering,
                               real_root_mode=real_root_mode)
        else:
            raise UsageError(f"run: unknown mode {mode!r}")
    except EigenstateBreakdown as e:
        print(f"run: FAIL  eigenstate breakdown at step {e.step}: {e}")
        return EXIT_ASSERTION
    os.makedirs(args.output, exist_ok=True)
    with open(os.path.join(args.output, "run.json"), "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    rows = report.to_csv_rows()
    if args.format == "json":
        _rows_to_json(os.path.join(args.output, "run_steps.json"), rows)
    else:
        columns = ["k", "re_z", "im_z", "E", "V", "s", "theta",
                   "depth_after", "dist_raw", "dist_aligned"]
        with open(os.path.join(args.output, "run_steps.csv"), "w") as fh:
            fh.write(",".join(columns) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(row[c])) if c != "k" else str(row[c])
                                  for c in columns) + "\n")
    tol = float(config.get("tolerance", 1e-9 if mode == "exact" else float("inf")))
    ok = report.oracle_distance_raw <= tol
    print(f"run: {'PASS' if ok else 'FAIL'}  mode={mode}  steps={len(report.steps)}  "
          f"depth={report.total_depth}  oracle_dist={report.oracle_distance_raw:.3e}")
    return EXIT_PASS if ok else EXIT_ASSERTION


def _cmd_report(config: dict, args) -> int:
    summaries = []
    if os.path.isdir(args.output):
        for fn in sorted(os.listdir(args.output)):
            if fn.endswith("_summary.json"):
                with open(os.path.join(args.output, fn)) as fh:
                    summaries.append(json.load(fh))
    if not summaries:
        raise UsageError(f"report: no *_summary.json files under {args.output}")
    all_pass = True
    for s in summaries:
        status = "PASS" if s.get("pass") else "FAIL"
        all_pass &= bool(s.get("pass"))
        extras = {k: v for k, v in s.items()
                  if k not in ("experiment", "pass", "provenance") and isinstance(v, (int, float))}
        brief = "  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                          for k, v in sorted(extras.items())[:4])
        print(f"{s['experiment']}: {status}  {brief}")
    with open(os.path.join(args.output, "report.json"), "w") as fh:
        json.dump({"pass": all_pass, "experiments": summaries}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_PASS if all_pass else EXIT_ASSERTION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dbqsp",
        description="Double-bracket quantum signal processing: runs, experiments, reports.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    specs = {
        "run": "one-off synthesis run from a config (observable, state, poly)",
        "verify": "exact-synthesis verification ensemble",
        "sweep": "convergence, depth, and stability sweeps",
        "estimate": "variance-estimator validation",
        "qite": "imaginary-time ground-state experiment",
        "invert": "matrix-inversion demonstration",
        "compare": "post-selection comparison",
        "report": "aggregate experiment summaries into one report",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int, help="seed override")
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                       help="parallel worker cap (default: logical cores)")
        p.add_argument("--output", default=None, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="k=v", dest="overrides",
                       help="config override, repeatable (dotted keys)")
        p.add_argument("--format", choices=["csv", "json"], default="csv",
                       help="row artifact format")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else EXIT_PASS
    if args.output is None:
        args.output = os.environ.get("DBQSP_OUTPUT_DIR", "dbqsp_out")
    try:
        config = apply_overrides(load_config(args.config), args.overrides, args.subcommand)
        _echo_config(config, args.subcommand, args.output)
        if args.subcommand == "run":
            return _cmd_run(config, args)
        if args.subcommand == "report":
            return _cmd_report(config, args)
        return _run_experiments(SUBCOMMAND_EXPERIMENTS[args.subcommand], config, args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as e:
        print(f"resource cap: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except (KeyError, ValueError, TypeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


def console_main() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_main()
