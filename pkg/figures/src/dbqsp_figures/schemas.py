"""Column contracts for each experiment CSV and a validating loader."""

from __future__ import annotations

import csv

SCHEMAS: dict[str, list[str]] = {
    "verify_exact_synthesis": [
        "instance", "n", "degree", "dist_raw", "dist_aligned",
        "min_duration_margin", "expected_failure", "pass", "note",
    ],
    "gc_error_scaling": [
        "instance", "N", "dist", "bound", "under_bound", "zeta", "K", "slope",
    ],
    "depth_accounting": ["K", "N", "closed_form", "recursion", "counted", "equal"],
    "stability_experiments": [
        "kind", "K", "delta", "trial", "deviation", "bound", "within",
    ],
    "qite_groundstate": [
        "step", "E", "fidelity", "V", "E_gc", "fidelity_gc",
        "three_exp_dist", "three_exp_bound", "monotone",
    ],
    "matrix_inversion_demo": [
        "kappa", "epsilon", "degree", "aligned_dist", "tolerance", "within", "depth_n1",
    ],
    "postselection_comparison": [
        "gamma", "p_succ", "expected_repetitions", "lcu_step_product",
        "lcu_single_shot", "telescoping_err", "dbqsp_depth",
    ],
    "estimator_validation": [
        "estimator", "quantile", "value", "mean", "std_error",
        "empirical_var", "formula_var", "true_variance",
    ],
}

TEXT_COLUMNS = {"note", "kind", "estimator"}


class SchemaError(Exception):
    pass


def _coerce(column: str, value: str):
    if column in TEXT_COLUMNS:
        return value
    try:
        f = float(value)
    except ValueError:
        return value
    return int(f) if f.is_integer() and "." not in value and "e" not in value.lower() else f


def load_csv(path: str, kind: str) -> list[dict]:
    if kind not in SCHEMAS:
        raise SchemaError(f"unknown kind {kind!r}; known: {sorted(SCHEMAS)}")
    expected = SCHEMAS[kind]
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise SchemaError(f"{path}: empty file, expected columns {expected}")
            if header != expected:
                missing = [c for c in expected if c not in header]
                extra = [c for c in header if c not in expected]
                raise SchemaError(
                    f"{path}: column mismatch for kind {kind!r}: "
                    f"missing columns {missing}, unexpected columns {extra}"
                )
            rows = [
                {c: _coerce(c, v) for c, v in zip(expected, line)}
                for line in reader
                if line
            ]
    except OSError as e:
        raise SchemaError(f"{path}: {e}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows
