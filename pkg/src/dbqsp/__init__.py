"""Double-bracket quantum signal processing laboratory."""

from .pauli_algebra import Observable, PauliString, one_norm, pauli_mul, square_expansion, to_dense
from .statevector import (
    EnergyStats,
    StateVector,
    apply_commutator_exp,
    apply_evolution,
    apply_reflection,
    energy_stats,
    state_distance,
)
from .poly_toolkit import (
    ChebSeries,
    PolynomialSpec,
    apply_poly_oracle,
    classical_moments,
    hermitian_dilation,
    inverse_approx,
    ite_linear_filter,
    jacobi_anger,
    roots_from_coeffs,
    sign_approx,
)
from .dbqsp_engine import (
    EigenstateBreakdown,
    RunReport,
    StepRecord,
    dbqsp_run,
    depth_exact,
    exact_qsp,
    gc_step,
    postselect_success_prob,
    stability_bounds,
    step_params,
    sufficient_gc_repetitions,
)
from .experiment_harness import EXPERIMENTS, ExperimentResult, run_experiment
from .sampling_estimators import (
    SampleSet,
    ShotAllocation,
    allocate_shots,
    alternative_variance_estimator,
    estimate_energy_and_variance,
    estimator_variance_formula,
    sample_pauli,
    unbiased_square_estimator,
    variance_estimators,
)

__all__ = [
    "ChebSeries",
    "EXPERIMENTS",
    "EigenstateBreakdown",
    "EnergyStats",
    "ExperimentResult",
    "run_experiment",
    "Observable",
    "PauliString",
    "PolynomialSpec",
    "RunReport",
    "SampleSet",
    "ShotAllocation",
    "StateVector",
    "StepRecord",
    "allocate_shots",
    "alternative_variance_estimator",
    "apply_commutator_exp",
    "apply_evolution",
    "apply_poly_oracle",
    "apply_reflection",
    "classical_moments",
    "dbqsp_run",
    "depth_exact",
    "energy_stats",
    "estimate_energy_and_variance",
    "estimator_variance_formula",
    "exact_qsp",
    "gc_step",
    "hermitian_dilation",
    "inverse_approx",
    "ite_linear_filter",
    "jacobi_anger",
    "one_norm",
    "pauli_mul",
    "postselect_success_prob",
    "roots_from_coeffs",
    "sample_pauli",
    "sign_approx",
    "square_expansion",
    "stability_bounds",
    "state_distance",
    "step_params",
    "sufficient_gc_repetitions",
    "to_dense",
    "unbiased_square_estimator",
    "variance_estimators",
]

__version__ = "0.1.0"
