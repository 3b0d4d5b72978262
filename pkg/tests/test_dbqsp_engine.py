import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dbqsp.dbqsp_engine import (
    EigenstateBreakdown,
    StepRecord,
    dbqsp_run,
    depth_exact,
    exact_qsp,
    gc_step,
    postselect_success_prob,
    replay_with_params,
    stability_bounds,
    step_params,
    sufficient_gc_repetitions,
)
from dbqsp.pauli_algebra import Observable, random_observable
from dbqsp.poly_toolkit import PolynomialSpec, apply_poly_oracle
from dbqsp.sampling_estimators import ShotAllocation
from dbqsp.statevector import EnergyStats, StateVector, energy_stats, state_distance

Z1 = Observable.from_terms(1, [(1.0, "Z")])
PLUS = StateVector.plus(1)


def test_step_params_real_root_at_energy_center():
    s, theta = step_params(EnergyStats(0.0, 1.0), 0.0)
    assert abs(s + math.pi / 2) < 1e-14
    assert theta == 0.0


def test_step_params_imaginary_root():
    s, theta = step_params(EnergyStats(0.0, 1.0), 1j)
    assert abs(s + math.pi / 4) < 1e-14
    assert abs(theta - 3 * math.pi / 2) < 1e-14


def test_step_params_positive_real_gap():
    _, theta = step_params(EnergyStats(1.0, 0.5), 0.5)
    assert theta == 0.0


def test_step_params_negative_real_gap_reflection():
    _, theta = step_params(EnergyStats(0.0, 0.5), 0.5)
    assert abs(theta - math.pi) < 1e-14


def test_step_params_signed_branch_same_ray():
    rng = np.random.default_rng(5)
    H = random_observable(2, 4, rng, normalize=False)
    state = StateVector.random(2, rng)
    E = energy_stats(state, H).energy
    poly = PolynomialSpec(1.0, (complex(E + 0.4),))  # real root above the energy
    a = exact_qsp(state, H, poly, real_root_mode="reflection").final_state
    b = exact_qsp(state, H, poly, real_root_mode="signed").final_state
    # aligned distance has a sqrt-precision floor near zero
    assert state_distance(a, b, phase_aligned=True) < 1e-7


def test_step_params_eigenstate_breakdown():
    with pytest.raises(EigenstateBreakdown):
        step_params(EnergyStats(1.0, 0.0), 0.5)


def test_step_record_validation():
    with pytest.raises(ValueError):
        StepRecord(0, 0.0, 1.0, 0.5, duration=0.1, phase=0.0, depth_after=0, exact_distance=0.0)
    with pytest.raises(ValueError):
        StepRecord(0, 0.0, 1.0, 0.5, duration=-0.1, phase=7.0, depth_after=0, exact_distance=0.0)
    with pytest.raises(ValueError):
        # |s| far above 1/|E - z|
        StepRecord(0, 0.0, 2.0, 0.5, duration=-3.0, phase=0.0, depth_after=0, exact_distance=0.0)


def test_exact_qsp_linear_target_minus():
    rep = exact_qsp(PLUS, Z1, PolynomialSpec(1.0, (0.0,)))
    target = StateVector.from_amplitudes([1.0, -1.0])
    assert state_distance(rep.final_state, target) < 1e-12
    assert rep.oracle_distance_raw < 1e-12


def test_exact_qsp_complex_root_hand_value():
    rep = exact_qsp(PLUS, Z1, PolynomialSpec(1.0, (1j,)))
    target = StateVector.from_amplitudes([(1 - 1j) / 2, -(1 + 1j) / 2])
    assert state_distance(rep.final_state, target) < 1e-12


def test_exact_qsp_empty_roots_identity():
    rep = exact_qsp(PLUS, Z1, PolynomialSpec(1.0, ()))
    assert state_distance(rep.final_state, PLUS) < 1e-15
    assert rep.steps == ()


def test_exact_qsp_breakdown_reports_step():
    # (Z + I)|+> is proportional to the eigenstate |0>; the second step breaks
    with pytest.raises(EigenstateBreakdown) as exc:
        exact_qsp(PLUS, Z1, PolynomialSpec(1.0, (-1.0, 0.5)))
    assert exc.value.step == 1


@given(st.integers(0, 10_000))
def test_exact_qsp_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    H = random_observable(n, int(rng.integers(2, 5)), rng)
    state = StateVector.random(n, rng)
    roots = tuple(complex(rng.uniform(-1, 1), rng.uniform(-0.5, 0.5)) for _ in range(3))
    rep = exact_qsp(state, H, PolynomialSpec(1.0, roots))
    assert rep.oracle_distance_raw < 1e-9
    for step in rep.steps:
        gap = abs(step.energy - step.root)
        if gap > 1e-9:
            assert abs(step.duration) <= 1.0 / gap + 1e-9


def test_exact_qsp_greedy_gap_ordering():
    rng = np.random.default_rng(2)
    H = random_observable(2, 4, rng)
    state = StateVector.random(2, rng)
    roots = (0.3 + 0.2j, -0.5 + 0.1j)
    rep = exact_qsp(state, H, PolynomialSpec(1.0, roots), ordering="greedy_gap")
    assert rep.oracle_distance_raw < 1e-9
    assert sorted((s.root for s in rep.steps), key=lambda z: (z.real, z.imag)) == sorted(
        [complex(z) for z in roots], key=lambda z: (z.real, z.imag)
    )


def test_gc_step_zero_duration_identity():
    out, depth = gc_step(PLUS, PLUS, Z1, 0.0, 0.0, 3)
    assert state_distance(out, PLUS) < 1e-14
    assert depth == 13


def test_gc_step_requires_nonpositive_s():
    with pytest.raises(ValueError):
        gc_step(PLUS, PLUS, Z1, 0.1, 0.0, 1)


def test_gc_step_single_step_bound_and_scaling():
    from dbqsp.statevector import apply_commutator_exp

    exact = apply_commutator_exp(PLUS, PLUS, Z1, -0.1)
    d1 = state_distance(gc_step(PLUS, PLUS, Z1, -0.1, 0.0, 1)[0], exact)
    d100 = state_distance(gc_step(PLUS, PLUS, Z1, -0.1, 0.0, 100)[0], exact)
    assert d1 <= 8 * 0.1**1.5
    assert d100 <= 8 * 0.1**1.5 / 10
    assert abs(d1 / d100 - 10.0) < 3.0  # N^{-1/2} scaling within 30%


def test_dbqsp_run_depth_and_distance():
    rng = np.random.default_rng(4)
    H = random_observable(2, 4, rng)
    state = StateVector.random(2, rng)
    poly = PolynomialSpec(1.0, (0.2 + 0.3j, -0.1 - 0.2j))
    rep = dbqsp_run(state, H, poly, N=16)
    assert rep.total_depth == depth_exact(2, 16)
    exact = exact_qsp(state, H, poly)
    zeta = exact.zeta
    bound = 4 / 3 * math.sqrt(zeta) * (1 + 6 * zeta) ** 2 / math.sqrt(16)
    assert state_distance(rep.final_state, exact.final_state) <= bound


def test_dbqsp_run_sampled_deterministic():
    rng = np.random.default_rng(6)
    H = random_observable(2, 3, rng)
    state = StateVector.random(2, rng)
    poly = PolynomialSpec(1.0, (0.3 + 0.2j,))
    alloc = ShotAllocation.uniform(H, 2000)
    a = dbqsp_run(state, H, poly, N=4, estimation="sampled", alloc=alloc, seed=11)
    b = dbqsp_run(state, H, poly, N=4, estimation="sampled", alloc=alloc, seed=11)
    assert state_distance(a.final_state, b.final_state) == 0.0
    c = dbqsp_run(state, H, poly, N=4, estimation="sampled", alloc=alloc, seed=12)
    assert state_distance(a.final_state, c.final_state) > 0.0


def test_dbqsp_run_sampled_requires_alloc():
    with pytest.raises(ValueError):
        dbqsp_run(PLUS, Z1, PolynomialSpec(1.0, (1j,)), N=1, estimation="sampled")


def test_depth_exact_spot_values():
    assert depth_exact(1, 1) == 5
    assert depth_exact(2, 1) == 40
    assert depth_exact(3, 1) == 285
    assert depth_exact(0, 7) == 0


def test_sufficient_gc_repetitions():
    assert sufficient_gc_repetitions(1, 1.0, 0.1) == 8712
    assert sufficient_gc_repetitions(0, 1.0, 0.1) == 1
    K, zeta, eps = 2, 0.7, 0.05
    N = sufficient_gc_repetitions(K, zeta, eps)
    assert 4 / 3 * math.sqrt(zeta) * (1 + 6 * zeta) ** K / math.sqrt(N) <= eps
    assert 4 / 3 * math.sqrt(zeta) * (1 + 6 * zeta) ** K / math.sqrt(N - 1) > eps


def test_stability_bounds_values():
    b = stability_bounds(2, 0.5, delta_s=0.01, delta_theta=0.001, delta_H=0.1,
                         delta_E=0.02, delta_V=0.01, eta=1.0)
    growth = 4.0**2
    assert abs(b["parameter"] - growth / 1.5 * 0.01) < 1e-12
    assert abs(b["hamiltonian"] - growth / 3 * 0.1) < 1e-12
    assert abs(b["single_step"] - 20 * 0.02) < 1e-12
    assert abs(b["k_step"] - 134.0**2 * 0.02) < 1e-12


def test_replay_with_params_matches_exact():
    rng = np.random.default_rng(7)
    H = random_observable(2, 4, rng)
    state = StateVector.random(2, rng)
    rep = exact_qsp(state, H, PolynomialSpec(1.0, (0.2 + 0.1j, -0.3)))
    out = replay_with_params(state, H, [(s.duration, s.phase) for s in rep.steps])
    assert state_distance(out, rep.final_state) < 1e-14


def test_postselect_success_prob_overlap():
    gamma = 0.2
    state = StateVector.from_amplitudes([math.sqrt(1 - gamma), math.sqrt(gamma)])
    p = postselect_success_prob(state, Z1, 1.0, PolynomialSpec(0.5, (1.0,)))
    assert abs(p - gamma) < 1e-12


def test_postselect_success_prob_warns_above_one():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        postselect_success_prob(PLUS, Z1, 1.0, PolynomialSpec(3.0, (1.0,)))
    assert any("exceeds 1" in str(w.message) for w in caught)


def test_run_report_csv_columns():
    rep = exact_qsp(PLUS, Z1, PolynomialSpec(1.0, (1j,)))
    rows = rep.to_csv_rows()
    assert list(rows[0].keys()) == [
        "k", "re_z", "im_z", "E", "V", "s", "theta",
        "depth_after", "dist_raw", "dist_aligned",
    ]
