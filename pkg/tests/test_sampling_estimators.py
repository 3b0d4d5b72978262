import itertools
import math

import numpy as np
import pytest

from dbqsp.pauli_algebra import Observable, commutes, random_observable
from dbqsp.sampling_estimators import (
    SampleSet,
    ShotAllocation,
    allocate_shots,
    allocation_cap,
    alternative_variance_estimator,
    collect_samples,
    commuting_pairs,
    estimate_energy_and_variance,
    estimator_variance_formula,
    pair_operator,
    pauli_expectation,
    resample_estimators,
    sample_pauli,
    true_expectations,
    unbiased_square_estimator,
    variance_estimators,
)
from dbqsp.statevector import StateVector, energy_stats


def _instance(seed=0, n=2, terms=3):
    rng = np.random.default_rng(seed)
    H = random_observable(n, terms, rng, normalize=False)
    state = StateVector.random(n, rng)
    return H, state


def test_commuting_pairs_ordered_and_symmetric():
    H, _ = _instance()
    pairs = commuting_pairs(H)
    assert all((j, i) in pairs for i, j in pairs)
    assert all(commutes(H.terms[i][1], H.terms[j][1]) for i, j in pairs)
    assert all(i != j for i, j in pairs)


def test_shot_allocation_floor():
    with pytest.raises(ValueError):
        ShotAllocation(singles={0: 1}, pairs={}, joints={})


def test_sample_pauli_deterministic_and_calibrated():
    H, state = _instance()
    P = H.terms[0][1]
    a = sample_pauli(state, P, 5000, 42)
    b = sample_pauli(state, P, 5000, 42)
    np.testing.assert_array_equal(a, b)
    p = pauli_expectation(state, P)
    assert abs(a.mean() - p) < 5.0 / math.sqrt(5000)


def test_pair_operator_sign_in_outcomes():
    H, state = _instance(seed=1, terms=4)
    assert commuting_pairs(H), "instance must contain a commuting pair"
    for i, j in commuting_pairs(H):
        sign, _ = pair_operator(H, i, j)
        assert sign in (1, -1)
    # <P_i P_j> as measured equals the dense product expectation
    i, j = commuting_pairs(H)[0]
    sign, prod = pair_operator(H, i, j)
    dense_i = H.terms[i][1].to_dense()
    dense_j = H.terms[j][1].to_dense()
    v = state.amplitudes
    expected = float(np.vdot(v, dense_i @ dense_j @ v).real)
    assert abs(sign * pauli_expectation(state, prod) - expected) < 1e-12


def test_collect_samples_deterministic_shapes():
    H, state = _instance()
    alloc = ShotAllocation.uniform(H, 50)
    s1 = collect_samples(state, H, alloc, seed=7)
    s2 = collect_samples(state, H, alloc, seed=7)
    for key in s1.singles:
        np.testing.assert_array_equal(s1.singles[key], s2.singles[key])
        assert s1.singles[key].size == 50
    for key in s1.joints:
        np.testing.assert_array_equal(s1.joints[key], s2.joints[key])
    assert set(np.unique(np.concatenate(list(s1.joints.values())))) <= {-1, 1}


def test_sample_set_json_rle():
    s = SampleSet(singles={0: np.array([1, 1, -1])}, pairs={}, joints={}, seed=1)
    d = s.to_json_dict()
    assert d["singles"]["0"] == [[1, 2], [-1, 1]]


def test_unbiased_square_estimator_exact_expectation():
    # exhaustively average over all outcome sequences of length 4
    p = 0.37
    N = 4
    total = 0.0
    for seq in itertools.product([1, -1], repeat=N):
        prob = math.prod((1 + p) / 2 if x == 1 else (1 - p) / 2 for x in seq)
        total += prob * unbiased_square_estimator(np.array(seq))
    assert abs(total - p * p) < 1e-12


def test_variance_estimators_unbiased_over_resamples():
    H, state = _instance(seed=1)
    v_true = energy_stats(state, H).variance
    alloc = ShotAllocation.uniform(H, 25)
    reps = 400
    naive_sum = unbiased_sum = alt_sum = 0.0
    for r in range(reps):
        samples = collect_samples(state, H, alloc, seed=1000 + r)
        naive, unbiased = variance_estimators(H, samples)
        naive_sum += naive
        unbiased_sum += unbiased
        alt_sum += alternative_variance_estimator(H, samples)
    w = H.weights
    exp = true_expectations(state, H)
    bias = sum(
        w[i] ** 2 * (1 - exp["singles"][i] ** 2) / n for i, n in alloc.singles.items()
    )
    se = 3 * math.sqrt(
        estimator_variance_formula(H, exp, alloc, "unbiased") / reps
    )
    assert abs(unbiased_sum / reps - v_true) < 4 * se
    assert abs(alt_sum / reps - v_true) < 4 * se
    # the naive estimator underestimates by the per-term single-stream bias
    assert abs(naive_sum / reps - (v_true - bias)) < 4 * se


def test_variance_estimators_requires_coverage():
    H, state = _instance()
    alloc = ShotAllocation.uniform(H, 10)
    samples = collect_samples(state, H, alloc, seed=0)
    crippled = SampleSet(singles={}, pairs=samples.pairs, joints=samples.joints)
    with pytest.raises(ValueError):
        variance_estimators(H, crippled)


def test_resample_estimators_match_closed_forms():
    H, state = _instance(seed=2)
    v_true = energy_stats(state, H).variance
    alloc = ShotAllocation.uniform(H, 40)
    exp = true_expectations(state, H)
    draws = resample_estimators(H, exp, alloc, 40_000, seed=9)
    for name in ("unbiased", "alternative"):
        vals = draws[name]
        se = vals.std() / math.sqrt(vals.size)
        assert abs(vals.mean() - v_true) < 4 * se
        formula = estimator_variance_formula(H, exp, alloc, name)
        assert abs(vals.var() / formula - 1.0) < 0.1
    # naive bias prediction
    w = H.weights
    bias = sum(w[i] ** 2 * (1 - exp["singles"][i] ** 2) / n for i, n in alloc.singles.items())
    naive = draws["naive"]
    se = naive.std() / math.sqrt(naive.size)
    assert abs(naive.mean() - (v_true - bias)) < 4 * se


def test_estimator_variance_formula_rejects_unknown_scheme():
    H, state = _instance()
    alloc = ShotAllocation.uniform(H, 10)
    with pytest.raises(ValueError):
        estimator_variance_formula(H, true_expectations(state, H), alloc, "bogus")


def test_allocate_shots_structure_and_target():
    H, _ = _instance(seed=4)
    eps = 0.1
    alloc, total = allocate_shots(H, eps)
    assert total == alloc.total
    assert all(c >= 2 for c in alloc.pairs.values())
    assert all(alloc.singles[i] == alloc.joints[(i, i)] for i in alloc.singles)
    # achieved variance at the guess meets the target
    zero_exp = {
        "singles": {i: 0.0 for i in alloc.singles},
        "pairs": {ij: 0.0 for ij in alloc.pairs},
    }
    assert estimator_variance_formula(H, zero_exp, alloc, "alternative") <= eps**2
    # ideal (pre-rounding) total respects the cap
    w = np.abs(H.weights)
    pair_f = sum(w[i] * w[j] for i, j in alloc.pairs)
    joint_f = sum(w[i] * w[j] for i, j in alloc.joints)
    ideal = (pair_f + joint_f) ** 2 / eps**2
    assert ideal <= allocation_cap(H, eps) + 1e-9


def test_allocate_shots_kkt_proportionality():
    H, _ = _instance(seed=4)
    eps = 0.05
    alloc, _ = allocate_shots(H, eps)
    w = np.abs(H.weights)
    factors = {ij: w[ij[0]] * w[ij[1]] for ij in alloc.joints}
    ratios = [alloc.joints[ij] / f for ij, f in factors.items() if alloc.joints[ij] > 2 and f > 0]
    assert max(ratios) / min(ratios) < 1.05  # proportional within rounding


def test_estimate_energy_and_variance():
    H, state = _instance(seed=6)
    stats = energy_stats(state, H)
    alloc = ShotAllocation.uniform(H, 4000)
    e, v, errs = estimate_energy_and_variance(state, H, alloc, seed=13)
    assert abs(e - stats.energy) < 5 * errs["energy"] + 1e-9
    assert abs(v - stats.variance) < 5 * errs["variance"] + 1e-9
    e2, v2, _ = estimate_energy_and_variance(state, H, alloc, seed=13)
    assert (e, v) == (e2, v2)


def test_true_expectations_keys_cover_allocation():
    H, state = _instance()
    alloc = ShotAllocation.uniform(H, 10)
    exp = true_expectations(state, H)
    assert set(exp["singles"]) == set(alloc.singles)
    assert set(exp["pairs"]) == set(alloc.pairs)
    assert all(-1 - 1e-12 <= p <= 1 + 1e-12 for p in exp["singles"].values())
