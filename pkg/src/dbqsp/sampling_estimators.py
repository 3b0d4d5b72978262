"""Simulated Pauli measurements and the variance-estimation statistics:
the naive (biased) and corrected (unbiased) variance estimators, the
joint-measurement alternative, closed-form estimator variances, and
Lagrange-optimal shot allocation.

Measurement model: every sampled operator stream is independent. Singles
P_i are measured N_i times; ordered product operators P_ij = P_i P_j
(commuting pairs only, the +-1 phase folded into the outcomes) are measured
N_ij times per direction; joint operators P_i (x) P_j on two state copies are
realized as products of two independent single-copy draws, N_{i(x)j} times.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .pauli_algebra import Observable, PauliString, commutes, one_norm, pauli_mul, to_dense
from .statevector import StateVector


def commuting_pairs(H: Observable) -> list[tuple[int, int]]:
    """Ordered index pairs (i, j), i != j, whose strings commute. Anticommuting
    pairs cancel in the symmetric H^2 sum and are never sampled."""
    out = []
    for i, j in itertools.permutations(range(len(H.terms)), 2):
        if commutes(H.terms[i][1], H.terms[j][1]):
            out.append((i, j))
    return out


@dataclass(frozen=True)
class ShotAllocation:
    """Shot counts per sampled operator, keyed by term index into H.terms."""

    singles: dict[int, int]
    pairs: dict[tuple[int, int], int]
    joints: dict[tuple[int, int], int]

    def __post_init__(self) -> None:
        for group in (self.singles, self.pairs, self.joints):
            for key, count in group.items():
                if count < 2:
                    raise ValueError(f"count {count} for {key} below floor 2")

    @property
    def total(self) -> int:
        return sum(self.singles.values()) + sum(self.pairs.values()) + sum(self.joints.values())

    @classmethod
    def uniform(cls, H: Observable, shots: int) -> "ShotAllocation":
        idx = range(len(H.terms))
        pairs = commuting_pairs(H)
        return cls(
            singles={i: shots for i in idx},
            pairs={ij: shots for ij in pairs},
            joints={ij: shots for ij in itertools.product(idx, idx)},
        )

    def to_json_dict(self) -> dict:
        return {
            "singles": {str(i): c for i, c in self.singles.items()},
            "pairs": {f"{i},{j}": c for (i, j), c in self.pairs.items()},
            "joints": {f"{i},{j}": c for (i, j), c in self.joints.items()},
        }


@dataclass(frozen=True)
class SampleSet:
    """Recorded +-1 outcome streams for each sampled operator."""

    singles: dict[int, np.ndarray]
    pairs: dict[tuple[int, int], np.ndarray]
    joints: dict[tuple[int, int], np.ndarray]
    seed: Optional[int] = None

    def to_json_dict(self) -> dict:
        def rle(v: np.ndarray) -> list[list[int]]:
            out: list[list[int]] = []
            for x in v:
                if out and out[-1][0] == int(x):
                    out[-1][1] += 1
                else:
                    out.append([int(x), 1])
            return out

        return {
            "seed": self.seed,
            "singles": {str(i): rle(v) for i, v in self.singles.items()},
            "pairs": {f"{i},{j}": rle(v) for (i, j), v in self.pairs.items()},
            "joints": {f"{i},{j}": rle(v) for (i, j), v in self.joints.items()},
        }


def pauli_expectation(state: StateVector, P: PauliString) -> float:
    v = state.amplitudes
    return float(np.vdot(v, P.to_dense() @ v).real)


def sample_pauli(
    state: StateVector, P: PauliString, shots: int, rng_seed: int | np.random.SeedSequence
) -> np.ndarray:
    """i.i.d. +-1 outcomes with Pr(+1) = (1 + <P>)/2, deterministic per seed."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p_plus = min(1.0, max(0.0, (1.0 + pauli_expectation(state, P)) / 2.0))
    rng = np.random.default_rng(rng_seed)
    return np.where(rng.random(shots) < p_plus, 1, -1)


def pair_operator(H: Observable, i: int, j: int) -> tuple[int, PauliString]:
    """P_ij = P_i P_j for a commuting pair, as (sign, string) with sign in {+1, -1}."""
    phase, prod = pauli_mul(H.terms[i][1], H.terms[j][1])
    if abs(phase.imag) > 1e-12:
        raise ValueError(f"pair ({i},{j}) anticommutes; it has no +-1 outcome model")
    return int(round(phase.real)), prod


def collect_samples(state: StateVector, H: Observable, alloc: ShotAllocation, seed: int) -> SampleSet:
    """Draw every stream of the allocation. Seeds are mixed deterministically:
    one SeedSequence child per stream, in the sorted order of
    (singles keys, pairs keys, 2x joints keys)."""
    single_keys = sorted(alloc.singles)
    pair_keys = sorted(alloc.pairs)
    joint_keys = sorted(alloc.joints)
    children = np.random.SeedSequence(seed).spawn(len(single_keys) + len(pair_keys) + 2 * len(joint_keys))
    it = iter(children)
    singles = {i: sample_pauli(state, H.terms[i][1], alloc.singles[i], next(it)) for i in single_keys}
    pairs = {}
    for i, j in pair_keys:
        sign, prod = pair_operator(H, i, j)
        pairs[(i, j)] = sign * sample_pauli(state, prod, alloc.pairs[(i, j)], next(it))
    joints = {}
    for i, j in joint_keys:
        n = alloc.joints[(i, j)]
        bi = sample_pauli(state, H.terms[i][1], n, next(it))
        bj = sample_pauli(state, H.terms[j][1], n, next(it))
        joints[(i, j)] = bi * bj
    return SampleSet(singles=singles, pairs=pairs, joints=joints, seed=seed)


def unbiased_square_estimator(outcomes: np.ndarray, N: Optional[int] = None) -> float:
    """(N/(N-1)) [ mean^2 - 1/N ]; sampling expectation is exactly <P>^2."""
    outcomes = np.asarray(outcomes)
    if N is None:
        N = outcomes.size
    if N < 2:
        raise ValueError("unbiased square estimator requires N >= 2")
    mean = float(np.mean(outcomes[:N]))
    return N / (N - 1) * (mean * mean - 1.0 / N)


def _estimators_from_means(
    H: Observable,
    single_means: dict[int, float],
    pair_means: dict[tuple[int, int], float],
    single_counts: dict[int, int],
) -> tuple[float, float]:
    """Naive and unbiased variance estimators as functions of stream means;
    shared by the sample path and the vectorized Monte-Carlo path."""
    w = H.weights
    const = float(np.sum(w * w))
    cross = 0.0
    for (i, j), m in pair_means.items():
        cross += w[i] * w[j] * m
    e_hat = sum(w[i] * m for i, m in single_means.items())
    naive = const + cross - e_hat * e_hat
    corrected = 0.0
    for i, m in single_means.items():
        n = single_counts[i]
        corrected += w[i] ** 2 * (n / (n - 1)) * (m * m - 1.0 / n)
    cross_singles = 0.0
    for i, j in itertools.permutations(single_means, 2):
        cross_singles += w[i] * w[j] * single_means[i] * single_means[j]
    unbiased = const + cross - corrected - cross_singles
    return naive, unbiased


def variance_estimators(H: Observable, samples: SampleSet) -> tuple[float, float]:
    """(naive, unbiased) estimates of V = <H^2> - <H>^2.

    naive:    sum_i w_i^2 + sum_{i!=j} w_i w_j mean(P_ij) - (sum_i w_i mean(P_i))^2
    unbiased: replaces each w_i^2 mean_i^2 inside the square by the corrected
              square estimator and the i != j cross products by products of
              independent single means.
    """
    needed_pairs = set(commuting_pairs(H))
    if set(samples.singles) != set(range(len(H.terms))) or not needed_pairs.issubset(samples.pairs):
        raise ValueError("samples must cover all singles and all commuting pairs")
    for i, v in samples.singles.items():
        if v.size < 2:
            raise ValueError(f"single stream {i} has N < 2")
    single_means = {i: float(np.mean(v)) for i, v in samples.singles.items()}
    pair_means = {ij: float(np.mean(samples.pairs[ij])) for ij in needed_pairs}
    single_counts = {i: v.size for i, v in samples.singles.items()}
    return _estimators_from_means(H, single_means, pair_means, single_counts)


def alternative_variance_estimator(H: Observable, joint_samples: SampleSet) -> float:
    """Two-copy scheme:
    sum_i w_i^2 + sum_{i!=j} w_i w_j mean(P_ij) - sum_{i,j} w_i w_j mean(P_i (x) P_j)."""
    needed_pairs = set(commuting_pairs(H))
    all_ordered = set(itertools.product(range(len(H.terms)), repeat=2))
    if not needed_pairs.issubset(joint_samples.pairs) or not all_ordered.issubset(joint_samples.joints):
        raise ValueError("joint scheme needs all commuting pairs and all (i,j) joints")
    w = H.weights
    out = float(np.sum(w * w))
    for i, j in needed_pairs:
        out += w[i] * w[j] * float(np.mean(joint_samples.pairs[(i, j)]))
    for i, j in all_ordered:
        out -= w[i] * w[j] * float(np.mean(joint_samples.joints[(i, j)]))
    return out


def estimator_variance_formula(
    H: Observable,
    expectations: dict,
    alloc: ShotAllocation,
    which: str = "unbiased",
) -> float:
    """Closed-form Var of the chosen variance estimator.

    expectations: {"singles": {i: <P_i>}, "pairs": {(i,j): <P_ij>}}.

    For the unbiased scheme (independent ordered pair streams, q_i = 1 - p_i^2):

        sum_{i!=j} w_i^2 w_j^2 (1 - p_ij^2) / N_ij
      + sum_i 2 w_i^4 / (N_i (N_i-1)) (1 + 2(N_i-2) p_i^2 - (2N_i-3) p_i^4)
      + 4 sum_{i<j} (w_i^2 w_j^2 / (N_i N_j)) (q_i q_j + N_i p_i^2 q_j + N_j p_j^2 q_i)
      + 8 sum_i sum_{j<k, j,k != i} (w_i^2 w_j w_k / N_i) p_j p_k q_i
      + 8 sum_{i!=j} (w_i^3 w_j / N_i) p_i p_j q_i

    (the 8-prefixed lines are the covariances between cross terms sharing an
    index and between the corrected squares and the cross terms). For
    the alternative scheme:

        sum_{i!=j} w_i^2 w_j^2 (1 - p_ij^2) / N_ij
      + sum_{i,j} w_i^2 w_j^2 (1 - p_i^2 p_j^2) / N_{i(x)j}
    """
    w = H.weights
    p = expectations["singles"]
    p_pair = expectations.get("pairs", {})
    pair_part = 0.0
    for (i, j), n in alloc.pairs.items():
        pij = p_pair[(i, j)]
        pair_part += w[i] ** 2 * w[j] ** 2 * (1.0 - pij * pij) / n
    if which == "alternative":
        joint_part = 0.0
        for (i, j), n in alloc.joints.items():
            pipj = p[i] * p[j]
            joint_part += w[i] ** 2 * w[j] ** 2 * (1.0 - pipj * pipj) / n
        return pair_part + joint_part
    if which != "unbiased":
        raise ValueError(f"unknown scheme {which!r}")
    out = pair_part
    for i, n in alloc.singles.items():
        pi2 = p[i] ** 2
        out += 2.0 * w[i] ** 4 / (n * (n - 1)) * (1.0 + 2 * (n - 2) * pi2 - (2 * n - 3) * pi2 * pi2)
    idx = sorted(alloc.singles)
    for a, i in enumerate(idx):
        qi = 1.0 - p[i] ** 2
        for j in idx[a + 1:]:
            ni, nj = alloc.singles[i], alloc.singles[j]
            qj = 1.0 - p[j] ** 2
            out += 4.0 * w[i] ** 2 * w[j] ** 2 / (ni * nj) * (qi * qj + ni * p[i] ** 2 * qj + nj * p[j] ** 2 * qi)
    for i in idx:
        qi = 1.0 - p[i] ** 2
        others = [x for x in idx if x != i]
        for a, j in enumerate(others):
            for k in others[a + 1:]:
                out += 8.0 * w[i] ** 2 * w[j] * w[k] / alloc.singles[i] * p[j] * p[k] * qi
    for i, j in itertools.permutations(idx, 2):
        qi = 1.0 - p[i] ** 2
        out += 8.0 * w[i] ** 3 * w[j] / alloc.singles[i] * p[i] * p[j] * qi
    return out


def allocate_shots(
    H: Observable,
    epsilon: float,
    expectations_guess: Optional[dict] = None,
) -> tuple[ShotAllocation, int]:
    """Lagrange-optimal counts for the alternative scheme at target Var = eps^2:

        N_ij ~ sqrt(lambda) |w_i||w_j| sqrt(1 - p_ij^2)
        N_{i(x)j} ~ sqrt(lambda) |w_i||w_j| sqrt(1 - p_i^2 p_j^2)

    rounded up with floor 2. The default all-zero guess makes the allocation
    state-independent; the ideal total is capped by (4/eps^2)||w||_1^4. Single
    streams (needed by the corrected estimator) reuse the diagonal joint counts.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n_terms = len(H.terms)
    guess_singles = {i: 0.0 for i in range(n_terms)}
    guess_pairs = {ij: 0.0 for ij in commuting_pairs(H)}
    if expectations_guess:
        guess_singles.update(expectations_guess.get("singles", {}))
        guess_pairs.update(expectations_guess.get("pairs", {}))
    w = np.abs(H.weights)
    pair_factors = {
        (i, j): w[i] * w[j] * math.sqrt(max(0.0, 1.0 - guess_pairs[(i, j)] ** 2))
        for (i, j) in guess_pairs
    }
    joint_factors = {
        (i, j): w[i] * w[j] * math.sqrt(max(0.0, 1.0 - (guess_singles[i] * guess_singles[j]) ** 2))
        for i, j in itertools.product(range(n_terms), repeat=2)
    }
    sqrt_lambda = (sum(pair_factors.values()) + sum(joint_factors.values())) / epsilon**2
    pairs = {ij: max(2, math.ceil(sqrt_lambda * f)) for ij, f in pair_factors.items()}
    joints = {ij: max(2, math.ceil(sqrt_lambda * f)) for ij, f in joint_factors.items()}
    singles = {i: joints[(i, i)] for i in range(n_terms)}
    alloc = ShotAllocation(singles=singles, pairs=pairs, joints=joints)
    return alloc, alloc.total


def allocation_cap(H: Observable, epsilon: float) -> float:
    """The (4/eps^2) ||w||_1^4 upper bound on the ideal total shot count."""
    return 4.0 / epsilon**2 * one_norm(H) ** 4


def resample_estimators(
    H: Observable,
    expectations: dict,
    alloc: ShotAllocation,
    n_resamples: int,
    seed: int,
) -> dict[str, np.ndarray]:
    """Vectorized Monte-Carlo resampling of all three estimators at the true
    expectations. Stream means are drawn directly from their binomial law
    (the mean of N +-1 draws with expectation p is 2 Binom(N, (1+p)/2)/N - 1),
    which is distribution-identical to per-shot simulation; agreement of the
    mean-level formulas with the SampleSet code path is property-tested.
    """
    rng = np.random.default_rng(seed)
    p = expectations["singles"]
    p_pair = expectations["pairs"]

    def draw(mean: float, n: int) -> np.ndarray:
        pr = min(1.0, max(0.0, (1.0 + mean) / 2.0))
        return 2.0 * rng.binomial(n, pr, size=n_resamples) / n - 1.0

    X = {i: draw(p[i], n) for i, n in sorted(alloc.singles.items())}
    Y = {ij: draw(p_pair[ij], n) for ij, n in sorted(alloc.pairs.items())}
    J = {ij: draw(p[ij[0]] * p[ij[1]], n) for ij, n in sorted(alloc.joints.items())}
    w = H.weights
    const = float(np.sum(w * w))
    cross = sum(w[i] * w[j] * Y[(i, j)] for i, j in Y) if Y else 0.0
    e_hat = sum(w[i] * X[i] for i in X)
    naive = const + cross - e_hat**2
    corrected = sum(
        w[i] ** 2 * (n / (n - 1)) * (X[i] ** 2 - 1.0 / n) for i, n in alloc.singles.items()
    )
    cross_singles = sum(w[i] * w[j] * X[i] * X[j] for i, j in itertools.permutations(X, 2))
    unbiased = const + cross - corrected - cross_singles
    joint_sum = sum(w[i] * w[j] * J[(i, j)] for i, j in J)
    alternative = const + cross - joint_sum
    return {
        "naive": np.asarray(naive),
        "unbiased": np.asarray(unbiased),
        "alternative": np.asarray(alternative),
    }


def true_expectations(state: StateVector, H: Observable) -> dict:
    """Dense single and commuting-pair expectations, keyed like an allocation."""
    singles = {i: pauli_expectation(state, p) for i, (_, p) in enumerate(H.terms)}
    pairs = {}
    for i, j in commuting_pairs(H):
        sign, prod = pair_operator(H, i, j)
        pairs[(i, j)] = sign * pauli_expectation(state, prod)
    return {"singles": singles, "pairs": pairs}


def estimate_energy_and_variance(
    state: StateVector, H: Observable, alloc: ShotAllocation, seed: int
) -> tuple[float, float, dict[str, float]]:
    """Sample per the allocation, return (E_bar, V_bar unbiased) with analytic
    standard errors evaluated at the measured expectations."""
    samples = collect_samples(state, H, alloc, seed)
    w = H.weights
    means = {i: float(np.mean(v)) for i, v in samples.singles.items()}
    e_bar = float(sum(w[i] * m for i, m in means.items()))
    _, v_bar = variance_estimators(H, samples)
    se_e = math.sqrt(
        sum(w[i] ** 2 * max(0.0, 1.0 - means[i] ** 2) / alloc.singles[i] for i in means)
    )
    measured = {
        "singles": {i: min(1.0, max(-1.0, m)) for i, m in means.items()},
        "pairs": {
            ij: min(1.0, max(-1.0, float(np.mean(v)))) for ij, v in samples.pairs.items()
        },
    }
    se_v = math.sqrt(max(0.0, estimator_variance_formula(H, measured, alloc, "unbiased")))
    return e_bar, v_bar, {"energy": se_e, "variance": se_v}
