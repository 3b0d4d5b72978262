"""The DB-QSP algorithm: per-step (s_k, theta_k) parameters, the exact
recursion, its group-commutator compilation with depth accounting, and the
closed-form resource/stability bounds.

Each step realizes the normalized action of (H - z_k I) on the current state
|Psi_k> as e^{i theta_k Psi_k} e^{s_k [Psi_k, H]}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .pauli_algebra import Observable, to_dense
from .poly_toolkit import PolynomialSpec, apply_poly_oracle
from .sampling_estimators import ShotAllocation, estimate_energy_and_variance
from .statevector import (
    EnergyStats,
    StateVector,
    apply_commutator_exp,
    apply_evolution,
    apply_reflection,
    energy_stats,
    state_distance,
)

EIGENSTATE_TOL = 1e-12


class EigenstateBreakdown(Exception):
    """The state's energy variance vanished; the step duration diverges."""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class StepRecord:
    k: int
    root: complex
    energy: float
    variance: float
    duration: float  # s_k <= 0
    phase: float  # theta_k in [0, 2pi)
    depth_after: int
    exact_distance: float  # raw distance to the oracle trajectory state
    exact_distance_aligned: float = 0.0
    signed_form: bool = False  # signed single-exponential branch (|s| <= pi/sqrt(V) instead)

    def __post_init__(self) -> None:
        if self.duration > 1e-15:
            raise ValueError(f"step duration must be <= 0, got {self.duration}")
        if not 0.0 <= self.phase < 2 * math.pi:
            raise ValueError(f"phase {self.phase} outside [0, 2pi)")
        gap = abs(self.energy - self.root)
        if not self.signed_form and gap > 0 and abs(self.duration) > 1.0 / gap + 1e-9:
            raise ValueError(f"duration {self.duration} violates the 1/|E-z| bound")


@dataclass(frozen=True)
class RunReport:
    steps: tuple[StepRecord, ...]
    final_state: StateVector
    total_depth: int
    oracle_distance_raw: float
    oracle_distance_aligned: float
    gc_repetitions: int
    mode: Literal["exact", "group_commutator"]
    seed: Optional[int] = None

    @property
    def zeta(self) -> float:
        """Max over all |s_k| and theta_k of the run."""
        vals = [abs(s.duration) for s in self.steps] + [s.phase for s in self.steps]
        return max(vals) if vals else 0.0

    def to_json_dict(self) -> dict:
        return {
            "mode": self.mode,
            "gc_repetitions": self.gc_repetitions,
            "seed": self.seed,
            "total_depth": self.total_depth,
            "oracle_distance_raw": self.oracle_distance_raw,
            "oracle_distance_aligned": self.oracle_distance_aligned,
            "final_state": self.final_state.to_json_dict(),
            "steps": [
                {
                    "k": s.k,
                    "re_z": s.root.real,
                    "im_z": s.root.imag,
                    "E": s.energy,
                    "V": s.variance,
                    "s": s.duration,
                    "theta": s.phase,
                    "depth_after": s.depth_after,
                    "dist_raw": s.exact_distance,
                    "dist_aligned": s.exact_distance_aligned,
                }
                for s in self.steps
            ],
        }

    def to_csv_rows(self) -> list[dict]:
        return self.to_json_dict()["steps"]


def step_params(
    stats: EnergyStats, z: complex, real_root_mode: Literal["reflection", "signed"] = "reflection"
) -> tuple[float, float]:
    """(s_k, theta_k) realizing the normalized action of H - zI on a state with
    energy E and variance V:

        s = -arccos(|E - z| / sqrt(V + |E - z|^2)) / sqrt(V)
        theta = arg((E - z) / |E - z|)  in [0, 2pi)

    so real roots get theta = 0 (E > z) or theta = pi (E < z). With
    real_root_mode="signed", real roots below the energy are instead realized
    by a single exponential with the signed argument (E - z) inside the arccos
    and no reflection; that branch trades the 1/|E - z| duration bound for
    |s| <= pi/sqrt(V) and is what the imaginary-time filter uses.
    """
    E, V = stats.energy, stats.variance
    if V <= EIGENSTATE_TOL:
        raise EigenstateBreakdown(f"variance {V} <= {EIGENSTATE_TOL}: eigenstate reached")
    sq = math.sqrt(V)
    gap = abs(E - z)
    if gap < 1e-12:
        # constraint degenerates; any phase is valid and 0 minimizes gate action
        return -math.acos(0.0) / sq, 0.0
    if z.imag == 0.0 and real_root_mode == "signed":
        x = (E - z.real) / math.sqrt(V + gap * gap)
        return -math.acos(max(-1.0, min(1.0, x))) / sq, 0.0
    s = -math.acos(min(1.0, gap / math.sqrt(V + gap * gap))) / sq
    theta = math.atan2(-z.imag, E - z.real) % (2 * math.pi)
    return s, theta


def _apply_step(state: StateVector, H: Observable, s: float, theta: float) -> StateVector:
    out = apply_commutator_exp(state, state, H, s)
    if theta != 0.0:
        out = apply_reflection(out, state, theta)
    return out


def _order_roots(state0: StateVector, H: Observable, roots: tuple[complex, ...], ordering: str) -> list[complex]:
    if ordering == "given":
        return list(roots)
    if ordering != "greedy_gap":
        raise ValueError(f"unknown root ordering {ordering!r}")
    remaining = list(roots)
    ordered = []
    state = state0
    while remaining:
        E = energy_stats(state, H).energy
        z = max(remaining, key=lambda r: abs(E - r))
        remaining.remove(z)
        ordered.append(z)
        state = _apply_step(state, H, *step_params(energy_stats(state, H), z))
    return ordered


def exact_qsp(
    state0: StateVector,
    H: Observable,
    poly: PolynomialSpec,
    ordering: str = "given",
    real_root_mode: Literal["reflection", "signed"] = "reflection",
) -> RunReport:
    """Exact recursion: per root, e^{i theta_k Psi_k} e^{s_k [Psi_k, H]}.

    The leading coefficient of poly cancels under normalization and is ignored.
    """
    roots = _order_roots(state0, H, poly.roots, ordering)
    state = state0
    records: list[StepRecord] = []
    for k, z in enumerate(roots):
        try:
            stats = energy_stats(state, H)
            s, theta = step_params(stats, z, real_root_mode)
        except EigenstateBreakdown as e:
            raise EigenstateBreakdown(str(e), step=k) from None
        state = _apply_step(state, H, s, theta)
        oracle_k = apply_poly_oracle(state0, H, PolynomialSpec(1.0, tuple(roots[: k + 1])))
        records.append(
            StepRecord(
                k=k,
                root=complex(z),
                energy=stats.energy,
                variance=stats.variance,
                duration=s,
                phase=theta,
                depth_after=0,
                exact_distance=state_distance(state, oracle_k),
                exact_distance_aligned=state_distance(state, oracle_k, phase_aligned=True),
                signed_form=real_root_mode == "signed" and z.imag == 0.0,
            )
        )
    oracle = apply_poly_oracle(state0, H, PolynomialSpec(1.0, tuple(roots)))
    return RunReport(
        steps=tuple(records),
        final_state=state,
        total_depth=0,
        oracle_distance_raw=state_distance(state, oracle),
        oracle_distance_aligned=state_distance(state, oracle, phase_aligned=True),
        gc_repetitions=0,
        mode="exact",
    )


def gc_step(
    state: StateVector,
    psi: StateVector,
    H: Observable,
    s: float,
    theta: float,
    N: int,
) -> tuple[StateVector, int]:
    """Group-commutator compilation of one step:

        e^{i theta psi} (e^{i s' psi} e^{i s' H} e^{-i s' psi} e^{-i s' H})^N,
        s' = sqrt(|s| / N),

    applied right-to-left. Depth counts the 4N evolution/reflection primitives
    plus the final theta reflection.
    """
    if s > 1e-15:
        raise ValueError(f"gc_step requires s <= 0, got {s}")
    if N < 1:
        raise ValueError("N must be >= 1")
    sp = math.sqrt(abs(s) / N)
    out = state
    for _ in range(N):
        out = apply_evolution(out, H, -sp)
        out = apply_reflection(out, psi, -sp)
        out = apply_evolution(out, H, sp)
        out = apply_reflection(out, psi, sp)
    out = apply_reflection(out, psi, theta)
    return out, 4 * N + 1


def dbqsp_run(
    state0: StateVector,
    H: Observable,
    poly: PolynomialSpec,
    N: int,
    estimation: Literal["exact", "sampled"] = "exact",
    alloc: Optional[ShotAllocation] = None,
    seed: Optional[int] = None,
    ordering: str = "given",
    real_root_mode: Literal["reflection", "signed"] = "reflection",
) -> RunReport:
    """Group-commutator DB-QSP: per step, estimate (E_k, V_k) on the current
    simulated state (exactly or from simulated shots), derive (s_k, theta_k),
    and apply gc_step. Depth accumulates through the recursion
    D_{k+1} = (4N+3) D_k + 4N+1 (the unfolded-circuit count; the simulator
    applies the compiled step directly to the state)."""
    if estimation == "sampled" and (alloc is None or seed is None):
        raise ValueError("sampled estimation requires a ShotAllocation and a seed")
    roots = _order_roots(state0, H, poly.roots, ordering)
    seeds = np.random.SeedSequence(seed).spawn(len(roots)) if estimation == "sampled" else None
    state = state0
    depth = 0
    records: list[StepRecord] = []
    for k, z in enumerate(roots):
        if estimation == "exact":
            stats = energy_stats(state, H)
        else:
            e_bar, v_bar, _ = estimate_energy_and_variance(
                state, H, alloc, seed=int(seeds[k].generate_state(1)[0])
            )
            if v_bar <= EIGENSTATE_TOL:
                raise EigenstateBreakdown(
                    f"estimated variance {v_bar} <= {EIGENSTATE_TOL}", step=k
                )
            stats = EnergyStats(energy=e_bar, variance=v_bar)
        try:
            s, theta = step_params(stats, z, real_root_mode)
        except EigenstateBreakdown as e:
            raise EigenstateBreakdown(str(e), step=k) from None
        psi = state
        state, _ = gc_step(state, psi, H, s, theta, N)
        depth = (4 * N + 3) * depth + 4 * N + 1
        oracle_k = apply_poly_oracle(state0, H, PolynomialSpec(1.0, tuple(roots[: k + 1])))
        records.append(
            StepRecord(
                k=k,
                root=complex(z),
                energy=stats.energy,
                variance=stats.variance,
                duration=s,
                phase=theta,
                depth_after=depth,
                exact_distance=state_distance(state, oracle_k),
                exact_distance_aligned=state_distance(state, oracle_k, phase_aligned=True),
                signed_form=real_root_mode == "signed" and z.imag == 0.0,
            )
        )
    oracle = apply_poly_oracle(state0, H, PolynomialSpec(1.0, tuple(roots)))
    return RunReport(
        steps=tuple(records),
        final_state=state,
        total_depth=depth,
        oracle_distance_raw=state_distance(state, oracle),
        oracle_distance_aligned=state_distance(state, oracle, phase_aligned=True),
        gc_repetitions=N,
        mode="group_commutator",
        seed=seed,
    )


def depth_exact(K: int, N: int) -> int:
    """Closed-form circuit depth (4N+1)((4N+3)^K - 1)/(4N+2) of the K-step,
    N-repetition compilation; equals the unrolled recursion with D_0 = 0."""
    if K < 0 or N < 1:
        raise ValueError("require K >= 0 and N >= 1")
    return (4 * N + 1) * ((4 * N + 3) ** K - 1) // (4 * N + 2)


def sufficient_gc_repetitions(K: int, zeta: float, epsilon: float) -> int:
    """Smallest N with (4/3) sqrt(zeta) (1+6 zeta)^K / sqrt(N) <= epsilon."""
    if epsilon <= 0 or zeta <= 0:
        raise ValueError("require zeta > 0 and epsilon > 0")
    if K == 0:
        return 1  # empty product is exact
    return max(1, math.ceil((16.0 / 9.0) * zeta * (1 + 6 * zeta) ** (2 * K) / epsilon**2))


def stability_bounds(
    K: int,
    zeta: float,
    delta_s: float = 0.0,
    delta_theta: float = 0.0,
    delta_H: float = 0.0,
    delta_E: float = 0.0,
    delta_V: float = 0.0,
    eta: float = 1.0,
) -> dict[str, float]:
    """The four closed-form stability right-hand sides:

        parameter:   (1/(3 zeta)) (1+6 zeta)^K max(ds, dtheta)
        hamiltonian: (1/3) (1+6 zeta)^K ||dH||
        single_step: 20 eta^4 max(dE, dV)
        k_step:      (14 + 120 eta^4)^K max(dE, dV)
    """
    if zeta <= 0 or eta < 1:
        raise ValueError("require zeta > 0 and eta >= 1")
    growth = (1 + 6 * zeta) ** K
    return {
        "parameter": growth / (3 * zeta) * max(delta_s, delta_theta),
        "hamiltonian": growth / 3.0 * delta_H,
        "single_step": 20.0 * eta**4 * max(delta_E, delta_V),
        "k_step": (14.0 + 120.0 * eta**4) ** K * max(delta_E, delta_V),
    }


def postselect_success_prob(
    state: StateVector, H: Observable, alpha: float, poly: PolynomialSpec
) -> float:
    """p_succ = ||p(H/alpha)|Psi>||^2 of the post-selected comparator; the
    leading coefficient participates here (it does not cancel)."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    evals = np.linalg.eigvalsh(to_dense(H)) / alpha
    if float(np.max(np.abs(poly.evaluate(evals)))) > 1.0 + 1e-9:
        import warnings

        warnings.warn("|p| exceeds 1 on the spectrum of H/alpha; not a valid success probability")
    v = state.amplitudes.copy()
    dense = to_dense(H) / alpha
    for z in poly.roots:
        v = dense @ v - z * v
    v = poly.leading * v
    return float(np.vdot(v, v).real)


def replay_with_params(
    state0: StateVector,
    H: Observable,
    params: list[tuple[float, float]],
) -> StateVector:
    """Run the exact recursion with externally supplied (s_k, theta_k) instead
    of the step_params values; used by the stability experiments."""
    state = state0
    for s, theta in params:
        state = _apply_step(state, H, s, theta)
    return state
