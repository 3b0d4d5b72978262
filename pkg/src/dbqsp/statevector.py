"""Dense state vectors and the three primitive operations of the recursion:
reflections e^{i theta |psi><psi|}, Hamiltonian evolutions e^{itH}, and the
exact double-bracket exponential e^{s[Psi,H]} in closed form.

Basis convention: amplitude index read in binary with qubit 0 as the most
significant bit.
"""

from __future__ import annotations

import functools
import threading
from dataclasses import dataclass, field

import numpy as np

from .pauli_algebra import Observable, to_dense

NORM_TOL = 1e-12


@dataclass(frozen=True)
class StateVector:
    """Unit-norm complex amplitude vector on n qubits."""

    n_qubits: int
    amplitudes: np.ndarray
    norm_drift: float = field(default=0.0, compare=False)

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise ValueError(f"expected {2**self.n_qubits} amplitudes, got {amps.shape}")
        norm = float(np.linalg.norm(amps))
        if norm == 0.0:
            raise ValueError("zero state vector")
        drift = abs(norm - 1.0)
        if drift > NORM_TOL:
            # defensive renormalization; the drift is kept on record
            amps = amps / norm
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "norm_drift", drift)

    @classmethod
    def from_amplitudes(cls, amps: np.ndarray | list) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise ValueError("amplitude count must be a power of two")
        return cls(n_qubits=n, amplitudes=amps / np.linalg.norm(amps))

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "StateVector":
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits=n_qubits, amplitudes=amps)

    @classmethod
    def plus(cls, n_qubits: int) -> "StateVector":
        dim = 2**n_qubits
        return cls(n_qubits=n_qubits, amplitudes=np.full(dim, 1 / np.sqrt(dim), dtype=complex))

    @classmethod
    def random(cls, n_qubits: int, rng: np.random.Generator) -> "StateVector":
        dim = 2**n_qubits
        amps = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        return cls.from_amplitudes(amps)

    def overlap(self, other: "StateVector") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "re": self.amplitudes.real.tolist(),
            "im": self.amplitudes.imag.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "StateVector":
        return cls(d["n_qubits"], np.array(d["re"]) + 1j * np.array(d["im"]))


@dataclass(frozen=True)
class EnergyStats:
    """Energy mean E and variance V of an observable in a state."""

    energy: float
    variance: float

    def __post_init__(self) -> None:
        if self.variance < -1e-12:
            raise ValueError(f"variance {self.variance} below tolerance")
        if self.variance < 0.0:
            object.__setattr__(self, "variance", 0.0)


def energy_stats(state: StateVector, H: Observable) -> EnergyStats:
    """E = <psi|H|psi>, V = <psi|H^2|psi> - E^2 via dense application."""
    v = state.amplitudes
    hv = to_dense(H) @ v
    energy = float(np.vdot(v, hv).real)
    variance = float(np.vdot(hv, hv).real) - energy * energy
    return EnergyStats(energy=energy, variance=max(variance, 0.0) if variance > -1e-12 else variance)


def apply_reflection(state: StateVector, axis: StateVector, theta: float) -> StateVector:
    """e^{i theta |axis><axis|} |state> = |state> + (e^{i theta}-1)<axis|state>|axis>."""
    if state.n_qubits != axis.n_qubits:
        raise ValueError("dimension mismatch")
    out = state.amplitudes + (np.exp(1j * theta) - 1.0) * np.vdot(axis.amplitudes, state.amplitudes) * axis.amplitudes
    return StateVector(state.n_qubits, out)


_eigh_lock = threading.Lock()


@functools.lru_cache(maxsize=256)
def _eigh_cached(H: Observable) -> tuple[np.ndarray, np.ndarray]:
    evals, evecs = np.linalg.eigh(to_dense(H))
    evals.setflags(write=False)
    evecs.setflags(write=False)
    return evals, evecs


def observable_eigh(H: Observable) -> tuple[np.ndarray, np.ndarray]:
    """Cached Hermitian eigendecomposition of dense(H)."""
    with _eigh_lock:
        return _eigh_cached(H)


def apply_evolution(state: StateVector, H: Observable, t: float) -> StateVector:
    """e^{itH}|state> through the cached eigendecomposition of H."""
    evals, evecs = observable_eigh(H)
    coeffs = evecs.conj().T @ state.amplitudes
    out = evecs @ (np.exp(1j * t * evals) * coeffs)
    return StateVector(state.n_qubits, out)


def apply_commutator_exp(state: StateVector, psi: StateVector, H: Observable, s: float) -> StateVector:
    """e^{s[Psi,H]}|state> by effective idempotence:

        e^{sW} = I + A(s) W + B(s) W^2,   W = [Psi, H],
        A = sin(s sqrt(V))/sqrt(V),  B = (1-cos(s sqrt(V)))/V,

    with V the energy variance of H in psi; the V -> 0 limit is A = s,
    B = s^2/2. W applies in O(dim^2) as
    W|v> = <psi|H|v> |psi> - <psi|v> H|psi>.
    """
    if state.n_qubits != psi.n_qubits:
        raise ValueError("dimension mismatch")
    V = energy_stats(psi, H).variance
    if V < 1e-14:
        A, B = s, s * s / 2.0
    else:
        sq = np.sqrt(V)
        A = np.sin(s * sq) / sq
        B = (1.0 - np.cos(s * sq)) / V
    dense = to_dense(H)
    p = psi.amplitudes
    hp = dense @ p

    def w_apply(v: np.ndarray) -> np.ndarray:
        return np.vdot(p, dense @ v) * p - np.vdot(p, v) * hp

    v = state.amplitudes
    wv = w_apply(v)
    out = v + A * wv + B * w_apply(wv)
    return StateVector(state.n_qubits, out)


def state_distance(a: StateVector, b: StateVector, phase_aligned: bool = False) -> float:
    """Raw Euclidean distance ||a-b||, or with phase_aligned the minimum over a
    global phase, sqrt(2 - 2|<a|b>|)."""
    if a.n_qubits != b.n_qubits:
        raise ValueError("dimension mismatch")
    if phase_aligned:
        ov = abs(np.vdot(a.amplitudes, b.amplitudes))
        return float(np.sqrt(max(0.0, 2.0 - 2.0 * min(ov, 1.0))))
    return float(np.linalg.norm(a.amplitudes - b.amplitudes))
