"""Pauli strings, weighted Pauli-sum observables, and their dense realization.

Conventions:
    - A Pauli string is a sequence over {I, X, Y, Z}; qubit 0 is the leftmost
      letter and the most significant bit of the dense basis index.
    - An Observable is H = sum_i w_i P_i with real weights, canonicalized so
      strings are unique, nonzero-weighted, and lexicographically sorted.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DENSE_QUBIT_CAP = 12

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Single-qubit products a*b -> (phase, letter), phase in {1, -1, 1j, -1j}.
_MUL_1Q = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


class ResourceCapError(Exception):
    """Raised when a dense realization would exceed the configured qubit cap."""


@dataclass(frozen=True, order=True)
class PauliString:
    """An n-qubit Pauli string, e.g. 'ZIX' = Z on qubit 0, X on qubit 2."""

    letters: str

    def __post_init__(self) -> None:
        if not self.letters or any(c not in "IXYZ" for c in self.letters):
            raise ValueError(f"invalid Pauli letters: {self.letters!r}")

    @property
    def n_qubits(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def to_dense(self) -> np.ndarray:
        if self.n_qubits > DENSE_QUBIT_CAP:
            raise ResourceCapError(f"{self.n_qubits} qubits exceeds dense cap {DENSE_QUBIT_CAP}")
        mat = np.array([[1.0 + 0j]])
        for c in self.letters:
            mat = np.kron(mat, _PAULI_1Q[c])
        return mat

    def __str__(self) -> str:
        return self.letters


def identity_string(n_qubits: int) -> PauliString:
    return PauliString("I" * n_qubits)


def pauli_mul(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Product of two Pauli strings: dense(a) @ dense(b) == phase * dense(product)."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    phase: complex = 1
    letters = []
    for ca, cb in zip(a.letters, b.letters):
        p, c = _MUL_1Q[(ca, cb)]
        phase *= p
        letters.append(c)
    return phase, PauliString("".join(letters))


def commutes(a: PauliString, b: PauliString) -> bool:
    """Pauli strings either commute or anticommute; they commute iff they
    anticommute on an even number of qubit positions."""
    clashes = sum(
        1 for ca, cb in zip(a.letters, b.letters) if ca != "I" and cb != "I" and ca != cb
    )
    return clashes % 2 == 0


@dataclass(frozen=True)
class Observable:
    """Hermitian H = sum_i w_i P_i with real weights and canonical term order."""

    n_qubits: int
    terms: tuple[tuple[float, PauliString], ...]

    def __post_init__(self) -> None:
        for w, p in self.terms:
            if p.n_qubits != self.n_qubits:
                raise ValueError("all strings must share n_qubits")
            if w == 0.0:
                raise ValueError("canonical Observable has no zero weights")

    @classmethod
    def from_terms(cls, n_qubits: int, terms: Iterable[tuple[float, PauliString | str]]) -> "Observable":
        """Canonicalize: merge duplicate strings, drop zero weights, sort lexicographically."""
        merged: dict[PauliString, float] = {}
        for w, p in terms:
            if isinstance(p, str):
                p = PauliString(p)
            if abs(complex(w).imag) > 1e-12:
                raise ValueError("Observable weights must be real")
            merged[p] = merged.get(p, 0.0) + float(complex(w).real)
        kept = tuple(
            (w, p) for p, w in sorted(merged.items(), key=lambda kv: kv[0].letters)
            if abs(w) > 1e-15
        )
        return cls(n_qubits=n_qubits, terms=kept)

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for w, _ in self.terms])

    @property
    def strings(self) -> tuple[PauliString, ...]:
        return tuple(p for _, p in self.terms)

    def to_json_dict(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "terms": [{"w": w, "p": p.letters} for w, p in self.terms],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "Observable":
        return cls.from_terms(d["n_qubits"], [(t["w"], t["p"]) for t in d["terms"]])


def one_norm(H: Observable) -> float:
    """||w||_1 = sum_i |w_i|."""
    return float(sum(abs(w) for w, _ in H.terms))


@functools.lru_cache(maxsize=256)
def _dense_cached(H: Observable) -> np.ndarray:
    dim = 2 ** H.n_qubits
    mat = np.zeros((dim, dim), dtype=complex)
    for w, p in H.terms:
        mat += w * p.to_dense()
    mat.setflags(write=False)
    return mat


def to_dense(H: Observable, cap: int = DENSE_QUBIT_CAP) -> np.ndarray:
    """Dense 2^n x 2^n realization; Hermitian by construction (real weights)."""
    if H.n_qubits > cap:
        raise ResourceCapError(f"{H.n_qubits} qubits exceeds dense cap {cap}")
    return _dense_cached(H)


def square_expansion(
    H: Observable,
) -> tuple[float, list[tuple[float, PauliString, int]]]:
    """Expand H^2 = (sum_i w_i^2) I + sum_{i != j} w_i w_j P_i P_j.

    Anticommuting pairs cancel in the symmetric sum and are dropped; each
    surviving unordered commuting pair (i, j) contributes one entry
    (2 w_i w_j, |P_i P_j|, phase) with the real phase in {+1, -1} split out.
    """
    identity_weight = float(sum(w * w for w, _ in H.terms))
    cross: list[tuple[float, PauliString, int]] = []
    for (i, (wi, pi)), (j, (wj, pj)) in itertools.combinations(enumerate(H.terms), 2):
        if not commutes(pi, pj):
            continue
        phase, prod = pauli_mul(pi, pj)
        # commuting strings square to +I, so the phase is exactly +-1
        sign = int(round(phase.real))
        cross.append((2.0 * wi * wj, prod, sign))
    return identity_weight, cross


def observable_from_dense(mat: np.ndarray, atol: float = 1e-10) -> Observable:
    """Decompose a dense Hermitian matrix into the Pauli basis.

    Inverse of to_dense for small n; used to feed dense constructions (e.g.
    Hermitian dilations) back into the Observable pipeline.
    """
    dim = mat.shape[0]
    n = int(round(np.log2(dim)))
    if 2**n != dim or mat.shape != (dim, dim):
        raise ValueError("matrix dimension must be a power of two")
    if np.max(np.abs(mat - mat.conj().T)) > 1e-10:
        raise ValueError("matrix is not Hermitian")
    terms = []
    for letters in itertools.product("IXYZ", repeat=n):
        p = PauliString("".join(letters))
        w = np.trace(p.to_dense() @ mat).real / dim
        if abs(w) > atol:
            terms.append((w, p))
    return Observable.from_terms(n, terms)


def random_observable(
    n_qubits: int,
    n_terms: int,
    rng: np.random.Generator,
    locality: int = 2,
    normalize: bool = True,
) -> Observable:
    """Random k-local Pauli sum with weights uniform in [-1, 1], optionally
    rescaled to unit spectral norm."""
    terms: list[tuple[float, PauliString]] = []
    for _ in range(n_terms):
        letters = ["I"] * n_qubits
        support = rng.choice(n_qubits, size=min(locality, n_qubits), replace=False)
        for q in support:
            letters[q] = "IXYZ"[rng.integers(1, 4)]
        terms.append((float(rng.uniform(-1, 1)), PauliString("".join(letters))))
    H = Observable.from_terms(n_qubits, terms)
    if not H.terms:
        H = Observable.from_terms(n_qubits, [(1.0, "Z" + "I" * (n_qubits - 1))])
    if normalize:
        norm = float(np.linalg.norm(to_dense(H), ord=2))
        if norm > 0:
            H = Observable.from_terms(n_qubits, [(w / norm, p) for w, p in H.terms])
    return H
