"""Polynomial machinery: root-form polynomial specs, the dense oracle for
normalized polynomial action, Chebyshev series constructions (inverse,
Jacobi-Anger, sign), Hermitian dilation, and sparse classical moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Literal

import mpmath
import numpy as np
from numpy.polynomial import chebyshev as npcheb
from numpy.polynomial import polynomial as nppoly
from scipy.special import erf, erfinv, jv

from .pauli_algebra import Observable, observable_from_dense, to_dense
from .statevector import StateVector

REAL_SNAP_TOL = 1e-9
CHEB_DEGREE_CAP = 40
INVERSE_A_CAP = 2000


class OracleBreakdown(Exception):
    """p(H)|state> vanished; the normalized action is undefined."""


class ApproximationError(Exception):
    """A series construction failed to meet its sup-error target."""


@dataclass(frozen=True)
class PolynomialSpec:
    """p(H) = leading * prod_k (H - z_k I) in root form."""

    leading: complex
    roots: tuple[complex, ...]
    provenance: str = "explicit"

    @property
    def degree(self) -> int:
        return len(self.roots)

    def coefficients(self) -> np.ndarray:
        """Monomial coefficients, ascending order."""
        return self.leading * nppoly.polyfromroots(self.roots)

    def evaluate(self, x: np.ndarray | complex) -> np.ndarray | complex:
        out = np.full(np.shape(x) or (), self.leading, dtype=complex)
        for z in self.roots:
            out = out * (np.asarray(x, dtype=complex) - z)
        return out

    def to_json_dict(self) -> dict:
        return {
            "leading": [self.leading.real, self.leading.imag],
            "roots": [[z.real, z.imag] for z in self.roots],
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "PolynomialSpec":
        return cls(
            leading=complex(d["leading"][0], d["leading"][1]),
            roots=tuple(complex(r, i) for r, i in d["roots"]),
            provenance=d.get("provenance", "explicit"),
        )


@dataclass(frozen=True)
class ChebSeries:
    """sum_m coefficients[m] T_m(x / scale) on the domain [-scale, scale]."""

    coefficients: tuple[float, ...]
    parity: Literal["even", "odd", "mixed"]
    scale: float = 1.0

    def __post_init__(self) -> None:
        c = np.asarray(self.coefficients)
        nz = np.nonzero(np.abs(c) > 1e-14)[0]
        if self.parity == "even" and np.any(nz % 2 == 1):
            raise ValueError("even series has odd-order coefficients")
        if self.parity == "odd" and np.any(nz % 2 == 0):
            raise ValueError("odd series has even-order coefficients")

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def evaluate(self, x: np.ndarray | float) -> np.ndarray | float:
        return npcheb.chebval(np.asarray(x) / self.scale, np.asarray(self.coefficients))

    def to_json_dict(self) -> dict:
        return {"coeffs": list(self.coefficients), "parity": self.parity, "scale": self.scale}

    @classmethod
    def from_json_dict(cls, d: dict) -> "ChebSeries":
        return cls(tuple(d["coeffs"]), d["parity"], d.get("scale", 1.0))


def roots_from_coeffs(coeffs: list[complex] | np.ndarray, real_snap_tol: float = REAL_SNAP_TOL) -> PolynomialSpec:
    """Factorize a polynomial (ascending coefficients) into leading * prod(x - z_k)
    via balanced companion-matrix eigenvalues; near-real roots are snapped."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.size == 0 or coeffs[-1] == 0:
        raise ValueError("leading coefficient must be nonzero")
    if coeffs.size == 1:
        return PolynomialSpec(leading=complex(coeffs[0]), roots=(), provenance="from_coeffs")
    roots = nppoly.polyroots(coeffs)
    snapped = tuple(
        complex(z.real, 0.0) if abs(z.imag) < real_snap_tol else complex(z) for z in roots
    )
    spec = PolynomialSpec(leading=complex(coeffs[-1]), roots=snapped, provenance="from_coeffs")
    recon = spec.coefficients()
    scale = max(1.0, float(np.max(np.abs(coeffs))))
    err = float(np.max(np.abs(recon - coeffs))) / scale
    if err > 1e-8:
        raise ApproximationError(f"root/coefficient round trip error {err:.3e} > 1e-8")
    return spec


def apply_poly_oracle(state: StateVector, H: Observable, poly: PolynomialSpec) -> StateVector:
    """Ground-truth dense evaluation of prod_k (H - z_k I)|state>, normalized."""
    dense = to_dense(H)
    v = state.amplitudes.copy()
    for z in poly.roots:
        v = dense @ v - z * v
    norm = np.linalg.norm(v)
    if norm <= 1e-14:
        raise OracleBreakdown("polynomial annihilates the state")
    return StateVector(state.n_qubits, v / norm)


def _cheb_monomial_coeffs(series: ChebSeries, dps: int = 60) -> list[mpmath.mpf]:
    """Monomial coefficients (ascending, in the unscaled variable x) computed in
    extended precision; conditioning of this conversion limits usable degree."""
    if series.degree > CHEB_DEGREE_CAP:
        raise ApproximationError(f"degree {series.degree} exceeds Chebyshev conversion cap {CHEB_DEGREE_CAP}")
    with mpmath.workdps(dps):
        # T_n coefficient table via the recurrence T_{n+1} = 2x T_n - T_{n-1} (exact ints)
        t_prev, t_cur = [1], [0, 1]
        tables = [t_prev, t_cur]
        for _ in range(series.degree - 1):
            nxt = [0] + [2 * c for c in t_cur]
            for i, c in enumerate(t_prev):
                nxt[i] -= c
            t_prev, t_cur = t_cur, nxt
            tables.append(t_cur)
        mono = [mpmath.mpf(0)] * (series.degree + 1)
        for order, c in enumerate(series.coefficients):
            if c == 0.0:
                continue
            for k, tc in enumerate(tables[order]):
                mono[k] += mpmath.mpf(c) * tc
        if series.scale != 1.0:
            s = mpmath.mpf(series.scale)
            mono = [m / s**k for k, m in enumerate(mono)]
        return mono


def cheb_to_polyspec(series: ChebSeries, provenance: str = "chebyshev", real_snap_tol: float = REAL_SNAP_TOL) -> PolynomialSpec:
    """Extract the root factorization of a Chebyshev series (extended precision)."""
    mono = _cheb_monomial_coeffs(series)
    with mpmath.workdps(60):
        while mono and abs(mono[-1]) < mpmath.mpf("1e-30"):
            mono = mono[:-1]
        if not mono:
            raise ApproximationError("series is numerically zero")
        if len(mono) == 1:
            return PolynomialSpec(leading=complex(mono[0]), roots=(), provenance=provenance)
        roots = mpmath.polyroots(list(reversed(mono)), maxsteps=200, extraprec=120)
    snapped = tuple(
        complex(float(z.real), 0.0) if abs(z.imag) < real_snap_tol else complex(float(z.real), float(z.imag))
        for z in (mpmath.mpc(r) for r in roots)
    )
    return PolynomialSpec(leading=complex(mono[-1]), roots=snapped, provenance=provenance)


def inverse_approx(kappa: float, epsilon: float) -> tuple[ChebSeries, PolynomialSpec]:
    """Odd Chebyshev approximation of 1/x on [-1,-1/kappa] U [1/kappa,1]:

        g(x) = 4 sum_{l=0}^{K} (-1)^l [ 2^{-2a} sum_{j=l+1}^{a} C(2a, a+j) ] T_{2l+1}(x)

    with a = ceil(kappa^2 log(kappa/eps)) and K = ceil(sqrt(a log(4a/eps))).
    Partial binomial sums are exact integers; the root factorization is
    extracted for DB-QSP execution.
    """
    if kappa <= 1:
        raise ValueError("kappa must exceed 1")
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    a = math.ceil(kappa**2 * math.log(kappa / epsilon))
    if a > INVERSE_A_CAP:
        raise ApproximationError(f"a = {a} exceeds cap {INVERSE_A_CAP}")
    K = math.ceil(math.sqrt(a * math.log(4 * a / epsilon)))
    denom = 1 << (2 * a)
    coeffs = [0.0] * (2 * K + 2)
    for l in range(K + 1):
        partial = sum(math.comb(2 * a, a + j) for j in range(l + 1, a + 1))
        coeffs[2 * l + 1] = float(4 * (-1) ** l * Fraction(partial, denom))
    series = ChebSeries(tuple(coeffs), parity="odd")
    spec = cheb_to_polyspec(series, provenance="inverse_approx")
    return series, spec


def jacobi_anger(t: float, epsilon: float, kind: Literal["cos", "sin"]) -> ChebSeries:
    """Truncated Jacobi-Anger expansion of cos(tx) or sin(tx) on [-1, 1]:

        cos(tx) = J_0(t) + 2 sum_l (-1)^l J_{2l}(t) T_{2l}(x)
        sin(tx) = 2 sum_l (-1)^l J_{2l+1}(t) T_{2l+1}(x)

    truncated adaptively at the smallest order whose measured sup error <= eps.
    """
    if kind not in ("cos", "sin"):
        raise ValueError("kind must be cos or sin")
    grid = np.linspace(-1.0, 1.0, 2001)
    target = np.cos(t * grid) if kind == "cos" else np.sin(t * grid)
    max_order = max(8, int(2 * (abs(t) + 20 + math.log(1 / epsilon))))
    for top in range(0, max_order + 1):
        coeffs = np.zeros(top + 1)
        if kind == "cos":
            coeffs[0] = jv(0, t)
            for order in range(2, top + 1, 2):
                coeffs[order] = 2 * (-1) ** (order // 2) * jv(order, t)
            parity = "even"
        else:
            for order in range(1, top + 1, 2):
                coeffs[order] = 2 * (-1) ** ((order - 1) // 2) * jv(order, t)
            parity = "odd"
        series = ChebSeries(tuple(coeffs), parity=parity)
        if float(np.max(np.abs(series.evaluate(grid) - target))) <= epsilon:
            return series
    raise ApproximationError(f"Jacobi-Anger truncation failed at order {max_order}")


def sign_approx(delta: float, epsilon: float, degree_cap: int = CHEB_DEGREE_CAP) -> ChebSeries:
    """Odd polynomial with |p| <= 1 on [-2, 2] and |p(x) - sgn(x)| <= eps for
    |x| in [delta, 2], built as a Chebyshev expansion of erf(gamma x) with
    gamma chosen so the erf tail uses half the error budget."""
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    if not 0 < epsilon < 0.5:
        raise ValueError("epsilon must lie in (0, 1/2)")
    gamma = float(erfinv(1.0 - epsilon / 2.0)) / delta
    f = lambda u: erf(2.0 * gamma * u)  # u = x/2 on [-1, 1]
    grid = np.linspace(delta, 2.0, 4001)
    full_grid = np.linspace(-2.0, 2.0, 8001)
    for deg in range(3, degree_cap + 1, 2):
        coeffs = npcheb.chebinterpolate(f, deg)
        coeffs[::2] = 0.0  # exact odd parity (even coefficients vanish analytically)
        series = ChebSeries(tuple(coeffs), parity="odd", scale=2.0)
        peak = float(np.max(np.abs(series.evaluate(full_grid))))
        if peak > 1.0:
            series = ChebSeries(tuple(np.asarray(coeffs) / peak), parity="odd", scale=2.0)
        err = float(np.max(np.abs(series.evaluate(grid) - 1.0)))
        if err <= epsilon:
            return series
    raise ApproximationError(f"sign approximation target unmet at degree cap {degree_cap}")


def ite_linear_filter(tau: float, H: Observable | None = None) -> PolynomialSpec:
    """First-order imaginary-time filter I - tau*H = -tau (H - (1/tau) I)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return PolynomialSpec(leading=complex(-tau), roots=(complex(1.0 / tau),), provenance="explicit")


@dataclass(frozen=True)
class HermitianDilation:
    """H = [[0, A], [A^dag, 0]] padded to a power-of-two dimension."""

    matrix: np.ndarray
    n_qubits: int
    padding_mask: np.ndarray  # True on rows/cols carrying the original dilation

    def to_observable(self) -> Observable:
        return observable_from_dense(self.matrix)


def hermitian_dilation(A: np.ndarray) -> HermitianDilation:
    """Dilate a square matrix so its singular values appear as +- eigenvalue pairs."""
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be square")
    d = A.shape[0]
    dil = np.zeros((2 * d, 2 * d), dtype=complex)
    dil[:d, d:] = A
    dil[d:, :d] = A.conj().T
    n = max(1, math.ceil(math.log2(2 * d)))
    dim = 2**n
    mat = np.eye(dim, dtype=complex)
    mat[: 2 * d, : 2 * d] = dil
    mask = np.zeros(dim, dtype=bool)
    mask[: 2 * d] = True
    mat.setflags(write=False)
    mask.setflags(write=False)
    return HermitianDilation(matrix=mat, n_qubits=n, padding_mask=mask)


def _apply_pauli_sparse(letters: str, state: dict[int, complex], n: int) -> dict[int, complex]:
    out: dict[int, complex] = {}
    for idx, amp in state.items():
        phase: complex = 1.0
        new = idx
        for q, c in enumerate(letters):
            if c == "I":
                continue
            bit = (idx >> (n - 1 - q)) & 1
            if c == "Z":
                if bit:
                    phase = -phase
            elif c == "X":
                new ^= 1 << (n - 1 - q)
            else:  # Y
                new ^= 1 << (n - 1 - q)
                phase *= 1j if bit == 0 else -1j
        out[new] = out.get(new, 0.0) + phase * amp
    return out


def classical_moments(
    sparse_state: dict[int, complex],
    H: Observable,
    l_max: int,
    memory_cap: int = 1_000_000,
    poly_degree: int = 4,
) -> tuple[list[float], dict]:
    """<psi0| H^l |psi0> for l = 0..l_max by repeated sparse Pauli application.

    Returns the moments and a feasibility report evaluating m^2 J^{2k+2}
    against n^poly_degree (m = nonzeros, J = Pauli terms, l_max = 2k+2).
    """
    if l_max < 0:
        raise ValueError("l_max must be non-negative")
    n = H.n_qubits
    norm2 = sum(abs(a) ** 2 for a in sparse_state.values())
    base = {i: a / math.sqrt(norm2) for i, a in sparse_state.items()}
    moments = [1.0]
    current = dict(base)
    for _ in range(l_max):
        nxt: dict[int, complex] = {}
        for w, p in H.terms:
            for idx, amp in _apply_pauli_sparse(p.letters, current, n).items():
                nxt[idx] = nxt.get(idx, 0.0) + w * amp
        if len(nxt) > memory_cap:
            raise MemoryError(f"sparse support {len(nxt)} exceeds cap {memory_cap}")
        current = nxt
        moments.append(float(sum(base[i].conjugate() * a for i, a in current.items() if i in base).real))
    m = len(base)
    J = len(H.terms)
    k = max(0, (l_max - 2) // 2)
    cost = m**2 * J ** (2 * k + 2)
    bound = n**poly_degree
    report = {"m": m, "J": J, "k": k, "cost": cost, "poly_bound": bound, "tractable": cost <= bound}
    return moments, report
