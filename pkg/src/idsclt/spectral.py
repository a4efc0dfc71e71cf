"""Eigendecomposition, trace functionals and resolvent probes of DiscreteHamiltonian operators.

Two independent routes exist for resolvent-power traces: the dense Hermitian
eigensolver (LAPACK Householder tridiagonalization via numpy) and banded
Cholesky solves against the canonical basis. They are cross-checked in the
test suite.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import CapacityError, DomainError, NotPositiveDefiniteError
from .geometry import Region
from .magnetic import DiscreteHamiltonian

DENSE_CAP = 4096


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ascending eigenvalues and orthonormal eigenvectors (one column per eigenvalue)."""

    values: np.ndarray
    vectors: np.ndarray
    fingerprint: str = ""

    @property
    def N(self) -> int:
        return len(self.values)

    def weights(self, mask) -> np.ndarray:
        """sum_{x} w(x) |v_i(x)|^2 for each eigenvector i."""
        w = np.asarray(mask, dtype=float)
        return (np.abs(self.vectors) ** 2).T @ w

    def orthonormality_residual(self) -> float:
        G = self.vectors.conj().T @ self.vectors
        return float(np.max(np.abs(G - np.eye(self.N))))


def _dense(H) -> np.ndarray:
    if isinstance(H, DiscreteHamiltonian):
        return H.dense()
    return np.asarray(H)


def _fingerprint(A: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(A).tobytes()).hexdigest()[:16]


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise CapacityError(f"operator dimension {n} exceeds the dense cap {cap}; "
                            "use trace_resolvent_power (banded Cholesky backend) instead")


def eigendecompose(H, cap: int = DENSE_CAP) -> Spectrum:
    A = _dense(H)
    _check_cap(A.shape[0], cap)
    vals, vecs = np.linalg.eigh(A)
    return Spectrum(vals, vecs, _fingerprint(A))


def eigenvalues(H, cap: int = DENSE_CAP) -> np.ndarray:
    A = _dense(H)
    _check_cap(A.shape[0], cap)
    return np.linalg.eigvalsh(A)


def _apply(f, lam: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        vals = np.asarray(f(lam), dtype=float)
    if vals.shape != lam.shape:
        vals = np.broadcast_to(vals, lam.shape)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        raise DomainError(f"test function undefined at eigenvalue {lam[np.argmax(bad)]!r}")
    return vals


def trace_function(H, f, spectrum: Spectrum | None = None) -> float:
    """Tr f(H) with compensated summation."""
    lam = spectrum.values if spectrum is not None else eigenvalues(H)
    return math.fsum(_apply(f, lam))


def _band(A: np.ndarray) -> int:
    nz = np.nonzero(A)
    return int(np.max(np.abs(nz[0] - nz[1]))) if len(nz[0]) else 0


def trace_resolvent_power(H, E: float, m: int) -> float:
    """Tr (H - E)^-m from m banded Cholesky solves per canonical basis vector."""
    if int(m) != m or m < 0:
        raise ValueError("resolvent power must be a nonnegative integer")
    A = _dense(H)
    n = A.shape[0]
    if m == 0:
        return float(n)
    S = A - E * np.eye(n)
    b = _band(S)
    ab = np.zeros((b + 1, n), dtype=S.dtype)
    for k in range(b + 1):
        ab[b - k, k:] = np.diagonal(S, k)
    try:
        c = sla.cholesky_banded(ab, lower=False)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"H - E is not positive definite at E={E}") from exc
    X = np.eye(n, dtype=S.dtype)
    for _ in range(int(m)):
        X = sla.cho_solve_banded((c, False), X)
    return math.fsum(np.real(np.diagonal(X)))


def region_mask(H: DiscreteHamiltonian, F) -> np.ndarray:
    """0/1 (or weight) vector over sites from a Region, boolean mask or weight array."""
    if F is None:
        return np.zeros(H.N)
    if isinstance(F, Region):
        return F.contains(H.positions).astype(float)
    return np.asarray(F, dtype=float).reshape(H.N)


def local_trace(H: DiscreteHamiltonian, f, F, spectrum: Spectrum | None = None) -> float:
    """sum_{x in F} f(H)_{xx}, or sum_x w(x) f(H)_{xx} for a weight vector."""
    w = region_mask(H, F)
    if not np.any(w):
        return 0.0
    spec = spectrum if spectrum is not None else eigendecompose(H)
    return math.fsum(_apply(f, spec.values) * spec.weights(w))


def offdiag_block_norm(H: DiscreteHamiltonian, E: float, m: int, F, G, norm: str = "operator",
                       spectrum: Spectrum | None = None) -> float:
    """Operator or trace norm of chi_F (H - E)^-m chi_G^*."""
    spec = spectrum if spectrum is not None else eigendecompose(H)
    if E >= spec.values[0]:
        raise NotPositiveDefiniteError(f"E={E} is not below the spectrum (min {spec.values[0]})")
    fi = np.flatnonzero(region_mask(H, F))
    gi = np.flatnonzero(region_mask(H, G))
    if len(fi) == 0 or len(gi) == 0:
        return 0.0
    g = (spec.values - E) ** (-float(m))
    block = (spec.vectors[fi] * g) @ spec.vectors[gi].conj().T
    s = np.linalg.svd(block, compute_uv=False)
    if norm == "operator":
        return float(s[0])
    if norm == "trace":
        return float(np.sum(s))
    raise ValueError(f"unknown norm {norm!r}")


def hellmann_feynman_check(H: DiscreteHamiltonian, W, f, lam: float = 0.0, step: float = 1e-4) -> tuple:
    """Analytic Tr(W f'(H + lam W)) against the central difference of Tr f(H + lam W)."""
    W = np.asarray(W, dtype=float)
    Ht = H.with_potential(H.potential + lam * W)
    analytic = local_trace(Ht, f.derivative, W)
    plus = trace_function(H.with_potential(H.potential + (lam + step) * W), f)
    minus = trace_function(H.with_potential(H.potential + (lam - step) * W), f)
    return analytic, (plus - minus) / (2 * step)


def batched_local_traces(base: np.ndarray, potentials: np.ndarray, g, weights: np.ndarray) -> np.ndarray:
    """sum_x w(x) g(H_b)_{xx} for a stack of operators ``base + diag(potentials[b])``."""
    potentials = np.atleast_2d(potentials)
    n = base.shape[0]
    stack = np.broadcast_to(base, (len(potentials), n, n)).copy()
    idx = np.arange(n)
    stack[:, idx, idx] += potentials
    vals, vecs = np.linalg.eigh(stack)
    gv = _apply(g, vals)
    loc = np.einsum("bxi,x->bi", np.abs(vecs) ** 2, np.asarray(weights, dtype=float))
    return np.sum(gv * loc, axis=1)


class LocalResolventProbe:
    """sum_x w(x) P(H)_{xx} for Laurent polynomials P via banded Cholesky, with H = base + diag(V).

    Only the columns of the support of ``w`` are solved for, which makes this the
    fast path when the same small weight profile is probed on many potentials.
    Uses e_x^* S^-k e_x = (S^-a e_x)^* (S^-b e_x) with a + b = k and S = H - E.
    """

    def __init__(self, base: np.ndarray, weights):
        base = np.asarray(base)
        w = np.asarray(weights, dtype=float)
        self.support = np.flatnonzero(w)
        self.w = w[self.support]
        self.n = base.shape[0]
        self.b = max(_band(base - np.diag(np.diagonal(base))), 1)
        self.ab0 = np.zeros((self.b + 1, self.n), dtype=base.dtype)
        for k in range(self.b + 1):
            self.ab0[self.b - k, k:] = np.diagonal(base, k)
        self.rhs = np.zeros((self.n, len(self.support)), dtype=base.dtype)
        self.rhs[self.support, np.arange(len(self.support))] = 1.0

    def __call__(self, V, P) -> float:
        ab = self.ab0.copy()
        ab[self.b] += np.asarray(V, dtype=float) - P.E
        try:
            c = sla.cholesky_banded(ab, lower=False, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(f"H - E is not positive definite at E={P.E}") from exc
        top = P.m + P.p
        half = (top + 1) // 2
        xs = [self.rhs]
        for _ in range(half):
            xs.append(sla.cho_solve_banded((c, False), xs[-1], check_finite=False))
        total = 0.0
        for k, a in enumerate(P.coeffs):
            order = P.m + k
            i, j = order // 2, order - order // 2
            diag = np.real(np.sum(xs[i].conj() * xs[j], axis=0))
            total += a * float(diag @ self.w)
        return total


def resolvent_difference_trace(A: np.ndarray, B: np.ndarray, P, F) -> float:
    """sum_{x in F} [P(A) - P(B)]_{xx} for a Laurent polynomial P, without cancellation.

    Uses R_A - R_B = -R_A (A - B) R_B and the telescoping identity
    X^n - Y^n = sum_i X^i (X - Y) Y^(n-1-i), so the result keeps relative
    accuracy even when the difference is far below eps * |P(A)_{xx}|.
    """
    A = _dense(A)
    B = _dense(B)
    w = np.asarray(F, dtype=float)
    n = A.shape[0]
    eye = np.eye(n)
    RA = np.linalg.inv(A - P.E * eye)
    RB = np.linalg.inv(B - P.E * eye)
    D = -RA @ (A - B) @ RB
    top = P.m + P.p
    powA = [eye]
    powB = [eye]
    for _ in range(top - 1):
        powA.append(powA[-1] @ RA)
        powB.append(powB[-1] @ RB)
    total = 0.0
    for k, a in enumerate(P.coeffs):
        order = P.m + k
        acc = np.zeros(n, dtype=complex)
        for i in range(order):
            acc += np.einsum("xy,yx->x", powA[i] @ D, powB[order - 1 - i])
        total += a * float(np.real(acc) @ w)
    return total
