"""Discrete magnetic Schrodinger operators with Peierls phases in the symmetric gauge.

Hopping between nearest neighbours x, y carries the factor ``-h^-2 exp(-i theta(x, y))``
with ``theta(x, y) = A((x + y) / 2) . (y - x)`` and ``A(x) = B x / 2``. With this
sign the magnetic translations ``(U_m phi)(x) = exp(i Psi_m(x)) phi(x - m)`` map
the operator on a box onto the operator on the shifted box exactly.
"""
from __future__ import annotations

import hashlib
from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, ContractViolation
from .geometry import BOUNDARY_CONDITIONS, BoxSpec

_OFFSET = 1 << 20
_BASE = 1 << 21


@dataclass(frozen=True, eq=False)
class MagneticField:
    """Constant field given by a real skew-symmetric d x d matrix."""

    B: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float, ndmin=2)
        if B.shape[0] != B.shape[1]:
            raise ValueError(f"field matrix must be square, got shape {B.shape}")
        if np.any(B != -B.T):
            raise ValueError("field matrix must be exactly skew-symmetric")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def d(self) -> int:
        return self.B.shape[0]

    @property
    def is_zero(self) -> bool:
        return not np.any(self.B)

    @classmethod
    def zero(cls, d: int) -> "MagneticField":
        return cls(np.zeros((d, d)))

    @classmethod
    def planar(cls, b: float, d: int = 2) -> "MagneticField":
        """Field b in the (x1, x2) plane: B[0, 1] = b, B[1, 0] = -b."""
        B = np.zeros((d, d))
        B[0, 1], B[1, 0] = b, -b
        return cls(B)

    def to_list(self) -> list:
        return self.B.tolist()


def vector_potential(x, field: MagneticField) -> np.ndarray:
    """A(x) = B x / 2, vectorized over the leading axes of ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != field.d:
        raise ContractViolation(f"point dimension {x.shape[-1]} does not match field dimension {field.d}")
    return 0.5 * x @ field.B.T


def peierls_phase(x, y, field: MagneticField, h: float | None = None) -> float:
    """Midpoint-rule line integral of A along the bond from x to y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    step = y - x
    nz = np.flatnonzero(step)
    if len(nz) != 1 or (h is not None and not np.isclose(abs(step[nz[0]]), h, rtol=0, atol=1e-12)):
        raise ContractViolation(f"{x.tolist()} and {y.tolist()} are not nearest neighbours")
    return float(vector_potential(0.5 * (x + y), field) @ step)


def translation_phase(m, x, field: MagneticField) -> np.ndarray:
    """Psi_m(x) = 1/2 sum_{j,k} (m_j - x_j) B_{k,j} m_k, vectorized over points x."""
    m = np.asarray(m, dtype=float)
    x = np.asarray(x, dtype=float)
    return 0.5 * np.einsum("...j,kj,k->...", m - x, field.B, m)


def _encode(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.int64).reshape(len(k), -1)
    key = np.zeros(k.shape[0], dtype=np.int64)
    for i in range(k.shape[1]):
        key = key * _BASE + (k[:, i] + _OFFSET)
    return key


class SiteLookup:
    """Vectorized map from integer mesh labels to row indices."""

    def __init__(self, labels: np.ndarray):
        self.labels = np.asarray(labels, dtype=np.int64)
        keys = _encode(self.labels)
        self._order = np.argsort(keys, kind="stable")
        self._keys = keys[self._order]

    def find(self, labels) -> np.ndarray:
        """Row index per label, -1 where absent."""
        labels = np.asarray(labels, dtype=np.int64).reshape(-1, self.labels.shape[1])
        if len(labels) == 0 or len(self._keys) == 0:
            return np.full(len(labels), -1, dtype=np.int64)
        keys = _encode(labels)
        pos = np.searchsorted(self._keys, keys)
        pos = np.minimum(pos, len(self._keys) - 1)
        hit = self._keys[pos] == keys
        return np.where(hit, self._order[pos], -1)


def _kinetic(labels: np.ndarray, q: int, field: MagneticField, bc: str):
    n, d = labels.shape
    if field.d != d:
        raise ContractViolation(f"field dimension {field.d} does not match lattice dimension {d}")
    h = 1.0 / q
    lookup = SiteLookup(labels)
    pos = labels / q
    rows, cols, vals = [], [], []
    degree = np.zeros(n)
    for axis in range(d):
        shift = np.zeros(d, dtype=np.int64)
        shift[axis] = 1
        j = lookup.find(labels + shift)
        i = np.flatnonzero(j >= 0)
        j = j[i]
        mid = 0.5 * (pos[i] + pos[j])
        theta = vector_potential(mid, field)[:, axis] * h
        hop = -np.exp(-1j * theta) / h**2
        rows += [i, j]
        cols += [j, i]
        vals += [hop, np.conj(hop)]
        degree[i] += 1
        degree[j] += 1
    diag = np.full(n, 2 * d / h**2) if bc == "dirichlet" else degree / h**2
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag.astype(complex))
    K = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    K.sort_indices()
    return K, degree


@dataclass(frozen=True, eq=False)
class DiscreteHamiltonian:
    """Sparse Hermitian operator ``kinetic + diag(potential)`` on a set of mesh sites."""

    kinetic: sp.csr_matrix
    potential: np.ndarray
    labels: np.ndarray
    q: int
    bc: str
    field: MagneticField
    degree: np.ndarray
    potential_id: str = ""

    @property
    def N(self) -> int:
        return int(self.labels.shape[0])

    @property
    def d(self) -> int:
        return int(self.labels.shape[1])

    @property
    def h(self) -> float:
        return 1.0 / self.q

    @property
    def positions(self) -> np.ndarray:
        return self.labels / self.q

    @property
    def is_real(self) -> bool:
        return not np.any(self.kinetic.data.imag)

    @property
    def matrix(self) -> sp.csr_matrix:
        return (self.kinetic + sp.diags(self.potential.astype(complex))).tocsr()

    def dense(self) -> np.ndarray:
        """Dense copy; real dtype when no phase is present."""
        H = self.kinetic.toarray()
        H[np.diag_indices(self.N)] += self.potential
        return H.real.copy() if self.is_real else H

    def with_potential(self, potential, potential_id: str = "") -> "DiscreteHamiltonian":
        V = np.asarray(potential, dtype=float).copy()
        if V.shape != (self.N,):
            raise AssemblyError(f"potential has shape {V.shape}, expected ({self.N},)")
        V.setflags(write=False)
        return DiscreteHamiltonian(self.kinetic, V, self.labels, self.q, self.bc, self.field,
                                   self.degree, potential_id or _fingerprint(V))

    def restrict(self, idx, bc: str | None = None) -> "DiscreteHamiltonian":
        """Operator on the sub-domain ``labels[idx]`` with its own boundary condition."""
        idx = np.asarray(idx)
        return assemble_sites(self.labels[idx], self.q, self.field, self.potential[idx], bc or self.bc)

    def hermiticity_residual(self) -> float:
        M = self.matrix
        D = (M - M.conj().T).tocoo()
        return float(np.max(np.abs(D.data))) if D.nnz else 0.0


def _fingerprint(V: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(V, dtype="<f8").tobytes()).hexdigest()[:16]


def _resolve_potential(potential, labels: np.ndarray, q: int) -> np.ndarray:
    n = labels.shape[0]
    if potential is None:
        return np.zeros(n)
    if callable(potential):
        return np.asarray(potential(labels / q), dtype=float).reshape(n)
    if isinstance(potential, Mapping):
        out = np.empty(n)
        for i, k in enumerate(labels):
            key = tuple(int(v) for v in k)
            if key not in potential:
                raise AssemblyError(f"potential is missing site {key} (position {(k / q).tolist()})")
            out[i] = potential[key]
        return out
    V = np.asarray(potential, dtype=float)
    if V.shape != (n,):
        raise AssemblyError(f"potential has shape {V.shape}, expected ({n},)")
    return V


def assemble_sites(labels, q: int, field: MagneticField, potential=None, bc: str = "dirichlet") -> DiscreteHamiltonian:
    """Operator on an arbitrary set of mesh sites (labels in mesh units, positions ``labels / q``)."""
    if bc not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bc!r}")
    labels = np.asarray(labels, dtype=np.int64)
    labels = labels.reshape(len(labels), -1) if labels.size else labels.reshape(0, field.d)
    V = _resolve_potential(potential, labels, q).copy()
    K, deg = _kinetic(labels, q, field, bc)
    V.setflags(write=False)
    labels = labels.copy()
    labels.setflags(write=False)
    return DiscreteHamiltonian(K, V, labels, q, bc, field, deg, _fingerprint(V))


def assemble(spec: BoxSpec, field: MagneticField, potential=None) -> DiscreteHamiltonian:
    """Operator of the box ``spec`` with its boundary condition.

    ``potential`` may be an array aligned with the lexicographic site order, a
    mapping from integer site labels to values, or a callable of positions.
    """
    return assemble_sites(spec.integer_sites(), spec.q, field, potential, spec.bc)


def magnetic_translate(v, labels, m, field: MagneticField, q: int = 1) -> tuple:
    """Apply U_m to a state on ``labels``; returns the shifted labels and the new state.

    Shifting preserves lexicographic order, so entry i of the output lives on
    ``labels[i] + m q``.
    """
    m = np.asarray(m)
    if not np.all(np.equal(np.mod(m, 1), 0)):
        raise ContractViolation(f"magnetic translations need an integer shift, got {m.tolist()}")
    m = m.astype(np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    new_labels = labels + m * q
    phase = np.exp(1j * translation_phase(m, new_labels / q, field))
    return new_labels, phase * np.asarray(v)


def dump_triplets(H: DiscreteHamiltonian, path) -> None:
    """Write ``row col re im`` lines (0-based, row-major) for external cross-checks."""
    M = H.matrix.tocoo()
    order = np.lexsort((M.col, M.row))
    with open(path, "w") as fh:
        fh.write(f"# N={H.N} d={H.d} q={H.q} bc={H.bc}\n")
        for r, c, z in zip(M.row[order], M.col[order], M.data[order]):
            fh.write(f"{r} {c} {z.real:.17g} {z.imag:.17g}\n")


def load_triplets(path) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    n = None
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                n = int(line.split()[1].split("=")[1])
                continue
            r, c, re, im = line.split()
            rows.append(int(r))
            cols.append(int(c))
            vals.append(complex(float(re), float(im)))
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def plaquette_fluxes(H: DiscreteHamiltonian, axes=(0, 1)) -> np.ndarray:
    """Phase sum around every elementary plaquette in the ``axes`` plane, read off the matrix entries.

    With hopping ``-h^-2 exp(-i theta)`` the product of ``-h^2 H`` around the loop
    x -> x+e_i -> x+e_i+e_j -> x+e_j -> x is ``exp(-i sum theta)``. By Stokes with
    A = Bx/2 this circulation equals ``B[j, i] h^2``; the reversed loop gives ``B[i, j] h^2``.
    """
    i, j = axes
    lookup = SiteLookup(H.labels)
    ei = np.zeros(H.d, dtype=np.int64)
    ej = np.zeros(H.d, dtype=np.int64)
    ei[i] = 1
    ej[j] = 1
    a = np.arange(H.N)
    b = lookup.find(H.labels + ei)
    c = lookup.find(H.labels + ei + ej)
    dd = lookup.find(H.labels + ej)
    ok = (b >= 0) & (c >= 0) & (dd >= 0)
    a, b, c, dd = a[ok], b[ok], c[ok], dd[ok]
    M = H.kinetic.tocsr()
    s = -(H.h**2)
    prod = (s * np.asarray(M[a, b]).ravel()) * (s * np.asarray(M[b, c]).ravel()) \
        * (s * np.asarray(M[c, dd]).ravel()) * (s * np.asarray(M[dd, a]).ravel())
    return -np.angle(prod)
