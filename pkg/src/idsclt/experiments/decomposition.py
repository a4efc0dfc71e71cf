"""Annuli decomposition of the box trace and independence of separated annuli."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import DecompositionPlan, annuli_plan
from ..spectral import _apply
from .ensemble import EnsembleSpec, PreparedBox


@dataclass(frozen=True)
class CrossCovariance:
    a: str
    b: str
    value: float
    se: float

    @property
    def z(self) -> float:
        return self.value / self.se if self.se > 0 else 0.0


@dataclass(eq=False)
class DecompositionResult:
    L: int
    value: float
    se: float
    n: int
    plan: DecompositionPlan
    names: list
    region_traces: np.ndarray
    box_traces: np.ndarray
    cross: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"L": self.L, "value": self.value, "se": self.se, "n": self.n,
                "covers": self.plan.covers, "plan": self.plan.to_dict(),
                "cross": [{"a": c.a, "b": c.b, "value": c.value, "se": c.se} for c in self.cross]}


def _trace(A: np.ndarray, f) -> float:
    if A.shape[0] == 0:
        return 0.0
    return math.fsum(_apply(f, np.linalg.eigvalsh(A)))


def _center(x: np.ndarray) -> np.ndarray:
    # exactly constant columns stay exactly zero after centering
    return np.zeros_like(x) if np.all(x == x[0]) else x - math.fsum(x) / len(x)


def decomposition_residual(spec: EnsembleSpec, plan: DecompositionPlan | None = None) -> DecompositionResult:
    """E[G_L^2] / |Lambda_L| with G_L = Y_L - sum over regions of Y_region.

    Each region operator is the Dirichlet restriction of the box operator with
    the same configuration, which for the Dirichlet convention used here is the
    principal submatrix on the region's sites. Every Y is centered by its own
    ensemble mean.
    """
    spec = spec.with_bc("dirichlet")
    if plan is None:
        plan = annuli_plan(spec.box.d, spec.box.L)
    if plan.L != spec.box.L or plan.d != spec.box.d:
        raise ValueError("plan and ensemble describe different boxes")
    prep = PreparedBox(spec)
    pos = prep.H0.positions
    named = plan.regions()
    names = [n for n, _ in named]
    blocks = [np.flatnonzero(r.contains(pos)) for _, r in named]
    n = spec.n_samples
    box_T = np.empty(n)
    reg_T = np.empty((n, len(blocks)))
    for j in range(n):
        A = prep.matrix(prep.potential(j))
        box_T[j] = _trace(A, spec.f)
        for k, idx in enumerate(blocks):
            reg_T[j, k] = _trace(A[np.ix_(idx, idx)], spec.f)
    Y = _center(box_T)
    Yr = np.stack([_center(col) for col in reg_T.T], axis=1)
    G2 = (Y - Yr.sum(axis=1)) ** 2
    vol = spec.volume
    value = math.fsum(G2) / n / vol
    se = float(np.std(G2, ddof=1) / math.sqrt(n) / vol)
    bulk = [k for k, name in enumerate(names) if name.startswith("B")]
    cross = []
    for i, a in enumerate(bulk):
        for b in bulk[i + 1:]:
            prod = Yr[:, a] * Yr[:, b]
            cross.append(CrossCovariance(names[a], names[b], float(prod.mean()),
                                         float(np.std(prod, ddof=1) / math.sqrt(n))))
    return DecompositionResult(spec.box.L, value, se, n, plan, names, reg_T, box_T, cross)
