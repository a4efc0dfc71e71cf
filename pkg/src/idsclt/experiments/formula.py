"""Nested Monte Carlo estimate of the limiting variance through the martingale-difference formula.

For the coupling at s = (1, ..., 1),

    D = omega_s E( int_0^1 Tr(u_s f'(H_t)) dt | F_s ) - E( int_0^1 omega_s Tr(u_s f'(H_t)) dt | F_s- ),

where H_t has omega_s replaced by t omega_s, F_s fixes every coupling up to s in
the lexicographic order and F_s- every coupling strictly before s. The
variance per unit volume is E[D^2]. Inner conditional expectations are sample
means over resampled configurations; two independent inner replicas D_a, D_b
give the unbiased product D_a D_b for E[D^2].
"""
from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from ..disorder import (AlloyMap, ConditioningMask, Configuration, conditional_resample, derive_seed,
                        sample_configuration, sup_bound)
from ..errors import DomainError, InvalidGeometryError, QuadratureError
from ..geometry import BoxSpec, index_set
from ..magnetic import assemble
from ..spectral import LocalResolventProbe, batched_local_traces, trace_function
from .ensemble import EnsembleSpec, VarianceEstimate


class _Integrand:
    """omega_s * int_0^1 Tr(u_s f'(H_t)) dt on the proxy box, by Gauss-Legendre in t."""

    def __init__(self, spec: EnsembleSpec, L_p: int, Q: int):
        d, q = spec.box.d, spec.box.q
        self.box = BoxSpec(d, L_p, q, "dirichlet")
        self.idx = index_set(self.box.region(), spec.site.radius)
        target = np.ones(d, dtype=np.int64)
        if target.tolist() not in self.idx.points.tolist():
            raise InvalidGeometryError(f"target site {tuple(target)} lies outside the proxy box L_p={L_p}")
        depth = L_p / 2.0 - (1.0 + spec.site.radius)
        if depth < L_p / 4.0:
            raise InvalidGeometryError(f"target site is only {depth} from the proxy boundary (L_p={L_p})")
        H0 = assemble(self.box, spec.field)
        self.alloy = AlloyMap(self.idx.points, spec.site, H0.labels)
        self.col = int(np.flatnonzero(np.all(self.idx.points == target, axis=1))[0])
        self.w = self.alloy.weights(self.col)
        self.base = H0.dense()
        nodes, weights = np.polynomial.legendre.leggauss(Q)
        self.t = 0.5 * (nodes + 1.0)
        self.c = 0.5 * weights
        self.f = spec.f
        self.fprime = spec.f.derivative
        P = spec.f.laurent
        self.dP = P.derivative() if P is not None else None
        self.probe = LocalResolventProbe(self.base, self.w) if self.dP is not None else None

    def __call__(self, values: np.ndarray) -> float:
        V = self.alloy.apply(values)
        ws = values[self.col]
        if ws == 0.0:
            return 0.0
        if self.probe is not None:
            acc = [self.probe(V + (t - 1.0) * ws * self.w, self.dP) for t in self.t]
        else:
            stack = V[None, :] + ((self.t - 1.0) * ws)[:, None] * self.w[None, :]
            acc = batched_local_traces(self.base, stack, self.fprime, self.w)
        return ws * math.fsum(c * a for c, a in zip(self.c, acc))

    def exact(self, values: np.ndarray) -> float:
        """Tr f(H) - Tr f(H with omega_s = 0), the closed form of the same quantity."""
        V = self.alloy.apply(values)
        ws = values[self.col]
        A = self.base.copy()
        B = self.base.copy()
        A[np.diag_indices_from(A)] += V
        B[np.diag_indices_from(B)] += V - ws * self.w
        return trace_function(A, self.f) - trace_function(B, self.f)


def variance_formula(spec: EnsembleSpec, L_p: int = 64, N_out: int = 400, N_in: int = 32, Q: int = 8,
                     seed: int | None = None, replicas: int = 2, start: int = 0, stop: int | None = None,
                     return_samples: bool = False):
    """Variance per unit volume from nested Monte Carlo on a Dirichlet proxy box of side ``L_p``.

    Only the single-site data, field, distribution and test function of ``spec``
    are used; its box size is ignored.
    """
    if Q < 2:
        raise QuadratureError(f"Gauss-Legendre needs Q >= 2 nodes, got {Q}")
    if replicas < 2:
        raise ValueError("the unbiased product needs at least two inner replicas")
    if N_in < 1 or N_out < 2:
        raise ValueError("need N_in >= 1 and N_out >= 2")
    pole = spec.f.pole
    if pole is not None and not pole < -sup_bound(spec.dist, spec.site):
        raise DomainError("test function pole must lie below the potential range")
    seed = spec.seed if seed is None else seed
    outer_seed = derive_seed(seed, 1)
    inner_seed = derive_seed(seed, 2)
    g = _Integrand(spec, L_p, Q)
    d = spec.box.d
    masks = (ConditioningMask.upto_site(d), ConditioningMask.before_site(d))
    stop = N_out if stop is None else min(stop, N_out)

    samples = []
    for j in range(start, stop):
        omega = sample_configuration(spec.dist, g.idx, outer_seed, (j,))
        D = []
        for r in range(replicas):
            terms = []
            for term, mask in enumerate(masks):
                vals = [g(conditional_resample(omega, mask, spec.dist, inner_seed, (j, r, term, i)).values)
                        for i in range(N_in)]
                terms.append(math.fsum(vals) / N_in)
            D.append(terms[0] - terms[1])
        samples.append(float(np.mean([a * b for a, b in combinations(D, 2)])))
    X = np.asarray(samples)
    if return_samples:
        return X
    return _summarize(X, L_p, N_in, Q, replicas)


def _summarize(X: np.ndarray, L_p: int, N_in: int, Q: int, replicas: int) -> VarianceEstimate:
    n = len(X)
    value = math.fsum(X) / n
    se = float(np.std(X, ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
    return VarianceEstimate(value, se, "formula", n, L_p,
                            {"N_in": N_in, "Q": Q, "replicas": replicas})


def summarize_formula_samples(X, L_p: int, N_in: int, Q: int, replicas: int = 2) -> VarianceEstimate:
    return _summarize(np.asarray(X, dtype=float), L_p, N_in, Q, replicas)
