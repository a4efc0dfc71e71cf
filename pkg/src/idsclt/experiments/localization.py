"""Exponential locality probes at fixed disorder: interior trace gaps and Combes-Thomas profiles."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from ..geometry import full_box, interior
from ..magnetic import DiscreteHamiltonian, assemble
from ..spectral import eigendecompose, local_trace, offdiag_block_norm, region_mask, resolvent_difference_trace
from .ensemble import EnsembleSpec, PreparedBox


@dataclass(frozen=True)
class DecayFit:
    x: tuple
    y: tuple
    slope: float
    intercept: float
    r2: float

    def to_dict(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "slope": self.slope,
                "intercept": self.intercept, "r2": self.r2}


def log_linear_fit(x, y) -> DecayFit:
    """Least-squares line through (x, log y); nonpositive y are rejected."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0):
        raise ValueError("log-linear fit needs strictly positive values")
    res = stats.linregress(x, np.log(y))
    return DecayFit(tuple(x.tolist()), tuple(y.tolist()), float(res.slope), float(res.intercept),
                    float(res.rvalue**2))


def _fit(x, y) -> DecayFit | None:
    # exactly zero gaps (identical operators or an empty interior) have no decay rate
    return log_linear_fit(x, y) if np.all(np.asarray(y) > 0) else None


def _gap(A: np.ndarray, B: np.ndarray, H: DiscreteHamiltonian, f, F) -> float:
    w = region_mask(H, F)
    if f.laurent is not None:
        return abs(resolvent_difference_trace(A, B, f.laurent, w))
    return abs(local_trace(H, f, w, eigendecompose(A)) - local_trace(H, f, w, eigendecompose(B)))


@dataclass(frozen=True)
class GapProfile:
    variant: str
    ells: tuple
    gaps: tuple
    fit: DecayFit | None


def interior_trace_gap(spec: EnsembleSpec, ells=(2, 4, 8, 16), inner_L: int | None = None,
                       sample: int = 0, variants=("box-in-box", "neumann-dirichlet")) -> dict:
    """Local-trace gaps on ell-interiors at the fixed configuration ``sample`` of ``spec``.

    box-in-box: Dirichlet box of side L against the Dirichlet sub-box of side
    ``inner_L`` (default L/2), traced over the ell-interior of the sub-box.
    neumann-dirichlet: the two boundary conditions on the same box, traced over
    the ell-interior of that box.
    """
    prep = PreparedBox(spec.with_bc("dirichlet"))
    V = prep.potential(sample)
    HD = prep.H0.with_potential(V)
    AD = HD.dense()
    out = {}
    if "box-in-box" in variants:
        inner_L = inner_L or spec.box.L // 2
        sub = full_box(spec.box.d, inner_L)
        inside = sub.contains(HD.positions)
        # decoupled operator: H_D with every bond crossing the sub-box boundary removed,
        # whose sub-box block is exactly the Dirichlet restriction
        cut = inside[:, None] != inside[None, :]
        A_dec = AD.copy()
        A_dec[cut] = 0.0
        gaps = [_gap(AD, A_dec, HD, spec.f, interior(sub, ell)) for ell in ells]
        out["box-in-box"] = GapProfile("box-in-box", tuple(ells), tuple(gaps), _fit(ells, gaps))
    if "neumann-dirichlet" in variants:
        HN = assemble(spec.box.with_bc("neumann"), spec.field, V)
        AN = HN.dense()
        box = spec.box.region()
        gaps = [_gap(AN, AD, HD, spec.f, interior(box, ell)) for ell in ells]
        out["neumann-dirichlet"] = GapProfile("neumann-dirichlet", tuple(ells), tuple(gaps),
                                              _fit(ells, gaps))
    return out


def combes_thomas_profile(H: DiscreteHamiltonian, E: float, m: int, distances, width: float = 1.0,
                          center=None) -> DecayFit:
    """log ||chi_F (H - E)^-m chi_G|| against dist(F, G).

    F is the sup-norm ball of radius ``width`` around ``center``; G at distance
    r is the shell of points with sup-distance from F in [r, r + width).
    """
    pos = H.positions
    c = np.zeros(H.d) if center is None else np.asarray(center, dtype=float)
    rho = np.max(np.abs(pos - c), axis=1)
    F = rho < width
    spec = eigendecompose(H)
    norms = []
    for r in distances:
        dist = rho - width
        G = (dist >= r) & (dist < r + width)
        if not np.any(G):
            raise ValueError(f"no sites at distance {r} inside the box")
        norms.append(offdiag_block_norm(H, E, m, F, G, "operator", spec))
    return log_linear_fit(distances, norms)


def fixed_operator(spec: EnsembleSpec, sample: int = 0) -> DiscreteHamiltonian:
    """The operator of ``spec`` at configuration ``sample``."""
    prep = PreparedBox(spec)
    return prep.H0.with_potential(prep.potential(sample))
