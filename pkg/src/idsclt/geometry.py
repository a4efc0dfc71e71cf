"""Boxes, sup-norm shells, the box-annuli decomposition and disorder index sets.

Positions live on a mesh of spacing ``h = 1/q``; a mesh site is stored by its
integer label ``k`` with position ``k / q``. Every region is an open set in
the sup norm, so sites lying exactly on a shell radius belong to no region.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidGeometryError

BOUNDARY_CONDITIONS = ("dirichlet", "neumann")


def _floor(x: float) -> int:
    # guards against 81 ** 0.75 landing a hair below 27
    return int(math.floor(x + 1e-9))


@dataclass(frozen=True)
class BoxSpec:
    """Open cube of side ``L`` (centred at ``center``) discretized at spacing 1/q."""

    d: int
    L: int
    q: int = 1
    bc: str = "dirichlet"
    center: tuple = ()

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise InvalidGeometryError(f"dimension must be 1, 2 or 3, got {self.d}")
        if int(self.L) != self.L or self.L < 2:
            raise InvalidGeometryError(f"side length must be an integer >= 2, got {self.L}")
        if int(self.q) != self.q or self.q < 1:
            raise InvalidGeometryError(f"mesh refinement q must be a positive integer, got {self.q}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise InvalidGeometryError(f"unknown boundary condition {self.bc!r}")
        center = tuple(int(c) for c in self.center) if self.center else (0,) * self.d
        if len(center) != self.d:
            raise InvalidGeometryError("center must have d integer components")
        object.__setattr__(self, "center", center)

    @property
    def h(self) -> float:
        return 1.0 / self.q

    @property
    def volume(self) -> float:
        return float(self.L) ** self.d

    def with_bc(self, bc: str) -> "BoxSpec":
        return BoxSpec(self.d, self.L, self.q, bc, self.center)

    def shifted(self, m) -> "BoxSpec":
        m = tuple(int(v) for v in m)
        return BoxSpec(self.d, self.L, self.q, self.bc, tuple(c + v for c, v in zip(self.center, m)))

    def region(self) -> "Region":
        return Region(self.d, self.L / 2, None, self.center)

    def integer_sites(self) -> np.ndarray:
        """Integer mesh labels in lexicographic order, shape (N, d)."""
        # |k - c q| / q < L / 2  <=>  2 |k - c q| < L q, exact in integers
        half = (self.L * self.q - 1) // 2
        axes = [np.arange(c * self.q - half, c * self.q + half + 1) for c in self.center]
        grid = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, self.d)
        if grid.shape[0] == 0:
            raise InvalidGeometryError(f"box L={self.L}, q={self.q} contains no mesh sites")
        return grid

    def sites(self) -> np.ndarray:
        return self.integer_sites() / self.q


def build_box(spec: BoxSpec) -> np.ndarray:
    """Mesh positions of the open box, lexicographic in the integer labels."""
    return spec.sites()


@dataclass(frozen=True)
class Region:
    """Open sup-norm region: the full box ``|x - c| < r_out`` or a shell ``r_in < |x - c| < r_out``."""

    d: int
    r_out: float
    r_in: float | None = None
    center: tuple = ()

    def __post_init__(self):
        center = tuple(float(c) for c in self.center) if self.center else (0.0,) * self.d
        object.__setattr__(self, "center", center)

    @property
    def kind(self) -> str:
        return "full-box" if self.r_in is None else "shell"

    @property
    def is_empty(self) -> bool:
        if self.r_in is None:
            return self.r_out <= 0
        return self.r_out <= max(self.r_in, 0.0)

    @property
    def side(self) -> float:
        return 2.0 * self.r_out

    @property
    def volume(self) -> float:
        if self.is_empty:
            return 0.0
        outer = (2.0 * self.r_out) ** self.d
        if self.r_in is None or self.r_in <= 0:
            return outer
        return outer - (2.0 * self.r_in) ** self.d

    def supnorm(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1, self.d)
        return np.max(np.abs(x - np.asarray(self.center)), axis=1)

    def contains(self, x) -> np.ndarray:
        """Vectorized strict membership of points ``x`` with shape (..., d)."""
        r = self.supnorm(x)
        inside = r < self.r_out
        if self.r_in is not None:
            inside &= r > self.r_in
        return inside

    def to_dict(self) -> dict:
        return {"kind": self.kind, "d": self.d, "r_in": self.r_in, "r_out": self.r_out,
                "center": list(self.center)}


def full_box(d: int, L: float) -> Region:
    return Region(d, L / 2.0)


def shell(d: int, r_in: float, r_out: float) -> Region:
    return Region(d, r_out, r_in)


def interior(region: Region, ell: float) -> Region:
    """Shrink a region by ``ell`` from every face; the result may be empty (see ``is_empty``)."""
    if ell < 0:
        raise ValueError("interior depth must be nonnegative")
    if region.r_in is None:
        return Region(region.d, region.r_out - ell, None, region.center)
    return Region(region.d, region.r_out - ell, region.r_in + ell, region.center)


def sites_in(region: Region, positions) -> np.ndarray:
    """Indices of ``positions`` (N, d) inside ``region``."""
    return np.flatnonzero(region.contains(positions))


@dataclass(frozen=True)
class DecompositionPlan:
    """Box annuli of the cube of side L with all radii spelled out."""

    d: int
    L: int
    eps: float
    delta: float
    gamma: float
    alpha: float
    R: float
    M_L: float
    r_L: int
    ell_L: float
    ell_tilde_L: float
    core: Region
    bulk: tuple
    separators: tuple
    outer: Region
    gaps: tuple = field(default=())

    @property
    def covers(self) -> bool:
        return len(self.gaps) == 0

    def regions(self) -> list:
        """(name, region) pairs: core, B_k, S_k, outer remainder."""
        out = [("core", self.core)]
        out += [(f"B{k}", r) for k, r in enumerate(self.bulk, start=1)]
        out += [(f"S{k}", r) for k, r in enumerate(self.separators, start=1)]
        out.append(("outer", self.outer))
        return out

    def interiors(self) -> list:
        """The ell_L-interiors of the B, S and outer regions."""
        return [(name, interior(r, self.ell_L)) for name, r in self.regions() if name != "core"]

    def bulk_interior(self) -> Region:
        return interior(full_box(self.d, self.L), self.ell_tilde_L)

    def radii(self) -> list:
        edges = {0.0, self.L / 2.0}
        for _, r in self.regions():
            edges.add(r.r_out)
            if r.r_in is not None:
                edges.add(r.r_in)
        return sorted(edges)

    def to_dict(self) -> dict:
        return {
            "d": self.d, "L": self.L, "eps": self.eps, "delta": self.delta,
            "gamma": self.gamma, "alpha": self.alpha, "R": self.R,
            "M_L": self.M_L, "r_L": self.r_L, "ell_L": self.ell_L, "ell_tilde_L": self.ell_tilde_L,
            "regions": [dict(name=n, **r.to_dict()) for n, r in self.regions()],
            "gaps": [g.to_dict() for g in self.gaps],
        }


def annuli_plan(d: int, L: int, eps: float = 0.75, delta: float = 0.25, gamma: float = 0.5,
                alpha: float = 0.5, R: float = 1.0) -> DecompositionPlan:
    """Concentric B/S shells, the outer remainder and the central core of the cube of side L.

    When ``floor(L**delta) * floor(L**eps) < L`` the shell formulas leave an
    uncovered band between the last separator and the outer remainder; it is
    reported in ``plan.gaps`` instead of being silently absorbed.
    """
    if not (eps > delta > 0) or not math.isclose(eps + delta, 1.0, abs_tol=1e-12):
        raise InvalidGeometryError(f"need eps > delta > 0 and eps + delta = 1, got ({eps}, {delta})")
    if not (0 < gamma < 1 and 0 < alpha < 1):
        raise InvalidGeometryError("gamma and alpha must lie in (0, 1)")
    if R <= 0:
        raise InvalidGeometryError("support radius R must be positive")
    M = 0.5 * _floor(L ** eps)
    r = _floor(L ** delta)
    if r < 2:
        raise InvalidGeometryError(f"L={L} gives r_L={r} < 2: no annulus k=1..r_L-1 exists")
    half = L / 2.0
    core = Region(d, 3 * R)
    bulk, seps = [], []
    for k in range(1, r):
        b = Region(d, k * M + (k - 1) * 3 * R, (k - 1) * M + k * 3 * R)
        s = Region(d, k * M + (k + 1) * 3 * R, k * M + (k - 1) * 3 * R)
        if not b.r_in < b.r_out:
            raise InvalidGeometryError(f"bulk annulus k={k} has nonpositive width ({b.r_in}, {b.r_out}) at L={L}")
        bulk.append(b)
        seps.append(s)
    outer = Region(d, half, half - (M - r * 3 * R))
    if not outer.r_in < outer.r_out:
        raise InvalidGeometryError(
            f"outer remainder (k={r}) has nonpositive width ({outer.r_in}, {outer.r_out}) at L={L}")
    last = seps[-1].r_out
    if last > outer.r_in + 1e-12:
        raise InvalidGeometryError(f"separator k={r - 1} overlaps the outer remainder at L={L}")
    gaps = (Region(d, outer.r_in, last),) if last < outer.r_in - 1e-12 else ()
    return DecompositionPlan(
        d=d, L=L, eps=eps, delta=delta, gamma=gamma, alpha=alpha, R=R, M_L=M, r_L=r,
        ell_L=M ** gamma, ell_tilde_L=float(L) ** alpha, core=core, bulk=tuple(bulk),
        separators=tuple(seps), outer=outer, gaps=gaps,
    )


@dataclass(frozen=True)
class IndexSet:
    """Lattice points whose translated single-site support meets (or sits inside) a region."""

    points: np.ndarray
    region: Region | None = None
    support_radius: float = 0.5
    depth: float | None = None

    def __len__(self):
        return int(self.points.shape[0])

    def __iter__(self):
        return (tuple(int(v) for v in p) for p in self.points)

    def __contains__(self, n):
        n = np.asarray(n, dtype=np.int64).reshape(1, -1)
        return bool(np.any(np.all(self.points == n, axis=1)))

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    def digest(self) -> str:
        import hashlib
        return hashlib.sha256(np.ascontiguousarray(self.points, dtype="<i8").tobytes()).hexdigest()[:16]


def index_set(region: Region, support_radius: float, ell: float | None = None) -> IndexSet:
    """All n in Z^d with ``n + [-R, R]^d`` meeting ``region``.

    With ``ell`` given, returns instead the n whose closed support lies inside
    ``interior(region, ell)``.
    """
    if support_radius <= 0:
        raise ValueError("support radius must be positive")
    R = support_radius
    target = region if ell is None else interior(region, ell)
    d = region.d
    if target.is_empty:
        return IndexSet(np.zeros((0, d), dtype=np.int64), region, R, ell)
    reach = int(math.ceil(target.r_out + R)) + 1
    axes = [np.arange(math.floor(c) - reach, math.ceil(c) + reach + 1) for c in target.center]
    cand = np.array(list(itertools.product(*axes)), dtype=np.int64).reshape(-1, d)
    rho = target.supnorm(cand)
    lo = np.maximum(rho - R, 0.0)
    hi = rho + R
    r_in = -np.inf if target.r_in is None else target.r_in
    if ell is None:
        keep = (lo < target.r_out) & (hi > r_in)
    else:
        keep = (hi < target.r_out) & (lo > r_in)
    return IndexSet(cand[keep], region, R, ell)
