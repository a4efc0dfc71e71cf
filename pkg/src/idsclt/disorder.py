"""Single-site distributions, alloy potentials, coordinate surgery and conditional resampling.

Every coupling is drawn from a counter-based hash of (seed, stream, n): the
value at lattice point n never depends on which other points are sampled or
in what order, so conditional resampling only has to change the stream.
"""
from __future__ import annotations

import hashlib
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CoverageError
from .geometry import IndexSet
from .magnetic import SiteLookup

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _as_stream(stream) -> tuple:
    if stream is None:
        return ()
    if isinstance(stream, (int, np.integer)):
        return (int(stream),)
    return tuple(int(s) for s in stream)


def counter_uniforms(seed: int, stream, points) -> np.ndarray:
    """Uniform [0, 1) variates, one per row of ``points``, as a pure function of (seed, stream, n)."""
    points = np.asarray(points, dtype=np.int64)
    points = points.reshape(len(points), -1)
    with np.errstate(over="ignore"):
        key = _mix(np.array([seed & (2**64 - 1)], dtype=np.uint64) + _GOLDEN)
        for s in _as_stream(stream):
            key = _mix(key ^ (np.array([s & (2**64 - 1)], dtype=np.uint64) + _GOLDEN))
        h = np.repeat(key, points.shape[0])
        for i in range(points.shape[1]):
            lane = points[:, i].astype(np.uint64) + _GOLDEN * np.uint64(i + 1)
            h = _mix(h ^ lane)
        h = _mix(h + _GOLDEN)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


def derive_seed(seed: int, *labels: int) -> int:
    """Child seed for a named sub-experiment; stable across runs and platforms."""
    u = counter_uniforms(seed, labels, np.zeros((1, 1), dtype=np.int64))[0]
    return int(u * 2.0**53)


@dataclass(frozen=True)
class SiteDistribution:
    """Compactly supported law of the couplings."""

    kind: str
    a: float = 0.0
    b: float = 1.0
    prob: float = 0.5

    def __post_init__(self):
        if self.kind not in ("uniform", "two-point", "point-mass"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("distribution support must be bounded")
        if self.kind == "uniform" and not self.a <= self.b:
            raise ValueError("uniform(a, b) needs a <= b")
        if self.kind == "two-point" and not 0 <= self.prob <= 1:
            raise ValueError("two-point probability must lie in [0, 1]")

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0) -> "SiteDistribution":
        return cls("uniform", a, b)

    @classmethod
    def two_point(cls, a: float, b: float, prob: float = 0.5) -> "SiteDistribution":
        """Value ``a`` with probability ``prob``, else ``b``."""
        return cls("two-point", a, b, prob)

    @classmethod
    def point_mass(cls, c: float) -> "SiteDistribution":
        return cls("point-mass", c, c)

    @property
    def lo(self) -> float:
        return min(self.a, self.b)

    @property
    def hi(self) -> float:
        return max(self.a, self.b)

    @property
    def is_degenerate(self) -> bool:
        if self.kind == "point-mass":
            return True
        if self.kind == "two-point":
            return self.a == self.b or self.prob in (0.0, 1.0)
        return self.a == self.b

    def transform(self, u: np.ndarray) -> np.ndarray:
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        if self.kind == "two-point":
            return np.where(u < self.prob, self.a, self.b)
        return np.full_like(u, self.a)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "a": self.a, "b": self.b, "prob": self.prob}


@dataclass(frozen=True, eq=False)
class SingleSite:
    """Single-site bump ``u`` sampled on the mesh.

    ``offsets`` are integer mesh offsets (positions ``n + offset / q``) and
    ``values`` the profile there; u vanishes at every other mesh point.
    """

    offsets: np.ndarray
    values: np.ndarray
    q: int = 1
    radius: float = 0.5

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=np.int64)
        off = off.reshape(len(off), -1)
        vals = np.asarray(self.values, dtype=float).reshape(len(off))
        if not np.all(np.isfinite(vals)):
            raise ValueError("single-site profile must be bounded")
        if len(off) and np.max(np.abs(off)) / self.q > self.radius + 1e-12:
            raise ValueError("single-site profile extends beyond its support radius")
        off.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return int(self.offsets.shape[1])

    @property
    def sign(self) -> str:
        if np.all(self.values >= 0):
            return "nonnegative"
        if np.all(self.values <= 0):
            return "nonpositive"
        return "mixed"

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    @classmethod
    def indicator(cls, d: int, q: int = 1, height: float = 1.0) -> "SingleSite":
        """Indicator of the half-open unit cell [-1/2, 1/2)^d, so translates tile space."""
        ks = np.arange(-(q // 2), q - q // 2)
        grid = np.array(np.meshgrid(*[ks] * d, indexing="ij")).reshape(d, -1).T
        return cls(grid, np.full(len(grid), height), q, 0.5)

    @classmethod
    def zero(cls, d: int, q: int = 1) -> "SingleSite":
        return cls(np.zeros((1, d), dtype=np.int64), np.zeros(1), q, 0.5)

    @classmethod
    def from_function(cls, func: Callable, radius: float, d: int, q: int = 1) -> "SingleSite":
        """Sample ``func`` at mesh offsets within sup-norm ``radius``."""
        r = int(np.floor(radius * q + 1e-12))
        ks = np.arange(-r, r + 1)
        grid = np.array(np.meshgrid(*[ks] * d, indexing="ij")).reshape(d, -1).T
        vals = np.asarray([func(g / q) for g in grid], dtype=float)
        keep = vals != 0
        if not np.any(keep):
            return cls.zero(d, q)
        return cls(grid[keep], vals[keep], q, radius)

    def to_dict(self) -> dict:
        return {"q": self.q, "radius": self.radius, "offsets": self.offsets.tolist(),
                "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class Configuration:
    """Couplings omega_n on an index set, tagged with the (seed, stream) that produced them."""

    points: np.ndarray
    values: np.ndarray
    seed: int
    stream: tuple = ()
    index_digest: str = ""
    _lookup: SiteLookup | None = field(default=None, repr=False)

    def __post_init__(self):
        self.values.setflags(write=False)
        if self._lookup is None:
            object.__setattr__(self, "_lookup", SiteLookup(self.points))

    def __len__(self):
        return len(self.values)

    def position(self, n) -> int:
        i = int(self._lookup.find(np.asarray(n).reshape(1, -1))[0])
        if i < 0:
            raise KeyError(f"lattice point {tuple(np.asarray(n).tolist())} is not in the configuration")
        return i

    def __getitem__(self, n) -> float:
        return float(self.values[self.position(n)])

    def replace_values(self, values, stream=None) -> "Configuration":
        return Configuration(self.points, np.asarray(values, dtype=float).copy(), self.seed,
                             self.stream if stream is None else stream, self.index_digest, self._lookup)

    def manifest(self) -> dict:
        return {"seed": self.seed, "stream": list(self.stream), "index_set": self.index_digest}


def sample_configuration(dist: SiteDistribution, idx: IndexSet, seed: int, stream=0) -> Configuration:
    """i.i.d. couplings on ``idx``; byte-for-byte reproducible from (dist, idx, seed, stream)."""
    stream = _as_stream(stream)
    vals = dist.transform(counter_uniforms(seed, stream, idx.points))
    return Configuration(idx.points, vals, seed, stream, idx.digest())


class AlloyMap:
    """Precomputed linear map from couplings (in configuration order) to site potentials."""

    def __init__(self, points: np.ndarray, u: SingleSite, labels: np.ndarray, check: bool = True):
        labels = np.asarray(labels, dtype=np.int64)
        points = np.asarray(points, dtype=np.int64).reshape(len(points), -1)
        site_lookup = SiteLookup(labels)
        point_lookup = SiteLookup(points)
        rows, cols, vals = [], [], []
        for off, w in zip(u.offsets, u.values):
            if w == 0:
                continue
            j = site_lookup.find(points * u.q + off)
            hit = np.flatnonzero(j >= 0)
            rows.append(j[hit])
            cols.append(hit)
            vals.append(np.full(len(hit), w))
            if check:
                # every n whose translate reaches a site must be present
                rel = labels - off
                ok = np.all(rel % u.q == 0, axis=1)
                needed = rel[ok] // u.q
                missing = point_lookup.find(needed) < 0
                if np.any(missing):
                    n = tuple(int(v) for v in needed[np.argmax(missing)])
                    raise CoverageError(f"configuration lacks coupling n={n} whose single-site support meets the grid")
        n_sites = labels.shape[0]
        if rows:
            self.matrix = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                                        shape=(n_sites, len(points)))
        else:
            self.matrix = sp.csr_matrix((n_sites, len(points)))
        self.points = points

    def apply(self, values) -> np.ndarray:
        return self.matrix @ np.asarray(values, dtype=float)

    def weights(self, n_index: int) -> np.ndarray:
        """Site profile of u_n for the coupling in column ``n_index``."""
        return self.matrix[:, n_index].toarray().ravel()


def alloy_potential(cfg: Configuration, u: SingleSite, labels) -> np.ndarray:
    """V(x) = sum_n omega_n u(x - n) at each mesh site label."""
    return AlloyMap(cfg.points, u, labels).apply(cfg.values)


def sup_bound(dist: SiteDistribution, u: SingleSite) -> float:
    """Deterministic bound on sup |V| over all configurations."""
    c = max(abs(dist.lo), abs(dist.hi))
    if c == 0 or u.is_zero:
        return 0.0
    residue = np.mod(u.offsets, u.q)
    keys = [tuple(r) for r in residue]
    totals = {}
    for k, w in zip(keys, np.abs(u.values)):
        totals[k] = totals.get(k, 0.0) + w
    return float(c * max(totals.values()))


def scale_coordinate(cfg: Configuration, k, t: float) -> Configuration:
    """Replace omega_k by t * omega_k."""
    i = cfg.position(k)
    vals = np.array(cfg.values)
    vals[i] *= t
    return cfg.replace_values(vals)


@dataclass(frozen=True)
class ConditioningMask:
    """Predicate selecting the coordinates held fixed under conditioning."""

    name: str
    predicate: Callable = field(compare=False)

    def __call__(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.int64)
        return np.asarray(self.predicate(points.reshape(len(points), -1)), dtype=bool)

    @classmethod
    def everything(cls) -> "ConditioningMask":
        return cls("all", lambda p: np.ones(len(p), dtype=bool))

    @classmethod
    def nothing(cls) -> "ConditioningMask":
        return cls("none", lambda p: np.zeros(len(p), dtype=bool))

    @classmethod
    def halfspace(cls, d: int, last: int) -> "ConditioningMask":
        """Mask of A^d_{1,...,1,last} for last in {0, 1}."""
        if last not in (0, 1):
            raise ValueError("last index must be 0 or 1")
        return cls(f"A^{d}_{'1' * (d - 1)}{last}", lambda p: _in_A(p, d, last))

    @classmethod
    def upto_site(cls, d: int) -> "ConditioningMask":
        return cls.halfspace(d, 1)

    @classmethod
    def before_site(cls, d: int) -> "ConditioningMask":
        return cls.halfspace(d, 0)


def _in_A(p: np.ndarray, r: int, last: int) -> np.ndarray:
    """Membership in A^r_{1..1,last}: the union over levels built recursively on the first r coordinates."""
    slab = np.all(p[:, : r - 1] <= 1, axis=1) & (p[:, r - 1] <= last)
    if r == 1:
        return slab
    return _in_A(p, r - 1, 0) | slab


def conditional_resample(cfg: Configuration, mask: ConditioningMask, dist: SiteDistribution,
                         seed: int, stream=0) -> Configuration:
    """Keep masked coordinates, redraw the others i.i.d. from ``dist`` using (seed, stream)."""
    keep = mask(cfg.points)
    if np.all(keep):
        return cfg
    fresh = dist.transform(counter_uniforms(seed, stream, cfg.points))
    vals = np.where(keep, cfg.values, fresh)
    return cfg.replace_values(vals, stream=_as_stream(stream))


def configuration_hash(cfg: Configuration) -> str:
    return hashlib.sha256(np.ascontiguousarray(cfg.values, dtype="<f8").tobytes()).hexdigest()[:16]
