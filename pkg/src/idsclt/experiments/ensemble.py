"""Seeded Monte Carlo ensembles of trace functionals and the statistics built on them."""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..disorder import AlloyMap, SingleSite, SiteDistribution, counter_uniforms, sup_bound
from ..errors import DomainError, EmptyDataError
from ..geometry import BoxSpec, index_set
from ..magnetic import MagneticField, assemble
from ..spectral import DENSE_CAP, _apply
from ..testfun import TestFunction


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    box: BoxSpec
    field: MagneticField
    dist: SiteDistribution
    site: SingleSite
    f: TestFunction
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.n_samples < 2:
            raise ValueError("an ensemble needs at least two samples")
        if self.field.d != self.box.d or self.site.d != self.box.d:
            raise ValueError("box, field and single-site dimensions disagree")
        if self.site.q != self.box.q:
            raise ValueError("single-site profile and box use different meshes")
        pole = self.f.pole
        vb = sup_bound(self.dist, self.site)
        if pole is not None and not pole < -vb:
            raise DomainError(f"E must be < {-vb:g} (got {pole:g})")

    @property
    def volume(self) -> float:
        return self.box.volume

    def with_bc(self, bc: str) -> "EnsembleSpec":
        return EnsembleSpec(self.box.with_bc(bc), self.field, self.dist, self.site, self.f,
                            self.n_samples, self.seed)

    def with_samples(self, n: int) -> "EnsembleSpec":
        return EnsembleSpec(self.box, self.field, self.dist, self.site, self.f, n, self.seed)

    def describe(self) -> dict:
        return {
            "d": self.box.d, "L": self.box.L, "q": self.box.q, "bc": self.box.bc,
            "B": self.field.to_list(), "ssd": self.dist.to_dict(), "u": self.site.to_dict(),
            "f": self.f.to_dict(), "n_samples": self.n_samples, "seed": self.seed,
        }


class PreparedBox:
    """Per-spec data reused across samples: sites, index set, kinetic matrix and the alloy map."""

    def __init__(self, spec: EnsembleSpec):
        self.spec = spec
        self.idx = index_set(spec.box.region(), spec.site.radius)
        H0 = assemble(spec.box, spec.field)
        if H0.N > DENSE_CAP:
            raise ValueError(f"box has {H0.N} sites, above the dense cap {DENSE_CAP}")
        self.H0 = H0
        self.base = H0.dense()
        self.alloy = AlloyMap(self.idx.points, spec.site, H0.labels)

    def couplings(self, j: int) -> np.ndarray:
        return self.spec.dist.transform(counter_uniforms(self.spec.seed, (j,), self.idx.points))

    def potential(self, j: int) -> np.ndarray:
        return self.alloy.apply(self.couplings(j))

    def matrix(self, V: np.ndarray) -> np.ndarray:
        A = self.base.copy()
        A[np.diag_indices_from(A)] += V
        return A

    def trace(self, j: int) -> float:
        lam = np.linalg.eigvalsh(self.matrix(self.potential(j)))
        return math.fsum(_apply(self.spec.f, lam))


@dataclass(eq=False)
class EnsembleResult:
    """Per-sample traces T_j with their provenance; sample j used stream (j,) under ``seed``."""

    traces: np.ndarray
    indices: np.ndarray
    seed: int
    volume: float
    L: int
    bc: str
    spec: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)

    def __post_init__(self):
        self.traces = np.asarray(self.traces, dtype=float)
        self.indices = np.asarray(self.indices, dtype=np.int64)

    @property
    def n(self) -> int:
        return len(self.traces)

    @cached_property
    def mean(self) -> float:
        if np.all(self.traces == self.traces[0]):
            return float(self.traces[0])  # keeps degenerate ensembles exactly centred
        return math.fsum(self.traces) / self.n

    @cached_property
    def centered(self) -> np.ndarray:
        return self.traces - self.mean

    @cached_property
    def variance(self) -> float:
        return math.fsum(self.centered**2) / (self.n - 1)

    @property
    def z(self) -> np.ndarray:
        return self.centered / math.sqrt(self.volume)

    @property
    def streams(self) -> list:
        return [(int(j),) for j in self.indices]

    def to_dict(self) -> dict:
        return {
            "L": self.L, "bc": self.bc, "seed": self.seed, "volume": self.volume,
            "n": self.n, "mean": self.mean, "variance": self.variance if self.n > 1 else 0.0,
            "indices": self.indices.tolist(), "traces": self.traces.tolist(), "spec": self.spec,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EnsembleResult":
        return cls(np.array(data["traces"], dtype=float), np.array(data["indices"], dtype=np.int64),
                   int(data["seed"]), float(data["volume"]), int(data["L"]), data["bc"], data.get("spec", {}))


def merge_results(parts) -> EnsembleResult:
    """Associative, order-independent merge keyed by sample index."""
    parts = list(parts)
    if not parts:
        raise EmptyDataError("nothing to merge")
    idx = np.concatenate([p.indices for p in parts])
    tr = np.concatenate([p.traces for p in parts])
    order = np.argsort(idx, kind="stable")
    if np.any(np.diff(idx[order]) == 0):
        raise ValueError("overlapping sample ranges in merge")
    p0 = parts[0]
    return EnsembleResult(tr[order], idx[order], p0.seed, p0.volume, p0.L, p0.bc, p0.spec)


def run_ensemble(spec: EnsembleSpec, bc: str | None = None, start: int = 0, stop: int | None = None,
                 threads: int = 1, prepared: PreparedBox | None = None) -> EnsembleResult:
    """Traces Tr f(H^{omega_j}) for samples j in [start, stop)."""
    if bc is not None and bc != spec.box.bc:
        spec = spec.with_bc(bc)
    stop = spec.n_samples if stop is None else min(stop, spec.n_samples)
    prep = prepared if prepared is not None and prepared.spec.box == spec.box else PreparedBox(spec)
    js = np.arange(start, stop)
    t0 = time.perf_counter()

    def work(j):
        try:
            return prep.trace(int(j))
        except Exception as exc:
            raise type(exc)(f"sample {j}: {exc}") from exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            traces = list(pool.map(work, js))
    else:
        traces = [work(j) for j in js]
    elapsed = time.perf_counter() - t0
    return EnsembleResult(np.array(traces), js, spec.seed, spec.volume, spec.box.L, spec.box.bc,
                          spec.describe(), {"seconds": elapsed, "threads": threads})


@dataclass(frozen=True)
class VarianceEstimate:
    value: float
    se: float
    method: str
    n: int
    L: int | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"value": self.value, "se": self.se, "method": self.method, "n": self.n, "L": self.L, **self.extra}


def bootstrap_se(values: np.ndarray, stat, n_boot: int = 1000, seed: int = 0) -> float:
    values = np.asarray(values, dtype=float)
    if np.all(values == values[0]):
        return 0.0
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, len(values), size=(n_boot, len(values)))
    return float(np.std([stat(values[d]) for d in draws], ddof=1))


def variance_estimate(result: EnsembleResult, n_boot: int = 1000, seed: int = 0) -> VarianceEstimate:
    """Var(T) / |Lambda_L| with a seeded bootstrap standard error."""
    vol = result.volume
    value = result.variance / vol
    se = bootstrap_se(result.traces, lambda x: np.var(x, ddof=1), n_boot, seed) / vol
    if value == 0.0:
        se = 0.0
    return VarianceEstimate(value, se, "direct-scaling", result.n, result.L)


def variance_scaling(results, n_boot: int = 1000, seed: int = 0) -> list:
    """One VarianceEstimate per ensemble, ordered by L."""
    results = sorted(results, key=lambda r: r.L)
    return [variance_estimate(r, n_boot, seed + i) for i, r in enumerate(results)]


@dataclass(frozen=True)
class CoupledDifference:
    value: float
    se: float
    L: int
    n: int
    var_dirichlet: VarianceEstimate | None = None
    var_neumann: VarianceEstimate | None = None


def bc_difference(result_d: EnsembleResult, result_n: EnsembleResult, n_boot: int = 1000,
                  seed: int = 0) -> CoupledDifference:
    """E[(Y_N - Y_D)^2] / |Lambda_L| from ensembles that share every omega_j."""
    if not np.array_equal(result_d.indices, result_n.indices) or result_d.seed != result_n.seed:
        raise ValueError("bc_difference needs coupled ensembles (same seed and sample indices)")
    diff = result_n.centered - result_d.centered
    sq = diff**2
    vol = result_d.volume
    value = math.fsum(sq) / len(sq) / vol
    se = float(np.std(sq, ddof=1) / math.sqrt(len(sq)) / vol)
    return CoupledDifference(value, se, result_d.L, result_d.n,
                             variance_estimate(result_d, n_boot, seed),
                             variance_estimate(result_n, n_boot, seed + 1))


def run_bc_difference(spec: EnsembleSpec, n_boot: int = 1000, threads: int = 1) -> CoupledDifference:
    rd = run_ensemble(spec, "dirichlet", threads=threads)
    rn = run_ensemble(spec, "neumann", threads=threads)
    return bc_difference(rd, rn, n_boot, spec.seed)


@dataclass(frozen=True)
class MomentRow:
    L: int
    second: float
    fourth: float
    kurtosis_ratio: float


def moment_scan(results) -> tuple:
    """Normalized moments E|Y|^2 / L^d and E|Y|^4 / L^2d per L, plus max/min spreads."""
    rows = []
    for r in sorted(results, key=lambda r: r.L):
        y = r.centered
        m2 = float(np.mean(y**2))
        m4 = float(np.mean(y**4))
        rows.append(MomentRow(r.L, m2 / r.volume, m4 / r.volume**2, m4 / m2**2 if m2 > 0 else float("nan")))
    if len(rows) < 2:
        raise ValueError("moment_scan needs at least two box sizes")

    def spread(vals):
        vals = np.asarray(vals)
        return float(vals.max() / vals.min()) if vals.min() > 0 else float("nan")

    return rows, {"second": spread([r.second for r in rows]), "fourth": spread([r.fourth for r in rows])}


@dataclass(frozen=True)
class IDSRow:
    L: int
    value: float
    se: float


def ids_estimate(results) -> tuple:
    """|Lambda_L|^-1 mean(T) per L and the successive relative changes."""
    rows = [IDSRow(r.L, r.mean / r.volume, math.sqrt(r.variance / r.n) / r.volume)
            for r in sorted(results, key=lambda r: r.L)]
    changes = [abs(b.value - a.value) / abs(b.value) if b.value else float("nan") for a, b in zip(rows, rows[1:])]
    return rows, changes
