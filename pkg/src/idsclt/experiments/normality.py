"""Normality diagnostics for normalized fluctuations and the positivity verdict for the variance."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from ..errors import EmptyDataError
from .ensemble import VarianceEstimate


MIN_SAMPLES = 200


@dataclass(frozen=True)
class NormalityReport:
    n: int
    ks: float
    p_value: float
    skewness: float
    excess_kurtosis: float
    degenerate: bool = False
    n_boot: int = 0
    ks_null_sd: float = float("nan")  # spread of the KS statistic under the null, a scale for comparing runs

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _ks_studentized(x: np.ndarray) -> float:
    z = (x - x.mean()) / x.std(ddof=1)
    return float(stats.kstest(z, "norm").statistic)


@lru_cache(maxsize=32)
def _null_ks(n: int, n_boot: int, seed: int) -> np.ndarray:
    # KS of studentized Gaussian samples: the null law once mean and scale are estimated
    rng = np.random.default_rng(seed)
    return np.sort([_ks_studentized(rng.standard_normal(n)) for _ in range(n_boot)])


def normality_test(values, n_boot: int = 1000, seed: int = 0) -> NormalityReport:
    """KS distance of the studentized sample from N(0, 1) with a parametric-bootstrap p-value.

    ``values`` is an EnsembleResult (its Z values are used) or a plain array.
    """
    x = np.asarray(getattr(values, "z", values), dtype=float)
    if x.size == 0:
        raise EmptyDataError("normality_test got no values")
    if x.size < MIN_SAMPLES:
        raise ValueError(f"normality_test needs at least {MIN_SAMPLES} values, got {x.size}")
    if np.all(x == x[0]) or x.std() == 0:
        return NormalityReport(len(x), float("nan"), float("nan"), float("nan"), float("nan"), True, 0)
    ks = _ks_studentized(x)
    null = _null_ks(len(x), n_boot, seed)
    exceed = len(null) - np.searchsorted(null, ks, side="left")
    p = (exceed + 1) / (len(null) + 1)
    return NormalityReport(len(x), ks, float(p), float(stats.skew(x)), float(stats.kurtosis(x)), False, n_boot,
                           float(np.std(null, ddof=1)))


@dataclass(frozen=True)
class PositivityVerdict:
    positive: bool
    exact_zero: bool
    estimates: tuple
    k: float


def positivity_check(*estimates: VarianceEstimate, k: float = 3.0) -> PositivityVerdict:
    """Positive iff every estimate exceeds k standard errors; exact zero iff every value is 0."""
    if not estimates:
        raise EmptyDataError("positivity_check needs at least one estimate")
    positive = all(e.value > k * e.se and e.value > 0 for e in estimates)
    zero = all(e.value == 0.0 for e in estimates)
    return PositivityVerdict(positive, zero, tuple(estimates), k)
