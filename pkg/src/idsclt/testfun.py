"""Test functions: Laurent polynomials in 1/(x - E), decaying C^1 functions, and fitting.

A Laurent polynomial of leading order m is

    P(x) = (x - E)^-m * sum_k a_k (x - E)^-k,

which is finite on the half-line [-|V|_inf, inf) whenever E < -|V|_inf.
"""
from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, DomainError, PoleError


@dataclass(frozen=True)
class LaurentPoly:
    E: float
    m: int
    coeffs: tuple = (1.0,)

    def __post_init__(self):
        if int(self.m) != self.m:
            raise ValueError("leading order must be an integer")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "coeffs", tuple(float(a) for a in self.coeffs))

    @property
    def p(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x == self.E):
            raise PoleError(f"Laurent polynomial evaluated at its pole E={self.E}")
        y = 1.0 / (x - self.E)
        acc = np.zeros_like(y)
        for a in reversed(self.coeffs):
            acc = acc * y + a
        return y**self.m * acc

    def derivative(self) -> "LaurentPoly":
        return LaurentPoly(self.E, self.m + 1, [-(self.m + k) * a for k, a in enumerate(self.coeffs)])

    def is_valid_for(self, d: int, vbound: float | None = None) -> bool:
        ok = self.m > d + 1
        if vbound is not None:
            ok &= self.E < -vbound
        return bool(ok)

    def to_dict(self) -> dict:
        return {"E": self.E, "m": self.m, "coeffs": list(self.coeffs)}

    @classmethod
    def from_dict(cls, data: dict) -> "LaurentPoly":
        return cls(float(data["E"]), int(data["m"]), tuple(data["coeffs"]))


def laurent_eval(P: LaurentPoly, x):
    return P(x)


def laurent_derivative(P: LaurentPoly) -> LaurentPoly:
    return P.derivative()


@dataclass(frozen=True, eq=False)
class TestFunction:
    """Evaluable f and f' on [-|V|_inf, inf) with decay metadata."""

    __test__ = False  # keep pytest from collecting this class

    f: Callable
    derivative: Callable
    m1: float
    m2: float
    kind: str = "user-composed"
    name: str = ""
    laurent: LaurentPoly | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.f(x)

    @property
    def pole(self) -> float | None:
        return None if self.laurent is None else self.laurent.E

    def decay_ok(self, x_max: float = 1e6, start: float = 1.0, factor: float = 10.0) -> bool:
        """Heuristic check that |f| x^m1 and |f'| x^m2 stay bounded on a geometric grid."""
        x = np.geomspace(start, x_max, 61)
        head = x <= np.sqrt(start * x_max)
        for g, m in ((self.f, self.m1), (self.derivative, self.m2)):
            with np.errstate(all="ignore"):
                r = np.abs(np.asarray(g(x), dtype=float)) * x**m
            if not np.all(np.isfinite(r)):
                return False
            if np.max(r[~head]) > factor * max(np.max(r[head]), 1e-300) and np.max(r[~head]) > 0:
                return False
        return True

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "name": self.name, "m1": self.m1, "m2": self.m2, **self.params}
        if self.laurent is not None:
            out["laurent"] = self.laurent.to_dict()
        return out


def from_laurent(P: LaurentPoly, name: str = "") -> TestFunction:
    dP = P.derivative()
    kind = "resolvent-power" if P.coeffs == (1.0,) else "laurent"
    return TestFunction(P, dP, P.m, P.m + 1, kind, name or f"laurent(E={P.E}, m={P.m})", P)


def resolvent_power(E: float, m: int) -> TestFunction:
    """f(x) = (x - E)^-m."""
    return from_laurent(LaurentPoly(E, m, (1.0,)), f"(x - {E})^-{m}")


def identity() -> TestFunction:
    """f(x) = x; not in the decaying class, used for trace identities only."""
    return TestFunction(lambda x: np.asarray(x, dtype=float), lambda x: np.ones_like(np.asarray(x, dtype=float)),
                        -1.0, 0.0, "user-composed", "x")


def constant(c: float = 1.0) -> TestFunction:
    return TestFunction(lambda x: np.full_like(np.asarray(x, dtype=float), c),
                        lambda x: np.zeros_like(np.asarray(x, dtype=float)), 0.0, 0.0, "user-composed", f"{c}")


def exp_decay(rate: float = 1.0) -> TestFunction:
    """f(x) = exp(-rate x); smooth, strictly decreasing, faster than any power."""
    return TestFunction(lambda x: np.exp(-rate * np.asarray(x, dtype=float)),
                        lambda x: -rate * np.exp(-rate * np.asarray(x, dtype=float)),
                        8.0, 8.0, "user-composed", f"exp(-{rate} x)", params={"rate": rate})


def tilde_transform(f: TestFunction, E: float, d: int) -> Callable:
    """x -> (x - E)^(1 + floor(d/2)) f'(x)."""
    power = 1 + d // 2

    def tilde(x):
        x = np.asarray(x, dtype=float)
        return (x - E) ** power * np.asarray(f.derivative(x), dtype=float)

    return tilde


def _cheb_nodes(a: float, b: float, n: int) -> np.ndarray:
    k = np.arange(n)
    return 0.5 * (a + b) + 0.5 * (b - a) * np.cos((2 * k + 1) * np.pi / (2 * n))[::-1]


@dataclass(frozen=True)
class FitResult:
    poly: LaurentPoly
    sup_error: float
    grid_error: float
    tail_error: float
    x_max: float


def laurent_fit(g: Callable, E: float, m: int, p: int, lower: float, x_max: float | None = None,
                nodes: int | None = None) -> FitResult:
    """Least-squares fit of sum_k a_k (x - E)^-(m+k), k <= p, to g on [lower, x_max].

    Works in y = 1/(x - E); nodes are Chebyshev points in y and the sup error
    is read off a 10x denser Chebyshev grid, plus the largest deviation seen on
    a geometric grid beyond ``x_max``.
    """
    if E >= lower:
        raise DomainError(f"pole E={E} must lie below the domain start {lower}")
    if x_max is None:
        x_max = lower + 1e3 * (lower - E)
    y_hi = 1.0 / (lower - E)
    y_lo = 1.0 / (x_max - E)
    n_nodes = nodes or max(4 * (p + 1), 32)
    y = _cheb_nodes(y_lo, y_hi, n_nodes)
    z = y / y_hi
    A = np.stack([z ** (m + k) for k in range(p + 1)], axis=1)
    rhs = np.asarray(g(E + 1.0 / y), dtype=float)
    b, _, rank, _ = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < p + 1:
        raise ConditioningError(f"rank-deficient Laurent fit at p={p} (rank {rank})")
    coeffs = b / y_hi ** (m + np.arange(p + 1))
    P = LaurentPoly(E, m, coeffs)
    yv = _cheb_nodes(y_lo, y_hi, 10 * n_nodes)
    xv = np.concatenate([E + 1.0 / yv, [lower, x_max]])
    grid_err = float(np.max(np.abs(P(xv) - g(xv))))
    xt = np.geomspace(x_max, x_max * 1e6, 64)
    tail_err = float(np.max(np.abs(P(xt) - g(xt))))
    return FitResult(P, grid_err + tail_err, grid_err, tail_err, x_max)


def antiderivative_lift(P: LaurentPoly, d: int) -> LaurentPoly:
    """Q with Q'(x) = (x - E)^-(1 + floor(d/2)) P(x), term by term."""
    s = d // 2
    return LaurentPoly(P.E, P.m + s, [-a / (P.m + k + s) for k, a in enumerate(P.coeffs)])
