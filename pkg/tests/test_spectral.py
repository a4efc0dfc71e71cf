import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idsclt.errors import CapacityError, DomainError, NotPositiveDefiniteError
from idsclt.experiments.localization import log_linear_fit
from idsclt.geometry import BoxSpec, full_box, shell
from idsclt.magnetic import MagneticField, assemble
from idsclt.spectral import (LocalResolventProbe, batched_local_traces, eigendecompose, eigenvalues,
                             hellmann_feynman_check, local_trace, offdiag_block_norm, resolvent_difference_trace,
                             trace_function, trace_resolvent_power)
from idsclt.testfun import LaurentPoly, constant, from_laurent, identity, resolvent_power


def random_operator(rng, d=None, L=None, b=None):
    d = d or int(rng.integers(1, 3))
    L = L or int(rng.integers(4, 8 if d == 2 else 30))
    F = MagneticField.planar(b if b is not None else rng.uniform(-1, 1)) if d == 2 else MagneticField.zero(1)
    return assemble(BoxSpec(d, L, 1, str(rng.choice(["dirichlet", "neumann"]))), F,
                    lambda x: rng.uniform(0, 1, len(x)))


def test_free_dirichlet_closed_form():
    lam = eigendecompose(assemble(BoxSpec(1, 6), MagneticField.zero(1))).values
    k = np.arange(1, 6)
    assert np.max(np.abs(lam - (2 - 2 * np.cos(k * np.pi / 6)))) <= 1e-10


def test_diagonal_input():
    assert eigenvalues(np.diag([3.0, -1.0, 2.0])).tolist() == [-1.0, 2.0, 3.0]


def test_spectrum_invariants(rng):
    for _ in range(10):
        H = random_operator(rng)
        s = eigendecompose(H)
        A = H.dense()
        assert s.orthonormality_residual() <= 1e-10
        res = np.max(np.linalg.norm(A @ s.vectors - s.vectors * s.values, axis=0))
        assert res <= 1e-9 * np.linalg.norm(A, 2)
        assert s.values[0] >= -np.max(np.abs(H.potential)) - 1e-9
        assert np.all(np.diff(s.values) >= 0)


def test_capacity_error():
    H = assemble(BoxSpec(1, 10), MagneticField.zero(1))
    with pytest.raises(CapacityError, match="trace_resolvent_power"):
        eigendecompose(H, cap=5)


def test_trace_identities(rng):
    H = random_operator(rng, d=2, L=5)
    assert trace_function(H, constant(1.0)) == pytest.approx(H.N, abs=1e-12)
    assert trace_function(H, identity()) == pytest.approx(np.trace(H.dense()).real, abs=1e-9)


def test_trace_domain_error():
    H = assemble(BoxSpec(1, 6), MagneticField.zero(1), np.full(5, -3.0))
    with pytest.raises(DomainError):
        trace_function(H, np.log)


def test_resolvent_backend_examples():
    assert trace_resolvent_power(np.diag([1.0, 2.0]), 0.0, 1) == pytest.approx(1.5)
    assert trace_resolvent_power(np.diag([1.0, 2.0, 4.0]), 0.0, 0) == 3
    with pytest.raises(NotPositiveDefiniteError):
        trace_resolvent_power(np.diag([1.0, 2.0]), 1.5, 2)


@given(st.integers(0, 2**32), st.integers(1, 5), st.floats(-3, -1.01))
def test_backends_agree(seed, m, E):
    H = random_operator(np.random.default_rng(seed))
    a = trace_function(H, resolvent_power(E, m))
    b = trace_resolvent_power(H, E, m)
    assert abs(a - b) <= 1e-8 * abs(a)


@given(st.integers(0, 2**32), st.floats(-3, -1.01), st.floats(0.01, 2))
def test_resolvent_trace_monotone_in_E(seed, E, dE):
    H = random_operator(np.random.default_rng(seed))
    assert trace_resolvent_power(H, E - dE, 3) < trace_resolvent_power(H, E, 3)


def test_local_trace_full_empty_and_partition(rng):
    H = random_operator(rng, d=2, L=7, b=0.5)
    f = resolvent_power(-1.5, 3)
    s = eigendecompose(H)
    total = trace_function(H, f, s)
    assert local_trace(H, f, full_box(2, 7), s) == pytest.approx(total, rel=1e-12)
    assert local_trace(H, f, shell(2, 5, 5.5), s) == 0.0
    labels = rng.integers(0, 4, H.N)
    parts = [local_trace(H, f, labels == k, s) for k in range(4)]
    assert sum(parts) == pytest.approx(total, abs=1e-9)


def test_local_trace_of_one_counts_sites(rng):
    H = random_operator(rng, d=1, L=20)
    F = shell(1, 2, 6)
    n = int(np.sum(F.contains(H.positions)))
    assert local_trace(H, constant(1.0), F) == pytest.approx(n, abs=1e-12)


def test_spectral_mapping(rng):
    H = random_operator(rng)
    lam = eigenvalues(H)
    g = lambda x: x + 2.0
    f = lambda y: y**-2
    assert trace_function(H, lambda x: f(g(x))) == pytest.approx(np.sum(f(g(lam))), rel=1e-13)


def test_offdiag_block_norm_properties(rng):
    H = random_operator(rng, d=1, L=30)
    E, m = -1.5, 3
    box = full_box(1, 30)
    full = offdiag_block_norm(H, E, m, box, box)
    assert full == pytest.approx((eigenvalues(H)[0] - E) ** -m, rel=1e-12)
    inner = shell(1, 2, 8)
    assert offdiag_block_norm(H, E, m, inner, inner) <= full + 1e-15
    assert offdiag_block_norm(H, E, m, inner, box, "trace") >= offdiag_block_norm(H, E, m, inner, box)
    with pytest.raises(NotPositiveDefiniteError):
        offdiag_block_norm(H, -0.0 + eigenvalues(H)[0], m, box, box)


def test_free_offdiag_decay():
    H = assemble(BoxSpec(1, 64), MagneticField.zero(1))
    pos = H.positions[:, 0]
    F = np.abs(pos) < 1
    dists = np.arange(2, 16, 2)
    norms = [offdiag_block_norm(H, -1.0, 3, F, (pos - 1 >= r) & (pos - 1 < r + 1)) for r in dists]
    fit = log_linear_fit(dists, norms)
    assert fit.slope < 0 and fit.r2 >= 0.95


def test_hellmann_feynman(rng):
    H = random_operator(rng, d=1, L=32)
    W = rng.uniform(0, 1, H.N)
    a, n = hellmann_feynman_check(H, W, identity())
    assert a == pytest.approx(W.sum(), abs=1e-10) and n == pytest.approx(a, abs=1e-10)
    a0, n0 = hellmann_feynman_check(H, np.zeros(H.N), resolvent_power(-2, 3))
    assert a0 == 0 and n0 == 0
    a, n = hellmann_feynman_check(H, W, resolvent_power(-2, 3))
    assert abs(a - n) <= 1e-6 * abs(a)


@pytest.mark.parametrize("b", [0.0, 0.8])
def test_local_probe_matches_eigen_route(rng, b):
    H = random_operator(rng, d=2, L=6, b=b) if b else random_operator(rng, d=1, L=40)
    w = np.zeros(H.N)
    w[[2, 5]] = [1.0, 0.25]
    P = LaurentPoly(-1.5, 3, (1.0, 0.4, -0.2))
    base = H.kinetic.toarray()
    probe = LocalResolventProbe(base if b else base.real, w)
    assert probe(H.potential, P) == pytest.approx(local_trace(H, P, w), rel=1e-12)


def test_batched_local_traces(rng):
    H = random_operator(rng, d=1, L=20)
    w = rng.uniform(0, 1, H.N)
    Vs = rng.uniform(0, 1, (3, H.N))
    f = resolvent_power(-2.0, 2)
    got = batched_local_traces(H.kinetic.toarray().real, Vs, f, w)
    ref = [local_trace(H.with_potential(V), f, w) for V in Vs]
    assert np.allclose(got, ref, rtol=1e-12)


def test_resolvent_difference_trace(rng):
    H = random_operator(rng, d=1, L=30)
    A = H.dense()
    B = A.copy()
    B[0, 0] += 0.5
    w = np.ones(H.N)
    P = LaurentPoly(-1.5, 3, (1.0, 0.3))
    f = from_laurent(P)
    direct = local_trace(H, f, w) - local_trace(H.with_potential(np.diag(B).copy() - np.diag(H.kinetic.toarray()).real), f, w)
    assert resolvent_difference_trace(A, B, P, w) == pytest.approx(direct, rel=1e-9)
