import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from idsclt.errors import InvalidGeometryError
from idsclt.geometry import (BoxSpec, Region, annuli_plan, build_box, full_box, index_set, interior, shell,
                             sites_in)


def test_box_sites_1d():
    assert build_box(BoxSpec(1, 4)).ravel().tolist() == [-1, 0, 1]


def test_box_sites_2d_count_and_order():
    sites = build_box(BoxSpec(2, 4))
    assert len(sites) == 9
    assert sites[:3].tolist() == [[-1, -1], [-1, 0], [-1, 1]]


def test_box_sites_refined_mesh():
    assert build_box(BoxSpec(1, 4, q=2)).ravel().tolist() == [-1.5, -1, -0.5, 0, 0.5, 1, 1.5]


@pytest.mark.parametrize("kwargs", [dict(d=0, L=4), dict(d=4, L=4), dict(d=1, L=1), dict(d=1, L=4, q=0),
                                    dict(d=1, L=4, bc="periodic")])
def test_box_rejects_invalid(kwargs):
    with pytest.raises((InvalidGeometryError, ValueError)):
        BoxSpec(**kwargs)


@given(st.integers(1, 3), st.integers(2, 9), st.integers(1, 3))
def test_site_count_and_bounds(d, L, q):
    sites = BoxSpec(d, L, q).sites()
    per_axis = len([k for k in range(-L * q, L * q + 1) if 2 * abs(k) < L * q])
    assert len(sites) == per_axis**d
    assert np.all(np.abs(sites) < L / 2)


def test_shell_membership_open():
    s = shell(1, 3.0, 5.0)
    assert s.contains(np.array([[3.0], [4.0], [5.0], [-4.5]])).tolist() == [False, True, False, True]


def test_shell_volume():
    assert shell(2, 1.0, 2.0).volume == pytest.approx(16 - 4)
    assert full_box(3, 2.0).volume == pytest.approx(8)


def test_interior_examples():
    assert interior(full_box(2, 8), 0) == full_box(2, 8)
    e = interior(shell(1, 3, 5), 1)
    assert e.is_empty
    b = interior(full_box(2, 8), 2)
    assert b.volume == pytest.approx(16)


@given(st.floats(0, 5), st.floats(0, 5))
def test_interior_monotone(l1, l2):
    lo, hi = sorted((l1, l2))
    r = shell(1, 1.0, 20.0)
    pts = np.linspace(-25, 25, 501)[:, None]
    a = interior(r, lo).contains(pts)
    b = interior(r, hi).contains(pts)
    assert np.all(a | ~b)


def test_plan_L100_radii():
    # floor(100^0.75) = 31 so M = 15.5; floor(100^0.25) = 3
    plan = annuli_plan(1, 100)
    assert plan.r_L == 3 and plan.M_L == 15.5
    assert len(plan.bulk) == 2
    assert plan.outer.r_in == pytest.approx(43.5)
    assert plan.core.volume == pytest.approx(6.0)
    assert [(b.r_in, b.r_out) for b in plan.bulk] == [(3.0, 15.5), (21.5, 34.0)]
    assert [(s.r_in, s.r_out) for s in plan.separators] == [(15.5, 21.5), (34.0, 40.0)]
    # the literal shell formulas stop at 40 while the outer remainder starts at 43.5
    assert not plan.covers and (plan.gaps[0].r_in, plan.gaps[0].r_out) == (40.0, 43.5)


@pytest.mark.parametrize("L", [10, 16])
def test_plan_invalid_small_L(L):
    with pytest.raises(InvalidGeometryError, match="k="):
        annuli_plan(1, L)


def test_plan_rejects_bad_exponents():
    with pytest.raises(InvalidGeometryError):
        annuli_plan(1, 256, eps=0.6, delta=0.3)


@pytest.mark.parametrize("d,L", [(1, 81), (1, 256), (1, 625), (2, 81)])
def test_plan_partition(d, L):
    plan = annuli_plan(d, L)
    assert plan.covers
    radii = plan.radii()
    assert radii == sorted(radii) and radii[-1] == L / 2
    q = 2
    pos = BoxSpec(d, L, q).sites()
    counts = sum(r.contains(pos).astype(int) for _, r in plan.regions())
    rho = np.max(np.abs(pos), axis=1)
    on_edge = np.isin(rho, radii[1:])
    assert np.all(counts[~on_edge] == 1)
    assert np.all(counts[on_edge] == 0)
    assert sum(r.volume for _, r in plan.regions()) == pytest.approx(float(L) ** d)


def test_plan_serializes_radii():
    d = annuli_plan(1, 81).to_dict()
    assert all("r_out" in r for r in d["regions"])
    assert d["M_L"] == 13.5


def test_index_set_examples():
    assert index_set(full_box(1, 4), 0.5).points.ravel().tolist() == [-2, -1, 0, 1, 2]
    assert len(index_set(interior(shell(1, 3, 5), 1), 0.5)) == 0


def test_index_set_interior_variant():
    idx = index_set(full_box(1, 10), 0.5, ell=2)
    # supports n + [-1/2, 1/2] inside the open box (-3, 3)
    assert idx.points.ravel().tolist() == [-2, -1, 0, 1, 2]


def test_index_set_growth():
    ratios = [len(index_set(full_box(1, L), 0.5)) / L for L in (8, 16, 32, 64)]
    assert all(abs(b - 1) < abs(a - 1) for a, b in zip(ratios, ratios[1:]))
    assert ratios[-1] == pytest.approx(1, abs=0.05)


@given(st.integers(1, 2), st.integers(2, 12), st.floats(0.1, 2.0))
def test_index_set_covers_region(d, L, R):
    idx = index_set(full_box(d, L), R)
    pos = BoxSpec(d, L, 1).sites()
    # every lattice site lies in the support of some index point
    dist = np.max(np.abs(pos[:, None, :] - idx.points[None, :, :]), axis=2)
    assert np.all(np.min(dist, axis=1) <= R)


def test_sites_in():
    pos = BoxSpec(1, 8).sites()
    assert sites_in(shell(1, 1, 3), pos).tolist() == [1, 5]


def test_inverted_shell_is_empty_not_an_error():
    r = Region(1, 2.0, 3.0)
    assert r.is_empty and r.volume == 0.0
    assert not np.any(r.contains(np.linspace(-4, 4, 33)[:, None]))
