import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from octotrap import charges as c
from octotrap.constants import EPS0, K_E
from octotrap.errors import (
    ConfigError,
    ConstructionInfeasibleError,
    DegenerateConstructionError,
    SingularPointError,
)
from octotrap.multipole import expand, octupole_check

from oracles import (
    fd_gradient,
    fd_hessian,
    point_axial_quartic,
    ring_potential,
    semi_line_difference,
)

ORIGIN = np.zeros(3)


def test_element_validation():
    with pytest.raises(ConfigError):
        c.ChargeElement("dipole", 1.0)
    with pytest.raises(ConfigError):
        c.ring(1.0, (0, 0, 0), (0, 0, 1), 0.0)
    with pytest.raises(ConfigError):
        c.ChargeElement("point", 1.0, radius=1.0)
    with pytest.raises(ConfigError):
        c.line(1.0, (0, 0, 0), (0, 0, 0))
    e = c.line(1.0, (0, 0, 0), (3, 4, 0))
    assert abs(np.linalg.norm(e.orientation) - 1) < 1e-12


def test_empty_set_and_coulomb():
    assert c.potential_at(c.ChargeSet(), [1.0, 2.0, 3.0]) == 0.0
    cs = c.ChargeSet([c.point(2e-9, (0, 0, 0))])
    assert c.potential_at(cs, [0.5, 0, 0]) == pytest.approx(K_E * 2e-9 / 0.5, rel=1e-14)


def test_semi_line_on_axis():
    # line on the negative z axis ending at the origin: V(z) = -(lam/4 pi eps0) ln(2z)
    cs = c.ChargeSet([c.semi_line(1.0, (0, 0, 0), (0, 0, -1))])
    for z in (0.3, 1.0, 7.0):
        assert c.potential_at(cs, [0, 0, z]) == pytest.approx(-K_E * math.log(2 * z), rel=1e-13)


def test_semi_line_against_quadrature():
    end, u = (0.3, -0.2, 0.5), (0.4, 0.1, 0.9)
    cs = c.ChargeSet([c.semi_line(1e-10, end, u)])
    r1, r2 = np.array([1.0, 0.7, -0.4]), np.array([-0.6, 0.2, 2.0])
    want = semi_line_difference(1e-10, end, u, r1, r2)
    got = c.potential_at(cs, r1) - c.potential_at(cs, r2)
    assert got == pytest.approx(want, rel=1e-9)


def test_semi_line_behind_end_is_accurate():
    # far behind the end point r + z cancels; compare with the quadrature oracle
    cs = c.ChargeSet([c.semi_line(1.0, (0, 0, 0), (0, 0, 1))])
    r1, r2 = np.array([1e-3, 0, -50.0]), np.array([2e-3, 0, -80.0])
    want = semi_line_difference(1.0, (0, 0, 0), (0, 0, 1), r1, r2)
    assert c.potential_at(cs, r1) - c.potential_at(cs, r2) == pytest.approx(want, rel=1e-8)


def test_infinite_line_gauge():
    cs = c.ChargeSet([c.line(1.0, (0, 0, 0), (0, 0, 1))], reference_radius=2.0)
    assert c.potential_at(cs, [2.0, 0, 5.0]) == pytest.approx(0.0, abs=1e-3)
    assert c.potential_at(cs, [1.0, 0, 0]) == pytest.approx(2 * K_E * math.log(2.0), rel=1e-13)


@pytest.mark.parametrize("rho,z", [(0.0, 0.7), (0.5, 0.3), (1.6, -0.2), (0.95, 0.05)])
def test_ring_against_elliptic_integral(rho, z):
    cs = c.ChargeSet([c.ring(1e-9, (0, 0, 0), (0, 0, 1), 1.2)])
    want = ring_potential(1e-9, 1.2, rho, z)
    assert c.potential_at(cs, [rho, 0, z]) == pytest.approx(want, rel=1e-10)


def test_tilted_ring_matches_axis_ring():
    axis = np.array([1.0, 2.0, 2.0]) / 3
    centre = np.array([0.2, -0.1, 0.4])
    cs = c.ChargeSet([c.ring(1.0, centre, axis, 0.8)])
    r = centre + 0.6 * axis + 0.3 * np.cross(axis, [1, 0, 0]) / np.linalg.norm(np.cross(axis, [1, 0, 0]))
    d = r - centre
    z = d @ axis
    rho = np.linalg.norm(d - z * axis)
    assert c.potential_at(cs, r) == pytest.approx(ring_potential(1.0, 0.8, rho, z), rel=1e-10)


def test_singular_points():
    with pytest.raises(SingularPointError):
        c.potential_at(c.ChargeSet([c.point(1, (1, 0, 0))]), [1, 0, 0])
    with pytest.raises(SingularPointError):
        c.potential_at(c.ChargeSet([c.ring(1, (0, 0, 0), (0, 0, 1), 1)]), [0, 1, 0])
    with pytest.raises(SingularPointError):
        c.potential_at(c.ChargeSet([c.semi_line(1, (0, 0, 0), (1, 0, 0))]), [3, 0, 0])
    # behind the end of a semi-infinite line is fine
    c.potential_at(c.ChargeSet([c.semi_line(1, (0, 0, 0), (1, 0, 0))]), [-3, 0, 0])


MIXED = c.ChargeSet([
    c.point(1.0, (0.7, -0.3, 0.5)),
    c.ring(0.5, (0.1, 0.2, -0.6), (0, 1, 1), 0.4),
    c.line(-0.3, (1.0, 1.0, 0.0), (1, 0, 2)),
    c.semi_line(0.8, (-0.5, 0.4, 0.9), (0, -1, 1)),
])


@pytest.mark.parametrize("r", [(0.1, 0.05, -0.1), (-0.4, 0.3, 0.2)])
def test_field_and_hessian_against_finite_differences(r):
    pot = lambda p: c.potential_at(MIXED, p)
    g = fd_gradient(pot, r, 1e-4)
    np.testing.assert_allclose(c.field_at(MIXED, r), -g, rtol=1e-7, atol=1e-7 * np.abs(g).max())
    H = fd_hessian(pot, r, 1e-4)
    np.testing.assert_allclose(c.hessian_at(MIXED, r), H, rtol=1e-5, atol=1e-6 * np.abs(H).max())


def test_longdouble_is_preserved():
    out = c.potential_at(MIXED, np.zeros((2, 3), dtype=np.longdouble))
    assert out.dtype == np.longdouble


def test_symmetrize():
    s = c.symmetrize(c.ChargeSet([c.point(1.0, (1, 1, 1))]))
    assert len(s) == 8
    assert {tuple(e.position) for e in s} == {(x, y, z) for x in (1, -1) for y in (1, -1) for z in (1, -1)}
    at_origin = c.ChargeSet([c.point(1.0, (0, 0, 0))])
    r = [0.3, 0.1, 0.2]
    assert c.potential_at(c.symmetrize(at_origin), r) == pytest.approx(8 * c.potential_at(at_origin, r))
    sym = c.symmetrize(MIXED)
    E = c.field_at(sym, ORIGIN)
    H = c.hessian_at(sym, ORIGIN)
    scale = np.abs(np.diag(H)).max()
    assert np.abs(E).max() < 1e-10 * scale
    off = H - np.diag(np.diag(H))
    assert np.abs(off).max() < 1e-10 * scale


@pytest.mark.parametrize("f", [1.5, 2.0, 3.0])
def test_rescale_subtract_hessian_and_factor(f):
    base = c.symmetrize(c.ChargeSet([c.point(1.0, (0.7, 0.4, 1.1)), c.point(-0.4, (0.2, 0.9, 0.3))]))
    out = c.rescale_subtract(base, f)
    H = c.hessian_at(out, ORIGIN)
    assert np.abs(H).max() < 1e-12 * np.abs(c.hessian_at(base, ORIGIN)).max()
    exact = lambda s: sum(point_axial_quartic(e.strength, e.position) for e in s)
    assert exact(out) / exact(base) == pytest.approx(1 - 1 / f ** 2, rel=1e-12)


def test_rescale_subtract_cube_factor():
    base, _ = c.catalog_octupole("cube-points")
    b0 = expand(base, scale=1.0, step=0.01).beta
    b1 = expand(c.rescale_subtract(base, 2.0), scale=1.0, step=0.01).beta
    assert b1 / b0 == pytest.approx(0.75, rel=1e-8)


def test_rescale_subtract_errors():
    base = c.symmetrize(c.ChargeSet([c.point(1.0, (1, 1, 1))]))
    with pytest.raises(DegenerateConstructionError):
        c.rescale_subtract(base, 1.0)
    with pytest.raises(ConfigError):
        c.rescale_subtract(base, -2.0)


def test_rescale_subtract_ring_scaling():
    # the outer copy evaluated at f r is -f^2 times the original at r, as for points
    base = c.ChargeSet([c.ring(1.0, (0, 0, 0.4), (0, 0, 1), 0.7)])
    out = c.rescale_subtract(base, 2.0)
    outer = c.ChargeSet(out.elements[1:])
    r = np.array([0.3, 0.1, 0.2])
    assert c.potential_at(outer, 2 * r) == pytest.approx(-4 * c.potential_at(base, r), rel=1e-12)


def test_solve_displacement_point_is_cube_diagonal():
    n = c.solve_displacement(c.ChargeSet([c.point(1.0, (0, 0, 0))]))
    np.testing.assert_allclose(np.abs(n), np.ones(3) / math.sqrt(3), atol=1e-8)


TWO_PLANE = [
    (0.0, (1, 1, 0)),
    (math.pi / 6, (1, 1.434, 0.578)),
    (math.pi / 4, (1, 1.799, 1)),
    (math.pi / 3, (1, 2.482, 1.731)),
    (math.pi / 2, (0, 1, 1)),
]


@pytest.mark.parametrize("phi,listed", TWO_PLANE)
def test_two_plane_line_solutions(phi, listed):
    u = (math.sin(phi), 0.0, math.cos(phi))
    n = c.solve_displacement(c.ChargeSet([c.semi_line(1.0, (0, 0, 0), u)]))
    listed = np.asarray(listed, float)
    k = 0 if listed[0] else 1
    np.testing.assert_allclose(n / n[k], listed, rtol=1e-3, atol=1e-3)
    sym = c.symmetrize(c.ChargeSet([c.semi_line(1.0, n, u)]))
    if phi > 0:  # phi = 0 gives lines parallel to z with no z^4 term
        assert octupole_check(expand(sym, scale=1.0), tol=1e-6).satisfied


def test_solve_displacement_infinite_line():
    # a line parallel to z on the diagonal of the x-y plane has a purely off-diagonal Hessian
    n = c.solve_displacement(c.ChargeSet([c.line(1.0, (0, 0, 0), (0, 0, 1))]))
    assert abs(abs(n[0]) - abs(n[1])) < 1e-8


def test_solve_displacement_infeasible():
    with pytest.raises(ConstructionInfeasibleError):
        c.solve_displacement(c.ChargeSet([c.point(0.0, (0, 0, 0))]))


def test_solve_weights():
    r0 = c.ChargeSet([c.point(1.0, (1.0, 0.5, 0.3))])
    r1 = c.ChargeSet([c.point(1.0, (0.2, 0.9, 1.3))])
    r2 = c.ChargeSet([c.point(1.0, (0.6, 0.1, 0.8))])
    f1, f2 = c.solve_weights(r0, r1, r2)
    T = expand(c.combine(r0, r1, r2, f1, f2), scale=1.0)
    assert octupole_check(T, tol=1e-9).satisfied
    g1, g2 = c.solve_weights(r0, r1.scaled(3.0), r2)
    assert g1 == pytest.approx(f1 / 3, rel=1e-12)
    assert g2 == pytest.approx(f2, rel=1e-12)
    with pytest.raises(DegenerateConstructionError):
        c.solve_weights(r0, r0, r0)


octant = st.floats(0.2, 1.5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(octant, octant, octant), min_size=3, max_size=3, unique=True))
def test_solve_weights_random_points(pos):
    sets = [c.ChargeSet([c.point(1.0, p)]) for p in pos]
    try:
        f1, f2 = c.solve_weights(*sets)
    except DegenerateConstructionError:
        return
    combo = c.combine(*sets, f1, f2)
    T = expand(combo, scale=1.0)
    report = octupole_check(T, tol=1e-6)
    if report.indeterminate:
        return
    assert report.satisfied, report.worst


def test_catalog_betas_against_legendre_sums():
    for name, kw in [("cube-points", {}), ("coplanar-points", {}), ("coplanar-points", {"d": 0.4})]:
        cs, beta = c.catalog_octupole(name, **kw)
        exact = sum(point_axial_quartic(e.strength, e.position) for e in cs)
        assert beta == pytest.approx(exact, rel=1e-12)


def test_catalog_closed_forms():
    _, b = c.catalog_octupole("ring-pair")
    assert b == pytest.approx(-14 * math.sqrt(2 / 3) / (81 * EPS0))
    _, b = c.catalog_octupole("four-infinite-lines")
    assert b == pytest.approx(1 / (8 * math.pi * EPS0))
    _, b = c.catalog_octupole("coplanar-points", a=2.0, f=2.0)
    assert b == pytest.approx(-13 / (128 * math.sqrt(2) * math.pi * EPS0 * 32) * 0.75)


def test_catalog_errors():
    with pytest.raises(ConfigError):
        c.catalog_octupole("nonsense")
    with pytest.raises(ConfigError):
        c.catalog_octupole("cube-points", a=-1)


@pytest.mark.parametrize("name", c.CATALOG)
def test_catalog_passes_octupole_check(name):
    cs, beta = c.catalog_octupole(name)
    T = expand(cs, scale=1.0)
    rep = octupole_check(T, tol=1e-8)
    assert rep.satisfied, rep.worst
    assert T.beta == pytest.approx(beta, rel=1e-6)


def test_superposition():
    parts = [c.ChargeSet([e]) for e in MIXED]
    pts = np.array([[0.1, 0.2, 0.3], [-0.5, 0.1, 0.0]])
    total = sum(c.potential_at(p, pts) for p in parts)
    np.testing.assert_allclose(c.potential_at(MIXED, pts), total, rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.tuples(st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3)))
def test_laplace_residual(r):
    # near one element the sum cancels, so compare with the largest single contribution
    size = max(np.abs(c.hessian_at(c.ChargeSet([e]), r)).max() for e in MIXED)
    H = c.hessian_at(MIXED, r)
    assert abs(np.trace(H)) <= 1e-10 * size
    Hfd = fd_hessian(lambda p: c.potential_at(MIXED, p), r, 1e-5)
    assert abs(np.trace(Hfd)) <= 1e-6 * size


def test_records_roundtrip():
    recs = MIXED.to_records()
    back = c.ChargeSet.from_records(recs)
    assert [e.kind for e in back] == [e.kind for e in MIXED]
    pts = np.array([[0.1, 0.2, 0.3]])
    assert c.potential_at(back, pts) == pytest.approx(c.potential_at(MIXED, pts), rel=1e-14)
