import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from gwlab.bodies import (Ball, ConvergenceError, CrossPolytope, Cube, Ellipsoid,
                          VertexPolytope, body_from_descriptor, dykstra)

BODIES = [
    Ball(3, 1.5),
    CrossPolytope(3, 1.0),
    Cube(3, 0.7),
    Ellipsoid([0.5, 1.0, 2.0]),
    VertexPolytope(np.array([[1.0, 0.1], [-1.0, 0.3], [0.2, 1.0],
                             [0.0, -1.2], [0.8, -0.9]])),
]


def _rand(rng, body, n=1):
    return rng.standard_normal((n, body.dim)) * 2.0


# -- support -----------------------------------------------------------------

def test_support_examples():
    assert Ball(2, 1.0).support(np.array([3.0, 4.0])) == pytest.approx(5.0)
    assert CrossPolytope(2).support(np.array([1.0, -2.0])) == pytest.approx(2.0)
    assert Ellipsoid([1.0, 2.0]).support(np.array([1.0, 1.0])) == pytest.approx(math.sqrt(5))
    assert Cube(2, 0.5).support(np.array([1.0, -3.0])) == pytest.approx(2.0)


def test_support_ellipse_grid_oracle(rng):
    # dense boundary grid of the ellipse as the independent maximizer
    a = np.array([1.0, 2.0])
    th = np.linspace(0, 2 * math.pi, 400_000)
    boundary = np.stack([a[0] * np.cos(th), a[1] * np.sin(th)], axis=1)
    body = Ellipsoid(a)
    for x in _rand(rng, body, 5):
        brute = (boundary @ x).max()
        assert abs(body.support(x) - brute) <= 1e-4 * max(1.0, abs(brute))


@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_support_nonnegative_and_homogeneous(body, rng):
    xs = _rand(rng, body, 64)
    vals = body.support(xs)
    assert np.all(vals >= 0)
    for c in (0.0, 0.5, 3.0):
        assert_allclose(body.support(c * xs), c * vals, rtol=1e-9, atol=1e-12)


def test_support_errors():
    body = Ball(2, 1.0)
    with pytest.raises(ValueError):
        body.support(np.array([1.0, 2.0, 3.0]))
    with pytest.raises(ValueError):
        body.support(np.array([np.inf, 0.0]))


# -- projection ---------------------------------------------------------------

def test_project_examples():
    assert_allclose(Ball(2, 1.0).project(np.array([3.0, 4.0])), [0.6, 0.8])
    assert_allclose(CrossPolytope(2).project(np.array([0.6, 0.6])), [0.5, 0.5])
    assert_allclose(Cube(2, 1.0).project(np.array([2.0, -0.5])), [1.0, -0.5])


@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_project_fixes_members_and_membership(body, rng):
    ys = _rand(rng, body, 128)
    proj = body.project(ys)
    assert np.all(body.contains(proj, tol=1e-8))
    again = body.project(proj)
    assert_allclose(again, proj, atol=1e-8)


@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_project_nonexpansive(body, rng):
    y = _rand(rng, body, 10_000)
    z = _rand(rng, body, 10_000)
    py, pz = body.project(y), body.project(z)
    lhs = np.sqrt(((py - pz) ** 2).sum(axis=1))
    rhs = np.sqrt(((y - z) ** 2).sum(axis=1))
    assert np.all(lhs <= rhs + 1e-9)


@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_project_obtuse_angle(body, rng):
    # <y - proj, t - proj> <= 0 for all probe points t of the body
    ys = _rand(rng, body, 50)
    proj = body.project(ys)
    ts = body.project(_rand(rng, body, 50))
    for y, p in zip(ys, proj):
        inner = (ts - p) @ (y - p)
        assert inner.max() <= 1e-9


def test_ellipsoid_projection_oracle(rng):
    # projection via dense boundary+interior scan in d=2
    a = np.array([1.0, 2.0])
    body = Ellipsoid(a)
    th = np.linspace(0, 2 * math.pi, 3000)
    rr = np.linspace(0, 1, 300)
    grid = np.concatenate([(r * np.stack([a[0] * np.cos(th), a[1] * np.sin(th)], axis=1))
                           for r in rr])
    for y in _rand(rng, body, 4):
        p = body.project(y)
        brute = grid[np.argmin(((grid - y) ** 2).sum(axis=1))]
        assert np.linalg.norm(p - brute) <= 2e-2
        assert ((y - p) ** 2).sum() <= ((y - brute) ** 2).sum() + 1e-9


def test_ellipsoid_newton_cap():
    body = Ellipsoid([1.0, 1.0])
    with pytest.raises(ConvergenceError):
        body._project(np.array([[5.0, 5.0]]), max_iter=2)


def test_polytope_projection_vs_slsqp(rng):
    from scipy.optimize import minimize
    verts = rng.standard_normal((12, 3))
    verts -= verts.mean(axis=0)  # keep the origin inside
    body = VertexPolytope(verts)
    for y in _rand(rng, body, 6):
        p = body.project(y)
        m = len(verts)
        res = minimize(lambda w: ((w @ verts - y) ** 2).sum(), np.full(m, 1.0 / m),
                       bounds=[(0, 1)] * m,
                       constraints={"type": "eq", "fun": lambda w: w.sum() - 1.0},
                       method="SLSQP", options={"maxiter": 300, "ftol": 1e-14})
        oracle = res.x @ verts
        assert ((y - p) ** 2).sum() <= ((y - oracle) ** 2).sum() + 1e-8


def test_polytope_limits():
    with pytest.raises(ValueError):
        VertexPolytope(np.zeros((65, 2)))
    with pytest.raises(ValueError):
        VertexPolytope(np.zeros((3, 4)))
    with pytest.raises(ValueError):  # origin outside
        VertexPolytope(np.array([[1.0, 1.0], [2.0, 1.0], [1.5, 2.0]]))


# -- intersection queries ------------------------------------------------------

def test_project_intersection_examples():
    body = Ball(2, 2.0)
    assert_allclose(body.project_intersection(1.0, np.array([3.0, 0.0])), [1.0, 0.0])
    cp = CrossPolytope(2)
    got = cp.project_intersection(0.5, np.array([2.0, 2.0]))
    assert_allclose(got, np.full(2, 0.5 / math.sqrt(2)), atol=1e-9)
    inside = np.array([0.1, 0.2])
    assert_allclose(cp.project_intersection(0.9, inside), inside)


@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_project_intersection_vs_grid(body, rng):
    # brute-force oracle: project a fine cloud of feasible points
    r = 0.6 * body.rad
    cloud = body.project(_rand(rng, body, 4000) * 0.7)
    norms = np.sqrt((cloud ** 2).sum(axis=1))
    cloud = cloud * np.minimum(1.0, r / np.maximum(norms, 1e-12))[:, None]
    for y in _rand(rng, body, 3):
        p = body.project_intersection(r, y)
        assert body.contains(p, tol=1e-6)
        assert np.sqrt((p ** 2).sum()) <= r + 1e-6
        best = ((cloud - y) ** 2).sum(axis=1).min()
        assert ((y - p) ** 2).sum() <= best + 1e-6


def test_dykstra_matches_exact_intersection(rng):
    cp = CrossPolytope(3)
    r = 0.4
    ys = _rand(rng, cp, 20)
    exact = cp.project_intersection(r, ys)
    generic, ok = dykstra(cp._project, lambda Y: Ball(3, r)._project(Y), ys)
    assert ok
    assert_allclose(generic, exact, atol=1e-7)


# -- local support --------------------------------------------------------------

@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_local_support_monotone_and_saturates(body, rng):
    x = _rand(rng, body, 8)
    radii = np.linspace(0.05, 1.2, 12) * body.rad
    vals = np.stack([body.local_support(r, x) for r in radii])
    assert np.all(np.diff(vals, axis=0) >= -1e-7 * (1 + np.abs(vals[:-1])))
    assert_allclose(body.local_support(body.rad * 2, x), body.support(x), rtol=1e-12)
    assert_allclose(body.local_support(0.0, x), np.zeros(len(x)), atol=0)


def test_local_support_examples(rng):
    cp = CrossPolytope(2)
    assert cp.local_support(0.5, np.array([1.0, 0.0])) == pytest.approx(0.5)
    ball = Ball(3, 2.0)
    x = np.array([1.0, 2.0, -2.0])
    assert ball.local_support(0.5, x) == pytest.approx(0.5 * 3.0)


@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_local_support_vs_grid_oracle(body, rng):
    r = 0.5 * body.rad
    cloud = body.project(_rand(rng, body, 6000))
    norms = np.sqrt((cloud ** 2).sum(axis=1))
    keep = norms <= r
    shrunk = cloud * np.minimum(1.0, r / np.maximum(norms, 1e-12))[:, None]
    cand = np.vstack([cloud[keep], shrunk])
    for x in _rand(rng, body, 4):
        brute = (cand @ x).max()
        val = body.local_support(r, x)
        assert val >= brute - 1e-6 * max(1.0, abs(brute))
        assert val <= body.support(x) + 1e-9


def test_moreau_identity_grid(rng):
    # sup_{t in T} (<x,t> - |t|^2/(2s)) == s|x|^2/2 - dist(sx, T)^2/(2s)
    for body in (Ball(2, 1.3), CrossPolytope(2), Cube(2, 0.8), Ellipsoid([0.7, 1.4])):
        cand = body.project(_rand(rng, body, 20000))
        for sigma in (0.3, 1.0, 4.0):
            for x in _rand(rng, body, 3):
                brute = (cand @ x - (cand ** 2).sum(axis=1) / (2 * sigma)).max()
                y = sigma * x
                p = body.project(y)
                closed = sigma * (x @ x) / 2 - ((y - p) ** 2).sum() / (2 * sigma)
                assert closed >= brute - 1e-9
                assert closed <= brute + 2e-3 * (1 + abs(closed))


# -- geometry and descriptors -----------------------------------------------------

@pytest.mark.parametrize("body", BODIES, ids=lambda b: b.kind)
def test_geometry_sandwich(body):
    assert body.inrad <= body.rad + 1e-12
    assert body.rad <= body.diam + 1e-12
    assert body.diam <= 2 * body.rad + 1e-12
    assert body.contains(np.zeros(body.dim))


def test_descriptor_round_trip():
    for body in BODIES:
        clone = body_from_descriptor(body.descriptor())
        assert clone.kind == body.kind
        assert clone.dim == body.dim
        assert clone.rad == pytest.approx(body.rad)


def test_descriptor_rejects_unknown():
    with pytest.raises(ValueError):
        body_from_descriptor({"kind": "torus", "dim": 3})
    with pytest.raises(ValueError):
        body_from_descriptor({"kind": "ellipsoid", "dim": 2, "params": {}})


@given(st.floats(-50, 50), st.floats(-50, 50), st.floats(0.1, 5.0))
def test_ball_projection_is_radial(y1, y2, radius):
    body = Ball(2, radius)
    y = np.array([y1, y2])
    p = body.project(y)
    n = np.linalg.norm(y)
    if n <= radius:
        assert_allclose(p, y, atol=1e-12)
    else:
        assert_allclose(p, y * radius / n, atol=1e-12)


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=6))
def test_cross_polytope_projection_feasible(ys):
    y = np.array(ys)
    body = CrossPolytope(len(ys))
    p = body.project(y)
    assert np.abs(p).sum() <= 1 + 1e-9
    # projection moves no further than to any feasible competitor vertex
    for j in range(len(ys)):
        e = np.zeros(len(ys))
        e[j] = 1.0
        assert ((y - p) ** 2).sum() <= ((y - e) ** 2).sum() + 1e-9
