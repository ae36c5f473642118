"""Convex-body oracles: support, metric projection, and ball-localized queries.

Every shipped body is compact, centrally symmetric, contains the origin, and
is immutable after construction, so oracles are safe to query concurrently.
Queries accept a single point of shape (d,) or a batch of shape (n, d) and
return a scalar / length-n array accordingly.

Localized queries (``local_support``, ``project_intersection``) target the
intersection T with a centered Euclidean ball of radius r.  For the ball,
cube, crosspolytope and ellipsoid these are exact one-dimensional
multiplier solves; the generic fallbacks are Dykstra alternating projections
and a quadratically-penalized projection evaluation with a certified gap.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .l1_ball import project_l1

_BISECT_ITERS = 90
_DYKSTRA_SWEEPS = 10_000
_DYKSTRA_TOL = 1e-10


class ConvergenceError(RuntimeError):
    """An iterative oracle hit its iteration cap before meeting tolerance."""


def dykstra(project_a: Callable, project_b: Callable, y: np.ndarray,
            tol: float = _DYKSTRA_TOL, max_sweeps: int = _DYKSTRA_SWEEPS,
            strict: bool = True):
    """Dykstra's alternating projections onto the intersection A cap B.

    ``y`` is a batch (n, d).  Stops when successive iterates move less than
    ``tol`` in the worst row; with ``strict`` the sweep cap raises
    ConvergenceError, otherwise the last iterate is returned flagged.

    Returns (x, converged).
    """
    x = np.array(y, dtype=float)
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_sweeps):
        xa = project_a(x + p)
        p = x + p - xa
        xb = project_b(xa + q)
        q = xa + q - xb
        move = np.sqrt(((xb - x) ** 2).sum(axis=1).max())
        x = xb
        if move <= tol:
            return x, True
    if strict:
        raise ConvergenceError(f"Dykstra did not reach tol={tol} in {max_sweeps} sweeps")
    return x, False


class ConvexBody:
    """Abstract convex-body oracle; subclasses fill the geometry and kernels."""

    kind = "abstract"

    def __init__(self, dim: int):
        if int(dim) != dim or dim < 1:
            raise ValueError("dimension must be a positive integer")
        self.dim = int(dim)
        self.rad = 0.0
        self.diam = 0.0
        self.inrad = 0.0

    # -- helpers ----------------------------------------------------------
    def _batch(self, x):
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        if single:
            arr = arr[None, :]
        if arr.ndim != 2 or arr.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got shape {np.shape(x)}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite input")
        return arr, single

    @staticmethod
    def _out(values, single):
        return float(values[0]) if single else values

    # -- queries ----------------------------------------------------------
    def support(self, x):
        """Support function sup_{t in T} <x, t>."""
        arr, single = self._batch(x)
        return self._out(self._support(arr), single)

    def project(self, y):
        """Metric projection argmin_{t in T} ||y - t||_2."""
        arr, single = self._batch(y)
        out = self._project(arr)
        return out[0] if single else out

    def contains(self, x, tol=1e-9):
        arr, single = self._batch(x)
        m = self._contains(arr, tol)
        return bool(m[0]) if single else m

    def local_support(self, r, x, tol=1e-9):
        """Support of T cap rB: sup over the localized body of <x, t>.

        Exact for radii outside the active range (r >= rad gives the plain
        support, r <= 0 gives zero); otherwise dispatched to the body's
        specialized kernel, or the generic penalized-projection fallback with
        additive error at most tol * max(||x||*r, 1).
        """
        arr, single = self._batch(x)
        if r < 0:
            raise ValueError("radius must be nonnegative")
        if r == 0:
            return self._out(np.zeros(arr.shape[0]), single)
        if r >= self.rad:
            return self._out(self._support(arr), single)
        return self._out(self._local_support(r, arr, tol), single)

    def project_intersection(self, r, y, tol=_DYKSTRA_TOL):
        """Projection onto T cap rB (r > 0)."""
        if r <= 0:
            raise ValueError("radius must be positive")
        arr, single = self._batch(y)
        if r >= self.rad:
            out = self._project(arr)
        else:
            out = self._project_intersection(r, arr, tol)
        return out[0] if single else out

    def descriptor(self):
        raise NotImplementedError

    # -- generic kernels ---------------------------------------------------
    def _local_support(self, r, X, tol):
        # one penalized projection: <x, Pi(s x)> lies within rho^2/(2 s) of
        # the true local support, so s is sized from the target accuracy
        rho = min(r, self.rad)
        norms = np.sqrt((X * X).sum(axis=1))
        target = tol * np.maximum(norms * r, 1.0)
        scale = rho * rho / (2.0 * target)
        scale = np.maximum(scale, 1.0)
        t, _ = dykstra(self._project, _ball_projector(r), scale[:, None] * X, strict=False)
        return (X * t).sum(axis=1)

    def _project_intersection(self, r, Y, tol):
        out, _ = dykstra(self._project, _ball_projector(r), Y, tol=tol, strict=True)
        return out


def _ball_projector(r):
    def proj(Y):
        norms = np.sqrt((Y * Y).sum(axis=1))
        f = np.where(norms > r, r / np.maximum(norms, 1e-300), 1.0)
        return Y * f[:, None]
    return proj


def _log_bisect(f, lo, hi, iters=_BISECT_ITERS):
    """Vectorized bisection in log space for a rowwise monotone predicate.

    ``f(mid)`` returns a boolean mask, True meaning the root is above mid.
    """
    lo = np.log(lo)
    hi = np.log(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        go_up = f(np.exp(mid))
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    return np.exp(0.5 * (lo + hi))


class Ball(ConvexBody):
    """Centered Euclidean ball of a given radius (radius 0 is the origin)."""

    kind = "ball"

    def __init__(self, dim, radius):
        super().__init__(dim)
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.radius = float(radius)
        self.rad = self.radius
        self.diam = 2.0 * self.radius
        self.inrad = self.radius

    def _support(self, X):
        return self.radius * np.sqrt((X * X).sum(axis=1))

    def _project(self, Y):
        return _ball_projector(self.radius)(Y)

    def _contains(self, X, tol):
        return (X * X).sum(axis=1) <= (self.radius + tol) ** 2

    def _local_support(self, r, X, tol):
        return min(r, self.radius) * np.sqrt((X * X).sum(axis=1))

    def _project_intersection(self, r, Y, tol):
        return _ball_projector(min(r, self.radius))(Y)

    def descriptor(self):
        return {"kind": "ball", "dim": self.dim, "params": {"radius": self.radius}}


class Cube(ConvexBody):
    """Axis-aligned cube [-s, s]^d."""

    kind = "cube"

    def __init__(self, dim, half_width):
        super().__init__(dim)
        if half_width <= 0:
            raise ValueError("half_width must be positive")
        self.half_width = float(half_width)
        self.rad = self.half_width * math.sqrt(dim)
        self.diam = 2.0 * self.rad
        self.inrad = self.half_width

    def _support(self, X):
        return self.half_width * np.abs(X).sum(axis=1)

    def _project(self, Y):
        return np.clip(Y, -self.half_width, self.half_width)

    def _contains(self, X, tol):
        return np.abs(X).max(axis=1) <= self.half_width + tol

    def _local_support(self, r, X, tol):
        s = self.half_width
        a = np.abs(X)
        nnz = (a > 0).sum(axis=1)
        out = np.zeros(X.shape[0])
        free = s * np.sqrt(nnz) <= r  # the clipped maximizer already fits in rB
        out[free] = s * a[free].sum(axis=1)
        todo = ~free & (nnz > 0)
        if np.any(todo):
            at = a[todo]
            top = at.max(axis=1)

            def above(mu):
                t = np.minimum(at / mu[:, None], s)
                return (t * t).sum(axis=1) > r * r

            mu = _log_bisect(above, 1e-14 * np.maximum(top, 1.0), 1e14 * np.maximum(top, 1.0))
            t = np.minimum(at / mu[:, None], s)
            scale = r / np.sqrt((t * t).sum(axis=1))
            out[todo] = (at * t).sum(axis=1) * scale
        return out

    def _project_intersection(self, r, Y, tol):
        t0 = self._project(Y)
        inside = (t0 * t0).sum(axis=1) <= r * r
        out = np.array(t0)
        todo = ~inside
        if np.any(todo):
            yt = Y[todo]

            def above(mu):
                t = np.clip(yt / (1.0 + mu[:, None]), -self.half_width, self.half_width)
                return (t * t).sum(axis=1) > r * r

            mu = _log_bisect(above, np.full(yt.shape[0], 1e-16), np.full(yt.shape[0], 1e16))
            out[todo] = np.clip(yt / (1.0 + mu[:, None]), -self.half_width, self.half_width)
        return out

    def descriptor(self):
        return {"kind": "cube", "dim": self.dim, "params": {"half_width": self.half_width}}


class CrossPolytope(ConvexBody):
    """l1 ball of a given radius (the standard crosspolytope when radius 1)."""

    kind = "l1"

    def __init__(self, dim, radius=1.0):
        super().__init__(dim)
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        self.rad = self.radius
        self.diam = 2.0 * self.radius
        self.inrad = self.radius / math.sqrt(dim)

    def _support(self, X):
        return self.radius * np.abs(X).max(axis=1)

    def _project(self, Y):
        return project_l1(Y, self.radius)

    def _contains(self, X, tol):
        return np.abs(X).sum(axis=1) <= self.radius + tol

    def _local_support(self, r, X, tol):
        # KKT: the maximizer direction is the soft-thresholded gradient
        # (|x_i| - theta)_+ rescaled to the sphere of radius r; bisect theta
        # until the l1 norm matches (corner: l1 constraint inactive).
        rho = self.radius
        a = np.abs(X)
        l2 = np.sqrt((a * a).sum(axis=1))
        out = np.zeros(X.shape[0])
        nz = l2 > 0
        l1 = a.sum(axis=1)
        ball_only = nz & (r * l1 <= rho * l2)
        out[ball_only] = r * l2[ball_only]
        todo = nz & ~ball_only
        if np.any(todo):
            at = a[todo]
            lo = np.zeros(at.shape[0])
            hi = at.max(axis=1)
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (lo + hi)
                u = np.maximum(at - mid[:, None], 0.0)
                too_big = r * u.sum(axis=1) > rho * np.sqrt((u * u).sum(axis=1))
                lo = np.where(too_big, mid, lo)
                hi = np.where(too_big, hi, mid)
            u = np.maximum(at - (0.5 * (lo + hi))[:, None], 0.0)
            un = np.sqrt((u * u).sum(axis=1))
            out[todo] = r * (at * u).sum(axis=1) / np.maximum(un, 1e-300)
        return out

    def _project_intersection(self, r, Y, tol):
        # soft-threshold level lam, then shrink to the sphere; the scaled
        # point must use up the full l1 budget when both constraints bind
        rho = self.radius
        t1 = project_l1(Y, rho)
        out = np.array(t1)
        fits = (t1 * t1).sum(axis=1) <= r * r
        todo = ~fits
        if np.any(todo):
            yt = Y[todo]
            t_ball = _ball_projector(r)(yt)
            ball_ok = np.abs(t_ball).sum(axis=1) <= rho
            res = np.array(t_ball)
            both = ~ball_ok
            if np.any(both):
                a = np.abs(yt[both])
                lo = np.zeros(a.shape[0])
                hi = a.max(axis=1)
                for _ in range(_BISECT_ITERS):
                    mid = 0.5 * (lo + hi)
                    u = np.maximum(a - mid[:, None], 0.0)
                    too_big = r * u.sum(axis=1) > rho * np.sqrt((u * u).sum(axis=1))
                    lo = np.where(too_big, mid, lo)
                    hi = np.where(too_big, hi, mid)
                u = np.maximum(a - (0.5 * (lo + hi))[:, None], 0.0)
                un = np.sqrt((u * u).sum(axis=1))
                res[both] = np.sign(yt[both]) * u * (r / np.maximum(un, 1e-300))[:, None]
            out[todo] = res
        return out

    def descriptor(self):
        return {"kind": "l1", "dim": self.dim, "params": {"radius": self.radius}}


class Ellipsoid(ConvexBody):
    """Axis-aligned ellipsoid sum_i x_i^2 / a_i^2 <= 1."""

    kind = "ellipsoid"

    def __init__(self, semi_axes):
        a = np.asarray(semi_axes, dtype=float)
        if a.ndim != 1 or a.size < 1:
            raise ValueError("semi_axes must be a 1-d sequence")
        if np.any(a <= 0) or not np.all(np.isfinite(a)):
            raise ValueError("semi-axes must be positive and finite")
        super().__init__(a.size)
        self.semi_axes = a
        self.rad = float(a.max())
        self.diam = 2.0 * self.rad
        self.inrad = float(a.min())

    def _support(self, X):
        a = self.semi_axes
        return np.sqrt(((a * a) * (X * X)).sum(axis=1))

    def _ellipsoid_norm2(self, X):
        a = self.semi_axes
        return ((X / a) ** 2).sum(axis=1)

    def _contains(self, X, tol):
        return self._ellipsoid_norm2(X) <= 1.0 + tol

    def _project(self, Y, tol=1e-12, max_iter=100):
        # Newton on the single KKT multiplier mu >= 0 solving
        # sum y_i^2 a_i^2 / (a_i^2 + mu)^2 = 1; the residual is convex and
        # decreasing in mu, so iterates from 0 increase monotonically.
        a2 = self.semi_axes ** 2
        out = np.array(Y, dtype=float)
        outside = self._ellipsoid_norm2(Y) > 1.0
        if not np.any(outside):
            return out
        y = Y[outside]
        w = y * y * a2
        mu = np.zeros(y.shape[0])
        ok = np.zeros(y.shape[0], dtype=bool)
        for _ in range(max_iter):
            denom = a2 + mu[:, None]
            f = (w / denom ** 2).sum(axis=1) - 1.0
            ok = np.abs(f) <= tol
            if np.all(ok):
                break
            fp = -2.0 * (w / denom ** 3).sum(axis=1)
            step = np.where(ok, 0.0, f / fp)
            mu = np.maximum(mu - step, mu)
        else:
            if not np.all(ok):
                raise ConvergenceError("ellipsoid projection Newton hit the iteration cap")
        out[outside] = y * a2 / (a2 + mu[:, None])
        return out

    def _local_support(self, r, X, tol):
        # with both constraints active the maximizer is x_i/(1 + mu/a_i^2)
        # rescaled to radius r; the ratio ||d||/sqrt(sum d_i^2/a_i^2) grows
        # monotonically in mu, so a guarded log-bisection finds the level
        a = self.semi_axes
        a2 = a * a
        out = np.zeros(X.shape[0])
        h = self._support(X)
        nz = h > 0
        te_norm = np.zeros_like(h)
        te_norm[nz] = np.sqrt((a2 * a2 * (X[nz] ** 2)).sum(axis=1)) / h[nz]
        ell_only = nz & (te_norm <= r)
        out[ell_only] = h[ell_only]
        l2 = np.sqrt((X * X).sum(axis=1))
        ball_only = nz & ~ell_only & (r * r * self._ellipsoid_norm2(X) <= l2 * l2)
        out[ball_only] = r * l2[ball_only]
        todo = nz & ~ell_only & ~ball_only
        if np.any(todo):
            xt = X[todo]

            def below(mu):
                d = xt / (1.0 + mu[:, None] / a2)
                num = (d * d).sum(axis=1)
                den = ((d / a) ** 2).sum(axis=1)
                return num < r * r * den  # ratio below r: root is above

            lo = np.full(xt.shape[0], 1.0)
            hi = np.full(xt.shape[0], 1.0)
            for _ in range(200):
                mask = ~below(lo)
                if not np.any(mask):
                    break
                lo[mask] *= 0.25
            for _ in range(200):
                mask = below(hi)
                if not np.any(mask):
                    break
                hi[mask] *= 4.0
            mu = _log_bisect(below, lo, hi)
            d = xt / (1.0 + mu[:, None] / a2)
            dn = np.sqrt((d * d).sum(axis=1))
            out[todo] = r * (xt * d).sum(axis=1) / np.maximum(dn, 1e-300)
        return out

    def _project_intersection(self, r, Y, tol):
        # two-multiplier dual t_i = y_i / (1 + mu + lam/a_i^2): the inner
        # bisection enforces ||t|| = r for a given lam, the outer bisection
        # drives the ellipsoid residual to zero (nested, both vectorized)
        a2 = self.semi_axes ** 2
        t_ell = self._project(Y)
        out = np.array(t_ell)
        fits = (t_ell * t_ell).sum(axis=1) <= r * r * (1.0 + 1e-12)
        todo = ~fits
        if not np.any(todo):
            return out
        y = Y[todo]
        t_ball = _ball_projector(r)(y)
        ball_ok = self._ellipsoid_norm2(t_ball) <= 1.0 + 1e-12
        res = np.array(t_ball)
        both = ~ball_ok
        if np.any(both):
            yb = y[both]

            def point(lam):
                def above_mu(mu):
                    t = yb / (1.0 + mu[:, None] + lam[:, None] / a2)
                    return (t * t).sum(axis=1) > r * r

                t_free = yb / (1.0 + lam[:, None] / a2)
                need = (t_free * t_free).sum(axis=1) > r * r
                mu = np.zeros(lam.shape[0])
                if np.any(need):
                    mu_n = _log_bisect(
                        lambda m: above_mu(_scatter(m, need, lam.shape[0])) [need],
                        np.full(need.sum(), 1e-16), np.full(need.sum(), 1e16))
                    mu[need] = mu_n
                return yb / (1.0 + mu[:, None] + lam[:, None] / a2)

            def outside(lam):
                t = point(lam)
                return ((t / self.semi_axes) ** 2).sum(axis=1) > 1.0

            lam = _log_bisect(outside, np.full(yb.shape[0], 1e-16),
                              np.full(yb.shape[0], 1e16), iters=70)
            res[both] = point(lam)
        out[todo] = res
        return out

    def descriptor(self):
        return {"kind": "ellipsoid", "dim": self.dim,
                "params": {"semi_axes": self.semi_axes.tolist()}}


def _scatter(values, mask, n):
    out = np.zeros(n)
    out[mask] = values
    return out


class VertexPolytope(ConvexBody):
    """Polytope given by a vertex list; projections use Wolfe's nearest-point
    algorithm (active-set over faces).  Restricted to d <= 3 and at most 64
    vertices; larger instances are rejected rather than approximated."""

    kind = "polytope"
    MAX_VERTICES = 64
    MAX_DIM = 3

    def __init__(self, vertices):
        V = np.asarray(vertices, dtype=float)
        if V.ndim != 2:
            raise ValueError("vertices must be an (m, d) array")
        m, d = V.shape
        if d > self.MAX_DIM:
            raise ValueError("polytope bodies support d <= 3 only")
        if m > self.MAX_VERTICES:
            raise ValueError(f"at most {self.MAX_VERTICES} vertices supported")
        if not np.all(np.isfinite(V)):
            raise ValueError("non-finite vertex")
        super().__init__(d)
        self.vertices = V
        self.rad = float(np.sqrt((V * V).sum(axis=1)).max())
        diffs = V[:, None, :] - V[None, :, :]
        self.diam = float(np.sqrt((diffs ** 2).sum(axis=2)).max())
        self._facets = self._facet_inequalities()
        if not self.contains(np.zeros(d), tol=1e-9):
            raise ValueError("shipped bodies must contain the origin")
        norms = np.sqrt((self._facets[:, :-1] ** 2).sum(axis=1))
        self.inrad = float(max(0.0, (-self._facets[:, -1] / norms).min()))

    def _facet_inequalities(self):
        V = self.vertices
        if self.dim == 1:
            lo, hi = V[:, 0].min(), V[:, 0].max()
            return np.array([[1.0, -hi], [-1.0, lo]])
        from scipy.spatial import ConvexHull
        hull = ConvexHull(V)
        return hull.equations  # rows [normal, offset], normal.x + offset <= 0 inside

    def _contains(self, X, tol):
        A = self._facets[:, :-1]
        b = self._facets[:, -1]
        return (X @ A.T + b <= tol).all(axis=1)

    def _support(self, X):
        return (X @ self.vertices.T).max(axis=1)

    def _project(self, Y):
        out = np.empty_like(Y)
        for i, y in enumerate(Y):
            out[i] = y + _wolfe_nearest_point(self.vertices - y)
        return out

    def descriptor(self):
        return {"kind": "polytope", "dim": self.dim,
                "params": {"vertices": self.vertices.tolist()}}


def _wolfe_nearest_point(P, tol=1e-12, max_iter=200):
    """Nearest point to the origin in conv(P); Wolfe's corral algorithm."""
    norms2 = (P * P).sum(axis=1)
    corral = [int(np.argmin(norms2))]
    w = np.array([1.0])
    scale = max(1.0, norms2.max())
    for _ in range(max_iter):
        x = w @ P[corral]
        dots = P @ x
        j = int(np.argmin(dots))
        if dots[j] >= x @ x - tol * scale:
            return x
        if j in corral:
            return x
        corral.append(j)
        w = np.append(w, 0.0)
        while True:
            S = P[corral]
            k = len(corral)
            # affine minimizer over the current corral via the KKT system
            M = np.empty((k + 1, k + 1))
            M[0, 0] = 0.0
            M[0, 1:] = 1.0
            M[1:, 0] = 1.0
            M[1:, 1:] = S @ S.T
            rhs = np.zeros(k + 1)
            rhs[0] = 1.0
            try:
                sol = np.linalg.solve(M, rhs)
                u = sol[1:]
            except np.linalg.LinAlgError:
                u, *_ = np.linalg.lstsq(M, rhs, rcond=None)
                u = u[1:]
            if np.all(u > 1e-12):
                w = u
                break
            neg = u <= 1e-12
            ratios = np.where(w - u > 1e-300, w / (w - u), np.inf)
            theta = min(1.0, ratios[neg].min())
            w = theta * u + (1.0 - theta) * w
            w[w < 1e-12] = 0.0
            keep = w > 0
            if not np.any(keep):
                keep[int(np.argmax(u))] = True
            corral = [c for c, k_ in zip(corral, keep) if k_]
            w = w[keep]
            w /= w.sum()
    return w @ P[corral]


_BODY_KINDS = {}


def body_from_descriptor(desc):
    """Build a body from {"kind", "dim", "params"} (the CLI JSON schema)."""
    if not isinstance(desc, dict):
        raise ValueError("body descriptor must be a JSON object")
    kind = desc.get("kind")
    params = desc.get("params", {}) or {}
    dim = desc.get("dim")
    if kind == "ball":
        return Ball(dim, params.get("radius", 1.0))
    if kind == "l1":
        return CrossPolytope(dim, params.get("radius", 1.0))
    if kind == "cube":
        return Cube(dim, params.get("half_width", 1.0))
    if kind == "ellipsoid":
        axes = params.get("semi_axes")
        if axes is None:
            raise ValueError("ellipsoid descriptor needs params.semi_axes")
        body = Ellipsoid(axes)
        if dim is not None and body.dim != dim:
            raise ValueError("ellipsoid dim does not match semi_axes length")
        return body
    if kind == "polytope":
        verts = params.get("vertices")
        if verts is None:
            raise ValueError("polytope descriptor needs params.vertices")
        body = VertexPolytope(verts)
        if dim is not None and body.dim != dim:
            raise ValueError("polytope dim does not match vertices")
        return body
    raise ValueError(f"unknown body kind: {kind!r}")
