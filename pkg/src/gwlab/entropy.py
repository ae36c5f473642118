"""Packing entropies of finite point clouds and their Dudley/Sudakov functionals.

Separation convention: a set is eps-separated when all pairwise distances are
>= eps (a pair at distance exactly eps is admissible).  Local packing uses the
general-set definition

    h_loc(eps) = sup_{delta >= eps} sup_{x in cloud} log M(cloud cap B(x, 2 delta), delta),

with closed 2*delta membership balls.  In exact mode (n <= 30 points) packing
numbers are maximum independent sets of the conflict graph, found by branch
and bound.  Both entropies are piecewise-constant in the scale with
breakpoints among the pairwise distances and their halves, so each cloud
carries one lazily-built scale table (single-scale values at every breakpoint
and piece midpoint) from which the Dudley integrals and Sudakov suprema are
assembled *exactly*, piece by piece.  Greedy mode (larger clouds) returns
maximal farthest-point packings, which are valid lower bounds; greedy results
are flagged and never used in equivalence assertions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXACT_CAP = 30
GREEDY_CAP = 10_000


def _pairwise(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff ** 2).sum(axis=2))


def _mis_size(adj, cand):
    """Maximum independent set size by branch and bound on bitmasks."""
    if cand == 0:
        return 0
    # peel vertices isolated inside cand
    m = cand
    taken = 0
    while m:
        v = (m & -m).bit_length() - 1
        m &= m - 1
        if adj[v] & cand == 0:
            taken += 1
            cand &= ~(1 << v)
    if cand == 0:
        return taken
    # branch on the highest-degree remaining vertex
    deg_best, v_best = -1, -1
    m = cand
    while m:
        v = (m & -m).bit_length() - 1
        m &= m - 1
        deg = (adj[v] & cand).bit_count()
        if deg > deg_best:
            deg_best, v_best = deg, v
    with_v = 1 + _mis_size(adj, cand & ~(adj[v_best] | (1 << v_best)))
    rest = cand & ~(1 << v_best)
    without_v = _mis_size(adj, rest) if rest.bit_count() > with_v else 0
    return taken + max(with_v, without_v)


def _exact_packing(dist, idx, eps):
    """Maximum eps-separated subset of the rows listed in idx (exact MIS)."""
    k = len(idx)
    if k == 0:
        return 0
    sub = dist[np.ix_(idx, idx)]
    conflict = sub < eps
    np.fill_diagonal(conflict, False)
    weights = 1 << np.arange(k, dtype=object)
    adj = [int((weights[conflict[i]]).sum()) for i in range(k)]
    return _mis_size(adj, (1 << k) - 1)


def greedy_packing(points, eps):
    """Deterministic farthest-point maximal eps-packing; returns indices.

    A maximal packing is a lower bound on the maximum packing number.
    """
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return []
    centroid = pts.mean(axis=0)
    start = int(np.argmax(((pts - centroid) ** 2).sum(axis=1)))
    chosen = [start]
    mind = np.sqrt(((pts - pts[start]) ** 2).sum(axis=1))
    while True:
        j = int(np.argmax(mind))
        if mind[j] < eps:
            return chosen
        chosen.append(j)
        dj = np.sqrt(((pts - pts[j]) ** 2).sum(axis=1))
        mind = np.minimum(mind, dj)


@dataclass
class PointCloud:
    """A finite cloud with its packing mode; exact mode needs n <= 30."""

    points: np.ndarray
    mode: str = "auto"

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2:
            raise ValueError("points must be an (n, d) array")
        n = len(self.points)
        if n > GREEDY_CAP:
            raise ValueError(f"clouds above {GREEDY_CAP} points are not supported")
        if self.mode == "auto":
            self.mode = "exact" if n <= EXACT_CAP else "greedy"
        if self.mode == "exact" and n > EXACT_CAP:
            raise ValueError(f"exact packing mode is refused for n > {EXACT_CAP}")
        self._dist = _pairwise(self.points)
        self.diam = float(self._dist.max()) if n > 1 else 0.0
        self._single_cache = {}
        self._global_cache = {}
        self._table = None

    @property
    def n(self):
        return len(self.points)

    def max_packing(self, eps):
        """Maximum eps-separated subset size (exact) or a maximal-packing
        lower bound (greedy)."""
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self.mode != "exact":
            return len(greedy_packing(self.points, eps))
        if eps not in self._global_cache:
            self._global_cache[eps] = _exact_packing(self._dist, list(range(self.n)), eps)
        return self._global_cache[eps]

    def _local_single(self, delta):
        """sup over centers of the delta-packing of the closed 2*delta ball."""
        if delta in self._single_cache:
            return self._single_cache[delta]
        best = 0
        members = [np.nonzero(self._dist[i] <= 2.0 * delta)[0] for i in range(self.n)]
        order = sorted(range(self.n), key=lambda i: -len(members[i]))
        seen = set()
        for i in order:
            idx = members[i]
            if len(idx) <= best:
                break
            key = idx.tobytes()
            if key in seen:
                continue
            seen.add(key)
            if self.mode == "exact":
                val = _exact_packing(self._dist, list(idx), delta)
            else:
                val = len(greedy_packing(self.points[idx], delta))
            best = max(best, val)
        self._single_cache[delta] = best
        return best

    def _scale_table(self):
        """Breakpoint candidates c_1 < .. < c_m of the single-scale local
        packing plus its values at every candidate and piece midpoint, with
        suffix maxima for sup_{delta >= eps} queries.  Exact mode only."""
        if self._table is not None:
            return self._table
        d = np.unique(self._dist[np.triu_indices(self.n, 1)])
        d = d[d > 0]
        cand = np.unique(np.concatenate([d, d / 2.0]))
        knots = np.concatenate([[0.0], cand])
        mids = 0.5 * (knots[:-1] + knots[1:])          # interior of piece k
        atom_vals = np.array([self._local_single(c) for c in cand], dtype=float)
        mid_vals = np.array([self._local_single(m) for m in mids], dtype=float)
        # interleaved [s_0, a_1, s_1, a_2, ..., a_m]; suffix_from_piece[k] =
        # sup of the single-scale value over (c_k, infinity)
        m = len(cand)
        inter = np.empty(2 * m + 1)
        inter[0::2] = np.append(mid_vals, 0.0)[:m + 1]
        inter[1::2] = atom_vals
        suffix = np.maximum.accumulate(inter[::-1])[::-1]
        self._table = {"cand": cand, "knots": knots, "mids": mids,
                       "atom_vals": atom_vals, "mid_vals": mid_vals,
                       "suffix": suffix}
        return self._table

    def local_packing(self, eps):
        """M_loc(eps) = sup_{delta >= eps} single-scale local packing.

        Exact mode resolves the supremum over the breakpoint table; greedy
        mode scans a dyadic delta grid and is only a flagged lower bound.
        """
        if eps <= 0:
            raise ValueError("eps must be positive")
        if self.mode != "exact":
            best, delta = 0, eps
            while delta <= max(self.diam, eps):
                best = max(best, self._local_single(delta))
                delta *= 2.0
            return best
        t = self._scale_table()
        k = int(np.searchsorted(t["cand"], eps, side="left"))
        if k < len(t["cand"]) and t["cand"][k] == eps:
            tail = t["suffix"][2 * k + 1]
        else:
            tail = t["suffix"][2 * k] if 2 * k < len(t["suffix"]) else 0.0
        return int(max(self._local_single(eps), tail))

    def global_entropy(self, eps):
        return math.log(max(self.max_packing(eps), 1))

    def local_entropy(self, eps):
        return math.log(max(self.local_packing(eps), 1))


@dataclass
class EntropyProfile:
    """Dyadic-scale global/local log-packing profile of a cloud."""

    scales: np.ndarray      # decreasing, diam * 2^-k
    h: np.ndarray           # global log-packing at each scale
    h_loc: np.ndarray       # local log-packing at each scale
    mode: str
    diam: float


def entropy_profile(cloud: PointCloud, depth=10) -> EntropyProfile:
    if cloud.diam <= 0:
        raise ValueError("cloud has zero diameter")
    scales = cloud.diam * 2.0 ** -np.arange(0, depth + 1)
    h = np.array([cloud.global_entropy(e) for e in scales])
    h_loc = np.array([cloud.local_entropy(e) for e in scales])
    return EntropyProfile(scales=scales, h=h, h_loc=h_loc, mode=cloud.mode,
                          diam=cloud.diam)


def dudley(profile: EntropyProfile, delta, which="global"):
    """Trapezoid integral of sqrt(h) over [delta, diam] on the profile grid."""
    h = profile.h if which == "global" else profile.h_loc
    eps = profile.scales[::-1]
    vals = np.sqrt(h[::-1])
    lo = max(delta, eps[0])
    grid = np.concatenate([[lo], eps[eps > lo]])
    if grid[-1] < profile.diam:
        grid = np.concatenate([grid, [profile.diam]])
    v = np.interp(grid, eps, vals)
    return float(np.trapezoid(v, grid))


def sudakov_functional(profile: EntropyProfile, which="global"):
    """max over the profile grid of eps * sqrt(h(eps))."""
    h = profile.h if which == "global" else profile.h_loc
    return float((profile.scales * np.sqrt(h)).max())


# -- exact piecewise functionals (exact mode only) --------------------------

def _global_pieces(cloud: PointCloud):
    """Global entropy is constant on (b_k, b_{k+1}] with the right-endpoint
    value; returns the breakpoints and those values."""
    d = np.unique(cloud._dist[np.triu_indices(cloud.n, 1)])
    d = d[d > 0]
    vals = np.array([cloud.global_entropy(b) for b in d])
    return d, vals


def _local_pieces(cloud: PointCloud):
    """Knots and the h_loc value on each open piece (knots[k], knots[k+1])."""
    t = cloud._scale_table()
    piece_packing = t["suffix"][0::2]          # sup over (c_k, inf), k = 0..m
    vals = np.log(np.maximum(piece_packing, 1.0))
    return t["knots"], vals


def dudley_exact(cloud: PointCloud, delta, which="global"):
    """Exact integral of sqrt(h) over [delta, diam] for a finite cloud."""
    if cloud.mode != "exact":
        raise ValueError("exact functionals need exact packing mode")
    hi = cloud.diam
    if delta >= hi:
        return 0.0
    if which == "global":
        b, v = _global_pieces(cloud)
        knots = np.concatenate([[0.0], b])
        piece_vals = np.concatenate([v, [0.0]])
    else:
        knots, piece_vals = _local_pieces(cloud)
    total = 0.0
    for k in range(len(knots) - 1):
        lo = max(knots[k], delta)
        up = min(knots[k + 1], hi)
        if up > lo:
            total += math.sqrt(piece_vals[k]) * (up - lo)
    if which == "local" and hi > knots[-1]:
        total += math.sqrt(piece_vals[-1]) * (hi - max(knots[-1], delta))
    return total


def sudakov_exact(cloud: PointCloud, which="global"):
    """Exact sup_eps eps * sqrt(h(eps)) for a finite cloud."""
    if cloud.mode != "exact":
        raise ValueError("exact functionals need exact packing mode")
    if which == "global":
        b, v = _global_pieces(cloud)
        return float(max((bb * math.sqrt(vv) for bb, vv in zip(b, v)), default=0.0))
    knots, piece_vals = _local_pieces(cloud)
    t = cloud._scale_table()
    best = 0.0
    for k in range(len(knots) - 1):
        best = max(best, knots[k + 1] * math.sqrt(piece_vals[k]))
    for c, a in zip(t["cand"], t["atom_vals"]):
        k = int(np.searchsorted(t["cand"], c, side="left"))
        tail = max(a, t["suffix"][2 * k + 1])
        best = max(best, c * math.sqrt(math.log(max(tail, 1.0))))
    return best


def check_dyadic(cloud: PointCloud, depth=8):
    """h_loc(D 2^-k) <= h(D 2^-k) <= sum_{j<=k} h_loc(D 2^-j), exactly."""
    if cloud.mode != "exact":
        raise ValueError("the dyadic chain is asserted in exact mode only")
    D = cloud.diam
    rows = []
    running = 0.0
    for k in range(1, depth + 1):
        eps = D * 2.0 ** -k
        hl = cloud.local_entropy(eps)
        hg = cloud.global_entropy(eps)
        running += hl
        if not (hl <= hg + 1e-12 and hg <= running + 1e-12):
            raise AssertionError(f"dyadic chain violated at k={k}: {hl}, {hg}, {running}")
        rows.append({"k": k, "eps": eps, "h_loc": hl, "h": hg, "cum_loc": running})
    return rows


def check_local_global(cloud: PointCloud, deltas=None):
    """Exact-mode equivalence: J_loc(d) <= J(d) <= 4 J_loc(d/4) for each
    requested delta, and Psi_loc <= Psi <= 4 Psi_loc."""
    if cloud.mode != "exact":
        raise ValueError("equivalences are asserted in exact mode only")
    if deltas is None:
        deltas = [0.0, cloud.diam / 32.0, cloud.diam / 8.0]
    tol = 1e-9
    report = {"dudley": [], "sudakov": {}}
    for d in deltas:
        j_loc = dudley_exact(cloud, d, "local")
        j_glob = dudley_exact(cloud, d, "global")
        j_loc_q = dudley_exact(cloud, d / 4.0, "local")
        ok = j_loc <= j_glob + tol and j_glob <= 4.0 * j_loc_q + tol
        if not ok:
            raise AssertionError(f"Dudley equivalence violated at delta={d}: "
                                 f"{j_loc}, {j_glob}, {4 * j_loc_q}")
        report["dudley"].append({"delta": d, "J_loc": j_loc, "J": j_glob,
                                 "4J_loc_quarter": 4.0 * j_loc_q})
    p_loc = sudakov_exact(cloud, "local")
    p_glob = sudakov_exact(cloud, "global")
    if not (p_loc <= p_glob + tol and p_glob <= 4.0 * p_loc + tol):
        raise AssertionError(f"Sudakov equivalence violated: {p_loc}, {p_glob}")
    report["sudakov"] = {"Psi_loc": p_loc, "Psi": p_glob}
    return report


def entropy_fixed_point(profile: EntropyProfile, sigma):
    """eps_bar(sigma): largest grid scale with h_loc(eps) >= eps^2/sigma^2."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    ok = profile.h_loc >= (profile.scales / sigma) ** 2
    if not np.any(ok):
        return 0.0
    return float(profile.scales[np.argmax(ok)])  # scales decrease; first hit is largest


def sudakov_minoration_check(body, cloud: PointCloud, s, floor=0.05):
    """Width-vs-packing minoration on a cloud of body points.

    The cloud functionals lower-bound the true ones (the cloud is a subset of
    T), so w_hat >= c * sup eps sqrt(log M) must hold with room; asserted at
    the conservative floor and the empirical constant is recorded.
    """
    from .sampling import est_width
    w = est_width(body, s)
    if cloud.mode == "exact":
        psi = sudakov_exact(cloud, "global")
        psi_loc = sudakov_exact(cloud, "local")
    else:
        prof = entropy_profile(cloud)
        psi = sudakov_functional(prof, "global")
        psi_loc = sudakov_functional(prof, "local")
    c_emp = w.value / psi if psi > 0 else math.inf
    c_emp_loc = w.value / psi_loc if psi_loc > 0 else math.inf
    if psi > 0 and w.value + 3 * w.stderr < floor * psi:
        raise AssertionError(f"Sudakov minoration floor violated: {w.value} < {floor} * {psi}")
    if psi_loc > 0 and w.value + 3 * w.stderr < floor * psi_loc:
        raise AssertionError("local Sudakov minoration floor violated")
    return {"width": w, "Psi_cloud": psi, "Psi_loc_cloud": psi_loc,
            "c_emp": c_emp, "c_emp_local": c_emp_loc, "mode": cloud.mode}


# -- deterministic clouds for continuous bodies (d <= 3) --------------------

def _fibonacci_sphere(n):
    k = np.arange(n) + 0.5
    phi = math.pi * (3.0 - math.sqrt(5.0))
    z = 1.0 - 2.0 * k / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    th = phi * np.arange(n)
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def cloud_from_body(body, budget=400):
    """Deterministic low-discrepancy boundary+interior cloud of a body.

    d = 1: uniform grid on the segment.  d = 2: golden-angle spiral rescaled
    to the body's boundary norm plus the center.  d = 3: Fibonacci-sphere
    directions on cube-root radial shells.  Directions map to the boundary of
    the ball / l1 ball / cube / ellipsoid by norm normalization.
    """
    d = body.dim
    if d > 3:
        raise ValueError("clouds ship for d <= 3 only")
    if d == 1:
        xs = np.linspace(-1.0, 1.0, budget)[:, None]
        pts = xs * _boundary_scale(body, np.array([[1.0]]))
        return PointCloud(points=pts)
    if d == 2:
        k = np.arange(1, budget + 1)
        ang = k * math.pi * (3.0 - math.sqrt(5.0))
        rr = np.sqrt(k / float(budget))
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        pts = dirs * (rr[:, None] * _boundary_scale(body, dirs))
    else:
        shells = max(3, int(round(budget ** (1.0 / 3.0))))
        per = max(budget // shells, 4)
        pts_list = []
        for m in range(1, shells + 1):
            dirs = _fibonacci_sphere(per)
            rad = (m / float(shells)) ** (1.0 / 3.0)
            pts_list.append(dirs * (rad * _boundary_scale(body, dirs)))
        pts = np.vstack(pts_list)
    pts = np.vstack([np.zeros((1, d)), pts])
    return PointCloud(points=pts)


def _boundary_scale(body, dirs):
    """Per-direction factor mapping unit-Euclidean directions onto the boundary."""
    if body.kind == "ball":
        return np.full((len(dirs), 1), body.radius)
    if body.kind == "l1":
        return body.radius / np.abs(dirs).sum(axis=1, keepdims=True)
    if body.kind == "cube":
        return body.half_width / np.abs(dirs).max(axis=1, keepdims=True)
    if body.kind == "ellipsoid":
        return 1.0 / np.sqrt(((dirs / body.semi_axes) ** 2).sum(axis=1, keepdims=True))
    raise ValueError(f"no boundary map for body kind {body.kind!r}")
