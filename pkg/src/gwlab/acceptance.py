"""Acceptance criteria for the laboratory, runnable as a registry.

Each criterion function performs its checks at the pinned tolerances and
returns a detail dict; any AssertionError marks the criterion failed.  The
pytest suite and the ``verify-all`` CLI subcommand both drive this registry.

Sample-count notes: criteria that compare both sides of an *identity* on
common random numbers (2, 3, 10) need far fewer samples than a naive
Monte-Carlo comparison because the sampling fluctuation cancels between the
sides; the counts used here are recorded in each criterion's details.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from . import l1_ball, variational
from .bodies import Ball, CrossPolytope, Cube, Ellipsoid
from .decomposition import (GridSpec, integrate_proj_term, integrate_r_term,
                            pointwise_identity, verify_fp_decomposition,
                            verify_proj_decomposition)
from .entropy import PointCloud, check_dyadic, check_local_global, cloud_from_body, greedy_packing, entropy_profile, sudakov_minoration_check
from .fixed_points import LocalWidthCurve, check_chain, solve_r
from .gsm import net_lse, lse_risk, stein_check, theta_grid
from .intrinsic import (crosspolytope_ratio, peak_index, peak_index_at_sigma,
                        profile_ball, profile_crosspolytope, profile_cube,
                        profile_for_body, vol_over_surface)
from .l1_ball import (lambda_star, lambda_star_bracket, mills, project_l1,
                      project_l1_bisect, r_profile, s1, s2)
from .sampling import est_width, mc_estimate, penalized_values, proj_second_moment, sample_set
from .variational import crosspolytope_bound, ellipsoid_local_bound, ellipsoid_wills_bound, minimize_bound
from .widths import ball_width, crosspolytope_width, expected_norm


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    runtime: float
    details: dict = field(default_factory=dict)
    error: str = ""

    def as_dict(self):
        return {"id": self.cid, "name": self.name, "passed": self.passed,
                "runtime_s": self.runtime, "details": self.details,
                "error": self.error}


def criterion_1(seed=20240):
    """Pointwise support identity, deterministic, 100 random x per body."""
    bodies = [Ball(2, 1.0), Ball(8, 1.0), CrossPolytope(2), CrossPolytope(8),
              Ellipsoid([1.0, 2.0, 3.0])]
    worst = 0.0
    for body in bodies:
        xs = 2.0 * sample_set(body.dim, 100, seed).samples
        for sigma in (0.1, 1.0, 10.0):
            for x in xs:
                res = pointwise_identity(body, x, sigma)
                bound = 1e-3 * (1.0 + body.support(x))
                assert res <= bound, (body.kind, sigma, res, bound)
                worst = max(worst, res / bound)
    return {"bodies": [b.kind for b in bodies], "points_per_body": 100,
            "sigmas": [0.1, 1.0, 10.0], "worst_residual_fraction": worst}


def criterion_2(seed=20240):
    """Both decompositions at sigma = 0 for the unit ball in d = 8."""
    body = Ball(8, 1.0)
    s = sample_set(8, 200_000, seed)
    w = est_width(body, s)
    # projection route: MC width vs half the projection-moment scale integral
    ip = integrate_proj_term(body, 0.0, s)
    gap = abs(w.value - ip.value)
    tol = max(0.02 * w.value, 3.0 * (w.stderr + ip.halfwidth))
    assert gap <= tol, (gap, tol)
    # fixed-point route with the closed-form radius r(nu) = min(nu*mu, 1):
    # the scale integral evaluates analytically to mu itself
    mu_hat = w.value  # for the ball the support mean is the norm mean
    mu_exact = expected_norm(8)
    assert abs(mu_hat - mu_exact) <= 0.005 * mu_exact, (mu_hat, mu_exact)
    curve = LocalWidthCurve(body, s)
    ir = integrate_r_term(body, 0.0, s, curve=curve)
    assert abs(ir.value - mu_hat) <= 0.005 * mu_exact + ir.halfwidth, (ir.value, mu_hat)
    return {"n": s.n, "width": w.value, "proj_integral": ip.value,
            "proj_gap": gap, "proj_tol": tol, "r_integral": ir.value,
            "expected_norm": mu_exact}


def criterion_3(seed=20240):
    """Both decompositions for B1^16 and the 1/i ellipsoid (d=32), sigma in {0.1, 1}."""
    out = {}
    n = 20_000  # identity residuals are CRN-exact, so moderate n suffices
    rosters = [("l1_16", CrossPolytope(16)),
               ("ellipsoid_32", Ellipsoid([1.0 / i for i in range(1, 33)]))]
    for tag, body in rosters:
        s = sample_set(body.dim, n, seed)
        curve = LocalWidthCurve(body, s)
        for sigma in (0.1, 1.0):
            fp = verify_fp_decomposition(body, sigma, s, curve=curve)
            pj = verify_proj_decomposition(body, sigma, s)
            assert fp.passed, (tag, sigma, fp.residual, fp.tolerance)
            assert pj.passed, (tag, sigma, pj.residual, pj.tolerance)
            agree = abs((fp.first_term + fp.integral_term)
                        - (pj.first_term + pj.integral_term))
            assert agree <= fp.tolerance + pj.tolerance
            out[f"{tag}_sigma_{sigma}"] = {
                "fp_residual": fp.residual, "fp_tol": fp.tolerance,
                "proj_residual": pj.residual, "proj_tol": pj.tolerance}
    out["n"] = n
    return out


def criterion_4(seed=20240):
    """Sort-based vs dual-bisection l1 projection; threshold characterization."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(1, 33))
        y = rng.standard_normal(d) * rng.choice([0.1, 1.0, 10.0])
        a = project_l1(y, 1.0)
        b = project_l1_bisect(y, 1.0)
        worst = max(worst, float(np.abs(a - b).max()))
        assert worst <= 1e-8, worst
    # soft-threshold characterization at machine tolerance
    for trial in range(200):
        d = int(rng.integers(2, 33))
        sigma = float(rng.choice([0.05, 0.3, 1.0, 4.0]))
        xi = rng.standard_normal(d)
        proj, theta = project_l1(sigma * xi, 1.0, return_threshold=True)
        lam_hat = theta / sigma
        expect = sigma * np.sign(xi) * np.maximum(np.abs(xi) - lam_hat, 0.0)
        assert np.abs(proj - expect).max() <= 1e-12
        if theta > 0:  # constraint active: empirical S1 fixed point
            s1_hat = np.maximum(np.abs(xi) - lam_hat, 0.0).sum() / d
            assert abs(s1_hat - 1.0 / (sigma * d)) <= 1e-10 / sigma
    return {"pairs": 1000, "max_disagreement": worst}


def criterion_5(seed=20240):
    """S1/S2 closed forms, Mills bounds, and the lambda_star bracket."""
    lams = np.linspace(0.0, 6.0, 241)
    worst = 0.0
    for lam in lams:
        q1, _ = quad(lambda z: (abs(z) - lam) * math.exp(-z * z / 2.0) / math.sqrt(2 * math.pi),
                     lam, np.inf, epsabs=1e-14, epsrel=1e-13)
        q1 *= 2.0
        q2, _ = quad(lambda z: (abs(z) - lam) ** 2 * math.exp(-z * z / 2.0) / math.sqrt(2 * math.pi),
                     lam, np.inf, epsabs=1e-14, epsrel=1e-13)
        q2 *= 2.0
        worst = max(worst, abs(s1(lam) - q1), abs(s2(lam) - q2))
    assert worst <= 1e-10, worst
    assert abs(s1(0.0) - math.sqrt(2.0 / math.pi)) < 1e-15
    assert abs(s2(0.0) - 1.0) < 1e-15
    mills(np.arange(1.0, 10.0 + 1e-9, 1e-3), check_bounds=True)
    alphas = [1.0 / s1(1.0), 10.0, 1e3, 1e6]
    brackets = {}
    for alpha in alphas:
        st = lambda_star(alpha)
        lo, hi = lambda_star_bracket(alpha)
        assert lo - 1e-9 <= st.lambda_star <= hi + 1e-9, (alpha, lo, st.lambda_star, hi)
        assert abs(st.s1_at_star - 1.0 / alpha) <= 1e-10
        # S2 bracket at the threshold
        le = math.log(math.e * alpha)
        s2lo = 1.0 / (2.0 * math.sqrt(2.0) * alpha * math.sqrt(le))
        s2hi = 12.0 * math.sqrt(7.0) / (alpha * math.sqrt(le))
        assert s2lo - 1e-12 <= st.s2_at_star <= s2hi + 1e-12
        brackets[f"{alpha:.6g}"] = {"lambda_star": st.lambda_star, "lo": lo, "hi": hi}
    return {"moment_worst_error": worst, "brackets": brackets}


def criterion_6(seed=20240):
    """Moderate-sigma l1 projection bound and the whole-range profile constant."""
    dims = [16, 64, 256, 1024, 4096]
    n = 4000
    worst_ratio = 0.0
    profile_const = 0.0
    rows = []
    for d in dims:
        body = CrossPolytope(d)
        s = sample_set(d, n, seed + d)
        sig_hi = math.sqrt(math.log(math.e * d))
        for sigma in np.geomspace(1.0 / d, sig_hi, 6):
            pm = proj_second_moment(body, float(sigma), s)
            bound = l1_ball.medium_sigma_bound(float(sigma), d)
            assert pm.value <= bound, (d, sigma, pm.value, bound)
            worst_ratio = max(worst_ratio, pm.value / bound)
            profile_const = max(profile_const, pm.value / r_profile(float(sigma), d))
            rows.append({"d": d, "sigma": float(sigma), "moment": pm.value,
                         "bound": bound, "R": r_profile(float(sigma), d)})
        # whole-range spot checks outside the moderate regime
        for sigma in (0.5 / d, 2.0 * sig_hi):
            pm = proj_second_moment(body, float(sigma), s)
            profile_const = max(profile_const, pm.value / r_profile(float(sigma), d))
    wfp = l1_ball.width_from_projection(4096)
    return {"n": n, "worst_bound_fraction": worst_ratio,
            "profile_constant": profile_const,
            "width_from_projection": wfp}


def criterion_7(seed=20240):
    """Crosspolytope intrinsic ratios, profile shape, and the width sandwich."""
    worst = 0.0
    for d in (8, 16, 32):
        for i in range(1, d - 1):
            _, a, b = crosspolytope_ratio(i, d, tol=1e-8)
            worst = max(worst, abs(a - b) / max(a, b))
    profs = {}
    for d in (8, 16, 32, 64, 128, 256):
        prof = profile_crosspolytope(d)
        lv = prof.log_values
        # unimodal: increments change sign at most once, + to -
        inc = np.diff(lv)
        sign_changes = np.diff(np.sign(inc[np.abs(inc) > 0]))
        assert np.all(sign_changes <= 0), f"profile not unimodal at d={d}"
        # log-concavity step: V_i / V_{i-1} <= V_1 / i
        i = np.arange(2, d + 1)
        assert np.all(lv[2:] - lv[1:-1] <= lv[1] - np.log(i) + 1e-9), d
        w = crosspolytope_width(d, tol=1e-12)
        istar = peak_index(prof.rescaled(0.5), min_index=1)
        lo = istar * 2.0 / math.sqrt(2.0 * math.pi)
        hi = 21.0 * istar * 2.0
        assert lo <= w <= hi, (d, lo, w, hi)
        profs[d] = {"i_star": istar, "width": w, "lower": lo, "upper": hi}
    return {"worst_route_disagreement": worst, "sandwich": profs}


def criterion_8(seed=20240):
    """Peak-index thresholds exact for cube and ball; monotone in sigma."""
    cases = [(Ball(4, 1.0), profile_ball(1.0, 4)),
             (Ball(9, 2.0), profile_ball(2.0, 9)),
             (Cube(3, 1.0), profile_cube(1.0, 3)),
             (Cube(6, 0.5), profile_cube(0.5, 6))]
    from .intrinsic import exact_width
    out = {}
    for body, prof in cases:
        thr = math.sqrt(2.0 / math.pi) * vol_over_surface(body)
        assert peak_index_at_sigma(prof, thr * (1 - 1e-9)) == body.dim
        assert peak_index_at_sigma(prof, thr * (1 + 1e-9)) < body.dim
        w = exact_width(body)
        assert peak_index_at_sigma(prof, w * (1 + 1e-9)) == 0
        assert peak_index_at_sigma(prof, w * (1 - 1e-9)) >= 1
        sigmas = np.geomspace(w * 1e-3, w * 10.0, 50)
        seq = [peak_index_at_sigma(prof, s) for s in sigmas]
        assert all(a >= b for a, b in zip(seq, seq[1:])), "peak index not nonincreasing"
        out[f"{body.kind}_{body.dim}"] = {"threshold": thr, "width": w,
                                          "istar_range": [seq[0], seq[-1]]}
    return out


def criterion_9(seed=20240):
    """Variational dominance for crosspolytopes and ellipsoid rosters."""
    out = {"crosspolytope": {}, "ellipsoids": {}}
    for d in (16, 64, 256, 1024):
        body = CrossPolytope(d)
        s = sample_set(d, 20_000, seed + d)
        pen = mc_estimate(penalized_values(body, 1.0, s))
        bound = crosspolytope_bound(d)
        assert pen.value <= bound + 3.0 * pen.stderr, (d, pen.value, bound)
        out["crosspolytope"][d] = {"penalized": pen.value, "bound": bound}
    rosters = {
        "harmonic_32": np.array([1.0 / i for i in range(1, 33)]),
        "root_32": np.array([i ** -0.5 for i in range(1, 33)]),
        "isotropic_40": np.full(40, 0.5),
    }
    for tag, a in rosters.items():
        body = Ellipsoid(a)
        s = sample_set(body.dim, 20_000, seed + body.dim + 1)
        pen = mc_estimate(penalized_values(body, 1.0, s))
        _, plain = minimize_bound(ellipsoid_wills_bound, a)
        _, local = minimize_bound(ellipsoid_local_bound, a)
        assert pen.value <= plain + 3.0 * pen.stderr, (tag, pen.value, plain)
        assert pen.value <= local + 3.0 * pen.stderr, (tag, pen.value, local)
        out["ellipsoids"][tag] = {"penalized": pen.value, "plain": plain, "local": local}
    # width limit: MC width vs sqrt(sum a^2), and the sigma-rescaled
    # min-lambda bound converging to the same value (from below, the
    # penalized first term is what it bounds at finite sigma)
    a = np.ones(256)
    target = math.sqrt(float((a * a).sum()))
    s = sample_set(256, 20_000, seed + 9)
    w_mc = mc_estimate(np.sqrt(((a * s.samples) ** 2).sum(axis=1)))
    assert abs(w_mc.value - target) <= 0.01 * target, (w_mc.value, target)
    _, bound_far = variational.ellipsoid_width_bound(a, 1e3)
    assert abs(bound_far - target) <= 0.01 * target, bound_far
    assert bound_far >= w_mc.value - 3.0 * w_mc.stderr, (bound_far, w_mc.value)
    out["width_limit"] = {"mc": w_mc.value, "target": target, "sigma_inf_bound": bound_far}
    return out


def criterion_10(seed=20240):
    """Fixed-point chain across bodies and sigma grid; ball solver closed form."""
    bodies = [Ball(8, 1.0), CrossPolytope(16),
              Ellipsoid([1.0 / i for i in range(1, 33)])]
    n = 20_000
    out = {}
    for body in bodies:
        s = sample_set(body.dim, n, seed + body.dim)
        curve = LocalWidthCurve(body, s)
        for sigma in (0.05, 0.2, 1.0, 5.0):
            rep = check_chain(body, sigma, s, curve=curve)
            out[f"{body.kind}{body.dim}_s{sigma}"] = {
                "min_margin": min(rep.margins.values()),
                "constants": rep.empirical_constants}
    body = Ball(8, 1.0)
    s = sample_set(8, n, seed + 8)
    curve = LocalWidthCurve(body, s)
    mu_hat = est_width(body, s).value
    for sigma in (0.05, 0.2, 1.0, 5.0):
        closed = min(sigma * mu_hat, 1.0)
        solved = solve_r(body, sigma, s, curve=curve)
        assert abs(solved - closed) <= 1e-3 * closed, (sigma, solved, closed)
    out["ball_solver_rel_err"] = abs(solved - closed) / closed
    return out


def criterion_11(seed=20240):
    """Exact-mode entropy equivalences on 50 random clouds."""
    rng = np.random.default_rng(seed)
    for trial in range(50):
        n = int(rng.integers(5, 26))
        d = int(rng.integers(1, 4))
        pts = rng.standard_normal((n, d))
        if rng.random() < 0.3:  # include clustered clouds
            pts[: n // 2] *= 0.05
        cloud = PointCloud(points=pts)
        check_dyadic(cloud, depth=6)
        check_local_global(cloud)
    return {"clouds": 50, "max_points": 25}


def criterion_12(seed=20240):
    """Sudakov minoration direction on B1^3 and ball clouds (0.05 floor)."""
    out = {}
    for body in (CrossPolytope(3), Ball(3, 1.0)):
        full = cloud_from_body(body, budget=500)
        keep = greedy_packing(full.points, 0.28 * body.rad)[:28]
        cloud = PointCloud(points=full.points[keep], mode="exact")
        s = sample_set(3, 50_000, seed)
        rep = sudakov_minoration_check(body, cloud, s, floor=0.05)
        out[body.kind] = {"c_emp": rep["c_emp"], "c_emp_local": rep["c_emp_local"],
                          "width": rep["width"].value, "Psi": rep["Psi_cloud"]}
        assert rep["c_emp"] >= 0.05
    return out


def criterion_13(seed=20240):
    """Stein identity and divergence bounds for ball and B1 in d = 4."""
    out = {}
    s = sample_set(4, 20_000, seed)
    for body in (Ball(4, 1.0), CrossPolytope(4)):
        for sigma in (0.3, 1.0):
            rep = stein_check(body, sigma, s)
            out[f"{body.kind}_s{sigma}"] = {"gap": rep["gap"], "tol": rep["tol"],
                                            "div_range": [rep["div_min"], rep["div_max"]]}
    return out


def criterion_14(seed=20240):
    """GSM risk bound on the theta grid and the net-LSE constant."""
    out = {}
    from .intrinsic import exact_width
    for body in (Ball(2, 1.0), CrossPolytope(3)):
        w = exact_width(body)
        s = sample_set(body.dim, 20_000, seed + body.dim)
        for sigma in (0.1, 0.5):
            worst = 0.0
            for theta in theta_grid(body):
                r = lse_risk(body, theta, sigma, s)
                assert r.value <= 2.0 * sigma * w + 3.0 * r.stderr, (body.kind, sigma)
                worst = max(worst, r.value / (2.0 * sigma * w))
            out[f"{body.kind}_risk_s{sigma}"] = worst
    # net LSE under the entropy precondition
    body = Ball(2, 1.0)
    s = sample_set(2, 20_000, seed)
    cloud = cloud_from_body(body, budget=700)
    sub = greedy_packing(cloud.points, 0.22)[:30]
    sub_cloud = PointCloud(points=cloud.points[sub], mode="exact")
    prof = entropy_profile(sub_cloud, depth=6)
    sigma = 0.1
    ratios = {}
    for k, eps in enumerate(prof.scales):
        if prof.h_loc[k] <= (eps / sigma) ** 2:
            net_idx = greedy_packing(cloud.points, eps)
            rep = net_lse(body, eps, np.zeros(2), sigma, s,
                          cloud.points[net_idx], profile=prof)
            if rep.get("precondition"):
                ratios[f"{eps:.4f}"] = rep["ratio"]
    assert ratios, "no admissible net scale found"
    out["net_lse_ratios"] = ratios
    return out


CRITERIA = [
    (1, "pointwise support identity", criterion_1),
    (2, "ball decompositions at sigma=0", criterion_2),
    (3, "decompositions for B1^16 and 1/i ellipsoid", criterion_3),
    (4, "l1 projection exactness", criterion_4),
    (5, "S1/S2/Mills/lambda_star analytics", criterion_5),
    (6, "moderate-sigma l1 moment bound", criterion_6),
    (7, "crosspolytope intrinsic profile and sandwich", criterion_7),
    (8, "peak-index thresholds and monotonicity", criterion_8),
    (9, "variational dominance", criterion_9),
    (10, "fixed-point chain and ball closed form", criterion_10),
    (11, "entropy equivalences in exact mode", criterion_11),
    (12, "Sudakov minoration on clouds", criterion_12),
    (13, "Stein identity and divergence bounds", criterion_13),
    (14, "GSM risk and net-LSE constant", criterion_14),
]

RUNTIME_LIMITS = {1: 60.0, 2: 120.0, 3: 600.0}


def run_criterion(cid, name, fn, seed=20240):
    t0 = time.time()
    try:
        details = fn(seed=seed)
        runtime = time.time() - t0
        passed = True
        err = ""
        limit = RUNTIME_LIMITS.get(cid)
        if limit is not None and runtime > limit:
            passed = False
            err = f"runtime {runtime:.1f}s exceeded the {limit:.0f}s budget"
    except AssertionError as exc:
        runtime = time.time() - t0
        passed, details, err = False, {}, f"assertion: {exc}"
    return CriterionResult(cid=cid, name=name, passed=passed, runtime=runtime,
                           details=details, error=err)


def run_all(seed=20240):
    return [run_criterion(cid, name, fn, seed=seed) for cid, name, fn in CRITERIA]
