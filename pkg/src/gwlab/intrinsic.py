"""Intrinsic-volume profiles, the Wills functional, and the peak-index checks.

Profiles are held in log space throughout: the crosspolytope values underflow
double precision well below d = 256 (its volume is 2^d/d!), and the ratio
chain accumulates without loss as a running log-sum.  Normal-family special
functions come from scipy.special (Cephes rational approximations, absolute
error far below the 1e-12 budget); one-dimensional integrals use adaptive
quadrature with the integrand normalized by its peak so that tiny profiles
keep full relative accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize_scalar
from scipy.special import erf, gammaln, logsumexp

from .widths import ball_width, crosspolytope_width, cube_width

SQRT_2PI = math.sqrt(2.0 * math.pi)


def log_kappa(j):
    """log volume of the unit Euclidean ball in R^j (kappa_0 = 1)."""
    return 0.5 * j * math.log(math.pi) - gammaln(0.5 * j + 1.0)


def _log_binom(n, k):
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


@dataclass(frozen=True)
class IntrinsicVolumeProfile:
    """log V_0 .. log V_d for a body at a given scale factor (profile of c*T)."""

    kind: str
    dim: int
    scale: float
    log_values: np.ndarray

    def rescaled(self, c):
        """Profile of (c * scale) T via homogeneity V_j(cT) = c^j V_j(T)."""
        if c <= 0:
            raise ValueError("scale must be positive")
        idx = np.arange(self.dim + 1)
        return IntrinsicVolumeProfile(kind=self.kind, dim=self.dim,
                                      scale=self.scale * c,
                                      log_values=self.log_values + idx * math.log(c))

    def values(self):
        return np.exp(self.log_values)


def profile_ball(radius, d):
    """V_j(r B^d) = C(d, j) * (kappa_d / kappa_{d-j}) * r^j."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    j = np.arange(d + 1)
    logs = (_log_binom(d, j) + log_kappa(d) - log_kappa(d - j)
            + j * math.log(radius))
    return IntrinsicVolumeProfile(kind="ball", dim=d, scale=1.0, log_values=logs)


def profile_cube(half_width, d):
    """V_j([-s, s]^d) = C(d, j) (2s)^j."""
    if half_width <= 0:
        raise ValueError("half_width must be positive")
    j = np.arange(d + 1)
    logs = _log_binom(d, j) + j * math.log(2.0 * half_width)
    return IntrinsicVolumeProfile(kind="cube", dim=d, scale=1.0, log_values=logs)


def _log_quad_peak_normalized(log_f, upper, peak_guess):
    """log of int_0^upper exp(log_f(x)) dx, normalized at the integrand peak."""
    res = minimize_scalar(lambda x: -log_f(x), bounds=(0.0, upper), method="bounded",
                          options={"xatol": 1e-12})
    peak_x = float(res.x)
    peak_log = log_f(peak_x)

    def g(x):
        return math.exp(log_f(x) - peak_log)

    parts = sorted({0.0, 0.5 * peak_x, peak_x, min(2.0 * peak_x + 1.0, upper), upper})
    total = 0.0
    for a, b in zip(parts[:-1], parts[1:]):
        if b > a:
            v, _ = quad(g, a, b, epsabs=0.0, epsrel=1e-13, limit=400)
            total += v
    return peak_log + math.log(total)


def crosspolytope_ratio(i, d, tol=1e-8):
    """V_i(B1^d) / V_{i+1}(B1^d) by two independent quadrature routes.

    Route (a)整 integrates the mean of the mode-density exp(-(i+1)x^2) erf(x)^m
    (m = d-i-1) and returns (i+1) / (2 sqrt(pi) E[Y]); route (b) evaluates the
    ratio of the two plain integrals (i+1)^2/(2m) * I1/I2.  The two must
    agree to ``tol`` relative or the call raises.
    """
    if not (1 <= i <= d - 2):
        raise ValueError("ratio defined for 1 <= i <= d-2")
    m = d - i - 1
    mode = math.sqrt(max(math.log(max(d / (i + 1.0), 1.000001)), 1e-8))
    upper = mode + 12.0 / math.sqrt(i + 1.0) + 2.0

    def log_g(x, a=i + 1.0, mm=m):
        if x <= 0:
            return -math.inf
        e = erf(x)
        return -a * x * x + mm * math.log(e) if e > 0 else -math.inf

    # route (a): E[Y] under the density proportional to g
    log_z = _log_quad_peak_normalized(log_g, upper, mode)
    log_zy = _log_quad_peak_normalized(lambda x: log_g(x) + math.log(max(x, 1e-300)),
                                       upper, mode)
    ey = math.exp(log_zy - log_z)
    route_a = (i + 1.0) / (2.0 * math.sqrt(math.pi) * ey)

    # route (b): ratio of the two raw integrals
    def log_g2(x, a=i + 2.0, mm=m - 1):
        if x <= 0:
            return -math.inf
        if mm == 0:
            return -a * x * x
        e = erf(x)
        return -a * x * x + mm * math.log(e) if e > 0 else -math.inf

    mode2 = math.sqrt(max(math.log(max(d / (i + 2.0), 1.000001)), 1e-8))
    log_i1 = log_z
    log_i2 = _log_quad_peak_normalized(log_g2, mode2 + 12.0 / math.sqrt(i + 2.0) + 2.0,
                                       mode2)
    route_b = (i + 1.0) ** 2 / (2.0 * m) * math.exp(log_i1 - log_i2)

    if abs(route_a - route_b) > tol * max(abs(route_a), abs(route_b)):
        raise RuntimeError(f"ratio quadratures disagree at (i={i}, d={d}): "
                           f"{route_a!r} vs {route_b!r}")
    return 0.5 * (route_a + route_b), route_a, route_b


def crosspolytope_ey(i, d):
    """E[Y] for the ratio density at (i, d); used for the mean bound check."""
    ratio, _, _ = crosspolytope_ratio(i, d)
    return (i + 1.0) / (2.0 * math.sqrt(math.pi) * ratio)


def profile_crosspolytope(d, cross_check=True, ratio_tol=1e-8):
    """Reconstruct log V_0..log V_d of B1^d from the anchors and ratio chain.

    Anchors: V_d = 2^d/d! and V_{d-1} = 2^{d-1} sqrt(d) / (d-1)! (half the
    surface area); the chain V_i = ratio(i) * V_{i+1} runs downward.  V_1 is
    cross-checked against sqrt(2 pi) * w(B1^d) from the one-dimensional width
    integral and the call fails if the chain drifts by more than 1%.
    """
    if d < 3:
        raise ValueError("profile chain needs d >= 3")
    logs = np.empty(d + 1)
    logs[0] = 0.0
    logs[d] = d * math.log(2.0) - gammaln(d + 1)
    logs[d - 1] = (d - 1) * math.log(2.0) + 0.5 * math.log(d) - gammaln(d)
    for i in range(d - 2, 0, -1):
        ratio, _, _ = crosspolytope_ratio(i, d, tol=ratio_tol)
        logs[i] = logs[i + 1] + math.log(ratio)
    if cross_check:
        v1_width = math.log(SQRT_2PI * crosspolytope_width(d))
        if abs(logs[1] - v1_width) > math.log(1.01):
            raise RuntimeError(f"ratio chain inconsistent with width route at d={d}: "
                               f"logV1 {logs[1]:.6f} vs {v1_width:.6f}")
    return IntrinsicVolumeProfile(kind="l1", dim=d, scale=1.0, log_values=logs)


def profile_for_body(body):
    """Closed-form profile for a shipped body; ellipsoids are rejected
    (no closed form is available and none is approximated)."""
    if body.kind == "ball":
        return profile_ball(body.radius, body.dim)
    if body.kind == "cube":
        return profile_cube(body.half_width, body.dim)
    if body.kind == "l1":
        prof = profile_crosspolytope(body.dim)
        return prof.rescaled(body.radius)
    raise ValueError(f"no intrinsic-volume profile for body kind {body.kind!r}")


def wills_log(profile: IntrinsicVolumeProfile):
    """log W = log sum_j V_j, evaluated as a log-sum-exp of the profile."""
    return float(logsumexp(profile.log_values))


def peak_index(profile: IntrinsicVolumeProfile, min_index=0):
    """Smallest maximizer of V_i over i in {min_index, .., d} (argmax ties
    resolve to the first index, matching the smallest-maximizer rule)."""
    return int(np.argmax(profile.log_values[min_index:])) + min_index


def peak_index_at_sigma(profile: IntrinsicVolumeProfile, sigma):
    """Peak index of T / (sigma sqrt(2 pi)) with the smallest-maximizer tie rule."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return peak_index(profile.rescaled(1.0 / (sigma * SQRT_2PI)))


def sigma_log_wills(profile: IntrinsicVolumeProfile, sigma):
    """sigma * log W(T / (sigma sqrt(2 pi)))."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return sigma * wills_log(profile.rescaled(1.0 / (sigma * SQRT_2PI)))


def exact_width(body):
    """Quadrature/Gamma-formula width for bodies with closed-form profiles."""
    if body.kind == "ball":
        return ball_width(body.radius, body.dim)
    if body.kind == "cube":
        return cube_width(body.half_width, body.dim)
    if body.kind == "l1":
        return crosspolytope_width(body.dim, radius=body.radius)
    raise ValueError(f"no exact width for body kind {body.kind!r}")


def vol_over_surface(body):
    """Vol_d(T) / Sf_{d-1}(T) for the peak-index-equals-d threshold."""
    if body.kind == "ball":
        return body.radius / body.dim
    if body.kind == "cube":
        return body.half_width / body.dim
    if body.kind == "l1":
        # Vol = (2 rho)^d / d!, Sf = 2^d sqrt(d) rho^{d-1} / (d-1)!
        return body.radius / (body.dim ** 1.5)
    raise ValueError(f"no closed-form Vol/Sf for body kind {body.kind!r}")


def check_width_peak(body, width=None, samples=None, integral_term=None, sigma=None):
    """Two-sided peak-index width sandwich with the paper's explicit constants.

    Asserts (1/sqrt(2 pi)) i* diam <= w <= 21 i* diam for the
    diameter-normalized profile (i* over i >= 1), and when (sigma,
    integral_term) are supplied also the noise-scale form
    w <= 45 sigma i*_sigma + int_sigma^inf r(nu)^2/nu^2 dnu.
    """
    from .sampling import est_width
    profile = profile_for_body(body)
    if width is None:
        width = exact_width(body) if body.kind in ("ball", "cube", "l1") \
            else est_width(body, samples).value
    diam = body.diam
    istar = peak_index(profile.rescaled(1.0 / diam), min_index=1)
    lower = istar * diam / SQRT_2PI
    upper = 21.0 * istar * diam
    report = {
        "width": width, "i_star": istar, "diam": diam,
        "lower": lower, "upper": upper,
        "lower_ok": lower <= width * (1 + 1e-9),
        "upper_ok": width <= upper * (1 + 1e-9),
        "i_star_cap": int(math.floor(math.sqrt(2.0 * math.pi * body.dim))),
    }
    if not (report["lower_ok"] and report["upper_ok"]):
        raise AssertionError(f"width/peak-index sandwich violated: {report}")
    if istar > report["i_star_cap"]:
        raise AssertionError("peak index exceeded floor(sqrt(2 pi d))")
    if sigma is not None and integral_term is not None:
        istar_sigma = peak_index_at_sigma(profile, sigma)
        bound = 45.0 * sigma * istar_sigma + 2.0 * integral_term  # integral_term carries the 1/2
        report["sigma_form"] = {"sigma": sigma, "i_star_sigma": istar_sigma,
                                "bound": bound, "ok": width <= bound * (1 + 1e-9)}
        if not report["sigma_form"]["ok"]:
            raise AssertionError(f"noise-scale peak bound violated: {report['sigma_form']}")
    return report


def check_lower_wills(body, width, proj_integral_from_one):
    """log W(T / sqrt(2 pi)) >= w(T) - (1/2) int_1^inf E||Pi_{T/nu}(g)||^2 dnu.

    ``proj_integral_from_one`` is an IntegralResult from integrate_proj_term
    at sigma = 1 (it already carries the 1/2 factor).
    """
    profile = profile_for_body(body)
    lhs = wills_log(profile.rescaled(1.0 / SQRT_2PI))
    rhs = width - proj_integral_from_one.value
    slack = proj_integral_from_one.halfwidth + 1e-9 * max(1.0, abs(lhs))
    ok = lhs >= rhs - slack
    if not ok:
        raise AssertionError(f"Wills lower bound violated: {lhs} < {rhs}")
    return {"log_wills": lhs, "width_minus_integral": rhs, "margin": lhs - rhs}
