"""Exact l1-ball projection and the soft-threshold moment machinery behind it.

Everything here is driven by the two truncated Gaussian moments

    S1(lam) = E (|Z| - lam)_+        S2(lam) = E (|Z| - lam)_+^2,   Z ~ N(0,1),

their empirical counterparts, and the threshold lambda_star solving
S1(lambda_star) = 1/alpha with alpha = sigma * d.  The normal cdf/pdf come
from scipy.special (Cephes rational approximations, double-precision
accurate), and the scaled complementary error function keeps the Mills ratio
stable for large arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfcx, ndtr

SQRT_2PI = math.sqrt(2.0 * math.pi)


def normal_pdf(x):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / SQRT_2PI


def normal_cdf(x):
    return ndtr(x)


def normal_sf(x):
    """Upper tail Psi(x) = P{Z >= x}."""
    return ndtr(np.negative(x))


def mills(x, check_bounds=True):
    """Mills ratio M(x) = Psi(x) / phi(x), computed via erfcx for stability.

    With ``check_bounds`` the rational two-sided bounds
    x^2/(1+x^2) <= (x^2 + 1/(5x^2))/(1+x^2) <= x M(x)   (x >= 1)
    and x M(x) <= (x^2+2)/(x^2+3) <= 1                  (x >= 0)
    are asserted pointwise.
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    m = math.sqrt(math.pi / 2.0) * erfcx(x / math.sqrt(2.0))
    if check_bounds:
        xm = x * m
        upper = (x * x + 2.0) / (x * x + 3.0)
        ok_upper = (x < 0) | ((xm <= upper + 1e-12) & (upper <= 1.0 + 1e-15))
        xl, ml = x[x >= 1.0], xm[x >= 1.0]
        mid = (xl * xl + 0.2 / (xl * xl)) / (1.0 + xl * xl)
        weak = (xl * xl) / (1.0 + xl * xl)
        ok_lower = (weak <= mid + 1e-12) & (mid <= ml + 1e-12)
        if not (np.all(ok_upper) and np.all(ok_lower)):
            raise AssertionError("Mills ratio rational bounds violated")
    return float(m[0]) if scalar else m


def s1(lam):
    """First truncated moment S1(lam) = 2[phi(lam) - lam*Psi(lam)]."""
    lam = np.asarray(lam, dtype=float)
    out = 2.0 * (normal_pdf(lam) - lam * normal_sf(lam))
    return out if out.ndim else float(out)


def s2(lam):
    """Second truncated moment S2(lam) = 2[(lam^2+1)Psi(lam) - lam*phi(lam)].

    This closed form has no removable singularity at 0, so the analytic
    limit S2(0) = 1 comes out directly.
    """
    lam = np.asarray(lam, dtype=float)
    out = 2.0 * ((lam * lam + 1.0) * normal_sf(lam) - lam * normal_pdf(lam))
    return out if out.ndim else float(out)


S1_AT_ZERO = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ThresholdState:
    """Population threshold for the l1 projection at noise-mass alpha = sigma*d."""

    alpha: float
    lambda_star: float
    s1_at_star: float
    s2_at_star: float


def lambda_star(alpha, tol=1e-12):
    """Solve S1(lam) = 1/alpha for the smallest nonnegative root.

    S1 is continuous and strictly decreasing with S1(0) = sqrt(2/pi); when
    1/alpha >= S1(0) the infimum is attained at 0.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    target = 1.0 / alpha
    if target >= S1_AT_ZERO:
        lam = 0.0
    else:
        lo, hi = 0.0, 1.0
        while s1(hi) > target:
            hi *= 2.0
            if hi > 1e9:
                raise RuntimeError("lambda_star bracket expansion failed")
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if s1(mid) > target:
                lo = mid
            else:
                hi = mid
        lam = 0.5 * (lo + hi)
    return ThresholdState(alpha=float(alpha), lambda_star=lam,
                          s1_at_star=s1(lam), s2_at_star=s2(lam))


def lambda_star_bracket(alpha):
    """Two-sided bracket sqrt(log(e*alpha)/7) <= lambda_star <= sqrt(2 log(e*alpha)).

    Valid whenever alpha >= 1/S1(1).
    """
    if alpha < 1.0 / s1(1.0):
        raise ValueError("bracket requires alpha >= 1/S1(1)")
    le = math.log(math.e * alpha)
    return math.sqrt(le / 7.0), math.sqrt(2.0 * le)


def project_l1(y, radius=1.0, return_threshold=False):
    """Euclidean projection onto the l1 ball of the given radius.

    Exact O(d log d) sort-based thresholding: coordinates map to
    sign(y_i) * (|y_i| - theta)_+ with theta the unique level at which the
    result has l1 norm equal to ``radius`` (theta = 0 when y is feasible).
    Accepts a single vector (d,) or a batch (n, d).
    """
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    arr = np.asarray(y, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if radius == 0:
        out = np.zeros_like(arr)
        theta = np.abs(arr).max(axis=1)
        if single:
            out, theta = out[0], float(theta[0])
        return (out, theta) if return_threshold else out
    a = np.abs(arr)
    l1 = a.sum(axis=1)
    theta = np.zeros(arr.shape[0])
    active = l1 > radius
    if np.any(active):
        s = np.sort(a[active], axis=1)[:, ::-1]
        cs = np.cumsum(s, axis=1) - radius
        ks = np.arange(1, arr.shape[1] + 1)
        cond = s - cs / ks > 0
        rho = cond.shape[1] - 1 - np.argmax(cond[:, ::-1], axis=1)
        theta[active] = np.take_along_axis(cs, rho[:, None], axis=1)[:, 0] / (rho + 1.0)
    out = np.sign(arr) * np.maximum(a - theta[:, None], 0.0)
    if single:
        out, theta = out[0], float(theta[0])
    if return_threshold:
        return out, theta
    return out


def project_l1_bisect(y, radius=1.0, iters=200):
    """Independent dual-bisection l1 projection, used as a cross-check oracle.

    Bisects the threshold theta on [0, max|y_i|] against the residual
    sum (|y_i| - theta)_+ - radius; never shares code with project_l1.
    """
    arr = np.asarray(y, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    a = np.abs(arr)
    lo = np.zeros(arr.shape[0])
    hi = a.max(axis=1)
    feasible = a.sum(axis=1) <= radius
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        mass = np.maximum(a - mid[:, None], 0.0).sum(axis=1)
        high = mass > radius
        lo = np.where(high, mid, lo)
        hi = np.where(high, hi, mid)
    theta = np.where(feasible, 0.0, 0.5 * (lo + hi))
    out = np.sign(arr) * np.maximum(a - theta[:, None], 0.0)
    return out[0] if single else out


def r_profile(sigma, d):
    """Piecewise projection-moment profile R(sigma, d) for the unit l1 ball.

    sigma^2 d below 1/d, sigma / sqrt(log(e d sigma)) in the middle branch,
    and 1 beyond sqrt(log(e d)).  The branches are not claimed continuous.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if d < 1:
        raise ValueError("d must be a positive integer")
    if sigma <= 1.0 / d:
        return sigma * sigma * d
    if sigma < math.sqrt(math.log(math.e * d)):
        return sigma / math.sqrt(math.log(math.e * d * sigma))
    return 1.0


def width_from_projection(d):
    """Integrate 1 + int_0^inf R(sigma, d)/sigma^2 dsigma branch by branch.

    Each branch has a closed-form antiderivative; the middle branch uses the
    substitution w = log(e d sigma).  Returns the bound together with its
    ratio against sqrt(log(e d)).
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    led = math.log(math.e * d)
    head = 1.0  # int_0^{1/d} d dsigma
    mid = 2.0 * (math.sqrt(led + 0.5 * math.log(led)) - 1.0) if led > 1.0 else 0.0
    tail = 1.0 / math.sqrt(led)
    total = 1.0 + head + mid + tail
    return {
        "bound": total,
        "sqrt_log_ed": math.sqrt(led),
        "constant": total / math.sqrt(led),
        "pieces": {"radius": 1.0, "small": head, "medium": mid, "large": tail},
    }


MEDIUM_SIGMA_CONSTANT = 205584.0


def medium_sigma_bound(sigma, d):
    """Moderate-noise bound 205584 * sigma / sqrt(log(e d sigma)), sigma >= 1/d."""
    if sigma < 1.0 / d:
        raise ValueError("bound requires sigma >= 1/d")
    return MEDIUM_SIGMA_CONSTANT * sigma / math.sqrt(math.log(math.e * d * sigma))
