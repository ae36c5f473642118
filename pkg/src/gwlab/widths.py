"""Closed-form and one-dimensional-quadrature Gaussian widths for shipped bodies."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, ndtr


def expected_norm(d):
    """E ||g||_2 for g ~ N(0, I_d): sqrt(2) Gamma((d+1)/2) / Gamma(d/2)."""
    return math.sqrt(2.0) * math.exp(gammaln((d + 1) / 2.0) - gammaln(d / 2.0))


def ball_width(radius, d):
    return radius * expected_norm(d)


def cube_width(half_width, d):
    """w([-s, s]^d) = s * d * E|Z| = s d sqrt(2/pi)."""
    return half_width * d * math.sqrt(2.0 / math.pi)


def crosspolytope_width(d, radius=1.0, tol=1e-12):
    """w(radius * B1^d) = radius * E max_i |g_i| by the tail-integral formula.

    E max|g_i| = int_0^inf [1 - (2 Phi(t) - 1)^d] dt; the integrand is cut at
    a point where the remaining tail is below d * exp(-U^2/2), far under tol.
    """
    upper = math.sqrt(2.0 * math.log(max(d, 2))) + 10.0

    def integrand(t):
        return 1.0 - (2.0 * ndtr(t) - 1.0) ** d

    val, _ = quad(integrand, 0.0, upper, epsabs=tol, epsrel=tol, limit=400)
    return radius * val


def chi_pdf(x, d):
    x = np.asarray(x, dtype=float)
    logpdf = ((d - 1) * np.log(np.maximum(x, 1e-300)) - 0.5 * x * x
              - (0.5 * d - 1.0) * math.log(2.0) - gammaln(0.5 * d))
    return np.where(x > 0, np.exp(logpdf), 0.0)


def chi_expectation(fn, d, tol=1e-12):
    """E fn(||g||) for g ~ N(0, I_d) via quadrature against the chi density."""
    upper = math.sqrt(d) + 12.0
    val, _ = quad(lambda x: fn(x) * chi_pdf(x, d), 0.0, upper,
                  epsabs=tol, epsrel=tol, limit=400)
    return val


def clipped_norm_second_moment(sigma, radius, d):
    """E min(sigma ||g||, radius)^2, the ball projection second moment."""
    return chi_expectation(lambda x: min(sigma * x, radius) ** 2, d)
