"""Closed-form variational (Gibbs-prior) upper bounds on penalized widths.

These are pure formula evaluators for the ellipsoid and crosspolytope priors,
plus dominance checks that pit them against Monte-Carlo penalized widths at
noise level one.  The tuning parameter lambda is never prescribed by theory;
it is optimized by golden-section over a log grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fixed_points import golden_max
from .sampling import GaussianSampleSet, mc_estimate, penalized_values


@dataclass(frozen=True)
class VariationalBound:
    kind: str         # plain | localized | crosspolytope
    lam: float
    value: float


def ellipsoid_wills_bound(semi_axes, lam):
    """lambda/2 + (1/2) sum log(1 + a_i^2 / lambda): the plain Gaussian-prior
    bound on E sup_{x in E_a} (<x, g> - ||x||^2/2).  Degenerate axes (0) are
    allowed and contribute nothing."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    a = np.asarray(semi_axes, dtype=float)
    return 0.5 * lam + 0.5 * float(np.log1p(a * a / lam).sum())


def ellipsoid_local_bound(semi_axes, lam):
    """2 lambda + (1/2) sum 4 a_i^2 / (a_i^2 + 4 lambda): the localized-prior
    refinement of the plain bound."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    a = np.asarray(semi_axes, dtype=float)
    a2 = a * a
    return 2.0 * lam + 0.5 * float((4.0 * a2 / (a2 + 4.0 * lam)).sum())


def crosspolytope_bound(d):
    """Sparse-prior bound on E sup_{x in B1^d} (<x, g> - ||x||^2/2):

        sqrt(2 log d) + 3 log(2 log d) / (2 sqrt(pi) sqrt(log d)) + c / log^{3/2}(d)

    with c = 1/sqrt(2) + 1/(2 sqrt(pi)).
    """
    if d < 2:
        raise ValueError("bound requires d >= 2")
    ld = math.log(d)
    c = 1.0 / math.sqrt(2.0) + 1.0 / (2.0 * math.sqrt(math.pi))
    return (math.sqrt(2.0 * ld)
            + 3.0 * math.log(2.0 * ld) / (2.0 * math.sqrt(math.pi) * math.sqrt(ld))
            + c / ld ** 1.5)


def minimize_bound(bound_fn, semi_axes, lo=1e-6, hi=1e6, tol=1e-10):
    """Golden-section minimum of a lambda-indexed bound over log lambda."""
    x, _, _ = golden_max(lambda u: -bound_fn(semi_axes, math.exp(u)),
                         math.log(lo), math.log(hi), tol)
    lam = math.exp(x)
    return lam, bound_fn(semi_axes, lam)


def ellipsoid_width_bound(semi_axes, sigma):
    """sigma-rescaled plain bound, an upper bound on w(E_a) for every sigma.

    Applies the plain bound to E_{a/sigma} and multiplies back; the minimum
    over lambda tends to sqrt(sum a_i^2) as sigma grows.
    """
    a = np.asarray(semi_axes, dtype=float)

    def rescaled(_, lam):
        return sigma * ellipsoid_wills_bound(a / sigma, lam)

    lam, val = minimize_bound(rescaled, a)
    return lam, val


def check_simplepb(semi_axes, s: GaussianSampleSet, lams=None):
    """MC penalized width at sigma = 1 must sit below the plain bound for
    every lambda on the sweep grid (3-stderr allowance).  Returns the sweep."""
    from .bodies import Ellipsoid
    body = Ellipsoid(semi_axes)
    pen = mc_estimate(penalized_values(body, 1.0, s))
    if lams is None:
        lams = np.geomspace(1e-3, 1e3, 25)
    rows = []
    for lam in lams:
        bound = ellipsoid_wills_bound(semi_axes, lam)
        ok = pen.value <= bound + 3.0 * pen.stderr
        if not ok:
            raise AssertionError(f"plain variational bound violated at lambda={lam}: "
                                 f"{pen.value} > {bound}")
        rows.append({"lam": float(lam), "bound": bound})
    lam_best, best = minimize_bound(ellipsoid_wills_bound, semi_axes)
    return {"penalized": pen, "sweep": rows, "lam_star": lam_best, "best_bound": best}


def lambda_unimodality_gap(bound_fn, semi_axes, grid_points=2000):
    """Golden-section vs dense-scan minimum discrepancy over the lambda grid."""
    lams = np.geomspace(1e-6, 1e6, grid_points)
    dense = min(bound_fn(semi_axes, lam) for lam in lams)
    _, golden = minimize_bound(bound_fn, semi_axes)
    return abs(golden - dense) / max(abs(dense), 1e-12)
