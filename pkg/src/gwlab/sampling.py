"""Seeded Gaussian sampling with common random numbers, and the Monte-Carlo
width estimators built on it.

Reproducibility contract
------------------------
Sample row ``i`` of a set with dimension ``d`` and 64-bit ``seed`` is a pure
function of ``(seed, i)``: the Philox4x64-10 counter stream assigns row ``i``
the aligned counter blocks ``[i*bpr, (i+1)*bpr)`` with ``bpr = ceil(d/4)``
(four 64-bit words per block).  Raw words map to uniforms in (0, 1) via
``u = ((w >> 11) + 0.5) * 2**-53`` and then through the inverse normal CDF
``scipy.special.ndtri`` (the Cephes double-precision rational approximation).
Workers generating disjoint row ranges therefore reproduce the sequential
stream bit for bit, and all estimator reductions use a fixed pairwise tree,
so results are independent of how rows are scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

MAX_ELEMENTS = 1 << 27  # memory budget for a single sample matrix


class BudgetError(ValueError):
    """Requested sample matrix exceeds the in-memory budget."""


def _raw_rows(seed: int, d: int, row_lo: int, row_hi: int) -> np.ndarray:
    """Raw standard-normal rows [row_lo, row_hi) of the (seed, d) stream."""
    bpr = -(-d // 4)  # counter blocks per row
    bit = np.random.Philox(key=seed, counter=[row_lo * bpr, 0, 0, 0])
    words = bit.random_raw((row_hi - row_lo) * bpr * 4)
    words = words.reshape(row_hi - row_lo, bpr * 4)[:, :d]
    u = ((words >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


@dataclass(frozen=True, eq=False)
class GaussianSampleSet:
    """A fixed matrix of standard Gaussian draws used as common random numbers."""

    dim: int
    n: int
    seed: int
    samples: np.ndarray

    def sanity_band(self):
        """CLT sanity check: column means within 5/sqrt(n) of 0 and column
        variances within 5*sqrt(2/n) of 1.  Returns (ok, worst_mean, worst_var)."""
        mean = self.samples.mean(axis=0)
        var = self.samples.var(axis=0, ddof=1)
        ok = (np.abs(mean).max() <= 5.0 / np.sqrt(self.n)
              and np.abs(var - 1.0).max() <= 5.0 * np.sqrt(2.0 / self.n))
        return ok, float(np.abs(mean).max()), float(np.abs(var - 1.0).max())


def sample_set(d: int, n: int, seed: int, chunks: int = 1) -> GaussianSampleSet:
    """Generate the (d, n, seed) Gaussian sample set.

    ``chunks`` > 1 exercises the parallel-generation path (disjoint row
    ranges generated independently); the output is bit-identical for any
    chunk split.
    """
    if d < 1 or int(d) != d:
        raise ValueError("dimension must be a positive integer")
    if n < 1 or int(n) != n:
        raise ValueError("sample count must be a positive integer")
    if d * n > MAX_ELEMENTS:
        raise BudgetError(f"sample matrix of {d * n} elements exceeds budget {MAX_ELEMENTS}")
    bounds = np.linspace(0, n, chunks + 1).astype(int)
    parts = [_raw_rows(seed, d, lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
    samples = np.vstack(parts)
    samples.setflags(write=False)
    return GaussianSampleSet(dim=int(d), n=int(n), seed=int(seed), samples=samples)


def tree_sum(values: np.ndarray) -> float:
    """Pairwise tree reduction with fixed fold order.

    Adjacent pairs are folded repeatedly, so the result depends only on the
    element order, never on chunking or thread count.
    """
    x = np.asarray(values, dtype=float).ravel().copy()
    while x.size > 1:
        head = x[: x.size & ~1]
        tail = x[x.size & ~1:]
        x = np.concatenate([head[0::2] + head[1::2], tail])
    return float(x[0]) if x.size else 0.0


@dataclass(frozen=True)
class MCEstimate:
    """Monte-Carlo mean with its standard error."""

    value: float
    stderr: float
    n: int

    def __iter__(self):  # convenient unpacking: value, stderr
        yield self.value
        yield self.stderr


def mc_estimate(values: np.ndarray) -> MCEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = tree_sum(values) / n
    if n > 1:
        var = tree_sum((values - mean) ** 2) / (n - 1)
    else:
        var = 0.0
    return MCEstimate(value=mean, stderr=float(np.sqrt(var / n)), n=n)


def _check_dims(body, s: GaussianSampleSet):
    if body.dim != s.dim:
        raise ValueError(f"body dimension {body.dim} != sample dimension {s.dim}")


def est_width(body, s: GaussianSampleSet) -> MCEstimate:
    """Gaussian width estimate: mean of the support function over the samples."""
    _check_dims(body, s)
    return mc_estimate(body.support(s.samples))


def est_local_width(body, r: float, s: GaussianSampleSet) -> MCEstimate:
    """Width of the ball-localized body at radius r on the common samples.

    r = 0 returns exactly zero; r >= rad(T) evaluates the plain support so
    the estimate coincides exactly with est_width on the same set.
    """
    _check_dims(body, s)
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return MCEstimate(value=0.0, stderr=0.0, n=s.n)
    return mc_estimate(body.local_support(r, s.samples))


def penalized_values(body, sigma: float, s: GaussianSampleSet) -> np.ndarray:
    """Per-sample penalized supremum sup_t {<t, g> - ||t||^2/(2 sigma)}.

    Evaluated through the projection identity: the maximizer is the metric
    projection of sigma*g, so the value equals
    (sigma/2)||g||^2 - dist(sigma g, T)^2 / (2 sigma).
    """
    _check_dims(body, s)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    g = s.samples
    y = sigma * g
    t = body.project(y)
    dist2 = ((y - t) ** 2).sum(axis=1)
    return 0.5 * sigma * (g * g).sum(axis=1) - dist2 / (2.0 * sigma)


def penalized_width(body, sigma: float, s: GaussianSampleSet) -> MCEstimate:
    return mc_estimate(penalized_values(body, sigma, s))


def proj_second_moment(body, sigma: float, s: GaussianSampleSet) -> MCEstimate:
    """E ||Pi_T(sigma g)||^2 on the common samples.

    Rescaling note: E ||Pi_{T/nu}(g)||^2 = E ||Pi_T(nu g)||^2 / nu^2.
    """
    _check_dims(body, s)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    t = body.project(sigma * s.samples)
    return mc_estimate((t * t).sum(axis=1))
