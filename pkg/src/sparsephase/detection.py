"""Adaptive Bonferroni tests of ``theta = 0`` against sparse alternatives.

Two procedures:

* :func:`test_known_variance` scans projections ``||Pi_m Y||^2`` against
  chi-square quantiles, plus a global ``||Y||^2`` statistic;
* :func:`test_unknown_variance` scans Fisher statistics against Fisher
  quantiles and needs no noise level.

Both enumerate every support of each size exactly, so they are only
practical for small ``p``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from sparsephase._subsets import DEFAULT_BUDGET, check_budget, scan_projections
from sparsephase.design import as_array, project_onto_span, random_hypercube_vector, replicate_rng
from sparsephase.distributions import chi2_upper_quantile, fisher_upper_quantile

__all__ = [
    "TestReport",
    "SeparationEstimate",
    "SaturatedStatistic",
    "kstar_sqrt",
    "fisher_statistic",
    "test_known_variance",
    "test_unknown_variance",
    "known_variance_closure",
    "unknown_variance_closure",
    "estimate_separation_distance",
]

# relative size of ||Y - Pi_m Y||^2 below which the residual counts as zero
SATURATION_RTOL = 1e-12


class SaturatedStatistic(ArithmeticError):
    """The residual of the fit is zero, so the Fisher statistic is infinite."""


@dataclass
class TestReport:
    """Outcome of one adaptive test.

    ``statistics`` holds one ``(k, value, threshold)`` row per scanned
    dimension; for the unknown-variance test ``value`` is the Fisher
    statistic of the support with the largest margin and ``threshold`` its
    own quantile. The global statistic of the known-variance test is stored
    with ``k = n``. ``levels`` lists the level of every sub-test in the
    procedure, including dimensions left out by ``k_max``.
    """

    __test__ = False  # not a pytest class

    procedure: str
    alpha: float
    reject: bool
    statistics: list = field(default_factory=list)
    winning_k: int | None = None
    winning_support: tuple | None = None
    kstar: int = 0
    levels: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @property
    def sup_statistic(self) -> float:
        if not self.statistics:
            return -math.inf
        return max(v - t for _, v, t in self.statistics)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "statistic", "threshold", "margin"])
        for k, v, t in self.statistics:
            w.writerow([k, repr(float(v)), repr(float(t)), repr(float(v - t))])
        support = "" if self.winning_support is None else ";".join(map(str, self.winning_support))
        buf.write(f"# verdict={'reject' if self.reject else 'accept'},procedure={self.procedure},"
                  f"alpha={self.alpha!r},winning_k={self.winning_k or ''},support={support}\n")
        return buf.getvalue()


@dataclass
class SeparationEstimate:
    rho_hat: float
    target_power: float
    alpha: float
    replicates: int
    bracket: tuple
    design_descriptor: str
    trace: list = field(default_factory=list)


def kstar_sqrt(n: int, p: int) -> int:
    """Smallest ``k >= 1`` with ``k (1 + log(p / k)) >= sqrt(n)``, or ``p + 1`` if none is ``<= p``."""
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    target = math.sqrt(n)
    for k in range(1, p + 1):
        if k * (1.0 + math.log(p / k)) >= target:
            return k
    return p + 1


def fisher_statistic(Y, X, m) -> float:
    """``(n - d) ||Pi_m Y||^2 / (d ||Y - Pi_m Y||^2)`` with ``d`` the rank of ``X_m``.

    Raises :class:`SaturatedStatistic` when the residual vanishes.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n = A.shape[0]
    if not np.any(Y):
        raise ValueError("Y is identically zero; the Fisher statistic is undefined")
    proj, d = project_onto_span(A, m, Y)
    if d == 0:
        raise ValueError("sub-design has rank 0; the Fisher statistic is undefined")
    if n - d <= 0:
        raise ValueError(f"need n - d_m > 0, got n={n}, d_m={d}")
    num = float(proj @ proj)
    resid = float(np.sum((Y - proj) ** 2))
    if resid <= SATURATION_RTOL * float(Y @ Y):
        raise SaturatedStatistic("zero residual")
    return (n - d) * num / (d * resid)


def test_known_variance(Y, X, sigma2: float, alpha: float, budget: int = DEFAULT_BUDGET) -> TestReport:
    """Bonferroni combination of subset chi-square tests with the global test, known noise level.

    Each ``k < k*`` is tested at level ``alpha / (2 k*)`` (spread over its
    ``C(p, k)`` supports) and the global statistic at ``alpha / 2``.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    kstar = kstar_sqrt(n, p)
    ks = [k for k in range(1, kstar) if k <= p]
    for k in ks:
        check_budget(p, k, budget)

    sub_level = alpha / (2 * kstar)
    levels = [sub_level] * (kstar - 1) + [alpha / 2]
    gram, xty = A.T @ A, A.T @ Y
    rows, best = [], (-math.inf, None, None)
    for k in ks:
        top, arg = -math.inf, None
        for idx, proj2, _ in scan_projections(A, Y, k, gram, xty):
            i = int(np.argmax(proj2))
            if proj2[i] > top:
                top, arg = float(proj2[i]), idx[i]
        thr = sigma2 * chi2_upper_quantile(k, sub_level / math.comb(p, k))
        rows.append((k, top, thr))
        if top - thr > best[0]:
            best = (top - thr, k, tuple(int(j) + 1 for j in arg))
    total = float(Y @ Y)
    thr = sigma2 * chi2_upper_quantile(n, alpha / 2)
    rows.append((n, total, thr))
    if total - thr > best[0]:
        best = (total - thr, n, None)
    reject = best[0] > 0
    return TestReport("KnownVarianceStar", alpha, reject, rows,
                      best[1] if reject else None, best[2] if reject else None, kstar, levels)


def test_unknown_variance(Y, X, alpha: float, budget: int = DEFAULT_BUDGET, k_max: int | None = None) -> TestReport:
    """Bonferroni combination of Fisher tests over all supports of size ``1..floor(n/2)``.

    Every dimension gets level ``alpha / floor(n/2)``. ``k_max`` restricts
    the scan to smaller supports; the per-dimension levels are unchanged, so
    the restricted test is never more liberal than the full one.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    if n < 2:
        raise ValueError("need n >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    half = n // 2
    top_k = min(half, p) if k_max is None else min(k_max, half, p)
    for k in range(1, top_k + 1):
        check_budget(p, k, budget)

    sub_level = alpha / half
    levels = [sub_level] * half
    yy = float(Y @ Y)
    gram, xty = A.T @ A, A.T @ Y
    rows, best = [], (-math.inf, None, None)
    for k in range(1, top_k + 1):
        level = sub_level / math.comb(p, k)
        # quantile per rank of X_m; rank 0 supports never reject
        qtab = np.full(k + 1, math.inf)
        top = (-math.inf, None, None, None)
        for idx, proj2, rank in scan_projections(A, Y, k, gram, xty):
            for d in np.unique(rank):
                if d > 0 and qtab[d] == math.inf:
                    qtab[d] = fisher_upper_quantile(int(d), n - int(d), level)
            resid = np.maximum(yy - proj2, 0.0)
            thr = qtab[rank]
            with np.errstate(divide="ignore", invalid="ignore"):
                phi = (n - rank) * proj2 / (rank * resid)
            phi = np.where((resid <= SATURATION_RTOL * yy) & (proj2 > 0), math.inf, phi)
            phi = np.where((rank > 0) & ~np.isnan(phi), phi, -math.inf)
            margin = phi - thr
            i = int(np.argmax(margin))
            if margin[i] > top[0]:
                top = (float(margin[i]), float(phi[i]), float(thr[i]), idx[i])
        rows.append((k, top[1], top[2]))
        if top[0] > best[0]:
            best = (top[0], k, tuple(int(j) + 1 for j in top[3]))
    reject = best[0] > 0
    return TestReport("UnknownVarianceFisher", alpha, reject, rows,
                      best[1] if reject else None, best[2] if reject else None, half, levels)


def known_variance_closure(alpha: float, budget: int = DEFAULT_BUDGET) -> Callable:
    def run(Y, X, sigma2):
        return test_known_variance(Y, X, sigma2, alpha, budget).reject
    run.alpha = alpha
    return run


def unknown_variance_closure(alpha: float, budget: int = DEFAULT_BUDGET, k_max: int | None = None) -> Callable:
    def run(Y, X, sigma2):
        return test_unknown_variance(Y, X, alpha, budget, k_max).reject
    run.alpha = alpha
    return run


def estimate_separation_distance(test_closure: Callable, X, k: int, alpha: float, delta: float,
                                 replicates: int = 200, rng_seed: int = 0, sigma: float = 1.0,
                                 cap: float = 32.0, iterations: int = 20) -> SeparationEstimate:
    """Smallest signal scale ``rho`` at which the test reaches power ``1 - delta``.

    Alternatives are drawn uniformly from the hypercube set of ``k``-sparse
    vectors and rescaled so that ``||X theta|| / sqrt(n) = rho * sigma``.
    The same supports and noise vectors are reused for every candidate
    ``rho``; the search bisects ``[0, cap]``.
    """
    A = as_array(X)
    n, p = A.shape
    if replicates < 100:
        raise ValueError("need at least 100 replicates")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    target = 1.0 - delta
    directions, noises = [], []
    for r in range(replicates):
        rng = replicate_rng(rng_seed, r)
        theta = random_hypercube_vector(k, p, 1.0, rng).to_dense()
        v = A @ theta
        norm = np.linalg.norm(v)
        directions.append(v / norm if norm > 0 else v)
        noises.append(rng.standard_normal(n))
    sigma2 = sigma * sigma
    scale = math.sqrt(n) * sigma

    def power(rho):
        hits = sum(bool(test_closure(rho * scale * a + sigma * e, A, sigma2)) for a, e in zip(directions, noises))
        return hits / replicates

    trace = []
    top = power(cap)
    trace.append((cap, top))
    if top < target:
        raise ValueError(f"power {top:.3f} at the bracket cap rho={cap} stays below {target:.3f}")
    lo, hi = 0.0, cap
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        pw = power(mid)
        trace.append((mid, pw))
        if pw >= target:
            hi = mid
        else:
            lo = mid
    descriptor = f"n={n},p={p},kind={getattr(X, 'kind', 'fixed')}"
    return SeparationEstimate(0.5 * (lo + hi), target, getattr(test_closure, "alpha", alpha),
                              replicates, (lo, hi), descriptor, sorted(trace))
