"""Exhaustive k-sparse least squares and the two penalized size selectors."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from sparsephase._subsets import DEFAULT_BUDGET, check_budget, scan_projections
from sparsephase.design import SparseVector, as_array

__all__ = [
    "SelectionResult",
    "best_subset_ls",
    "full_ls",
    "pen_v",
    "pen_bm",
    "kstar_n",
    "select_v",
    "select_bm",
    "greedy_forward_supports",
]

DEFAULT_K = 3.0
# ||Y - X theta||^2 below this fraction of ||Y||^2 counts as an exact fit
ZERO_RSS_RTOL = 1e-20


@dataclass
class SelectionResult:
    selector: str
    selected_k: int
    theta_hat: SparseVector
    rss_path: list = field(default_factory=list)
    criterion_path: list = field(default_factory=list)

    @property
    def rss(self) -> float:
        return dict(self.rss_path)[self.selected_k]

    @property
    def criterion(self) -> float:
        return dict(self.criterion_path)[self.selected_k]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["selector", "selected_k", "support", "rss", "criterion"])
        w.writerow([self.selector, self.selected_k, ";".join(map(str, self.theta_hat.support)),
                    repr(float(self.rss)), repr(float(self.criterion))])
        return buf.getvalue()


def _fit_support(A: np.ndarray, Y: np.ndarray, idx) -> tuple[np.ndarray, float]:
    """Minimum-norm least squares on the columns ``idx`` (0-based)."""
    sub = A[:, idx]
    coef, *_ = np.linalg.lstsq(sub, Y, rcond=None)
    resid = Y - sub @ coef
    return coef, float(resid @ resid)


def best_subset_ls(Y, X, k: int, budget: int = DEFAULT_BUDGET, gram=None, xty=None) -> tuple[SparseVector, float]:
    """Least squares over all supports of size ``k``; ties go to the lexicographically first support."""
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    if not 1 <= k <= min(n, p):
        raise ValueError(f"k must satisfy 1 <= k <= min(n, p) = {min(n, p)}, got {k}")
    check_budget(p, k, budget)
    top, arg = -math.inf, None
    for idx, proj2, _ in scan_projections(A, Y, k, gram, xty):
        i = int(np.argmax(proj2))
        if proj2[i] > top:
            top, arg = proj2[i], idx[i]
    coef, rss = _fit_support(A, Y, arg)
    theta = SparseVector(p, tuple(int(j) + 1 for j in arg), coef)
    return theta, rss


def full_ls(Y, X) -> tuple[np.ndarray, float]:
    """Minimum-norm least squares over all of ``R^p``."""
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    theta, *_ = np.linalg.lstsq(A, Y, rcond=None)
    resid = Y - A @ theta
    return theta, float(resid @ resid)


def pen_v(k: int, n: int, p: int, K: float = DEFAULT_K) -> float:
    """``K (k / n) log(e p / k)`` for ``1 <= k <= floor((n - 1) / 4)``."""
    if K <= 0:
        raise ValueError("K must be positive")
    if not 1 <= k <= (n - 1) // 4:
        raise ValueError(f"k must lie in 1..floor((n-1)/4) = {(n - 1) // 4}, got {k}")
    return K * k / n * math.log(math.e * p / k)


def kstar_n(n: int, p: int) -> int:
    """Smallest ``k >= 1`` with ``k (1 + log(p / k)) >= n``.

    The left side peaks at ``k = p`` with value ``p``; when ``n > p`` no
    size qualifies and ``p + 1`` is returned.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    for k in range(1, p + 1):
        if k * (1.0 + math.log(p / k)) >= n:
            return k
    return p + 1


def pen_bm(k: int, n: int, p: int) -> float:
    if k == n:
        return 2.0 * n
    return 4.0 * k * (4.0 + math.log(p / k))


def _rss_path(A, Y, ks, budget):
    for k in ks:  # fail before any work
        check_budget(A.shape[1], k, budget)
    gram, xty = A.T @ A, A.T @ Y
    return {k: best_subset_ls(Y, A, k, budget, gram, xty) for k in ks}


def _argmin_first(values: list[tuple[int, float]]) -> int:
    best_k, best_v = values[0]
    for k, v in values[1:]:
        if v < best_v:
            best_k, best_v = k, v
    return best_k


def select_v(Y, X, K: float = DEFAULT_K, budget: int = DEFAULT_BUDGET, k_max: int | None = None) -> SelectionResult:
    """Variance-free selector: minimize ``log(RSS_k) + K (k/n) log(e p / k)``.

    ``k`` ranges over ``1..min(floor((n - 1) / 4), p)``; ``k_max`` may
    shorten the range further. If some ``RSS_k`` is exactly zero the
    smallest such ``k`` is returned.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    top = min((n - 1) // 4, p)
    if top < 1:
        raise ValueError("need n >= 5 for a nonempty range of sizes")
    if k_max is not None:
        if k_max < 1:
            raise ValueError("k_max must be >= 1")
        top = min(top, k_max)
    ks = list(range(1, top + 1))
    fits = _rss_path(A, Y, ks, budget)
    rss_path = [(k, fits[k][1]) for k in ks]
    floor = ZERO_RSS_RTOL * float(Y @ Y)
    zero = [k for k, r in rss_path if r <= floor]
    crit = [(k, (-math.inf if r <= floor else math.log(r)) + pen_v(k, n, p, K)) for k, r in rss_path]
    chosen = zero[0] if zero else _argmin_first(crit)
    return SelectionResult("V", chosen, fits[chosen][0], rss_path, crit)


def select_bm(Y, X, sigma2: float, budget: int = DEFAULT_BUDGET, k_max: int | None = None) -> SelectionResult:
    """Known-variance selector over sizes ``{1..k*} U {n}``.

    Minimizes ``RSS_k + sigma2 * pen(k)`` with ``pen(k) = 4k (4 + log(p/k))``
    for ``k <= k*`` and ``pen(n) = 2n``, the size-``n`` entry being the full
    least-squares fit. Sizes above ``p`` are skipped; ``k_max`` shortens the
    sparse part of the range.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    top = min(kstar_n(n, p), p, n)
    if k_max is not None:
        if k_max < 1:
            raise ValueError("k_max must be >= 1")
        top = min(top, k_max)
    ks = [k for k in range(1, top + 1) if k != n]
    fits = _rss_path(A, Y, ks, budget)
    theta_n, rss_n = full_ls(Y, A)
    rss_path = [(k, fits[k][1]) for k in ks] + [(n, rss_n)]
    crit = [(k, r + sigma2 * pen_bm(k, n, p)) for k, r in rss_path]
    chosen = _argmin_first(crit)
    theta = fits[chosen][0] if chosen in fits else SparseVector.from_dense(theta_n)
    return SelectionResult("BM", chosen, theta, rss_path, crit)


def greedy_forward_supports(Y, X, k_max: int) -> list[tuple[int, ...]]:
    """Nested supports of sizes ``1..k_max`` built by forward selection.

    A cheap surrogate for the exhaustive scans when ``C(p, k)`` is out of
    reach; it carries none of their guarantees.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    chosen: list[int] = []
    out = []
    for _ in range(min(k_max, n, p)):
        best, arg = -math.inf, None
        for j in range(p):
            if j in chosen:
                continue
            sub = A[:, chosen + [j]]
            coef, *_ = np.linalg.lstsq(sub, Y, rcond=None)
            fit = sub @ coef
            val = float(fit @ fit)
            if val > best:
                best, arg = val, j
        chosen.append(arg)
        out.append(tuple(sorted(i + 1 for i in chosen)))
    return out
