"""Exhaustive enumeration of supports and batched projection norms."""

from __future__ import annotations

import math
from itertools import combinations, islice

import numpy as np

DEFAULT_BUDGET = 10**6
RANK_RTOL = 1e-12
# X_m with condition number above ~1e3 is re-done by SVD instead of the Gram route
_GRAM_COND2 = 1e-6
_CHUNK = 1 << 15


class BudgetExceededError(ValueError):
    """Raised when an exhaustive enumeration would exceed the subset budget."""

    def __init__(self, p: int, k: int, count: int, budget: int):
        self.p, self.k, self.count, self.budget = p, k, count, budget
        super().__init__(f"C({p},{k}) = {count} supports exceeds the enumeration budget {budget} (k={k})")


def check_budget(p: int, k: int, budget: int = DEFAULT_BUDGET) -> int:
    count = math.comb(p, k)
    if budget is not None and count > budget:
        raise BudgetExceededError(p, k, count, budget)
    return count


def support_chunks(p: int, k: int, chunk: int = _CHUNK):
    """Yield all size-``k`` supports of ``range(p)`` in lexicographic order, as (M, k) blocks."""
    it = combinations(range(p), k)
    while True:
        block = np.fromiter((j for m in islice(it, chunk) for j in m), dtype=np.intp)
        if block.size == 0:
            return
        yield block.reshape(-1, k)


def scan_projections(X: np.ndarray, Y: np.ndarray, k: int, gram=None, xty=None):
    """Yield ``(supports, proj2, rank)`` blocks over all size-``k`` supports.

    ``proj2[i]`` is the squared norm of the projection of ``Y`` onto the
    span of ``X[:, supports[i]]`` and ``rank[i]`` the numerical rank of that
    sub-design (singular values below ``s_max * n * 1e-12`` are zero).
    Well-conditioned supports go through the k x k Gram matrices; the rest
    are recomputed with an SVD of the sub-design.
    """
    n, p = X.shape
    if gram is None:
        gram = X.T @ X
    if xty is None:
        xty = X.T @ Y
    for idx in support_chunks(p, k):
        G = gram[idx[:, :, None], idx[:, None, :]]
        b = xty[idx]
        lam, V = np.linalg.eigh(G)
        lam_max = lam[:, -1]
        coords = np.einsum("mij,mi->mj", V, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            proj2 = np.sum(coords**2 / lam, axis=1)
        rank = np.full(len(idx), k, dtype=np.intp)
        bad = ~(lam[:, 0] > _GRAM_COND2 * lam_max)
        if bad.any():
            rows = np.flatnonzero(bad)
            sub = X[:, idx[rows]].transpose(1, 0, 2)  # (M', n, k)
            U, s, _ = np.linalg.svd(sub, full_matrices=False)
            smax = s[:, :1]
            keep = (s > smax * n * RANK_RTOL) & (smax > 0)
            c = np.einsum("mni,n->mi", U, Y)
            proj2[rows] = np.sum(np.where(keep, c**2, 0.0), axis=1)
            rank[rows] = keep.sum(axis=1)
        yield idx, proj2, rank
