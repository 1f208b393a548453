"""Dimension reduction by marginal screening (SIS) and by the Lasso path (LARS).

Both reduce ``p`` covariates to a set of ``p0`` candidates; the power of a
reduction is the fraction of the true support it keeps.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from sparsephase.design import as_array

__all__ = [
    "ScreeningResult",
    "LarsPath",
    "PowerCurve",
    "sis_screen",
    "lars_path",
    "lasso_screen",
    "power_metric",
]


@dataclass
class ScreeningResult:
    method: str
    selected: tuple
    scores: np.ndarray
    p0: int
    padded: bool = False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "rank", "index", "score"])
        for r, j in enumerate(self.selected, start=1):
            w.writerow([self.method, r, j, repr(float(self.scores[j - 1]))])
        return buf.getvalue()


@dataclass
class LarsPath:
    """Covariates (1-based) in order of first entry into the active set.

    ``entry_corr`` is the common absolute correlation ``|X_j^T r|`` at each
    entry. ``singular`` is set when the active Gram matrix became
    numerically singular and the path stopped early.
    """

    entries: list
    entry_corr: list
    steps: int
    drops: int = 0
    singular: bool = False
    residual_corr: np.ndarray | None = field(default=None, repr=False)


@dataclass
class PowerCurve:
    method: str
    k_values: list
    power: list
    stderr: list
    replicates: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(not 0.0 <= v <= 1.0 for v in self.power):
            raise ValueError("power values must lie in [0, 1]")
        if any(s < 0 for s in self.stderr):
            raise ValueError("standard errors must be nonnegative")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "power", "stderr", "replicates"])
        for k, pw, se in zip(self.k_values, self.power, self.stderr):
            w.writerow([k, f"{pw:.6f}", f"{se:.6f}", self.replicates])
        return buf.getvalue()


def power_metric(selected, true_support) -> float:
    """``|selected & true_support| / |true_support|``."""
    truth = set(int(j) for j in true_support)
    if not truth:
        raise ValueError("true support must be nonempty")
    return len(truth.intersection(int(j) for j in selected)) / len(truth)


def _top(scores: np.ndarray, p0: int, last=None) -> np.ndarray:
    """Indices of the ``p0`` largest scores, ties to the lowest index."""
    key = -scores.astype(float)
    if last is not None:
        key = np.where(last, np.inf, key)
    return np.argsort(key, kind="stable")[:p0]


def sis_screen(Y, X, p0: int, center: bool = False) -> ScreeningResult:
    """Keep the ``p0`` covariates with the largest absolute correlation with ``Y``.

    Columns are standardized to a common norm before ranking; they are not
    centered unless ``center`` is set. Columns with zero variance get score
    0 and are ranked last.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    if not 1 <= p0 <= p:
        raise ValueError(f"p0 must satisfy 1 <= p0 <= p={p}, got {p0}")
    if center:
        A = A - A.mean(axis=0)
    norms = np.linalg.norm(A, axis=0)
    dead = norms <= 1e-12 * max(1.0, float(norms.max()))
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(dead, 0.0, np.abs(A.T @ Y) * math.sqrt(n) / norms)
    top = _top(scores, p0, last=dead)
    return ScreeningResult("SIS", tuple(int(j) + 1 for j in top), scores, p0)


def lars_path(Y, X, max_steps: int | None = None, max_entries: int | None = None,
              until=None, cond_limit: float = 1e12) -> LarsPath:
    """Lasso regularization path computed by LARS with the lasso modification.

    A step ends when a covariate joins the active set or, under the lasso
    modification, when an active coefficient hits zero and the covariate
    leaves it; a covariate that re-enters keeps its first entry position.
    The first covariate enters for free; at most ``max_steps`` further
    steps are taken (default ``min(n - 1, p)``). The path also stops once
    ``max_entries`` distinct covariates have entered, or once every
    covariate of ``until`` (1-based) has entered.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    if max_steps is None:
        max_steps = min(n - 1, p)

    c = A.T @ Y
    scale = float(np.abs(c).max()) if p else 0.0
    entries, entry_corr = [], []
    res = LarsPath(entries, entry_corr, 0, residual_corr=c)
    if scale <= 0.0 or (max_entries is not None and max_entries <= 0):
        return res
    tiny = 1e-12 * scale

    beta = np.zeros(p)
    active: list[int] = []
    signs: list[float] = []
    seen = np.zeros(p, dtype=bool)
    in_active = np.zeros(p, dtype=bool)

    pending = set() if until is None else {int(j) - 1 for j in until}

    def enter(j):
        active.append(j)
        signs.append(1.0 if c[j] > 0 else -1.0)
        in_active[j] = True
        if not seen[j]:
            seen[j] = True
            entries.append(j + 1)
            entry_corr.append(float(abs(c[j])))
            pending.discard(j)

    enter(int(np.argmax(np.abs(c))))
    banned = -1  # a covariate that just left may not rejoin at the same knot
    while res.steps < max_steps:
        if max_entries is not None and len(entries) >= max_entries:
            break
        if until is not None and not pending:
            break
        C = float(np.abs(c[active]).max())
        if C <= tiny:
            break
        XA = A[:, active]
        G = XA.T @ XA
        s = np.asarray(signs)
        try:
            if np.linalg.cond(G) > cond_limit:
                raise np.linalg.LinAlgError
            wt = np.linalg.solve(G, s)
        except np.linalg.LinAlgError:
            res.singular = True
            break
        AA = 1.0 / math.sqrt(float(s @ wt))
        w = AA * wt
        a = A.T @ (XA @ w)

        # next join
        gamma, join = C / AA, -1
        free = ~in_active
        if banned >= 0:
            free[banned] = False
        if free.any():
            cf, af = c[free], a[free]
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = (C - cf) / (AA - af)
                g2 = (C + cf) / (AA + af)
            g1 = np.where(g1 > tiny / AA, g1, np.inf)
            g2 = np.where(g2 > tiny / AA, g2, np.inf)
            g = np.minimum(g1, g2)
            i = int(np.argmin(g))
            if g[i] < gamma:
                gamma, join = float(g[i]), int(np.flatnonzero(free)[i])

        # next drop (coefficient crossing zero)
        drop = -1
        bA = beta[active]
        with np.errstate(divide="ignore", invalid="ignore"):
            z = -bA / w
        z = np.where(z > 1e-15 * max(1.0, gamma), z, np.inf)
        if z.size and z.min() < gamma:
            drop = int(np.argmin(z))
            gamma, join = float(z[drop]), -1

        beta[active] += gamma * w
        c = c - gamma * a
        res.steps += 1
        banned = -1
        if drop >= 0:
            j = active.pop(drop)
            signs.pop(drop)
            beta[j] = 0.0
            in_active[j] = False
            banned = j
            res.drops += 1
        elif join >= 0:
            enter(join)
        else:
            break  # reached the least-squares fit on the active set
        if len(active) >= n:
            break  # the next step interpolates Y; no later entry is meaningful
    res.residual_corr = c
    return res


def lasso_screen(Y, X, p0: int, max_steps: int | None = None, until=None) -> ScreeningResult:
    """Keep the first ``p0`` covariates to enter the Lasso path.

    Columns are normalized to norm ``sqrt(n)`` first. If the path ends with
    fewer than ``p0`` entries, the rest are filled by descending absolute
    residual correlation at the end of the path and ``padded`` is set.
    With ``until``, the path may stop as soon as those covariates have all
    entered; the selection then keeps every one of them but is otherwise
    only a prefix padded by residual correlation.
    """
    A = as_array(X)
    Y = np.asarray(Y, dtype=float)
    n, p = A.shape
    if not 1 <= p0 <= p:
        raise ValueError(f"p0 must satisfy 1 <= p0 <= p={p}, got {p0}")
    norms = np.linalg.norm(A, axis=0)
    dead = norms == 0.0
    Z = A * np.where(dead, 0.0, math.sqrt(n) / np.where(dead, 1.0, norms))
    path = lars_path(Y, Z, max_steps=max_steps, max_entries=p0, until=until)
    selected = list(path.entries[:p0])
    scores = np.full(p, np.nan)
    for r, j in enumerate(path.entries, start=1):
        scores[j - 1] = r
    padded = False
    if len(selected) < p0:
        padded = True
        rest = np.abs(path.residual_corr).astype(float)
        taken = np.zeros(p, dtype=bool)
        taken[np.asarray(selected, dtype=np.intp) - 1] = True
        order = _top(np.where(taken, -np.inf, rest), p, last=taken | dead)
        selected += [int(j) + 1 for j in order if not taken[j]][: p0 - len(selected)]
    return ScreeningResult("LassoPath", tuple(selected), scores, p0, padded)
