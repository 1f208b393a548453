"""Designs, sparse coefficient vectors and geometric quantities of a design.

Indices exposed to users are 1-based (covariates are numbered 1..p);
arrays are stored 0-based internally.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from sparsephase._subsets import DEFAULT_BUDGET, RANK_RTOL, check_budget, support_chunks

__all__ = [
    "DesignMatrix",
    "SparseVector",
    "RestrictedSpectrum",
    "generate_gaussian_design",
    "normalize_columns",
    "restricted_eigenvalues",
    "project_onto_span",
    "numerical_rank",
    "hypercube_vectors",
    "make_theta_experiment",
    "replicate_rng",
    "design_to_csv",
    "design_from_csv",
]

PSD_TOL = 1e-10
NORM_RTOL = 1e-9


def replicate_rng(seed: int, replicate: int = 0) -> np.random.Generator:
    """Independent, reproducible stream keyed by ``(seed, replicate)``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(replicate,)))


@dataclass(frozen=True)
class DesignMatrix:
    """An ``n x p`` design.

    ``kind`` is ``"fixed"`` or ``"gaussian"``; a Gaussian design carries its
    row covariance ``sigma``. ``normalized`` is true iff every column has
    Euclidean norm ``sqrt(n)``.
    """

    entries: np.ndarray
    kind: str = "fixed"
    sigma: np.ndarray | None = field(default=None, repr=False)
    normalized: bool = False

    def __post_init__(self):
        X = np.array(self.entries, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"design must be a non-empty 2-d array, got shape {X.shape}")
        X.setflags(write=False)
        object.__setattr__(self, "entries", X)
        if self.kind not in ("fixed", "gaussian"):
            raise ValueError(f"unknown design kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.sigma is None:
                raise ValueError("a Gaussian design needs its covariance")
            cov = _check_covariance(self.sigma, X.shape[1])
            cov.setflags(write=False)
            object.__setattr__(self, "sigma", cov)
        if self.normalized:
            norms = np.linalg.norm(X, axis=0)
            target = math.sqrt(X.shape[0])
            if not np.allclose(norms, target, rtol=NORM_RTOL, atol=0.0):
                raise ValueError("design flagged normalized but columns do not have norm sqrt(n)")

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def p(self) -> int:
        return self.entries.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


def as_array(X) -> np.ndarray:
    if isinstance(X, DesignMatrix):
        return X.entries
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"design must be 2-d, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class SparseVector:
    """A vector of ``R^p`` stored through its support (1-based, increasing)."""

    p: int
    support: tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        support = tuple(int(j) for j in self.support)
        values = np.atleast_1d(np.asarray(self.values, dtype=float)).copy()
        if self.p < 1:
            raise ValueError("dimension p must be >= 1")
        if len(support) != values.size:
            raise ValueError("support and values differ in length")
        if any(b <= a for a, b in zip(support, support[1:])):
            raise ValueError("support indices must be strictly increasing")
        if support and (support[0] < 1 or support[-1] > self.p):
            raise ValueError(f"support indices must lie in 1..{self.p}")
        values.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return len(self.support)

    def to_dense(self) -> np.ndarray:
        theta = np.zeros(self.p)
        if self.support:
            theta[np.asarray(self.support) - 1] = self.values
        return theta

    @classmethod
    def from_dense(cls, theta, atol: float = 0.0) -> "SparseVector":
        theta = np.asarray(theta, dtype=float).ravel()
        idx = np.flatnonzero(np.abs(theta) > atol)
        return cls(theta.size, tuple(idx + 1), theta[idx])


@dataclass(frozen=True)
class RestrictedSpectrum:
    k: int
    phi_minus: float
    phi_plus: float
    subsets_examined: int


def _check_covariance(sigma, p: int) -> np.ndarray:
    cov = np.array(sigma, dtype=float)
    if cov.shape != (p, p):
        raise ValueError(f"covariance must be {p}x{p}, got {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=PSD_TOL * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance is not symmetric")
    return cov


def _psd_factor(cov: np.ndarray) -> np.ndarray:
    """Square-root factor ``L`` with ``L @ L.T == cov``; raises if not PSD."""
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    # Singular PSD matrices have no Cholesky factor; fall back to eigh.
    lam, V = np.linalg.eigh(cov)
    scale = max(1.0, float(np.abs(lam).max()))
    if lam.min() < -PSD_TOL * scale:
        raise ValueError(f"covariance is not positive semi-definite (min eigenvalue {lam.min():.3g})")
    return V * np.sqrt(np.clip(lam, 0.0, None))


def generate_gaussian_design(n: int, p: int, sigma=None, rng_seed=None) -> DesignMatrix:
    """Draw ``n`` i.i.d. rows from ``N(0, sigma)``.

    ``sigma=None`` means the identity. ``rng_seed`` may be an integer or a
    ``numpy.random.Generator``.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    if sigma is None:
        cov = np.eye(p)
        X = rng.standard_normal((n, p))
    else:
        cov = _check_covariance(sigma, p)
        L = _psd_factor(cov)
        X = rng.standard_normal((n, p)) @ L.T
    return DesignMatrix(X, kind="gaussian", sigma=cov)


def normalize_columns(X) -> DesignMatrix:
    """Rescale every column to Euclidean norm ``sqrt(n)``."""
    A = as_array(X)
    norms = np.linalg.norm(A, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise ValueError(f"column {zero[0] + 1} is identically zero and cannot be normalized")
    Z = A * (math.sqrt(A.shape[0]) / norms)
    if isinstance(X, DesignMatrix):
        return DesignMatrix(Z, kind=X.kind, sigma=X.sigma, normalized=True)
    return DesignMatrix(Z, normalized=True)


def restricted_eigenvalues(X, k: int, budget: int = DEFAULT_BUDGET) -> RestrictedSpectrum:
    """Largest and smallest eigenvalue of ``X_m^T X_m`` over all supports of size ``k``.

    Exhaustive over the ``C(p, k)`` supports. If every size-``k`` sub-design
    is zero both values are 0.
    """
    A = as_array(X)
    p = A.shape[1]
    if not 1 <= k <= p:
        raise ValueError(f"k must satisfy 1 <= k <= p={p}, got {k}")
    total = check_budget(p, k, budget)
    gram = A.T @ A
    lo, hi = math.inf, -math.inf
    for idx in support_chunks(p, k):
        G = gram[idx[:, :, None], idx[:, None, :]]
        lam = np.linalg.eigvalsh(G)
        lo = min(lo, float(lam[:, 0].min()))
        hi = max(hi, float(lam[:, -1].max()))
    # roundoff can push a singular Gram slightly below zero
    lo = max(lo, 0.0)
    hi = max(hi, lo)
    return RestrictedSpectrum(k=k, phi_minus=lo, phi_plus=hi, subsets_examined=total)


def _to_zero_based(m: Iterable[int], p: int) -> np.ndarray:
    idx = np.asarray(sorted(set(int(j) for j in m)), dtype=np.intp)
    if idx.size == 0:
        raise ValueError("index set m must be nonempty")
    if idx[0] < 1 or idx[-1] > p:
        raise ValueError(f"indices must lie in 1..{p}")
    return idx - 1


def numerical_rank(singular_values: np.ndarray, n: int) -> int:
    s = np.asarray(singular_values)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * n * RANK_RTOL))


def project_onto_span(X, m: Sequence[int], Y) -> tuple[np.ndarray, int]:
    """Orthogonal projection of ``Y`` onto the span of the columns ``m`` (1-based).

    Returns the projection and the numerical rank of ``X_m``.
    """
    A = as_array(X)
    idx = _to_zero_based(m, A.shape[1])
    U, s, _ = np.linalg.svd(A[:, idx], full_matrices=False)
    d = numerical_rank(s, A.shape[0])
    Ud = U[:, :d]
    Y = np.asarray(Y, dtype=float)
    return Ud @ (Ud.T @ Y), d


def hypercube_vectors(k: int, p: int, rho: float, budget: int = DEFAULT_BUDGET) -> list[SparseVector]:
    """All vectors with exactly ``k`` nonzero entries, each equal to ``rho/sqrt(k)``."""
    if not 1 <= k <= p:
        raise ValueError(f"k must satisfy 1 <= k <= p={p}, got {k}")
    if rho <= 0:
        raise ValueError("rho must be positive")
    check_budget(p, k, budget)
    value = rho / math.sqrt(k)
    vals = np.full(k, value)
    return [SparseVector(p, tuple(j + 1 for j in m), vals) for m in combinations(range(p), k)]


def random_hypercube_vector(k: int, p: int, rho: float, rng: np.random.Generator) -> SparseVector:
    """One uniform draw from the hypercube set, without enumerating it."""
    support = np.sort(rng.choice(p, size=k, replace=False)) + 1
    return SparseVector(p, tuple(support), np.full(k, rho / math.sqrt(k)))


def make_theta_experiment(k: int, p: int, u: float, n: int) -> SparseVector:
    """First ``k`` coordinates equal to ``u * sqrt(log(p) / n)``, the rest zero."""
    if not 1 <= k <= p:
        raise ValueError(f"k must satisfy 1 <= k <= p={p}, got {k}")
    if u <= 0 or n < 1:
        raise ValueError("need u > 0 and n >= 1")
    amp = u * math.sqrt(math.log(p) / n)
    return SparseVector(p, tuple(range(1, k + 1)), np.full(k, amp))


def design_to_csv(X, path=None) -> str:
    """Row-major CSV with an ``# n=..,p=..,normalized=..`` first line."""
    A = as_array(X)
    normalized = bool(getattr(X, "normalized", False))
    buf = io.StringIO()
    buf.write(f"# n={A.shape[0]},p={A.shape[1]},normalized={str(normalized).lower()}\n")
    np.savetxt(buf, A, delimiter=",", fmt="%.17g")
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


def design_from_csv(source) -> DesignMatrix:
    """Inverse of :func:`design_to_csv`; ``source`` is a path or the CSV text."""
    if isinstance(source, str) and "\n" in source:
        text = source
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()
    header, _, body = text.partition("\n")
    if not header.startswith("#"):
        raise ValueError("missing '# n=..,p=..,normalized=..' header line")
    meta = dict(item.split("=") for item in header.lstrip("# ").strip().split(","))
    n, p = int(meta["n"]), int(meta["p"])
    A = np.loadtxt(io.StringIO(body), delimiter=",", ndmin=2)
    if A.shape != (n, p):
        raise ValueError(f"header announces {n}x{p} but body is {A.shape[0]}x{A.shape[1]}")
    return DesignMatrix(A, normalized=meta["normalized"] == "true")
