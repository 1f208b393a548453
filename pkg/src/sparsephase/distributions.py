"""Chi-square and Fisher quantiles, closed-form deviation thresholds, and a
Monte-Carlo harness checking those thresholds against simulated laws."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

__all__ = [
    "TAIL_BOUNDS",
    "TailBoundReport",
    "chi2_upper_quantile",
    "chi2_survival",
    "fisher_upper_quantile",
    "fisher_survival",
    "chi2_deviation_thresholds",
    "wishart_deviation_thresholds",
    "hypergeom_tail_bound",
    "binomial_upper_tail",
    "verify_tail_bound",
    "reports_to_csv",
]

TAIL_BOUNDS = (
    "Chi2Upper",
    "Chi2Lower",
    "Chi2SmallBall",
    "WishartMax",
    "WishartMin",
    "WishartSmallBall",
    "HypergeomUpper",
)

_MC_CHUNK = 20000


def _check_level(alpha: float, name: str = "alpha") -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {alpha}")


def chi2_survival(u, d):
    """P[chi2(d) > u] through the regularized upper incomplete gamma function."""
    return special.gammaincc(d / 2.0, np.maximum(u, 0.0) / 2.0)


def fisher_survival(u, d1, d2):
    """P[F(d1, d2) > u] through the regularized incomplete beta function."""
    u = np.maximum(u, 0.0)
    return special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * u))


def _invert_survival(sf, alpha: float, guess: float) -> float:
    """Bracketed root of ``sf(u) = alpha`` on ``u >= 0`` (``sf`` decreasing, ``sf(0) = 1``)."""
    hi = guess if np.isfinite(guess) and guess > 0 else 1.0
    lo = 0.0
    while sf(hi) > alpha:
        lo, hi = hi, 2.0 * hi
    while sf(hi / 2.0) <= alpha and lo == 0.0:
        hi /= 2.0
    lo = max(lo, hi / 2.0)
    return optimize.brentq(lambda u: sf(u) - alpha, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)


def chi2_upper_quantile(d: int, alpha: float) -> float:
    """The ``u`` such that ``P[chi2(d) > u] = alpha``."""
    if d < 1:
        raise ValueError("degrees of freedom must be >= 1")
    _check_level(alpha)
    return _invert_survival(lambda u: chi2_survival(u, d), alpha, special.chdtri(d, alpha))


def fisher_upper_quantile(d1: int, d2: int, alpha: float) -> float:
    """The ``u`` such that ``P[F(d1, d2) > u] = alpha``."""
    if d1 < 1 or d2 < 1:
        raise ValueError("degrees of freedom must be >= 1")
    _check_level(alpha)
    return _invert_survival(lambda u: fisher_survival(u, d1, d2), alpha, special.fdtri(d1, d2, 1.0 - alpha))


def chi2_deviation_thresholds(d: int, x: float) -> tuple[float, float, float]:
    """Upper, lower and small-ball thresholds for ``chi2(d)`` at probability ``x``.

    Each of ``P[chi2 >= upper]``, ``P[chi2 <= lower]`` and
    ``P[chi2 <= small_ball]`` is at most ``x``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    _check_level(x, "x")
    t = math.log(1.0 / x)
    upper = d + 2.0 * math.sqrt(d * t) + 2.0 * t
    lower = d - 2.0 * math.sqrt(d * t)
    small_ball = d * math.exp(-1.0) * x ** (2.0 / d)
    return upper, lower, small_ball


def wishart_deviation_thresholds(n: int, d: int, x: float, small_ball: bool = False, C: float = 1.0):
    """Thresholds on the extreme eigenvalues of a standard ``(n, d)`` Wishart matrix.

    Returns ``(max_threshold, min_threshold, small_ball_threshold)``; the last
    entry is ``None`` unless ``small_ball`` is requested, which needs
    ``n >= 4d + 1``. ``C`` is the unspecified numerical constant of the
    small-ball bound.
    """
    if not n > d >= 1:
        raise ValueError(f"need n > d >= 1, got n={n}, d={d}")
    _check_level(x, "x")
    a = math.sqrt(d / n)
    b = math.sqrt(2.0 * math.log(1.0 / x) / n)
    hi = n * (1.0 + a + b) ** 2
    lo = n * max(1.0 - a - b, 0.0) ** 2
    sb = None
    if small_ball:
        if n < 4 * d + 1:
            raise ValueError(f"small-ball threshold needs n >= 4d+1 = {4 * d + 1}, got n={n}")
        sb = n * C * x ** (2.0 / (n - 2 * d)) / max(1.0, math.log(2.0 / x) / n)
    return hi, lo, sb


def hypergeom_tail_bound(k: int, p: int, x: float) -> float:
    """Upper bound on ``P[W/k >= x]`` for ``W ~ Binomial(k, k/p)``."""
    if not 1 <= k <= p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={p}")
    if not 0.0 < x <= 1.0:
        raise ValueError(f"x must lie in (0, 1], got {x}")
    if x == 1.0:
        return (k / p) ** k
    return ((k / (p * x)) ** x * (1.0 - x) ** (-(1.0 - x))) ** k


def binomial_upper_tail(k: int, p: int, x: float) -> float:
    """Exact ``P[W/k >= x]`` for ``W ~ Binomial(k, k/p)`` by summing the pmf."""
    q = k / p
    w0 = math.ceil(k * x - 1e-9)
    return math.fsum(math.comb(k, w) * q**w * (1.0 - q) ** (k - w) for w in range(max(w0, 0), k + 1))


@dataclass
class TailBoundReport:
    bound_name: str
    parameters: dict
    x: float
    threshold: float
    empirical_exceedance: float | None = None
    replicates: int | None = None
    verdict: str = field(default="")

    def __post_init__(self):
        if not 0.0 < self.x <= 1.0:
            raise ValueError("x must lie in (0, 1]")
        if self.empirical_exceedance is not None and not 0.0 <= self.empirical_exceedance <= 1.0:
            raise ValueError("empirical exceedance must lie in [0, 1]")

    @property
    def passed(self) -> bool:
        return self.verdict == "PASS"

    def as_row(self) -> list:
        params = ";".join(f"{k}={v}" for k, v in self.parameters.items())
        emp = "" if self.empirical_exceedance is None else repr(float(self.empirical_exceedance))
        return [self.bound_name, params, repr(float(self.x)), repr(float(self.threshold)), emp,
                "" if self.replicates is None else self.replicates, self.verdict]


REPORT_HEADER = ["bound_name", "parameters", "x", "threshold", "empirical_exceedance", "replicates", "verdict"]


def reports_to_csv(reports, path=None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for r in reports:
        w.writerow(r.as_row())
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _wishart_extremes(n: int, d: int, size: int, rng: np.random.Generator):
    """Smallest and largest eigenvalue of ``size`` standard Wishart(n, d) draws (Bartlett)."""
    A = np.zeros((size, d, d))
    rows, cols = np.tril_indices(d, -1)
    A[:, rows, cols] = rng.standard_normal((size, rows.size))
    diag = np.arange(d)
    A[:, diag, diag] = np.sqrt(rng.chisquare(n - diag, size=(size, d)))
    s = np.linalg.svd(A, compute_uv=False)
    return s[:, -1] ** 2, s[:, 0] ** 2


def verify_tail_bound(bound_name: str, parameters: dict, x: float, replicates: int = 10**5,
                      rng_seed=0, C: float = 1.0) -> TailBoundReport:
    """Check one deviation bound against its law.

    Simulated bounds PASS iff the empirical exceedance is at most
    ``x + 3 sqrt(x (1 - x) / replicates)``. ``HypergeomUpper`` is checked
    exactly: ``x`` is then the deviation level of ``W/k`` and the verdict
    compares the exact tail with the bound. ``WishartSmallBall`` depends on
    the free constant ``C`` and is reported with verdict ``INFO``.
    """
    if bound_name not in TAIL_BOUNDS:
        raise ValueError(f"unknown bound {bound_name!r}; expected one of {TAIL_BOUNDS}")
    params = dict(parameters)

    if bound_name == "HypergeomUpper":
        k, p = int(params["k"]), int(params["p"])
        bound = hypergeom_tail_bound(k, p, x)
        exact = binomial_upper_tail(k, p, x)
        ok = exact <= bound * (1.0 + 1e-12)
        return TailBoundReport(bound_name, {"k": k, "p": p}, x, bound, min(exact, 1.0), None,
                               "PASS" if ok else "FAIL")

    if replicates < 1000:
        raise ValueError("Monte-Carlo verification needs at least 1000 replicates")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)

    hits = 0
    if bound_name.startswith("Chi2"):
        d = int(params["d"])
        params = {"d": d}
        upper, lower, small = chi2_deviation_thresholds(d, x)
        threshold = {"Chi2Upper": upper, "Chi2Lower": lower, "Chi2SmallBall": small}[bound_name]
        done = 0
        while done < replicates:
            m = min(_MC_CHUNK * 10, replicates - done)
            draws = rng.chisquare(d, size=m)
            hits += int(np.count_nonzero(draws >= threshold if bound_name == "Chi2Upper" else draws <= threshold))
            done += m
    else:
        n, d = int(params["n"]), int(params["d"])
        params = {"n": n, "d": d}
        want_sb = bound_name == "WishartSmallBall"
        if want_sb:
            params["C"] = C
        hi, lo, sb = wishart_deviation_thresholds(n, d, x, small_ball=want_sb, C=C)
        threshold = {"WishartMax": hi, "WishartMin": lo, "WishartSmallBall": sb}[bound_name]
        done = 0
        while done < replicates:
            m = min(_MC_CHUNK, replicates - done)
            lam_min, lam_max = _wishart_extremes(n, d, m, rng)
            if bound_name == "WishartMax":
                hits += int(np.count_nonzero(lam_max >= threshold))
            else:
                hits += int(np.count_nonzero(lam_min <= threshold))
            done += m

    rate = hits / replicates
    slack = 3.0 * math.sqrt(x * (1.0 - x) / replicates)
    if bound_name == "WishartSmallBall":
        verdict = "INFO"
    else:
        verdict = "PASS" if rate <= x + slack else "FAIL"
    return TailBoundReport(bound_name, params, x, threshold, rate, replicates, verdict)
