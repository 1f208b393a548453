"""Minimax rate functionals, the ultra-high-dimensional rule of thumb, and
computable lower-bound radii for sparse detection.

Rate functionals are orders of magnitude: every unspecified multiplicative
constant is set to 1 and ``formula_id`` tells callers which expression was
used so they can rescale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "PROBLEMS",
    "RegimeVerdict",
    "RateValue",
    "LowerBoundCertificate",
    "classify_regime",
    "rate_value",
    "condition_a1",
    "lower_bound_radius",
    "second_moment_certificate",
    "rates_table",
]

PROBLEMS = ("PredictionFixed", "PredictionRandom", "TestKnownVar", "TestUnknownVar", "InverseFixed")
REGIME_THRESHOLD = 0.5
MAX_ALPHA_PLUS_DELTA = 0.53


@dataclass(frozen=True)
class RegimeVerdict:
    k: int
    n: int
    p: int
    ratio: float
    regime: str
    threshold: float = REGIME_THRESHOLD


@dataclass(frozen=True)
class RateValue:
    problem: str
    value: float
    formula_id: str


@dataclass(frozen=True)
class LowerBoundCertificate:
    rho_squared: float
    eta: float
    second_moment_bound: float | None
    satisfied: bool
    regime_formula: str
    condition_A1: bool


def classify_regime(k: int, n: int, p: int) -> RegimeVerdict:
    """Ultra-high dimensional iff ``k log(p / k) / n >= 1/2``."""
    if not 1 <= k <= p or n < 1:
        raise ValueError(f"need 1 <= k <= p and n >= 1, got k={k}, n={n}, p={p}")
    ratio = k * math.log(p / k) / n
    return RegimeVerdict(k, n, p, ratio, "UltraHigh" if ratio >= REGIME_THRESHOLD else "Classical")


def rate_value(problem: str, k: int, n: int, p: int, log_form: str = "log_p") -> RateValue:
    """Order of the minimax risk or squared separation distance of ``problem``.

    ``log_form`` only affects ``TestUnknownVar``: ``"log_p"`` uses
    ``log(p)`` and ``"log_ep_over_k"`` uses ``log(e p / k)``; the two agree
    up to constants when ``k <= p**(1/3)``.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    if not 1 <= k <= p or n < 1:
        raise ValueError(f"need 1 <= k <= p and n >= 1, got k={k}, n={n}, p={p}")
    r = k / n * math.log(p / k)
    if problem == "PredictionFixed":
        return RateValue(problem, min(r, 1.0), "min(k/n*log(p/k), 1)")
    if problem == "PredictionRandom":
        return RateValue(problem, r * math.exp(r), "k/n*log(p/k)*exp(k/n*log(p/k))")
    if problem == "TestKnownVar":
        return RateValue(problem, min(k * math.log(p) / n, 1.0 / math.sqrt(n)), "min(k*log(p)/n, 1/sqrt(n))")
    if problem == "TestUnknownVar":
        if log_form == "log_p":
            t, fid = k * math.log(p) / n, "k*log(p)/n*exp(k*log(p)/n)"
        elif log_form == "log_ep_over_k":
            t, fid = k * math.log(math.e * p / k) / n, "k*log(ep/k)/n*exp(k*log(ep/k)/n)"
        else:
            raise ValueError(f"unknown log_form {log_form!r}")
        return RateValue(problem, t * math.exp(t), fid)
    # InverseFixed: linear branch while k log(p) <= n, exponential beyond
    if k * math.log(p) <= n:
        return RateValue(problem, r, "k/n*log(p/k)")
    return RateValue(problem, math.exp(r), "exp(k/n*log(p/k))")


def condition_a1(k: int, n: int, p: int) -> bool:
    """``(k / n) log(p / (e^3 k^2)) >= 2``."""
    return k / n * math.log(p / (math.exp(3.0) * k * k)) >= 2.0 - 1e-12


def second_moment_certificate(rho_squared: float, k: int, n: int, p: int, eta: float) -> LowerBoundCertificate:
    """Exact ``E[(1 - rho^2 W / ((1 + rho^2) k))^{-n}]`` for ``W ~ Binomial(k, k/p)``.

    The certificate holds when the value is at most ``1 + eta^2``.
    """
    if not 1 <= k <= p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={p}")
    if rho_squared < 0:
        raise ValueError("rho_squared must be nonnegative")
    if not 0.0 < eta < 2.0:
        raise ValueError("eta must lie in (0, 2)")
    q = k / p
    frac = rho_squared / ((1.0 + rho_squared) * k)
    terms = []
    for w in range(k + 1):
        base = 1.0 - frac * w
        if base <= 0.0:
            raise ValueError(f"second moment is infinite: base {base:.3g} <= 0 at w={w}")
        logpmf = (math.lgamma(k + 1) - math.lgamma(w + 1) - math.lgamma(k - w + 1)
                  + (w * math.log(q) if w else 0.0) + ((k - w) * math.log1p(-q) if k > w else 0.0))
        terms.append(math.exp(logpmf - n * math.log(base)))
    value = math.fsum(terms)
    return LowerBoundCertificate(rho_squared, eta, value, value <= 1.0 + eta * eta, "Moment",
                                 condition_a1(k, n, p))


def lower_bound_radius(k: int, n: int, p: int, alpha: float, delta: float) -> LowerBoundCertificate:
    """Largest radius at which no level-``alpha`` test has power above ``1 - delta``.

    The small-dimension radius ``(k / 2n) log(1 + p / k^2)`` always applies;
    when (k / n) log(p / (e^3 k^2)) >= 2 the large-dimension radius
    ``-1 + (p / (2ek))^{k/n} (4k)^{-2/n}`` is also admissible and the larger
    one is returned. The attached second moment is evaluated at that radius.
    """
    if not (0.0 < alpha < 1.0 and 0.0 < delta < 1.0):
        raise ValueError("alpha and delta must lie in (0, 1)")
    if alpha + delta > MAX_ALPHA_PLUS_DELTA:
        raise ValueError(f"alpha + delta = {alpha + delta} exceeds {MAX_ALPHA_PLUS_DELTA}")
    if not 1 <= k <= p or n < 1:
        raise ValueError(f"need 1 <= k <= p and n >= 1, got k={k}, n={n}, p={p}")
    # k <= p^(1/3), with slack for floating cube roots
    if k**3 > p * (1.0 + 1e-12):
        raise ValueError(f"need k <= p^(1/3), got k={k}, p={p}")
    eta = 2.0 * (1.0 - alpha - delta)
    small = k / (2.0 * n) * math.log1p(p / (k * k))
    a1 = condition_a1(k, n, p)
    rho2, formula = small, "SmallDim"
    if a1:
        large = -1.0 + (p / (2.0 * math.e * k)) ** (k / n) * (4.0 * k) ** (-2.0 / n)
        if large > small:
            rho2, formula = large, "LargeDim"
    cert = second_moment_certificate(rho2, k, n, p, eta)
    return LowerBoundCertificate(rho2, eta, cert.second_moment_bound, cert.satisfied, formula, a1)


def rates_table(k: int, n: int, p: int) -> list[tuple[str, float, str]]:
    rows = [(r.problem, r.value, r.formula_id) for r in (rate_value(pb, k, n, p) for pb in PROBLEMS)]
    alt = rate_value("TestUnknownVar", k, n, p, log_form="log_ep_over_k")
    rows.append(("TestUnknownVar[log(ep/k)]", alt.value, alt.formula_id))
    return rows
