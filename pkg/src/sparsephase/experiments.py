"""Batch experiments: screening power versus sparsity, minimal signal for
screening, level of the adaptive tests, separation distances and the
deviation-bound grid.

Every replicate draws its randomness from a stream keyed by
``(seed, replicate)``, so results do not depend on evaluation order or on
the number of workers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np

from sparsephase.design import generate_gaussian_design, make_theta_experiment, replicate_rng
from sparsephase.detection import (estimate_separation_distance, known_variance_closure, test_known_variance,
                                   test_unknown_variance, unknown_variance_closure)
from sparsephase.distributions import TailBoundReport, verify_tail_bound
from sparsephase.screening import PowerCurve, lasso_screen, power_metric, sis_screen

log = logging.getLogger(__name__)

EXPERIMENTS = ("PowerVsK", "MinSignal", "TestLevel", "TestSeparation", "TailBounds", "Rates", "RestrictedEig")
METHODS = ("SIS", "LassoPath")
PROCEDURES = ("KnownVarianceStar", "UnknownVarianceFisher")
FIXED_DESIGN_KEY = 10**9


class ConfigError(ValueError):
    """Inconsistent or unreadable experiment configuration."""


def _parse_int_list(text: str) -> list[int]:
    out = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    experiment: str = "PowerVsK"
    n: int = 50
    p: int = 5000
    k_grid: list = field(default_factory=lambda: list(range(1, 16)))
    replicates: int = 100
    amplitude_u: float = 4.0
    target_power: float = 0.9
    u_lo: float = 0.5
    u_hi: float = 128.0
    iterations: int = 12
    p0: int = 50
    methods: list = field(default_factory=lambda: list(METHODS))
    procedures: list = field(default_factory=lambda: list(PROCEDURES))
    sigma: float = 1.0
    alpha: float = 0.05
    delta: float = 0.1
    k_max: int = 2
    budget: int = 10**6
    fix_design: bool = False
    workers: int = 1
    tail_replicates: int = 10**5
    seed: int = 0
    output_dir: str = "out"

    _LISTS = {"k_grid": _parse_int_list,
              "methods": lambda t: [m.strip() for m in str(t).split(",") if m.strip()],
              "procedures": lambda t: [m.strip() for m in str(t).split(",") if m.strip()]}

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse ``key = value`` lines; ``#`` starts a comment."""
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_mapping(values)

    @classmethod
    def from_file(cls, path, **overrides) -> "ExperimentConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_text(text, **overrides)

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, value in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            default = getattr(cls(), key)
            try:
                if key in cls._LISTS:
                    kwargs[key] = value if isinstance(value, list) else cls._LISTS[key](value)
                elif isinstance(default, bool):
                    kwargs[key] = _parse_bool(value)
                elif isinstance(default, int):
                    kwargs[key] = int(float(value)) if isinstance(value, str) and "e" in value.lower() else int(value)
                elif isinstance(default, float):
                    kwargs[key] = float(value)
                else:
                    kwargs[key] = str(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {value!r}") from exc
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; expected one of {EXPERIMENTS}")
        if self.n < 1 or self.p < 1:
            raise ConfigError("n and p must be >= 1")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if not self.k_grid:
            raise ConfigError("k_grid must be nonempty")
        uses_grid = self.experiment not in ("TestLevel", "TailBounds", "Rates")
        if uses_grid and any(k < 1 or k > min(self.n, self.p) for k in self.k_grid):
            raise ConfigError(f"every k must lie in 1..min(n, p) = {min(self.n, self.p)}")
        if self.experiment in ("PowerVsK", "MinSignal") and not 1 <= self.p0 <= self.p:
            raise ConfigError(f"p0 must lie in 1..p={self.p}")
        if any(m not in METHODS for m in self.methods):
            raise ConfigError(f"methods must be drawn from {METHODS}")
        if any(m not in PROCEDURES for m in self.procedures):
            raise ConfigError(f"procedures must be drawn from {PROCEDURES}")
        if not 0.0 < self.alpha < 1.0 or not 0.0 < self.delta < 1.0:
            raise ConfigError("alpha and delta must lie in (0, 1)")
        if not 0.0 < self.target_power < 1.0:
            raise ConfigError("target_power must lie in (0, 1)")
        if not 0.0 < self.u_lo < self.u_hi:
            raise ConfigError("need 0 < u_lo < u_hi")
        if self.sigma <= 0:
            raise ConfigError("sigma must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def with_overrides(self, **changes) -> "ExperimentConfig":
        cfg = replace(self, **{k: v for k, v in changes.items() if v is not None})
        cfg.validate()
        return cfg


def load_preset(name: str, **overrides) -> ExperimentConfig:
    """One of the configuration files shipped in ``sparsephase/configs``."""
    try:
        text = resources.files("sparsephase").joinpath("configs", f"{name}.cfg").read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise ConfigError(f"no preset named {name!r}") from exc
    return ExperimentConfig.from_text(text, **overrides)


@dataclass
class MinSignalCurve:
    k_values: list
    u_star: list
    bracket: list
    replicates: int
    saturated: list = field(default_factory=list)

    def __post_init__(self):
        for u, (lo, hi) in zip(self.u_star, self.bracket):
            if not lo < hi or not lo <= u <= hi:
                raise ValueError(f"u_star {u} outside its bracket ({lo}, {hi})")

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "u_star", "lo", "hi", "saturated", "replicates"])
        for k, u, (lo, hi), sat in zip(self.k_values, self.u_star, self.bracket, self.saturated):
            w.writerow([k, f"{u:.6f}", f"{lo:.6f}", f"{hi:.6f}", int(sat), self.replicates])
        return buf.getvalue()


def _draw(cfg: ExperimentConfig, r: int):
    """Design and unit noise of replicate ``r``."""
    rng = replicate_rng(cfg.seed, r)
    if cfg.fix_design:
        X = generate_gaussian_design(cfg.n, cfg.p, rng_seed=replicate_rng(cfg.seed, FIXED_DESIGN_KEY)).entries
        rng.standard_normal((cfg.n, cfg.p))  # keep the noise stream aligned with the redrawn case
    else:
        X = rng.standard_normal((cfg.n, cfg.p))
    eps = rng.standard_normal(cfg.n)
    return X, eps


def _screen(method, Y, X, p0, truth):
    if method == "SIS":
        return sis_screen(Y, X, p0).selected
    return lasso_screen(Y, X, p0, until=truth).selected


def _power_replicate(args):
    cfg, r = args
    X, eps = _draw(cfg, r)
    out = np.empty((len(cfg.k_grid), len(cfg.methods)))
    for i, k in enumerate(cfg.k_grid):
        theta = make_theta_experiment(k, cfg.p, cfg.amplitude_u, cfg.n)
        Y = X[:, :k] @ theta.values + cfg.sigma * eps
        truth = theta.support
        for j, method in enumerate(cfg.methods):
            out[i, j] = power_metric(_screen(method, Y, X, cfg.p0, truth), truth)
    return out


def _map(func, cfg: ExperimentConfig, jobs):
    if cfg.workers == 1:
        return [func(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(func, jobs))


def run_power_vs_k(cfg: ExperimentConfig) -> dict[str, PowerCurve]:
    """Screening power as a function of the sparsity, one curve per method."""
    cfg.validate()
    results = np.stack(_map(_power_replicate, cfg, [(cfg, r) for r in range(cfg.replicates)]))
    mean = results.mean(axis=0)
    if cfg.replicates > 1:
        se = results.std(axis=0, ddof=1) / math.sqrt(cfg.replicates)
    else:
        warnings.warn("a single replicate gives no standard error; reporting 0", RuntimeWarning, stacklevel=2)
        se = np.zeros_like(mean)
    meta = {"n": cfg.n, "p": cfg.p, "amplitude_u": cfg.amplitude_u, "p0": cfg.p0, "seed": cfg.seed}
    return {m: PowerCurve(m, list(cfg.k_grid), [float(v) for v in mean[:, j]], [float(v) for v in se[:, j]],
                          cfg.replicates, dict(meta, method=m))
            for j, m in enumerate(cfg.methods)}


def _min_signal_power(args):
    cfg, k, u, method = args
    theta = make_theta_experiment(k, cfg.p, u, cfg.n)
    total = 0.0
    for r in range(cfg.replicates):
        X, eps = _draw(cfg, r)
        Y = X[:, :k] @ theta.values + cfg.sigma * eps
        total += power_metric(_screen(method, Y, X, cfg.p0, theta.support), theta.support)
    return total / cfg.replicates


def run_min_signal(cfg: ExperimentConfig, method: str = "LassoPath") -> MinSignalCurve:
    """Per ``k``, the smallest amplitude ``u`` whose screening power reaches the target.

    Bisection on ``[u_lo, u_hi]`` with the same designs and noise for every
    candidate ``u``. When the power at ``u_hi`` stays below the target the
    value is reported as ``u_hi`` and flagged saturated.
    """
    cfg.validate()
    us, brackets, sat = [], [], []
    for k in cfg.k_grid:
        lo, hi = cfg.u_lo, cfg.u_hi
        top = _min_signal_power((cfg, k, hi, method))
        if top < cfg.target_power:
            log.info("k=%d: power %.3f at u=%g stays below target", k, top, hi)
            us.append(hi)
            brackets.append((lo, hi))
            sat.append(True)
            continue
        for _ in range(cfg.iterations):
            mid = 0.5 * (lo + hi)
            if _min_signal_power((cfg, k, mid, method)) >= cfg.target_power:
                hi = mid
            else:
                lo = mid
        us.append(0.5 * (lo + hi))
        brackets.append((lo, hi))
        sat.append(False)
    return MinSignalCurve(list(cfg.k_grid), us, brackets, cfg.replicates, sat)


def _level_replicate(args):
    cfg, r = args
    rng = replicate_rng(cfg.seed, r)
    X = rng.standard_normal((cfg.n, cfg.p))
    eps = rng.standard_normal(cfg.n)
    out = {}
    for proc in cfg.procedures:
        if proc == "KnownVarianceStar":
            out[proc] = test_known_variance(cfg.sigma * eps, X, cfg.sigma**2, cfg.alpha, cfg.budget).reject
        else:
            out[proc] = test_unknown_variance(cfg.sigma * eps, X, cfg.alpha, cfg.budget, cfg.k_max).reject
    return out


@dataclass
class LevelRow:
    procedure: str
    sigma: float
    rejections: int
    replicates: int
    alpha: float

    @property
    def rate(self) -> float:
        return self.rejections / self.replicates

    @property
    def bound(self) -> float:
        return self.alpha + 3.0 * math.sqrt(self.alpha * (1.0 - self.alpha) / self.replicates)

    @property
    def verdict(self) -> str:
        return "PASS" if self.rate <= self.bound else "FAIL"


def run_test_level(cfg: ExperimentConfig, sigmas=None) -> tuple[list[LevelRow], dict]:
    """Empirical type-I error of the tests under ``theta = 0``.

    Returns the summary rows and, per procedure and noise level, the vector
    of decisions (replicate ``r`` always uses the same design and noise
    direction, so decisions can be compared across noise levels).
    """
    cfg.validate()
    sigmas = [cfg.sigma] if sigmas is None else list(sigmas)
    rows, decisions = [], {}
    for s in sigmas:
        c = cfg.with_overrides(sigma=s)
        res = _map(_level_replicate, c, [(c, r) for r in range(c.replicates)])
        for proc in c.procedures:
            d = np.array([x[proc] for x in res])
            decisions[(proc, s)] = d
            rows.append(LevelRow(proc, s, int(d.sum()), c.replicates, c.alpha))
    return rows, decisions


def level_rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["procedure", "sigma", "alpha", "replicates", "rejections", "rate", "bound", "verdict"])
    for r in rows:
        w.writerow([r.procedure, r.sigma, r.alpha, r.replicates, r.rejections, f"{r.rate:.6f}", f"{r.bound:.6f}",
                    r.verdict])
    return buf.getvalue()


DEFAULT_TAIL_GRID = (
    [("Chi2Upper", {"d": d}, x) for d in (1, 5, 20, 100) for x in (0.1, 0.01)]
    + [("Chi2Lower", {"d": d}, x) for d in (1, 5, 20, 100) for x in (0.1, 0.01)]
    + [("Chi2SmallBall", {"d": d}, x) for d in (1, 5, 20, 100) for x in (0.1, 0.01)]
    + [("WishartMax", {"n": 50, "d": d}, x) for d in (2, 5, 10) for x in (0.1, 0.05)]
    + [("WishartMin", {"n": 50, "d": d}, x) for d in (2, 5, 10) for x in (0.1, 0.05)]
    + [("WishartMax", {"n": 20, "d": 2}, 0.1), ("WishartMin", {"n": 20, "d": 2}, 0.1)]
    + [("WishartSmallBall", {"n": 50, "d": d}, 0.1) for d in (2, 5, 10)]
)


def hypergeom_grid(k_max: int = 12, p_max: int = 60):
    """Exact rows for every ``k <= k_max``, ``k <= p <= p_max`` and ``x = i/k``."""
    return [("HypergeomUpper", {"k": k, "p": p}, i / k)
            for k in range(1, k_max + 1) for p in range(k, p_max + 1) for i in range(1, k + 1)]


def run_tail_bounds(cfg: ExperimentConfig, grid=None, include_exact: bool = True) -> list[TailBoundReport]:
    """One report per grid point; failures are data, not errors.

    Without an explicit ``grid`` the default simulation grid is used,
    followed by the exact binomial rows unless ``include_exact`` is off.
    """
    if grid is None:
        grid = list(DEFAULT_TAIL_GRID) + (hypergeom_grid() if include_exact else [])
    reports = []
    for i, (name, params, x) in enumerate(grid):
        rng = replicate_rng(cfg.seed, i)
        reports.append(verify_tail_bound(name, params, x, cfg.tail_replicates, rng))
    return reports


def run_separation(cfg: ExperimentConfig) -> list[dict]:
    """Empirical separation distance of each procedure for every ``k`` on one Gaussian design."""
    cfg.validate()
    X = generate_gaussian_design(cfg.n, cfg.p, rng_seed=replicate_rng(cfg.seed, FIXED_DESIGN_KEY))
    rows = []
    for proc in cfg.procedures:
        closure = (known_variance_closure(cfg.alpha, cfg.budget) if proc == "KnownVarianceStar"
                   else unknown_variance_closure(cfg.alpha, cfg.budget, cfg.k_max))
        for k in cfg.k_grid:
            est = estimate_separation_distance(closure, X, k, cfg.alpha, cfg.delta, max(cfg.replicates, 100),
                                               cfg.seed, cfg.sigma)
            rows.append({"procedure": proc, "k": k, "rho_hat": est.rho_hat, "lo": est.bracket[0],
                         "hi": est.bracket[1], "rho2_hat": est.rho_hat**2,
                         "klogp_over_n": k * math.log(cfg.p) / cfg.n, "replicates": est.replicates})
    return rows


def dict_rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(rows[0]))
    for row in rows:
        w.writerow([f"{v:.6f}" if isinstance(v, float) else v for v in row.values()])
    return buf.getvalue()


def _svg_setup():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    plt.rcParams["svg.hashsalt"] = "sparsephase"
    plt.rcParams["svg.fonttype"] = "none"
    return plt


def emit_plot(curves, path, title: str = "", xlabel: str = "k", ylabel: str | None = None) -> Path:
    """Write an SVG line chart with error bars, one labeled series per curve.

    ``curves`` is a :class:`PowerCurve`, a :class:`MinSignalCurve` or a
    sequence of either. A series with a single point is drawn as a marker.
    The output is byte-stable for identical input.
    """
    if isinstance(curves, (PowerCurve, MinSignalCurve)):
        curves = [curves]
    curves = list(curves)
    if not curves or any(len(c.k_values) == 0 for c in curves):
        raise ValueError("nothing to plot")
    path = Path(path)
    plt = _svg_setup()
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for i, c in enumerate(curves):
        if isinstance(c, PowerCurve):
            y, err, label = c.power, c.stderr, c.method
        else:
            y = c.u_star
            err = [[u - lo for u, (lo, _) in zip(c.u_star, c.bracket)],
                   [hi - u for u, (_, hi) in zip(c.u_star, c.bracket)]]
            label = "u*"
        ax.errorbar(c.k_values, y, yerr=err, marker="os^v"[i % 4], capsize=3,
                    linestyle="-" if len(c.k_values) > 1 else "none", label=label)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel or ("power" if isinstance(curves[0], PowerCurve) else "u*"))
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as exc:
        raise ValueError(f"cannot write plot to {path}: {exc}") from exc
    finally:
        plt.close(fig)
    return path
