"""Command line entry point ``sparsephase``.

Every experiment subcommand reads a flat ``key = value`` config (a file via
``--config`` or a shipped preset via ``--preset``), applies the
``--seed``/``--replicates``/``--set`` overrides, writes CSV (and SVG where
a curve is produced) into ``--out`` and exits with 0 on success, 2 on a
configuration error and 3 when an exhaustive enumeration would exceed its
budget.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from sparsephase._subsets import BudgetExceededError
from sparsephase.design import design_from_csv, generate_gaussian_design, replicate_rng, restricted_eigenvalues
from sparsephase.distributions import reports_to_csv
from sparsephase.experiments import (FIXED_DESIGN_KEY, ConfigError, ExperimentConfig, dict_rows_to_csv, emit_plot,
                                     level_rows_to_csv, load_preset, run_min_signal, run_power_vs_k, run_separation,
                                     run_tail_bounds, run_test_level)
from sparsephase.rates import classify_regime, rates_table

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET = 0, 2, 3

DEFAULT_EXPERIMENT = {
    "simulate-power": "PowerVsK",
    "min-signal": "MinSignal",
    "test-level": "TestLevel",
    "separation": "TestSeparation",
    "tail-bounds": "TailBounds",
    "restricted-eig": "RestrictedEig",
}


def _load(args) -> ExperimentConfig:
    overrides = {"experiment": DEFAULT_EXPERIMENT[args.command]}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        overrides[key] = value
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicates is not None:
        overrides["replicates"] = args.replicates
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    if args.preset:
        return load_preset(args.preset, **overrides)
    return ExperimentConfig.from_mapping(overrides)


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(text, encoding="utf-8")
    print(path)
    return path


def _simulate_power(cfg, out):
    curves = run_power_vs_k(cfg)
    for method, curve in curves.items():
        _write(out, f"power_{method}_p{cfg.p}.csv", curve.to_csv())
    emit_plot(list(curves.values()), out / f"power_p{cfg.p}.svg", title=f"n={cfg.n}, p={cfg.p}")
    return EXIT_OK


def _min_signal(cfg, out):
    curve = run_min_signal(cfg)
    _write(out, f"min_signal_p{cfg.p}.csv", curve.to_csv())
    emit_plot(curve, out / f"min_signal_p{cfg.p}.svg", title=f"n={cfg.n}, p={cfg.p}")
    return EXIT_OK


def _test_level(cfg, out):
    rows, _ = run_test_level(cfg)
    _write(out, "test_level.csv", level_rows_to_csv(rows))
    return EXIT_OK


def _separation(cfg, out):
    _write(out, "separation.csv", dict_rows_to_csv(run_separation(cfg)))
    return EXIT_OK


def _tail_bounds(cfg, out):
    reports = run_tail_bounds(cfg)
    _write(out, "tail_bounds.csv", reports_to_csv(reports))
    failed = [r for r in reports if r.verdict == "FAIL"]
    print(f"{len(reports) - len(failed)} of {len(reports)} rows without FAIL")
    return EXIT_OK


def _restricted_eig(cfg, out, design=None):
    if design:
        X = design_from_csv(design)
    else:
        X = generate_gaussian_design(cfg.n, cfg.p, rng_seed=replicate_rng(cfg.seed, FIXED_DESIGN_KEY))
    rows = []
    for k in cfg.k_grid:
        spec = restricted_eigenvalues(X, k, cfg.budget)
        rows.append({"k": k, "phi_minus": spec.phi_minus, "phi_plus": spec.phi_plus,
                     "subsets_examined": spec.subsets_examined})
    _write(out, "restricted_eig.csv", dict_rows_to_csv(rows))
    return EXIT_OK


def _rates(args):
    verdict = classify_regime(args.k, args.n, args.p)
    print("problem,value,formula")
    for name, value, formula in rates_table(args.k, args.n, args.p):
        print(f"{name},{value:.6g},{formula}")
    print(f"# regime={verdict.regime},ratio={verdict.ratio:.6g},threshold={verdict.threshold}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsephase", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULT_EXPERIMENT:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path, help="key = value configuration file")
        sp.add_argument("--preset", help="name of a shipped configuration, e.g. fig4_p5000")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=str, help="output directory")
        sp.add_argument("--replicates", type=int)
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        if name == "restricted-eig":
            sp.add_argument("--design", type=Path, help="design CSV; a Gaussian design is drawn otherwise")
    rp = sub.add_parser("rates")
    rp.add_argument("--k", type=int, required=True)
    rp.add_argument("--n", type=int, required=True)
    rp.add_argument("--p", type=int, required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "rates":
            return _rates(args)
        cfg = _load(args)
        out = Path(cfg.output_dir)
        if args.command == "restricted-eig":
            return _restricted_eig(cfg, out, args.design)
        handler = {"simulate-power": _simulate_power, "min-signal": _min_signal, "test-level": _test_level,
                   "separation": _separation, "tail-bounds": _tail_bounds}[args.command]
        return handler(cfg, out)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # invalid (k, n, p) for rates and similar argument errors
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
