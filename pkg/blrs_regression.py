"""
BLRS regression - Bayesian linear regression with Student-t assumptions

fit:           Learns (alpha, beta) by q-EM (or the 1-D maximum-likelihood
               oracle) and writes the fitted model as JSON.
predict:       Applies a saved model to new rows.
benchmark:     nu sweep over fold trials, iteration counts and speedup.
gen-synthetic: Writes a synthetic dataset from the Gaussian generative model.

Usage:
    python blrs_regression.py fit --input data.csv --target y --nu inf --out model.json
    python blrs_regression.py fit --input data.csv --target y --solver oracle --out model.json
    python blrs_regression.py predict --model model.json --input new.csv --out pred.csv
    python blrs_regression.py benchmark --input news.csv --target shares --seed 42
    python blrs_regression.py benchmark --input news.csv --target shares --nus 1e-8,inf --trial 1
    python blrs_regression.py gen-synthetic --rows 500 --features 10 --alpha-true 1 --beta-true 100 --seed 7 --out syn.csv

Exit codes: 0 success, 1 I/O or data error, 2 fit did not converge.
"""

import argparse
import configparser
import math
import os
import sys

import numpy as np
import pandas as pd

from src.benchmark import DEFAULT_NUS, NEWS_DATASET_URL, format_table, parse_nu, parse_nus, run_benchmark
from src.blrs_core import FitConfig, fit_qem, log_evidence, nu_label, posterior_mean, predict
from src.data import DataError, apply_normalization, load_csv, load_feature_matrix, normalize_columns, precompute
from src.logger import setup_logger
from src.model_store import StoredModel, load_model, save_model
from src.oracle import ml_solve, project_spectrum
from src.synthetic import write_synthetic_csv

EXIT_OK = 0
EXIT_DATA_ERROR = 1
EXIT_NOT_CONVERGED = 2

_SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))

_DEFAULTS = {
    "paths": {"log_dir": os.path.join(_SCRIPT_DIR, "logs")},
    "fit": {"rel_tol": "1e-7", "max_iter": "10000", "alpha0": "1", "beta0": "1", "stop_on": "params"},
    "linalg": {"eigensolver": "lapack"},
    "oracle": {"grid_points": "256", "gamma_min": "1e-12", "gamma_max": "1e12", "rel_width": "1e-10"},
    "benchmark": {
        "nus": ",".join(nu_label(nu) for nu in DEFAULT_NUS),
        "folds": "5",
        "seed": "42",
        "workers": "4",
    },
}


class ConfigError(DataError):
    """Raised on an unreadable config value."""
    pass


def load_config(config_path: str | None) -> configparser.ConfigParser:
    """Built-in defaults, overlaid by config.ini when it exists."""
    config = configparser.ConfigParser()
    config.read_dict(_DEFAULTS)
    if config_path is None:
        config_path = os.path.join(_SCRIPT_DIR, "config.ini")
        if not os.path.exists(config_path):
            return config
    elif not os.path.exists(config_path):
        raise ConfigError(f"Config file not found: {config_path}")
    config.read(config_path, encoding="utf-8")
    return config


def _get(config: configparser.ConfigParser, section: str, key: str, convert):
    raw = config.get(section, key)
    try:
        return convert(raw)
    except ValueError:
        raise ConfigError(f"Bad value for {section}.{key} in config.ini: {raw!r}")


def _fit_config(config: configparser.ConfigParser, args: argparse.Namespace) -> FitConfig:
    rel_tol = args.rel_tol if args.rel_tol is not None else _get(config, "fit", "rel_tol", float)
    max_iter = args.max_iter if args.max_iter is not None else _get(config, "fit", "max_iter", int)
    return FitConfig(
        rel_tol=rel_tol,
        max_iter=max_iter,
        alpha0=_get(config, "fit", "alpha0", float),
        beta0=_get(config, "fit", "beta0", float),
        stop_on=config.get("fit", "stop_on"),
    )


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.9E}"


# ─── Commands ────────────────────────────────────────────────────────


def run_fit(config: configparser.ConfigParser, args: argparse.Namespace) -> int:
    """Fit one model and write it as JSON. Prints a one-line summary to stdout."""
    logger = setup_logger(config.get("paths", "log_dir"))
    nu = parse_nu(args.nu)
    fit_config = _fit_config(config, args)
    eigensolver = config.get("linalg", "eigensolver")

    logger.info(f"Fit: input={args.input} target={args.target} nu={nu_label(nu)} solver={args.solver}")
    dataset = load_csv(args.input, args.target, has_header=not args.no_header)
    phi, report = normalize_columns(dataset)
    pre = precompute(phi, dataset.targets, method=eigensolver)

    if args.solver == "qem":
        result = fit_qem(pre, phi, nu, fit_config)
        alpha, beta = result.hyperparams.alpha, result.hyperparams.beta
        mu, iterations, converged = result.mu, result.iterations, result.converged
    else:
        solution = ml_solve(
            project_spectrum(pre),
            pre.m,
            grid_points=_get(config, "oracle", "grid_points", int),
            gamma_min=_get(config, "oracle", "gamma_min", float),
            gamma_max=_get(config, "oracle", "gamma_max", float),
            rel_width=_get(config, "oracle", "rel_width", float),
        )
        alpha, beta = solution.alpha, solution.beta
        # gamma = 0 (alpha = inf) shrinks every weight to zero.
        mu = posterior_mean(pre, alpha, beta) if math.isfinite(alpha) else np.zeros(pre.M)
        iterations, converged = 0, True

    evidence = log_evidence(pre, nu, alpha, beta) if math.isfinite(alpha) and math.isfinite(beta) else math.nan
    save_model(args.out, StoredModel(
        nu=nu, alpha=alpha, beta=beta, mu=mu, normalization=report,
        iterations=iterations, converged=converged,
    ))

    print(
        f"nu={nu_label(nu)} alpha={_fmt(alpha)} beta={_fmt(beta)} cnt={iterations} "
        f"log_evidence={evidence:.10g} converged={str(converged).lower()}"
    )
    logger.info(f"Model written to {args.out}")

    if not converged:
        logger.error(f"q-EM did not converge within --max-iter {fit_config.max_iter} iterations")
        print(f"ERROR: fit did not converge within --max-iter {fit_config.max_iter}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def run_predict(config: configparser.ConfigParser, args: argparse.Namespace) -> int:
    """Write one prediction per input row to a single-column CSV."""
    logger = setup_logger(config.get("paths", "log_dir"))
    model = load_model(args.model)
    features = load_feature_matrix(args.input, has_header=not args.no_header, exclude_column=args.target)
    phi_new = apply_normalization(features, model.normalization)
    predictions = predict(model.mu, phi_new)

    pd.DataFrame({"prediction": predictions}).to_csv(
        args.out, index=False, float_format="%.17g", lineterminator="\n"
    )
    logger.info(f"Wrote {len(predictions)} prediction(s) to {args.out}")
    return EXIT_OK


def run_benchmark_command(config: configparser.ConfigParser, args: argparse.Namespace) -> int:
    """The nu sweep table. Non-converged cells are marked DNC and do not fail the run."""
    logger = setup_logger(config.get("paths", "log_dir"))
    nus = parse_nus(args.nus if args.nus is not None else config.get("benchmark", "nus"))
    folds = args.folds if args.folds is not None else _get(config, "benchmark", "folds", int)
    seed = args.seed if args.seed is not None else _get(config, "benchmark", "seed", int)
    workers = _get(config, "benchmark", "workers", int)

    logger.info("=" * 60)
    logger.info(f"Benchmark: input={args.input} folds={folds} seed={seed} "
                f"nus={', '.join(nu_label(nu) for nu in nus)}")
    logger.info(f"Reference dataset (not bundled): {NEWS_DATASET_URL}")
    logger.info("=" * 60)

    dataset = load_csv(args.input, args.target, has_header=not args.no_header)
    results = run_benchmark(
        dataset,
        folds=folds,
        seed=seed,
        trial=args.trial,
        nus=nus,
        config=_fit_config(config, args),
        workers=workers,
        eigensolver=config.get("linalg", "eigensolver"),
    )

    tables = [format_table(trial, rows) for trial, rows in results.items()]
    print("\n\n".join(tables))
    dnc = sum(1 for rows in results.values() for r in rows if not r.converged)
    if dnc:
        logger.warning(f"{dnc} fit(s) did not converge (marked DNC)")
    return EXIT_OK


def run_gen_synthetic(config: configparser.ConfigParser, args: argparse.Namespace) -> int:
    setup_logger(config.get("paths", "log_dir"))
    write_synthetic_csv(args.out, args.rows, args.features, args.alpha_true, args.beta_true, args.seed)
    return EXIT_OK


# ─── Main ────────────────────────────────────────────────────────────


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="BLRS regression - hyperparameter learning by q-EM for Student-t Bayesian linear regression"
    )
    parser.add_argument(
        "--config", default=None,
        help="Path to config.ini (default: config.ini in script directory, if present)",
    )
    sub = parser.add_subparsers(dest="command")

    def _data_args(p, target_required=True):
        p.add_argument("--input", required=True, help="CSV file with numeric columns")
        p.add_argument("--target", required=target_required, default=None,
                       help="Target column: header name or 0-based index")
        p.add_argument("--no-header", action="store_true", help="CSV has no header row")

    def _fit_args(p):
        p.add_argument("--rel-tol", type=float, default=None,
                       help="Relative change of alpha and beta that stops q-EM (default 1e-7)")
        p.add_argument("--max-iter", type=int, default=None,
                       help="Iteration budget for q-EM (default 10000)")

    fit = sub.add_parser("fit", help="Fit (alpha, beta, mu) and write the model JSON")
    _data_args(fit)
    fit.add_argument("--nu", default="inf", help="Degrees of freedom, or 'inf' for the Gaussian model")
    fit.add_argument("--solver", choices=["qem", "oracle"], default="qem")
    fit.add_argument("--out", required=True, help="Model JSON path")
    _fit_args(fit)

    pred = sub.add_parser("predict", help="Predict targets for new rows with a saved model")
    pred.add_argument("--model", required=True, help="Model JSON written by 'fit'")
    _data_args(pred, target_required=False)
    pred.add_argument("--out", required=True, help="Predictions CSV path")

    bench = sub.add_parser("benchmark", help="nu sweep over fold trials")
    _data_args(bench)
    bench.add_argument("--nus", default=None,
                       help="Comma separated nu values, 'inf' allowed (default 1e-8,1e-5,1e-2,10,1e4,inf)")
    bench.add_argument("--folds", type=int, default=None, help="Number of folds (default 5)")
    bench.add_argument("--seed", type=int, default=None, help="Shuffle seed (default 42)")
    bench.add_argument("--trial", type=int, default=None, help="Run only this trial (1-based)")
    _fit_args(bench)

    gen = sub.add_parser("gen-synthetic", help="Write a synthetic regression dataset")
    gen.add_argument("--rows", type=int, required=True, help="Number of samples m")
    gen.add_argument("--features", type=int, required=True, help="Number of features M")
    gen.add_argument("--alpha-true", type=float, default=1.0, help="Weight precision")
    gen.add_argument("--beta-true", type=float, default=100.0, help="Noise precision")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", required=True, help="CSV path")

    return parser


_COMMANDS = {
    "fit": run_fit,
    "predict": run_predict,
    "benchmark": run_benchmark_command,
    "gen-synthetic": run_gen_synthetic,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        print("\nError: Specify one of: fit, predict, benchmark, gen-synthetic", file=sys.stderr)
        return EXIT_DATA_ERROR

    try:
        config = load_config(args.config)
        return _COMMANDS[args.command](config, args)
    except (DataError, OSError, ValueError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"ERROR: {e}", file=sys.stderr)
        return EXIT_DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
