"""Command-line interface.

Subcommands: ``gen`` (synthetic datasets), ``learn-metric`` (pair-driven
metric learning), ``fit`` (single model fit), ``experiment`` (figure
reproduction runs). An optional JSON config file can carry any flag
value; explicit flags win. Exit codes: 0 ok, 2 configuration error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import glm, harness
from .errors import ConfigError, DataError, DmlregError, NumericalError
from .expert_sim import (
    Dataset,
    GenConfig,
    dataset_from_csv,
    dataset_to_csv,
    features_from_csv,
    generate_dataset,
    sample_theta,
    theta_to_dict,
)
from .metric_learning import (
    DiagonalMetric,
    MetricLearnOptions,
    PairSets,
    learn_metric_with_trace,
    match_distance_scale,
)
from .numerics import make_rng


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmlreg",
                                     description="distance-metric-learning regularization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic train/validation dataset")
    gen.add_argument("--n", type=int, required=True, help="feature count")
    gen.add_argument("--m", type=int, default=100, help="training rows")
    gen.add_argument("--m-val", type=int, default=900, help="validation rows")
    gen.add_argument("--relevant", type=int, default=10, help="nonzero coefficients")
    gen.add_argument("--noise-sd", type=float, default=1.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output directory")

    lm = sub.add_parser("learn-metric", help="learn a diagonal metric from pair sets")
    lm.add_argument("--data", required=True, help="feature CSV (y column ignored)")
    lm.add_argument("--pairs", required=True, help="JSON with similar/dissimilar index pairs")
    lm.add_argument("--out", required=True, help="output metric JSON")
    lm.add_argument("--max-iter", type=int, default=None)
    lm.add_argument("--step", type=float, default=None)
    lm.add_argument("--tol", type=float, default=None)
    lm.add_argument("--calibrate", action="store_true",
                    help="rescale the result onto the identity metric's distance scale")

    fit = sub.add_parser("fit", help="fit a model on a generated dataset")
    fit.add_argument("--model", choices=("linreg", "logreg"), required=True)
    fit.add_argument("--prior", choices=("gaussian", "laplace", "none"), required=True)
    fit.add_argument("--metric", help="metric JSON (required unless --prior none)")
    fit.add_argument("--data", required=True, help="dataset directory or CSV file")
    fit.add_argument("--out", required=True, help="output model JSON")
    fit.add_argument("--max-iter", type=int, default=None)
    fit.add_argument("--learning-rate", type=float, default=None)
    fit.add_argument("--tol", type=float, default=None)
    fit.add_argument("--floor", type=float, default=None, help="prior variance floor")

    exp = sub.add_parser("experiment", help="run a figure-reproduction experiment")
    exp.add_argument("experiment", choices=harness.EXPERIMENTS)
    exp.add_argument("--config", help="JSON file with defaults for the flags below")
    exp.add_argument("--replicates", type=int, default=None)
    exp.add_argument("--seed", type=int, default=None)
    exp.add_argument("--out", default=None, help="output directory (default: .)")
    exp.add_argument("--n-values", type=int, nargs="+", default=None)
    exp.add_argument("--p", type=int, default=None)
    exp.add_argument("--p-values", type=int, nargs="+", default=None)
    exp.add_argument("--n", type=int, default=None,
                     help="dimension for single-dataset experiments (fig4/fig5)")
    exp.add_argument("--m", type=int, default=None)
    exp.add_argument("--m-val", type=int, default=None)
    exp.add_argument("--knowledge", nargs="+", default=None,
                     choices=harness.KNOWLEDGE_ARMS)
    exp.add_argument("--timing", action="store_true", default=None,
                     help="record measured wall_ms (breaks byte reproducibility)")
    exp.add_argument("--logistic", action="store_true", default=None,
                     help="also run the logistic-model smoke fits")
    return parser


def _cmd_gen(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    config = GenConfig(n=args.n, m=args.m, m_val=args.m_val,
                       relevant_count=args.relevant, noise_sd=args.noise_sd)
    rng = make_rng(args.seed)
    theta = sample_theta(config, rng)
    train, val = generate_dataset(theta, config, rng)
    with open(os.path.join(args.out, "train.csv"), "w", newline="") as fh:
        fh.write(dataset_to_csv(train))
    with open(os.path.join(args.out, "val.csv"), "w", newline="") as fh:
        fh.write(dataset_to_csv(val))
    with open(os.path.join(args.out, "theta.json"), "w") as fh:
        json.dump(theta_to_dict(theta), fh)
        fh.write("\n")
    print(f"wrote train.csv ({config.m}x{config.n}), val.csv ({config.m_val}x{config.n}), "
          f"theta.json to {args.out}")
    return 0


def _read_text(path: str) -> str:
    try:
        with open(path) as fh:
            return fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _cmd_learn_metric(args) -> int:
    X = features_from_csv(_read_text(args.data))
    pairs = PairSets.from_dict(json.loads(_read_text(args.pairs)))
    defaults = MetricLearnOptions()
    opts = MetricLearnOptions(
        max_iterations=args.max_iter if args.max_iter is not None else defaults.max_iterations,
        step_size=args.step if args.step is not None else defaults.step_size,
        tolerance=args.tol if args.tol is not None else defaults.tolerance,
    )
    metric, trace = learn_metric_with_trace(X, pairs, opts)
    if args.calibrate:
        metric = match_distance_scale(X, metric)
    with open(args.out, "w") as fh:
        json.dump(metric.to_dict(), fh)
        fh.write("\n")
    print(f"learned metric over {X.shape[1]} features in {trace.iterations} iterations "
          f"(converged={trace.converged}, dissimilar sum={trace.dissimilar_sum:.6f})")
    return 0


def _load_train(data_path: str) -> Dataset:
    if os.path.isdir(data_path):
        data_path = os.path.join(data_path, "train.csv")
    return dataset_from_csv(_read_text(data_path))


def _cmd_fit(args) -> int:
    ds = _load_train(args.data)
    n = ds.X.shape[1]
    if args.prior == "none":
        metric = DiagonalMetric(np.full(n, glm.OLS_PRIOR_WEIGHT))
    else:
        if not args.metric:
            raise ConfigError("--metric is required unless --prior none")
        metric = DiagonalMetric.from_dict(json.loads(_read_text(args.metric)))
    defaults = glm.FitOptions()
    opts = glm.FitOptions(
        max_iterations=args.max_iter if args.max_iter is not None else defaults.max_iterations,
        learning_rate=args.learning_rate,
        tolerance=args.tol,
        prior_floor=args.floor if args.floor is not None else defaults.prior_floor,
    )
    fitters = {
        ("linreg", "gaussian"): glm.fit_linreg_gaussian,
        ("linreg", "laplace"): glm.fit_linreg_laplace,
        ("linreg", "none"): glm.fit_linreg_gaussian,
        ("logreg", "gaussian"): glm.fit_logreg_gaussian,
        ("logreg", "laplace"): glm.fit_logreg_laplace,
        ("logreg", "none"): glm.fit_logreg_gaussian,
    }
    model = fitters[(args.model, args.prior)](ds.X, ds.y, metric, opts)
    payload = model.to_dict()
    if args.prior == "none":
        payload["prior"] = "none"
    with open(args.out, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    d = model.diagnostics
    print(f"fitted {args.model} (prior={args.prior}): objective={d.objective:.6f} "
          f"iterations={d.iterations} converged={d.converged}")
    return 0


def _merge(cli_value, config_dict, key, fallback):
    if cli_value is not None:
        return cli_value
    if key in config_dict:
        return config_dict[key]
    return fallback


def _cmd_experiment(args) -> int:
    file_cfg = {}
    if args.config:
        file_cfg = json.loads(_read_text(args.config))
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must contain a JSON object")
    defaults = harness.ExperimentConfig(experiment=args.experiment)
    config = harness.ExperimentConfig(
        experiment=args.experiment,
        n_values=tuple(_merge(args.n_values, file_cfg, "n_values", defaults.n_values)),
        m=_merge(args.m, file_cfg, "m", defaults.m),
        m_val=_merge(args.m_val, file_cfg, "m_val", defaults.m_val),
        p=_merge(args.p, file_cfg, "p", defaults.p),
        p_values=tuple(_merge(args.p_values, file_cfg, "p_values", defaults.p_values)),
        n_single=_merge(args.n, file_cfg, "n_single", defaults.n_single),
        replicates=_merge(args.replicates, file_cfg, "replicates", defaults.replicates),
        base_seed=_merge(args.seed, file_cfg, "base_seed", defaults.base_seed),
        knowledge_types=tuple(_merge(args.knowledge, file_cfg, "knowledge_types",
                                     defaults.knowledge_types)),
        timing=bool(_merge(args.timing, file_cfg, "timing", defaults.timing)),
    )
    out_dir = _merge(args.out, file_cfg, "out", ".")
    os.makedirs(out_dir, exist_ok=True)

    table = harness.run_experiment(config)
    if config.experiment == "fig5":
        path = os.path.join(out_dir, "coefficients.csv")
        harness.emit_csv(table, path)
        harness.emit_svg_lineplot(table, "feature", "theta_dmlreg", "experiment",
                                  os.path.join(out_dir, "plot.svg"),
                                  title="coefficient estimates by feature")
        print(f"wrote {path} and plot.svg ({len(table)} features)")
    else:
        results_path = os.path.join(out_dir, "results.csv")
        harness.emit_csv(table, results_path)
        summary = harness.summarize(table)
        harness.emit_csv(summary, os.path.join(out_dir, "summary.csv"))
        x_field = "p" if config.experiment == "fig4" else "n"
        series = "knowledge" if config.experiment in ("fig3", "fig4") else "model"
        harness.emit_svg_lineplot(summary, x_field, "mean_val_mse", series,
                                  os.path.join(out_dir, "plot.svg"),
                                  title=f"{config.experiment}: validation MSE")
        print(f"wrote results.csv ({len(table)} rows), summary.csv, plot.svg to {out_dir}")
    if _merge(args.logistic, file_cfg, "logistic", False):
        for line in harness.run_logistic_smoke(config):
            print(line)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "gen": _cmd_gen,
        "learn-metric": _cmd_learn_metric,
        "fit": _cmd_fit,
        "experiment": _cmd_experiment,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DataError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except DmlregError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
