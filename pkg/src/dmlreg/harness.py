"""Experiment orchestration: baseline comparisons, knowledge-quality
sweeps, pair-budget sweeps, and coefficient tables, with CSV and SVG
emission.

Every run is a pure function of (config, base_seed). Randomness is
routed through per-task substreams keyed on (experiment id, n, purpose,
replicate), so adding or removing replicates never disturbs the others.

Results are long-format rows. ``wall_ms`` is 0 unless timing is enabled:
measured timings would break byte-for-byte reproducibility of the output
files, which takes precedence.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, fields, replace

import numpy as np

from . import glm
from .errors import ConfigError, DmlregError
from .expert_sim import Dataset, GenConfig, KnowledgeType, generate_dataset, generate_pair_sets, make_true_metric, sample_theta
from .metric_learning import DiagonalMetric, MetricLearnOptions, learn_metric, match_distance_scale
from .numerics import substream

logger = logging.getLogger(__name__)

EXPERIMENTS = ("fig1", "fig3", "fig4", "fig5")
_EXPERIMENT_ID = {"fig1": 1, "fig3": 3, "fig4": 4, "fig5": 5}

# substream purposes
_THETA, _DATA, _NOISY, _INCORRECT, _CV, _KNN = range(6)

KNOWLEDGE_ARMS = ("perfect", "noisy", "incorrect", "euclidean")

DMLREG_MODEL = "linreg_laplace_dmlreg"
LASSO1_MODEL = "lasso_lam1"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_values: tuple = (10, 25, 50, 75, 100)
    m: int = 100
    m_val: int = 900
    p: int = 300
    p_values: tuple = (25, 50, 100, 200, 300, 500, 700)
    n_single: int = 100  # dimension for the single-dataset experiments
    replicates: int = 100
    base_seed: int = 0
    knowledge_types: tuple = KNOWLEDGE_ARMS
    noisy_sd: float = 0.5
    metric_opts: MetricLearnOptions = MetricLearnOptions()
    fit_opts: glm.FitOptions = glm.FitOptions()
    timing: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not self.n_values or not self.p_values:
            raise ConfigError("sweep lists must be nonempty")
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        unknown = set(self.knowledge_types) - set(KNOWLEDGE_ARMS)
        if unknown:
            raise ConfigError(f"unknown knowledge arms: {sorted(unknown)}")


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    replicate: int
    n: int
    p: int
    model: str
    knowledge: str
    metric_source: str
    val_mse: float
    wall_ms: int


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    n: int
    p: int
    model: str
    knowledge: str
    metric_source: str
    mean_val_mse: float
    replicates: int


@dataclass(frozen=True)
class CoefficientRow:
    experiment: str
    feature: int
    theta_true: float
    theta_dmlreg: float
    theta_lasso: float
    relevant: int


def _stream(config, n, purpose, replicate):
    exp_id = _EXPERIMENT_ID[config.experiment]
    return substream(config.base_seed, exp_id, n, purpose, replicate)


def _gen_config(config, n):
    return GenConfig(n=n, m=config.m, m_val=config.m_val)


def _replicate_data(config, n, rep) -> tuple[Dataset, Dataset, np.ndarray]:
    """Training and validation splits for one replicate; theta is shared
    across replicates of the same (experiment, n)."""
    gen = _gen_config(config, n)
    theta = sample_theta(gen, _stream(config, n, _THETA, 0))
    train, val = generate_dataset(theta, gen, _stream(config, n, _DATA, rep))
    return train, val, theta


def _arm_metric(config, arm, train, theta, n, rep, p) -> tuple[DiagonalMetric, str]:
    """Prior metric for one knowledge arm.

    Learned arms rank pairs with the simulated true metric, learn weights
    from those pairs, then rescale the result onto the identity metric's
    distance scale: the learning program fixes only an arbitrary overall
    scale, while the prior needs weights comparable to the unit-variance
    baseline arm.
    """
    if arm == "euclidean":
        return DiagonalMetric.identity(n), "euclidean"
    if arm == "perfect":
        true_metric = make_true_metric(KnowledgeType.perfect(), theta,
                                       _stream(config, n, _NOISY, rep))
    elif arm == "noisy":
        true_metric = make_true_metric(KnowledgeType.noisy(config.noisy_sd), theta,
                                       _stream(config, n, _NOISY, rep))
    else:
        true_metric = make_true_metric(KnowledgeType.incorrect(), theta,
                                       _stream(config, n, _INCORRECT, rep))
    pairs = generate_pair_sets(train.X, true_metric, p)
    learned = learn_metric(train.X, pairs, config.metric_opts)
    return match_distance_scale(train.X, learned), "learned"


class _Timer:
    def __init__(self, enabled):
        self.enabled = enabled
        self.start = time.perf_counter() if enabled else 0.0

    def ms(self) -> int:
        if not self.enabled:
            return 0
        return int(round(1000.0 * (time.perf_counter() - self.start)))


def run_fig1(config: ExperimentConfig) -> list[ResultRow]:
    """OLS / kNN / ridge-CV / lasso-CV validation error across dimensions."""
    rows = []
    for n in config.n_values:
        for rep in range(config.replicates):
            train, val, _ = _replicate_data(config, n, rep)
            for model_name in ("ols", "knn", "ridge_cv", "lasso_cv"):
                timer = _Timer(config.timing)
                try:
                    if model_name == "ols":
                        model = glm.fit_baseline("ols", train.X, train.y)
                    elif model_name == "knn":
                        k = glm.select_knn_k(train.X, train.y,
                                             rng=_stream(config, n, _KNN, rep))
                        model = glm.fit_baseline("knn", train.X, train.y, k=k)
                    else:
                        kind = model_name.removesuffix("_cv")
                        cv = glm.cross_validate(kind, train.X, train.y,
                                                rng=_stream(config, n, _CV, rep))
                        model = glm.fit_baseline(kind, train.X, train.y,
                                                 lam=cv.best_lambda)
                    err = glm.mse(val.y, glm.predict(model, val.X))
                except DmlregError as exc:
                    logger.warning("fig1 %s n=%d rep=%d failed: %s", model_name, n, rep, exc)
                    err = float("nan")
                rows.append(ResultRow(config.experiment, rep, n, 0, model_name,
                                      "none", "none", float(err), timer.ms()))
    return _sorted_rows(rows)


def _dmlreg_arm_row(config, arm, train, val, theta, n, rep, p) -> ResultRow:
    timer = _Timer(config.timing)
    try:
        metric, source = _arm_metric(config, arm, train, theta, n, rep, p)
        fit = glm.fit_linreg_laplace(train.X, train.y, metric, config.fit_opts)
        err = glm.mse(val.y, glm.predict(fit, val.X))
    except DmlregError as exc:
        logger.warning("%s arm=%s n=%d p=%d rep=%d failed: %s",
                       config.experiment, arm, n, p, rep, exc)
        err, source = float("nan"), "failed"
    return ResultRow(config.experiment, rep, n, p, DMLREG_MODEL, arm, source,
                     float(err), timer.ms())


def run_fig3(config: ExperimentConfig) -> list[ResultRow]:
    """Laplace-prior fits with learned metrics per knowledge arm, across n."""
    rows = []
    for n in config.n_values:
        for rep in range(config.replicates):
            train, val, theta = _replicate_data(config, n, rep)
            for arm in config.knowledge_types:
                rows.append(_dmlreg_arm_row(config, arm, train, val, theta,
                                            n, rep, config.p))
    return _sorted_rows(rows)


def run_fig4(config: ExperimentConfig) -> list[ResultRow]:
    """Pair-budget sweep on a single dataset at fixed dimension."""
    n = config.n_single
    rows = []
    train, val, theta = _replicate_data(config, n, 0)
    for p in config.p_values:
        for arm in config.knowledge_types:
            rows.append(_dmlreg_arm_row(config, arm, train, val, theta, n, 0, p))
    return _sorted_rows(rows)


def run_fig5(config: ExperimentConfig) -> list[CoefficientRow]:
    """True vs estimated coefficients on a single dataset: the noisy-arm
    Laplace fit against the unit-penalty lasso."""
    n = config.n_single
    train, _, theta = _replicate_data(config, n, 0)
    metric, _ = _arm_metric(config, "noisy", train, theta, n, 0, config.p)
    dml = glm.fit_linreg_laplace(train.X, train.y, metric, config.fit_opts)
    lasso = glm.fit_baseline("lasso", train.X, train.y, lam=1.0)
    gen = _gen_config(config, n)
    return [
        CoefficientRow(
            experiment=config.experiment,
            feature=j,
            theta_true=float(theta[j]),
            theta_dmlreg=float(dml.coefficients[j]),
            theta_lasso=float(lasso.coefficients[j]),
            relevant=int(j < gen.relevant_count),
        )
        for j in range(n)
    ]


def run_experiment(config: ExperimentConfig):
    runner = {"fig1": run_fig1, "fig3": run_fig3, "fig4": run_fig4,
              "fig5": run_fig5}[config.experiment]
    return runner(config)


def _sorted_rows(rows):
    return sorted(rows, key=lambda r: (r.experiment, r.knowledge, r.model,
                                       r.n, r.p, r.replicate))


def summarize(rows: list[ResultRow]) -> list[SummaryRow]:
    """Mean validation MSE per (experiment, n, p, model, knowledge, source)."""
    groups: dict = {}
    for r in rows:
        key = (r.experiment, r.n, r.p, r.model, r.knowledge, r.metric_source)
        groups.setdefault(key, []).append(r.val_mse)
    out = [
        SummaryRow(experiment=k[0], n=k[1], p=k[2], model=k[3], knowledge=k[4],
                   metric_source=k[5], mean_val_mse=float(np.mean(v)),
                   replicates=len(v))
        for k, v in groups.items()
    ]
    return sorted(out, key=lambda r: (r.experiment, r.knowledge, r.model, r.n, r.p))


def run_logistic_smoke(config: ExperimentConfig) -> list[str]:
    """Fit both logistic models on median-thresholded labels and report
    their diagnostics. Not part of any figure table."""
    n = config.n_single
    train, _, _ = _replicate_data(config, n, 0)
    labels = (train.y > np.median(train.y)).astype(float)
    metric = DiagonalMetric.identity(n)
    lines = []
    for name, fitter in (("logreg_gaussian", glm.fit_logreg_gaussian),
                         ("logreg_laplace", glm.fit_logreg_laplace)):
        fit = fitter(train.X, labels, metric, config.fit_opts)
        d = fit.diagnostics
        lines.append(
            f"logistic-smoke {name}: objective={d.objective:.6f} "
            f"iterations={d.iterations} converged={d.converged}"
        )
    return lines


# ---------------------------------------------------------------------------
# emission
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_csv(rows, path) -> None:
    """Write dataclass rows as CSV: header row, '.' decimals, LF endings.

    Byte-deterministic for a given row list; floats use shortest
    round-trip formatting.
    """
    if not rows:
        raise ConfigError("emit_csv needs at least one row type to derive a header")
    names = [f.name for f in fields(rows[0])]
    lines = [",".join(names)]
    for r in rows:
        lines.append(",".join(_format_cell(getattr(r, name)) for name in names))
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_csv_header_only(row_type, path) -> None:
    names = [f.name for f in fields(row_type)]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(names) + "\n")


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
            "#8c564b", "#17becf", "#7f7f7f")


def _svg_num(v: float) -> str:
    return format(float(v), ".2f")


def emit_svg_lineplot(rows, x_field, y_field, series_field, path,
                      title: str = "", width: int = 800, height: int = 500) -> None:
    """One polyline per series value with labelled axes and a legend.

    Hand-rolled SVG so output bytes depend only on the row data.
    """
    if not rows:
        raise ConfigError("cannot plot an empty table")
    for field_name in (x_field, y_field, series_field):
        if not hasattr(rows[0], field_name):
            raise ConfigError(f"rows have no field {field_name!r}")
    pts: dict = {}
    for r in rows:
        pts.setdefault(str(getattr(r, series_field)), []).append(
            (float(getattr(r, x_field)), float(getattr(r, y_field)))
        )
    series = sorted(pts)
    xs = [x for p in pts.values() for x, _ in p]
    ys = [y for p in pts.values() for _, y in p]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    left, right, top, bottom = 70, 170, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + pw * (x - x_lo) / (x_hi - x_lo)

    def sy(y):
        return top + ph * (1.0 - (y - y_lo) / (y_hi - y_lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{left}" y="24" font-size="14">{title}</text>' if title else "",
        # axes
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<text x="{left + pw // 2}" y="{height - 12}" text-anchor="middle">{x_field}</text>',
        f'<text x="18" y="{top + ph // 2}" text-anchor="middle" '
        f'transform="rotate(-90 18 {top + ph // 2})">{y_field}</text>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        out.append(f'<line x1="{_svg_num(sx(xv))}" y1="{top + ph}" '
                   f'x2="{_svg_num(sx(xv))}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_svg_num(sx(xv))}" y="{top + ph + 20}" '
                   f'text-anchor="middle">{format(xv, ".4g")}</text>')
        out.append(f'<line x1="{left - 5}" y1="{_svg_num(sy(yv))}" '
                   f'x2="{left}" y2="{_svg_num(sy(yv))}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{_svg_num(sy(yv) + 4)}" '
                   f'text-anchor="end">{format(yv, ".4g")}</text>')
    for idx, name in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        points = sorted(pts[name])
        coords = " ".join(f"{_svg_num(sx(x))},{_svg_num(sy(y))}" for x, y in points)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 16 * idx
        out.append(f'<line x1="{left + pw + 10}" y1="{ly + 4}" x2="{left + pw + 34}" '
                   f'y2="{ly + 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 40}" y="{ly + 8}">{name}</text>')
    out.append("</svg>")
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(line for line in out if line) + "\n")
