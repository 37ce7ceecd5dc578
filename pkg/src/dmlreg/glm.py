"""MAP estimation for linear and logistic regression with per-coefficient
priors sized by a diagonal metric, plus classical baselines.

The metric weight A_jj acts as the prior variance (Gaussian prior) or the
prior scale (Laplace prior) of coefficient j, both centered at zero, so a
large weight means weak shrinkage on that coefficient. The noise variance
of the linear likelihood is fixed at 1, which gives the objectives

    gaussian-linear / gaussian prior:   ||y - X t||^2 + sum_j t_j^2 / A_jj
    gaussian-linear / laplace prior:    ||y - X t||^2 + sum_j |t_j| / A_jj
    bernoulli-logistic / gaussian:      nll(t) + 0.5 * sum_j t_j^2 / A_jj
    bernoulli-logistic / laplace:       nll(t) + sum_j |t_j| / A_jj

The Gaussian-prior linear fit is a single SPD solve of the normal
equations (X^T X + A^{-1}) t = X^T y. The Laplace-prior fits use the
subgradient method with step a0/sqrt(t) and best-iterate tracking; the
Gaussian-prior logistic fit uses batch gradient descent with step halving
whenever the objective increases.

Prior floor: A_jj is floored at ``prior_floor`` before inversion in the
closed-form solve. In the iterative fitters a weight at or below the
floor is treated as an infinite penalty and the coefficient is pinned to
exactly zero; carrying the floored weight 1/prior_floor as a finite
penalty instead would make the fixed step schedule oscillate with
amplitude proportional to alpha_t / prior_floor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.spatial.distance

from .errors import (
    ConfigError,
    DimensionMismatchError,
    InvalidHyperparameterError,
    NonBinaryResponseError,
    TooFewRowsError,
)
from .metric_learning import DiagonalMetric
from .numerics import Rng, as_matrix, as_vector, solve_linear

LIKELIHOODS = ("gaussian-linear", "bernoulli-logistic")
PRIORS = ("gaussian", "laplace", "none")

#: lambda grid used for ridge/lasso cross-validation
DEFAULT_LAMBDA_GRID = (1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0)

#: prior weight that makes the Gaussian-prior fit indistinguishable from OLS
OLS_PRIOR_WEIGHT = 1e12


@dataclass(frozen=True)
class ModelSpec:
    likelihood: str
    prior: str
    metric: DiagonalMetric | None = None

    def __post_init__(self):
        if self.likelihood not in LIKELIHOODS:
            raise ConfigError(f"unknown likelihood {self.likelihood!r}")
        if self.prior not in PRIORS:
            raise ConfigError(f"unknown prior {self.prior!r}")
        if self.prior != "none" and self.metric is None:
            raise ConfigError(f"prior {self.prior!r} requires a metric")


@dataclass(frozen=True)
class FitDiagnostics:
    objective: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class FittedModel:
    coefficients: np.ndarray
    spec: ModelSpec
    diagnostics: FitDiagnostics
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coefficients", as_vector(self.coefficients))

    def to_dict(self) -> dict:
        return {
            "likelihood": self.spec.likelihood,
            "prior": self.spec.prior,
            "coefficients": [float(c) for c in self.coefficients],
            "intercept": float(self.intercept),
            "diagnostics": {
                "objective": float(self.diagnostics.objective),
                "iterations": int(self.diagnostics.iterations),
                "converged": bool(self.diagnostics.converged),
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedModel":
        diag = d.get("diagnostics", {})
        n = len(d["coefficients"])
        prior = d.get("prior", "none")
        metric = DiagonalMetric.identity(n) if prior != "none" else None
        return cls(
            coefficients=np.asarray(d["coefficients"], dtype=float),
            spec=ModelSpec(d["likelihood"], prior, metric),
            diagnostics=FitDiagnostics(
                objective=float(diag.get("objective", float("nan"))),
                iterations=int(diag.get("iterations", 0)),
                converged=bool(diag.get("converged", True)),
            ),
            intercept=float(d.get("intercept", 0.0)),
        )


@dataclass(frozen=True)
class KnnModel:
    """k-nearest-neighbor regressor: stores the training data verbatim."""

    X: np.ndarray
    y: np.ndarray
    k: int

    def __post_init__(self):
        X = as_matrix(self.X)
        y = as_vector(self.y)
        if X.shape[0] != y.shape[0]:
            raise DimensionMismatchError("X rows and y length differ")
        if not 1 <= self.k <= X.shape[0]:
            raise InvalidHyperparameterError(f"k={self.k} outside [1, {X.shape[0]}]")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)


@dataclass(frozen=True)
class FitOptions:
    """Solver knobs. ``learning_rate``/``tolerance`` of None pick the
    per-method default (1e-3 and 1e-8 for subgradient fits, 1e-2 and 1e-6
    for logistic gradient descent)."""

    max_iterations: int = 50_000
    learning_rate: float | None = None
    tolerance: float | None = None
    prior_floor: float = 1e-6
    add_intercept: bool = False
    standardize: bool = False

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ConfigError("max_iterations must be positive")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.tolerance is not None and self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if self.prior_floor <= 0:
            raise ConfigError("prior_floor must be positive")


def sigmoid(z):
    """Numerically stable logistic function, elementwise on arrays."""
    z = np.asarray(z, dtype=float)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out[0]) if scalar else out


def mse(y_true, y_pred) -> float:
    y_true = as_vector(y_true)
    y_pred = as_vector(y_pred)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatchError("mse arguments have different lengths")
    d = y_true - y_pred
    return float(np.mean(d * d))


# ---------------------------------------------------------------------------
# objective values (shared by fitters, tests, and diagnostics)
# ---------------------------------------------------------------------------

def floored_weights(metric: DiagonalMetric, floor: float) -> np.ndarray:
    return np.maximum(metric.weights, floor)


def linreg_gaussian_objective(X, y, metric, theta, floor=1e-6) -> float:
    r = y - X @ theta
    a = floored_weights(metric, floor)
    return float(r @ r + np.sum(theta * theta / a))


def linreg_laplace_objective(X, y, metric, theta, floor=1e-6) -> float:
    r = y - X @ theta
    a = floored_weights(metric, floor)
    return float(r @ r + np.sum(np.abs(theta) / a))


def logistic_nll(X, y, theta) -> float:
    z = X @ theta
    return float(np.sum(np.logaddexp(0.0, z) - y * z))


def logreg_gaussian_objective(X, y, metric, theta, floor=1e-6) -> float:
    a = floored_weights(metric, floor)
    return logistic_nll(X, y, theta) + 0.5 * float(np.sum(theta * theta / a))


def logreg_laplace_objective(X, y, metric, theta, floor=1e-6) -> float:
    a = floored_weights(metric, floor)
    return logistic_nll(X, y, theta) + float(np.sum(np.abs(theta) / a))


def lasso_objective(X, y, lam, theta) -> float:
    r = y - X @ theta
    return float(r @ r + lam * np.sum(np.abs(theta)))


# ---------------------------------------------------------------------------
# fitters
# ---------------------------------------------------------------------------

def _check_xym(X, y, metric):
    X = as_matrix(X)
    y = as_vector(y)
    if X.shape[0] != y.shape[0]:
        raise DimensionMismatchError(
            f"X has {X.shape[0]} rows but y has length {y.shape[0]}"
        )
    if metric is not None and len(metric) != X.shape[1]:
        raise DimensionMismatchError(
            f"X has {X.shape[1]} columns but metric has length {len(metric)}"
        )
    return X, y


def _check_binary(y):
    if not np.all((y == 0.0) | (y == 1.0)):
        raise NonBinaryResponseError("logistic response must contain only 0 and 1")


def _standardize_columns(X):
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return X / scale, scale


def _finish_linear(theta, scale, intercepted, spec, diagnostics):
    intercept = 0.0
    if intercepted:
        intercept = float(theta[-1])
        theta = theta[:-1]
    if scale is not None:
        theta = theta / scale
    return FittedModel(theta, spec, diagnostics, intercept=intercept)


def _prepare_design(X, metric, opts):
    """Apply the optional standardize/intercept transforms.

    Returns (X', weights', scale, intercepted). The intercept column gets
    an effectively flat prior so it is never shrunk.
    """
    scale = None
    if opts.standardize:
        X, scale = _standardize_columns(X)
    weights = metric.weights
    intercepted = False
    if opts.add_intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        weights = np.append(weights, OLS_PRIOR_WEIGHT)
        intercepted = True
    return X, weights, scale, intercepted


def fit_linreg_gaussian(X, y, metric: DiagonalMetric, opts: FitOptions | None = None) -> FittedModel:
    """Closed-form MAP fit: solve (X^T X + A^{-1}) t = X^T y."""
    opts = opts or FitOptions()
    X, y = _check_xym(X, y, metric)
    Xd, weights, scale, intercepted = _prepare_design(X, metric, opts)
    inv_prior = 1.0 / np.maximum(weights, opts.prior_floor)
    gram = Xd.T @ Xd
    gram[np.diag_indices_from(gram)] += inv_prior
    theta = solve_linear(gram, Xd.T @ y)
    obj = float(np.sum((y - Xd @ theta) ** 2) + np.sum(theta * theta * inv_prior))
    diag = FitDiagnostics(objective=obj, iterations=0, converged=True)
    spec = ModelSpec("gaussian-linear", "gaussian", metric)
    return _finish_linear(theta, scale, intercepted, spec, diag)


_STALL_WINDOW = 1000  # iterations between objective-progress checks


def _subgradient_minimize(theta0, value_and_subgrad, alpha0, max_iterations, tolerance):
    """Subgradient method with alpha_t = alpha0 / sqrt(t) and best-iterate
    tracking. The iterate objective oscillates, so the stopping rule
    watches the best value seen: stop once it improves by less than
    ``tolerance`` (relative) over a window of iterations.

    Returns (best_theta, best_value, iterations, converged)."""
    theta = theta0.copy()
    best_theta = theta0.copy()
    best_f, _ = value_and_subgrad(theta)
    window_f = best_f
    iterations = 0
    converged = False
    for t in range(1, max_iterations + 1):
        iterations = t
        f, g = value_and_subgrad(theta)
        if f < best_f:
            best_f = f
            best_theta = theta.copy()
        if t % _STALL_WINDOW == 0:
            if window_f - best_f <= tolerance * max(1.0, abs(best_f)):
                converged = True
                break
            window_f = best_f
        theta = theta - (alpha0 / np.sqrt(t)) * g
    return best_theta, best_f, iterations, converged


def _laplace_active_set(weights, floor):
    """Coordinates with weight above the floor; the rest are pinned at 0."""
    return weights > floor


def fit_linreg_laplace(X, y, metric: DiagonalMetric, opts: FitOptions | None = None) -> FittedModel:
    """Subgradient MAP fit of ||y - X t||^2 + sum_j |t_j| / A_jj.

    Warm-started at the Gaussian-prior closed form with the same metric,
    which is cheap and close to the Laplace optimum.
    """
    opts = opts or FitOptions()
    X, y = _check_xym(X, y, metric)
    Xd, weights, scale, intercepted = _prepare_design(X, metric, opts)
    alpha0 = opts.learning_rate if opts.learning_rate is not None else 1e-3
    tol = opts.tolerance if opts.tolerance is not None else 1e-8

    active = _laplace_active_set(weights, opts.prior_floor)
    theta_full = np.zeros(Xd.shape[1])
    if np.any(active):
        Xa = Xd[:, active]
        c = 1.0 / weights[active]

        inv_prior = c.copy()
        gram = Xa.T @ Xa
        gram[np.diag_indices_from(gram)] += inv_prior
        theta0 = solve_linear(gram, Xa.T @ y)

        def value_and_subgrad(th):
            r = y - Xa @ th
            f = float(r @ r + c @ np.abs(th))
            g = -2.0 * (Xa.T @ r) + c * np.sign(th)
            return f, g

        theta_a, best_f, iterations, converged = _subgradient_minimize(
            theta0, value_and_subgrad, alpha0, opts.max_iterations, tol
        )
        theta_full[active] = theta_a
    else:
        best_f = float(y @ y)
        iterations = 0
        converged = True

    diag = FitDiagnostics(objective=best_f, iterations=iterations, converged=converged)
    spec = ModelSpec("gaussian-linear", "laplace", metric)
    return _finish_linear(theta_full, scale, intercepted, spec, diag)


def _logistic_gaussian_descent(Xa, y, c, alpha, tol, max_iterations):
    """Batch gradient descent on nll(t) + 0.5 * c . t^2 with step halving
    on objective increase. Returns (theta, objective, iterations, converged)."""
    theta = np.zeros(Xa.shape[1])

    def objective(th):
        z = Xa @ th
        return float(np.sum(np.logaddexp(0.0, z) - y * z) + 0.5 * (c @ (th * th)))

    f = objective(theta)
    iterations = 0
    converged = False
    for t in range(1, max_iterations + 1):
        iterations = t
        p = sigmoid(Xa @ theta)
        g = Xa.T @ (p - y) + c * theta
        if float(np.linalg.norm(g)) <= tol:
            converged = True
            break
        proposal = theta - alpha * g
        f_prop = objective(proposal)
        if f_prop > f:
            alpha *= 0.5
            continue
        theta = proposal
        f = f_prop
    return theta, f, iterations, converged


def fit_logreg_gaussian(X, y, metric: DiagonalMetric, opts: FitOptions | None = None) -> FittedModel:
    """Gradient-descent MAP fit of the logistic likelihood with Gaussian
    priors: nll(t) + 0.5 * sum_j t_j^2 / A_jj. The learning rate is halved
    whenever a step would increase the objective."""
    opts = opts or FitOptions()
    X, y = _check_xym(X, y, metric)
    _check_binary(y)
    Xd, weights, scale, intercepted = _prepare_design(X, metric, opts)
    alpha = opts.learning_rate if opts.learning_rate is not None else 1e-2
    tol = opts.tolerance if opts.tolerance is not None else 1e-6

    active = _laplace_active_set(weights, opts.prior_floor)
    theta_full = np.zeros(Xd.shape[1])
    Xa = Xd[:, active]
    c = 1.0 / weights[active]
    theta, f, iterations, converged = _logistic_gaussian_descent(
        Xa, y, c, alpha, tol, opts.max_iterations
    )
    theta_full[active] = theta

    diag = FitDiagnostics(objective=f, iterations=iterations, converged=converged)
    spec = ModelSpec("bernoulli-logistic", "gaussian", metric)
    return _finish_linear(theta_full, scale, intercepted, spec, diag)


def fit_logreg_laplace(X, y, metric: DiagonalMetric, opts: FitOptions | None = None) -> FittedModel:
    """Subgradient MAP fit of nll(t) + sum_j |t_j| / A_jj, warm-started
    at the Gaussian-prior MAP with the same weights."""
    opts = opts or FitOptions()
    X, y = _check_xym(X, y, metric)
    _check_binary(y)
    Xd, weights, scale, intercepted = _prepare_design(X, metric, opts)
    alpha0 = opts.learning_rate if opts.learning_rate is not None else 1e-3
    tol = opts.tolerance if opts.tolerance is not None else 1e-8

    active = _laplace_active_set(weights, opts.prior_floor)
    theta_full = np.zeros(Xd.shape[1])
    Xa = Xd[:, active]
    c = 1.0 / weights[active]
    theta0, _, _, _ = _logistic_gaussian_descent(
        Xa, y, c, 1e-2, 1e-6, min(opts.max_iterations, 5000)
    )

    def value_and_subgrad(th):
        z = Xa @ th
        f = float(np.sum(np.logaddexp(0.0, z) - y * z) + c @ np.abs(th))
        g = Xa.T @ (sigmoid(z) - y) + c * np.sign(th)
        return f, g

    theta_a, best_f, iterations, converged = _subgradient_minimize(
        theta0, value_and_subgrad, alpha0, opts.max_iterations, tol
    )
    theta_full[active] = theta_a

    diag = FitDiagnostics(objective=best_f, iterations=iterations, converged=converged)
    spec = ModelSpec("bernoulli-logistic", "laplace", metric)
    return _finish_linear(theta_full, scale, intercepted, spec, diag)


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def _cd_sweeps(gram, xty, diag, theta, q, half_lam, tol, max_sweeps):
    """Coordinate-descent sweeps over theta in place; returns (sweeps, done)."""
    n = theta.shape[0]
    for sweep in range(1, max_sweeps + 1):
        max_delta = 0.0
        for j in range(n):
            d_j = diag[j]
            if d_j <= 0.0:
                continue
            rho = xty[j] - q[j] + d_j * theta[j]
            if rho > half_lam:
                new = (rho - half_lam) / d_j
            elif rho < -half_lam:
                new = (rho + half_lam) / d_j
            else:
                new = 0.0
            delta = new - theta[j]
            if delta != 0.0:
                for i in range(n):
                    q[i] += gram[i, j] * delta
                theta[j] = new
                if abs(delta) > max_delta:
                    max_delta = abs(delta)
        if max_delta < tol:
            return sweep, True
    return max_sweeps, False


try:  # pragma: no cover - exercised implicitly
    import numba

    _cd_sweeps = numba.njit(cache=True)(_cd_sweeps)
except ImportError:  # pragma: no cover
    pass


def lasso_coordinate_descent(X, y, lam, tol=1e-8, max_sweeps=100_000, theta0=None):
    """Coordinate descent for ||y - X t||^2 + lam * ||t||_1.

    Gram-matrix formulation: each coordinate update is exact, and the
    stopping rule is max |coordinate change| < tol over a full sweep.
    Returns (theta, sweeps, converged).
    """
    X = as_matrix(X)
    y = as_vector(y)
    n = X.shape[1]
    gram = X.T @ X
    xty = X.T @ y
    diag = np.diag(gram).copy()
    theta = np.zeros(n) if theta0 is None else np.asarray(theta0, dtype=float).copy()
    q = gram @ theta  # running X^T X theta
    sweeps, converged = _cd_sweeps(gram, xty, diag, theta, q, 0.5 * lam, tol, max_sweeps)
    return theta, int(sweeps), bool(converged)


def fit_baseline(kind: str, X, y, lam: float | None = None, k: int | None = None):
    """OLS, ridge(lam), lasso(lam) or knn(k) reference models.

    OLS and ridge reuse the Gaussian-prior fit (flat prior, respectively
    uniform weights 1/lam); lasso runs coordinate descent; knn stores the
    training data and is used through :func:`predict`.
    """
    X, y = _check_xym(X, y, None)
    if kind == "ols":
        metric = DiagonalMetric(np.full(X.shape[1], OLS_PRIOR_WEIGHT))
        return fit_linreg_gaussian(X, y, metric)
    if kind == "ridge":
        if lam is None or lam <= 0:
            raise InvalidHyperparameterError("ridge requires lam > 0")
        metric = DiagonalMetric(np.full(X.shape[1], 1.0 / lam))
        return fit_linreg_gaussian(X, y, metric)
    if kind == "lasso":
        if lam is None or lam <= 0:
            raise InvalidHyperparameterError("lasso requires lam > 0")
        theta, sweeps, converged = lasso_coordinate_descent(X, y, lam)
        metric = DiagonalMetric(np.full(X.shape[1], 1.0 / lam))
        diag = FitDiagnostics(
            objective=lasso_objective(X, y, lam, theta),
            iterations=sweeps,
            converged=converged,
        )
        return FittedModel(theta, ModelSpec("gaussian-linear", "laplace", metric), diag)
    if kind == "knn":
        if k is None or k < 1:
            raise InvalidHyperparameterError("knn requires k >= 1")
        return KnnModel(X, y, int(k))
    raise InvalidHyperparameterError(f"unknown baseline kind {kind!r}")


def predict(model, X_new) -> np.ndarray:
    """Model predictions: X t (linear), sigmoid(X t) (logistic), or the
    mean response of the k nearest training rows (knn)."""
    X_new = as_matrix(X_new)
    if isinstance(model, KnnModel):
        if X_new.shape[1] != model.X.shape[1]:
            raise DimensionMismatchError("feature count mismatch")
        dists = scipy.spatial.distance.cdist(X_new, model.X)
        order = np.argsort(dists, axis=1, kind="stable")[:, : model.k]
        return model.y[order].mean(axis=1)
    if X_new.shape[1] != model.coefficients.shape[0]:
        raise DimensionMismatchError("feature count mismatch")
    z = X_new @ model.coefficients + model.intercept
    if model.spec.likelihood == "bernoulli-logistic":
        return sigmoid(z)
    return z


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CvResult:
    best_lambda: float
    rows: tuple  # (lambda, fold, held-out mse)
    mean_mse: dict


def _fold_indices(m, folds, rng: Rng):
    perm = rng.permutation(m)
    return np.array_split(perm, folds)


def cross_validate(kind: str, X, y, lam_grid=DEFAULT_LAMBDA_GRID, folds: int = 5,
                   rng: Rng | None = None) -> CvResult:
    """Pick the ridge/lasso penalty with smallest mean held-out MSE.

    Fold assignment is a seeded permutation split. Ties are broken toward
    the larger lambda. Lasso fits are warm-started down the lambda path
    within each fold and run on a bounded sweep budget: tiny lambdas in
    the underdetermined regime converge extremely slowly, and their fold
    MSE is far off the optimum long before full precision matters.
    """
    if kind not in ("ridge", "lasso"):
        raise InvalidHyperparameterError(f"cross_validate supports ridge/lasso, got {kind!r}")
    if folds < 2:
        raise InvalidHyperparameterError("folds must be >= 2")
    if not lam_grid:
        raise InvalidHyperparameterError("lambda grid is empty")
    X, y = _check_xym(X, y, None)
    m = X.shape[0]
    if m < folds:
        raise TooFewRowsError(f"{m} rows < {folds} folds")
    if rng is None:
        rng = np.random.default_rng(0)

    grid = sorted(float(l) for l in lam_grid)
    if any(l <= 0 for l in grid):
        raise InvalidHyperparameterError("lambda values must be positive")
    rows = []
    errors = {lam: [] for lam in grid}
    for fold, test_idx in enumerate(_fold_indices(m, folds, rng)):
        mask = np.ones(m, dtype=bool)
        mask[test_idx] = False
        X_tr, y_tr = X[mask], y[mask]
        X_te, y_te = X[test_idx], y[test_idx]
        warm = None
        for lam in reversed(grid):  # largest lambda first for warm starts
            if kind == "ridge":
                model = fit_baseline("ridge", X_tr, y_tr, lam=lam)
                theta = model.coefficients
            else:
                theta, _, _ = lasso_coordinate_descent(
                    X_tr, y_tr, lam, theta0=warm, max_sweeps=10_000
                )
                warm = theta
            err = mse(y_te, X_te @ theta)
            errors[lam].append(err)
            rows.append((lam, fold, err))
    mean_mse = {lam: float(np.mean(errs)) for lam, errs in errors.items()}
    best = min(grid, key=lambda lam: (mean_mse[lam], -lam))
    rows.sort(key=lambda r: (r[0], r[1]))
    return CvResult(best_lambda=best, rows=tuple(rows), mean_mse=mean_mse)


def select_knn_k(X, y, ks=(1, 3, 5, 10, 20), folds: int = 5, rng: Rng | None = None) -> int:
    """5-fold CV over the neighbor count; ties go to the smaller k."""
    X, y = _check_xym(X, y, None)
    m = X.shape[0]
    if m < folds:
        raise TooFewRowsError(f"{m} rows < {folds} folds")
    if rng is None:
        rng = np.random.default_rng(0)
    ks = sorted(int(k) for k in ks)
    if any(k < 1 for k in ks):
        raise InvalidHyperparameterError("k must be >= 1")
    scores = {k: [] for k in ks}
    for test_idx in _fold_indices(m, folds, rng):
        mask = np.ones(m, dtype=bool)
        mask[test_idx] = False
        usable = [k for k in ks if k <= int(mask.sum())]
        for k in usable:
            model = KnnModel(X[mask], y[mask], k)
            scores[k].append(mse(y[test_idx], predict(model, X[test_idx])))
    means = {k: float(np.mean(v)) for k, v in scores.items() if v}
    return min(means, key=lambda k: (means[k], k))
