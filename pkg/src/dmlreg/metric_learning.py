"""Diagonal Mahalanobis metric learning from similar/dissimilar pairs.

The distance is d_A(x_i, x_j) = sqrt((x_i - x_j)^T A (x_i - x_j)) with
A = diag(w), w >= 0. Given index pair sets S (similar) and D (dissimilar)
over the rows of X, the learner solves

    minimize_w    sum_{(i,j) in S} (x_i - x_j)^T diag(w) (x_i - x_j)
    subject to    sum_{(i,j) in D} d_A(x_i, x_j) >= 1,   w >= 0

by projected gradient descent. The objective is linear in w, so its
gradient is the constant vector of summed squared differences over S.
Each step clips w to the nonnegative orthant and, when the dissimilarity
sum s drops below 1, rescales w <- w / s^2, which restores the constraint
with equality because distances scale as sqrt(c) under w <- c w.

The step length is normalized to the current objective scale: a step of
``step_size`` shrinks the pre-projection objective by that relative
fraction, which keeps the default meaningful across problem sizes (the
feasible weight scale varies by orders of magnitude with the pair count
and dimension). Steps that would raise the objective after projection
are rejected and the step size halved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    DegeneratePairsError,
    DimensionMismatchError,
    EmptyPairSetError,
    NumericalError,
)
from .numerics import as_matrix, as_vector

_REL_INCREASE_SLACK = 1e-12  # accept steps that do not raise the objective


@dataclass(frozen=True)
class DiagonalMetric:
    """Nonnegative per-feature weights, the diagonal of the metric matrix."""

    weights: np.ndarray

    def __post_init__(self):
        w = as_vector(self.weights)
        if np.any(w < 0):
            raise DataError("metric weights must be nonnegative")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.shape[0]

    @classmethod
    def identity(cls, n: int) -> "DiagonalMetric":
        return cls(np.ones(n))

    def scaled(self, c: float) -> "DiagonalMetric":
        if c < 0:
            raise ConfigError("scale factor must be nonnegative")
        return DiagonalMetric(self.weights * c)

    def to_dict(self) -> dict:
        return {"weights": [float(w) for w in self.weights]}

    @classmethod
    def from_dict(cls, d: dict) -> "DiagonalMetric":
        return cls(np.asarray(d["weights"], dtype=float))


@dataclass(frozen=True)
class PairSets:
    """Index pairs labelled similar (S) and dissimilar (D), zero-based, i < j."""

    similar: tuple
    dissimilar: tuple

    def __post_init__(self):
        sim = _normalize_pairs(self.similar, "similar")
        dis = _normalize_pairs(self.dissimilar, "dissimilar")
        overlap = set(sim) & set(dis)
        if overlap:
            raise DataError(f"pairs appear in both sets: {sorted(overlap)[:5]}")
        object.__setattr__(self, "similar", sim)
        object.__setattr__(self, "dissimilar", dis)

    def to_dict(self) -> dict:
        return {
            "similar": [[i, j] for i, j in self.similar],
            "dissimilar": [[i, j] for i, j in self.dissimilar],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PairSets":
        return cls(
            similar=tuple((int(i), int(j)) for i, j in d["similar"]),
            dissimilar=tuple((int(i), int(j)) for i, j in d["dissimilar"]),
        )


def _normalize_pairs(pairs, label):
    out = []
    for pair in pairs:
        i, j = int(pair[0]), int(pair[1])
        if i == j:
            raise DataError(f"self-pair ({i}, {j}) in {label} set")
        if i < 0 or j < 0:
            raise DataError(f"negative index in {label} pair ({i}, {j})")
        if i > j:
            raise DataError(f"{label} pair ({i}, {j}) must satisfy i < j")
        out.append((i, j))
    if len(set(out)) != len(out):
        raise DataError(f"duplicate pairs in {label} set")
    return tuple(out)


@dataclass(frozen=True)
class MetricLearnOptions:
    """Solver knobs for :func:`learn_metric`.

    The iteration budget doubles as a regularizer: the descent trajectory
    passes through well-spread weightings early and drains toward the
    program's sparse vertex optimum if left to run; 1000 iterations keeps
    the graded per-feature profile that downstream priors need.
    """

    max_iterations: int = 1000
    step_size: float = 1e-2
    tolerance: float = 1e-6

    def __post_init__(self):
        if self.max_iterations <= 0 or self.step_size <= 0 or self.tolerance <= 0:
            raise ConfigError("metric-learning options must be positive")


@dataclass(frozen=True)
class MetricLearnTrace:
    """Solver diagnostics; objectives are the accepted per-iteration values."""

    objectives: np.ndarray
    iterations: int
    converged: bool
    dissimilar_sum: float


def mahalanobis_distance(x_i, x_j, metric: DiagonalMetric) -> float:
    """Weighted Euclidean distance sqrt(sum_k w_k (x_ik - x_jk)^2)."""
    a = as_vector(x_i)
    b = as_vector(x_j)
    if a.shape != b.shape or a.shape[0] != len(metric):
        raise DimensionMismatchError(
            f"vectors of length {a.shape[0]}/{b.shape[0]} vs metric of length {len(metric)}"
        )
    d = a - b
    return float(np.sqrt(np.dot(metric.weights, d * d)))


def pair_indices(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Row indices (i, j) of all m(m-1)/2 pairs in lexicographic order."""
    return np.triu_indices(m, k=1)


def pairwise_distances(X, metric: DiagonalMetric) -> list:
    """All-pairs distances as [((i, j), d), ...] in lexicographic pair order."""
    X = as_matrix(X)
    if X.shape[1] != len(metric):
        raise DimensionMismatchError(
            f"matrix has {X.shape[1]} columns, metric has length {len(metric)}"
        )
    ii, jj = pair_indices(X.shape[0])
    d = _pair_distance_values(X, ii, jj, metric.weights)
    return [((int(i), int(j)), float(v)) for i, j, v in zip(ii, jj, d)]


def _pair_distance_values(X, ii, jj, weights):
    diff = X[ii] - X[jj]
    return np.sqrt((diff * diff) @ weights)


def _squared_diffs(X, pairs):
    idx = np.asarray(pairs, dtype=int)
    if idx.size and idx.max() >= X.shape[0]:
        raise DataError(f"pair index {idx.max()} out of range for {X.shape[0]} rows")
    diff = X[idx[:, 0]] - X[idx[:, 1]]
    return diff * diff


def learn_metric(X, pairs: PairSets, opts: MetricLearnOptions | None = None) -> DiagonalMetric:
    """Learn diagonal metric weights from pair supervision; see module docs."""
    metric, _ = learn_metric_with_trace(X, pairs, opts)
    return metric


def learn_metric_with_trace(
    X, pairs: PairSets, opts: MetricLearnOptions | None = None
) -> tuple[DiagonalMetric, MetricLearnTrace]:
    """As :func:`learn_metric`, also returning solver diagnostics."""
    X = as_matrix(X)
    opts = opts or MetricLearnOptions()
    if not pairs.similar or not pairs.dissimilar:
        raise EmptyPairSetError("both similar and dissimilar sets must be nonempty")

    sq_s = _squared_diffs(X, pairs.similar)
    sq_d = _squared_diffs(X, pairs.dissimilar)
    if not np.any(sq_d):
        raise DegeneratePairsError(
            "every dissimilar pair has zero feature difference"
        )
    grad = sq_s.sum(axis=0)  # constant: the objective is linear in w
    grad_sq = float(grad @ grad)
    n = X.shape[1]

    def dissimilar_sum(w):
        return float(np.sqrt(sq_d @ w).sum())

    # Feasible uninformative start: uniform weights rescaled onto the
    # constraint boundary.
    w = np.full(n, 1.0 / n)
    s = dissimilar_sum(w)
    w = w / (s * s)
    obj = float(grad @ w)

    objectives = [obj]
    step = opts.step_size
    converged = grad_sq == 0.0 or obj == 0.0  # nothing to minimize
    iterations = 0
    while not converged and iterations < opts.max_iterations:
        iterations += 1
        w_prop = np.maximum(w - (step * obj / grad_sq) * grad, 0.0)
        s = dissimilar_sum(w_prop)
        if s <= 0.0:
            # Step clipped everything to zero; too large for this scale.
            step *= 0.5
            continue
        if s < 1.0:
            w_prop = w_prop / (s * s)
        obj_prop = float(grad @ w_prop)
        if obj_prop > obj + _REL_INCREASE_SLACK * max(1.0, obj):
            step *= 0.5
            continue
        drop = obj - obj_prop
        w = w_prop
        obj = obj_prop
        objectives.append(obj)
        if drop <= opts.tolerance * max(obj, 1e-12):
            converged = True

    trace = MetricLearnTrace(
        objectives=np.asarray(objectives),
        iterations=iterations,
        converged=converged,
        dissimilar_sum=dissimilar_sum(w),
    )
    return DiagonalMetric(w), trace


def match_distance_scale(X, metric: DiagonalMetric, reference: DiagonalMetric | None = None) -> DiagonalMetric:
    """Rescale a metric so its mean pairwise distance on X matches a reference.

    The pair-based learning program fixes the scale of the learned weights
    through the dissimilarity constraint, which says nothing about the
    scale on which the weights are meaningful as prior variances. This
    helper removes that arbitrary scale: it returns c * metric with c
    chosen (exactly, by homogeneity) so the mean distance over all row
    pairs of X equals the mean distance under ``reference`` (the identity
    metric when omitted). Relative weights are untouched.
    """
    X = as_matrix(X)
    if X.shape[1] != len(metric):
        raise DimensionMismatchError(
            f"matrix has {X.shape[1]} columns, metric has length {len(metric)}"
        )
    if reference is None:
        reference = DiagonalMetric.identity(len(metric))
    ii, jj = pair_indices(X.shape[0])
    if ii.size == 0:
        raise DataError("need at least two rows to calibrate a metric")
    mean_here = _pair_distance_values(X, ii, jj, metric.weights).mean()
    mean_ref = _pair_distance_values(X, ii, jj, reference.weights).mean()
    if mean_here <= 0.0:
        raise NumericalError("cannot rescale a metric with zero pairwise distances")
    c = (mean_ref / mean_here) ** 2
    return metric.scaled(c)
