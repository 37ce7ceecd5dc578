"""Synthetic data generation and simulated expert supervision.

Datasets follow y = X theta + eps with X ~ Unif(0,1) entries, the first
``relevant_count`` coefficients of theta drawn Unif(coef_range) and the
rest exactly zero, and Gaussian noise. Expert quality is simulated by a
"true" diagonal metric built from theta (perfect / noisy / incorrect),
which ranks observation pairs so the p closest become the similar set S
and the p farthest the dissimilar set D.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, TooManyPairsError
from .metric_learning import DiagonalMetric, PairSets, _pair_distance_values, pair_indices
from .numerics import Rng, as_matrix, as_vector, sample_gaussian, sample_uniform


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    theta_true: np.ndarray | None = None
    noise_sd: float = 1.0

    def __post_init__(self):
        X = as_matrix(self.X)
        y = as_vector(self.y)
        if X.shape[0] != y.shape[0]:
            raise DataError("X rows and y length differ")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.theta_true is not None:
            object.__setattr__(self, "theta_true", as_vector(self.theta_true))


@dataclass(frozen=True)
class KnowledgeType:
    """Simulated expert quality: perfect, noisy(sd) or incorrect(lo, hi)."""

    kind: str
    sd: float = 0.5
    lo: float = -5.0
    hi: float = 5.0

    def __post_init__(self):
        if self.kind not in ("perfect", "noisy", "incorrect"):
            raise ConfigError(f"unknown knowledge type {self.kind!r}")
        if self.sd < 0:
            raise ConfigError("noise sd must be >= 0")
        if not self.lo < self.hi:
            raise ConfigError("incorrect-knowledge range must satisfy lo < hi")

    @classmethod
    def perfect(cls):
        return cls("perfect")

    @classmethod
    def noisy(cls, sd: float = 0.5):
        return cls("noisy", sd=sd)

    @classmethod
    def incorrect(cls, lo: float = -5.0, hi: float = 5.0):
        return cls("incorrect", lo=lo, hi=hi)


@dataclass(frozen=True)
class GenConfig:
    n: int
    m: int = 100
    m_val: int = 900
    relevant_count: int = 10
    coef_range: tuple = (-10.0, 10.0)
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.n < 1 or self.m < 1 or self.m_val < 1:
            raise ConfigError("n, m and m_val must be >= 1")
        if not 0 <= self.relevant_count <= self.n:
            raise ConfigError("relevant_count must lie in [0, n]")
        if not self.coef_range[0] < self.coef_range[1]:
            raise ConfigError("coef_range must be ordered")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be >= 0")


def sample_theta(config: GenConfig, rng: Rng) -> np.ndarray:
    """First relevant_count entries ~ Unif(coef_range), the rest exactly 0."""
    theta = np.zeros(config.n)
    lo, hi = config.coef_range
    theta[: config.relevant_count] = sample_uniform(rng, lo, hi, config.relevant_count)
    return theta


def generate_dataset(theta, config: GenConfig, rng: Rng) -> tuple[Dataset, Dataset]:
    """Training and validation splits sharing theta; both carry noise.

    Draw order is fixed (train X, train noise, validation X, validation
    noise) so streams are reproducible.
    """
    theta = as_vector(theta)
    if theta.shape[0] != config.n:
        raise DataError(f"theta has length {theta.shape[0]}, config says n={config.n}")

    def draw(rows):
        X = sample_uniform(rng, 0.0, 1.0, rows * config.n).reshape(rows, config.n)
        eps = sample_gaussian(rng, 0.0, config.noise_sd, rows)
        return Dataset(X, X @ theta + eps, theta_true=theta, noise_sd=config.noise_sd)

    return draw(config.m), draw(config.m_val)


def make_true_metric(kind: KnowledgeType, theta, rng: Rng) -> DiagonalMetric:
    """Expert-quality metric: |theta|, |theta + noise|, or random weights."""
    theta = as_vector(theta)
    n = theta.shape[0]
    if kind.kind == "perfect":
        weights = np.abs(theta)
    elif kind.kind == "noisy":
        weights = np.abs(theta + sample_gaussian(rng, 0.0, kind.sd, n))
    else:
        weights = np.abs(sample_uniform(rng, kind.lo, kind.hi, n))
    return DiagonalMetric(weights)


def generate_pair_sets(X, true_metric: DiagonalMetric, p: int) -> PairSets:
    """The p closest pairs under the metric become S, the p farthest D.

    Pairs are ranked by (distance, i, j), so boundary ties resolve to the
    lexicographically smaller pair on the similar side and the larger on
    the dissimilar side. S is ordered by increasing distance, D by
    decreasing distance.
    """
    X = as_matrix(X)
    if p < 1:
        raise ConfigError("p must be >= 1")
    ii, jj = pair_indices(X.shape[0])
    total = ii.shape[0]
    if 2 * p > total:
        raise TooManyPairsError(f"2p = {2 * p} exceeds the {total} available pairs")
    d = _pair_distance_values(X, ii, jj, true_metric.weights)
    # lexsort: last key is primary, so order by distance, then i, then j
    order = np.lexsort((jj, ii, d))
    similar = tuple((int(ii[k]), int(jj[k])) for k in order[:p])
    dissimilar = tuple((int(ii[k]), int(jj[k])) for k in order[-p:][::-1])
    return PairSets(similar=similar, dissimilar=dissimilar)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def dataset_to_csv(ds: Dataset) -> str:
    """CSV text with header x_1..x_n,y and LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    n = ds.X.shape[1]
    writer.writerow([f"x_{j + 1}" for j in range(n)] + ["y"])
    for row, target in zip(ds.X, ds.y):
        writer.writerow([repr(float(v)) for v in row] + [repr(float(target))])
    return buf.getvalue()


def dataset_from_csv(text: str) -> Dataset:
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if not header:
        raise DataError("empty dataset CSV")
    has_y = header[-1] == "y"
    rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise DataError("dataset CSV has no data rows")
    arr = np.asarray(rows)
    if has_y:
        return Dataset(arr[:, :-1], arr[:, -1])
    return Dataset(arr, np.zeros(arr.shape[0]))


def features_from_csv(text: str) -> np.ndarray:
    """Feature matrix from a dataset CSV, dropping the y column if present."""
    ds = dataset_from_csv(text)
    return ds.X


def theta_to_dict(theta) -> dict:
    return {"theta": [float(v) for v in as_vector(theta)]}


def theta_from_dict(d: dict) -> np.ndarray:
    return as_vector(np.asarray(d["theta"], dtype=float))
