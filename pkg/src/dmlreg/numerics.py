"""Dense-matrix plumbing, SPD linear solves, and deterministic RNG streams.

Matrices are 2-D float64 numpy arrays in row-major order, vectors are 1-D
float64 arrays; both must be finite everywhere. Randomness flows through
numpy ``Generator`` objects seeded with PCG64, so identical seeds produce
identical streams across runs. Parallel work derives independent
substreams with :func:`substream` rather than sharing one generator.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .errors import (
    DataError,
    DimensionMismatchError,
    InvalidRangeError,
    InvalidScaleError,
    NotSPDError,
)

Rng = np.random.Generator


def as_matrix(a) -> np.ndarray:
    """Validate and convert to a finite 2-D float64 array."""
    m = np.asarray(a, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatchError(f"expected a matrix, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise DataError("matrix contains non-finite entries")
    return m


def as_vector(a) -> np.ndarray:
    """Validate and convert to a finite 1-D float64 array."""
    v = np.asarray(a, dtype=float)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a vector, got ndim={v.ndim}")
    if not np.all(np.isfinite(v)):
        raise DataError("vector contains non-finite entries")
    return v


def solve_linear(A, b) -> np.ndarray:
    """Solve A x = b for a symmetric positive-definite A.

    Uses a Cholesky factorization (never an explicit inverse). Raises
    :class:`NotSPDError` when the factorization fails, which signals a
    singular or indefinite system.
    """
    A = as_matrix(A)
    b = as_vector(b)
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatchError(f"matrix is not square: {A.shape}")
    if A.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"matrix is {A.shape} but right-hand side has length {b.shape[0]}"
        )
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPDError(f"Cholesky factorization failed: {exc}") from exc
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    if not np.all(np.isfinite(x)):
        raise NotSPDError("solve produced non-finite values")
    return x


def make_rng(seed: int) -> Rng:
    """Deterministic PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def substream(seed: int, *key: int) -> Rng:
    """Independent generator for (seed, key...).

    The key path is hashed into the seed material through numpy's
    SeedSequence spawn mechanism, so substreams are reproducible and
    statistically independent of each other. Key components must be
    non-negative integers.
    """
    spawn_key = tuple(int(k) for k in key)
    if any(k < 0 for k in spawn_key):
        raise InvalidRangeError("substream key components must be non-negative")
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(seq))


def sample_uniform(rng: Rng, lo: float, hi: float, count: int) -> np.ndarray:
    """i.i.d. draws from Unif[lo, hi)."""
    if not lo < hi:
        raise InvalidRangeError(f"need lo < hi, got [{lo}, {hi})")
    return rng.uniform(lo, hi, size=int(count))


def sample_gaussian(rng: Rng, mean: float, sd: float, count: int) -> np.ndarray:
    """i.i.d. draws from N(mean, sd^2); sd = 0 yields constant output."""
    if sd < 0:
        raise InvalidScaleError(f"standard deviation must be >= 0, got {sd}")
    return rng.normal(loc=mean, scale=sd, size=int(count))
