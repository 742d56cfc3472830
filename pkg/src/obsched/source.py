"""Zero-mean Gaussian sources: validation, seeded sampling, conditioning and
the eigendecomposition used by the decorrelating policies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

__all__ = [
    "SourceError",
    "NotSymmetric",
    "NotPositiveDefinite",
    "DimTooSmall",
    "SourceModel",
    "Decorrelation",
    "ConditionalLaw",
    "make_source",
    "bivariate",
    "sample",
    "iter_sample_chunks",
    "eigendecompose",
    "conditional_law",
    "CHUNK_ROWS",
]

# Rows per PRNG stream. Changing this changes every seeded draw.
CHUNK_ROWS = 1 << 18


class SourceError(ValueError):
    """Invalid covariance specification."""


class NotSymmetric(SourceError):
    pass


class NotPositiveDefinite(SourceError):
    pass


class DimTooSmall(SourceError):
    pass


@dataclass(frozen=True, eq=False)
class SourceModel:
    """Zero-mean n-variate Gaussian with covariance ``cov``.

    Build through :func:`make_source` (or :func:`bivariate`), which validates
    the matrix and caches its Cholesky factor.
    """

    cov: np.ndarray
    chol: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.cov.shape[0]

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.cov).copy()

    @property
    def sigma1_sq(self) -> float:
        return float(self.cov[0, 0])

    @property
    def sigma2_sq(self) -> float:
        return float(self.cov[1, 1])

    @property
    def rho(self) -> float:
        """Correlation coefficient of the first two coordinates."""
        return float(self.cov[0, 1] / math.sqrt(self.cov[0, 0] * self.cov[1, 1]))

    @property
    def in_optimality_regime(self) -> bool:
        """False for negative correlation, which the optimality results do not cover."""
        return self.dim != 2 or self.rho >= 0.0


@dataclass(frozen=True, eq=False)
class Decorrelation:
    """Orthogonal ``w`` and eigenvalues ``lam`` with ``cov = w.T @ diag(lam) @ w``.

    Rows of ``w`` are eigenvectors, so ``w @ x`` maps an observation to
    uncorrelated coordinates. Equivalently ``cov = W Λ Wᵀ`` with ``W = w.T``.
    """

    w: np.ndarray
    lam: np.ndarray


@dataclass(frozen=True)
class ConditionalLaw:
    mean: float
    var: float


def make_source(cov) -> SourceModel:
    """Validate ``cov`` and wrap it in a :class:`SourceModel`.

    Raises
    ------
    DimTooSmall
        If the matrix is not square or has fewer than two rows.
    NotSymmetric
        If ``cov`` differs from its transpose in any entry.
    NotPositiveDefinite
        If the Cholesky factorization fails.
    """
    c = np.array(cov, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DimTooSmall(f"covariance must be square, got shape {c.shape}")
    if c.shape[0] < 2:
        raise DimTooSmall(f"need at least two sensors, got {c.shape[0]}")
    if not np.all(np.isfinite(c)):
        raise NotPositiveDefinite("covariance has non-finite entries")
    if not np.array_equal(c, c.T):
        raise NotSymmetric("covariance is not symmetric")
    try:
        chol = np.linalg.cholesky(c)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    c.setflags(write=False)
    chol.setflags(write=False)
    return SourceModel(cov=c, chol=chol)


def bivariate(sigma1_sq: float, sigma2_sq: float, rho: float) -> SourceModel:
    """Two-sensor source from variances and correlation coefficient."""
    if sigma1_sq <= 0 or sigma2_sq <= 0:
        raise NotPositiveDefinite("variances must be positive")
    if not -1.0 < rho < 1.0:
        raise NotPositiveDefinite(f"|rho| must be < 1, got {rho}")
    c12 = rho * math.sqrt(sigma1_sq * sigma2_sq)
    return make_source([[sigma1_sq, c12], [c12, sigma2_sq]])


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, chunk])))


def iter_sample_chunks(source: SourceModel, count: int, seed: int) -> Iterator[np.ndarray]:
    """Yield the rows of ``sample(source, count, seed)`` in fixed-size blocks.

    Block ``k`` comes from its own PCG64 stream seeded by ``(seed, k)``, so any
    block can be regenerated independently of the others.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if seed < 0 or seed >= 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    lt = source.chol.T
    for k, start in enumerate(range(0, count, CHUNK_ROWS)):
        rows = min(CHUNK_ROWS, count - start)
        z = _chunk_rng(seed, k).standard_normal((rows, source.dim))
        yield z @ lt


def sample(source: SourceModel, count: int, seed: int) -> np.ndarray:
    """Draw ``count`` i.i.d. rows from N(0, cov); bit-identical for equal inputs."""
    return np.concatenate(list(iter_sample_chunks(source, count, seed)), axis=0)


def eigendecompose(source: SourceModel) -> Decorrelation:
    """Eigendecomposition with descending eigenvalues and a fixed sign convention.

    Each eigenvector's first nonzero entry is made positive so the result is
    deterministic.
    """
    lam, vecs = np.linalg.eigh(source.cov)
    order = np.argsort(lam, kind="stable")[::-1]
    lam = lam[order]
    vecs = vecs[:, order]
    tol = 1e-12 * np.max(np.abs(vecs))
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        lead = col[np.flatnonzero(np.abs(col) > tol)[0]]
        if lead < 0:
            vecs[:, k] = -col
    w = np.ascontiguousarray(vecs.T)
    w.setflags(write=False)
    lam.setflags(write=False)
    return Decorrelation(w=w, lam=lam)


def conditional_law(source: SourceModel, i: int, j: int, xi: float) -> ConditionalLaw:
    """Law of X_i given X_j = xi for a two-sensor source (1-based indices)."""
    if source.dim != 2:
        raise ValueError("conditional_law is defined for two-sensor sources")
    if i not in (1, 2) or j not in (1, 2) or i == j:
        raise IndexError(f"need distinct indices in {{1, 2}}, got i={i}, j={j}")
    c = source.cov
    a, b = i - 1, j - 1
    return ConditionalLaw(
        mean=float(c[a, b] / c[b, b] * xi),
        var=float(c[a, a] - c[a, b] ** 2 / c[b, b]),
    )
