"""Mean-squared-error cost of scheduler/estimator pairs.

Monte Carlo runs stream seeded sample blocks and merge per-block moments in
a fixed order, so reports are bit-reproducible. Deterministic alternatives:

* tensor Gauss-Hermite quadrature for arbitrary two-sensor policy pairs;
* an angular rule for the piecewise-linear objectives. Their integrands are
  homogeneous of degree two, so the radial part integrates exactly and only
  a periodic one-dimensional angular integral is discretized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Union

import numpy as np
from scipy.special import roots_hermitenorm

from .policies import Estimator, Scheduler
from .source import SourceModel, iter_sample_chunks, sample

__all__ = [
    "UnsupportedDim",
    "EvalReport",
    "EvalConfig",
    "SampleSet",
    "mc_sample_set",
    "angular_rule",
    "gauss_hermite_rule",
    "evaluate_cost_mc",
    "evaluate_cost_quadrature",
    "evaluate_cost",
    "jq",
    "f_analytic",
    "f_on",
    "g_eval",
    "pair_terms",
    "closed_form_open_loop",
    "MIN_MC_SAMPLES",
]

MIN_MC_SAMPLES = 10_000
Method = Literal["MonteCarlo", "Quadrature", "ClosedForm"]


class UnsupportedDim(ValueError):
    pass


@dataclass(frozen=True)
class EvalReport:
    cost: float
    stderr: float
    samples: int
    seed: Optional[int]
    method: Method


@dataclass(frozen=True)
class EvalConfig:
    """How to take an expectation.

    ``method="mc"`` uses ``samples`` seeded draws. ``method="quad"`` uses a
    Gauss-Hermite grid of ``order`` nodes per axis for general policy pairs and
    an ``angles``-point angular rule for the piecewise-linear objectives.
    """

    method: Literal["mc", "quad"] = "mc"
    samples: int = 100_000
    seed: int = 7
    order: int = 1024
    angles: int = 1 << 16


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Weighted point set standing in for the source distribution.

    ``weights is None`` means equally weighted Monte Carlo draws. Quadrature
    sets carry explicit weights summing to one and report zero stderr.
    """

    points: np.ndarray
    weights: Optional[np.ndarray] = None
    seed: Optional[int] = None

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def is_mc(self) -> bool:
        return self.weights is None

    def mean(self, values: np.ndarray) -> float:
        if self.weights is None:
            return float(np.mean(values))
        return float(values @ self.weights)

    def expect(self, values: np.ndarray) -> tuple[float, float]:
        """Return (mean, stderr) of per-point ``values``."""
        if self.weights is None:
            n = values.shape[0]
            return float(np.mean(values)), float(np.std(values, ddof=1) / math.sqrt(n))
        return float(values @ self.weights), 0.0

    def second_moments(self) -> np.ndarray:
        """Raw second-moment matrix under the set's weights."""
        p = self.points
        if self.weights is None:
            m = p.T @ p / p.shape[0]
        else:
            m = (p * self.weights[:, None]).T @ p
        return 0.5 * (m + m.T)

    def report(self, values: np.ndarray) -> EvalReport:
        cost, se = self.expect(values)
        return EvalReport(
            cost=cost,
            stderr=se,
            samples=self.size,
            seed=self.seed,
            method="MonteCarlo" if self.is_mc else "Quadrature",
        )


def mc_sample_set(source: SourceModel, samples: int, seed: int) -> SampleSet:
    return SampleSet(points=sample(source, samples, seed), seed=seed)


def angular_rule(source: SourceModel, angles: int = 1 << 16) -> SampleSet:
    """Exact-in-radius rule for degree-two homogeneous integrands.

    For X = L Z with Z standard normal, E[h(X)] = 2 * mean_theta h(L u(theta))
    when h(c x) = c**2 h(x). Nodes are sqrt(2) * L u(theta_k) at midpoint
    angles with equal weights. Second moments are reproduced exactly.
    """
    if source.dim != 2:
        raise UnsupportedDim("angular rule needs a two-sensor source")
    theta = (np.arange(angles) + 0.5) * (2.0 * math.pi / angles)
    u = math.sqrt(2.0) * np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return SampleSet(points=u @ source.chol.T, weights=np.full(angles, 1.0 / angles))


def gauss_hermite_rule(source: SourceModel, order: int = 1024) -> SampleSet:
    """Tensor Gauss-Hermite grid (probabilists' weights) mapped through cov."""
    if source.dim != 2:
        raise UnsupportedDim("tensor quadrature is limited to two sensors")
    if order < 64:
        raise ValueError("quadrature order must be >= 64")
    z, w = roots_hermitenorm(order)
    w = w / w.sum()
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    pts = np.stack([z1.ravel(), z2.ravel()], axis=1) @ source.chol.T
    return SampleSet(points=pts, weights=np.outer(w, w).ravel())


def _pair_loss(scheduler: Scheduler, estimator: Estimator, x: np.ndarray) -> np.ndarray:
    idx, val = scheduler.select(x)
    xhat = estimator.estimate(idx, val, x.shape[1])
    return np.sum((x - xhat) ** 2, axis=1)


def _stream_mc(source, samples, seed, fn: Callable[[np.ndarray], np.ndarray]) -> EvalReport:
    # per-block (n, mean, M2) merged in block order (Chan et al.)
    n_tot, mean, m2 = 0, 0.0, 0.0
    for x in iter_sample_chunks(source, samples, seed):
        v = fn(x)
        n = v.shape[0]
        mu = float(np.mean(v))
        s2 = float(np.sum((v - mu) ** 2))
        delta = mu - mean
        tot = n_tot + n
        mean += delta * n / tot
        m2 += s2 + delta * delta * n_tot * n / tot
        n_tot = tot
    se = math.sqrt(m2 / (n_tot - 1) / n_tot) if n_tot > 1 else 0.0
    return EvalReport(cost=mean, stderr=se, samples=n_tot, seed=seed, method="MonteCarlo")


def evaluate_cost_mc(
    source: SourceModel,
    scheduler: Scheduler,
    estimator: Estimator,
    samples: int = 100_000,
    seed: int = 7,
) -> EvalReport:
    """Monte Carlo estimate of E||X - X_hat||^2 with its standard error."""
    if samples < MIN_MC_SAMPLES:
        raise ValueError(f"need at least {MIN_MC_SAMPLES} samples, got {samples}")
    return _stream_mc(source, samples, seed, lambda x: _pair_loss(scheduler, estimator, x))


def evaluate_cost_quadrature(
    source: SourceModel, scheduler: Scheduler, estimator: Estimator, order: int = 1024
) -> EvalReport:
    """Gauss-Hermite evaluation of the same expectation; two sensors only.

    The grid is passed pointwise through the scheduler, so decision-region
    kinks limit accuracy to roughly 0.5/order relative for max-type rules.
    """
    rule = gauss_hermite_rule(source, order)
    return rule.report(_pair_loss(scheduler, estimator, rule.points))


def evaluate_cost(source, scheduler, estimator, config: EvalConfig = EvalConfig()) -> EvalReport:
    if config.method == "quad":
        return evaluate_cost_quadrature(source, scheduler, estimator, config.order)
    return evaluate_cost_mc(source, scheduler, estimator, config.samples, config.seed)


def pair_terms(a, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Squared residuals (x1 - a1 x2)^2 and (x2 - a2 x1)^2 per row."""
    r1 = x[:, 0] - a[0] * x[:, 1]
    r2 = x[:, 1] - a[1] * x[:, 0]
    return r1 * r1, r2 * r2


def _objective(a, source, evaluation, reducer) -> EvalReport:
    if source.dim != 2:
        raise UnsupportedDim("piecewise-linear objectives need two sensors")

    def fn(x):
        return reducer(*pair_terms(a, x))

    if isinstance(evaluation, SampleSet):
        return evaluation.report(fn(evaluation.points))
    if evaluation.method == "quad":
        rule = angular_rule(source, evaluation.angles)
        return rule.report(fn(rule.points))
    return _stream_mc(source, evaluation.samples, evaluation.seed, fn)


def jq(a, source: SourceModel, evaluation: Union[EvalConfig, SampleSet] = EvalConfig()) -> EvalReport:
    """E[min{(X1 - a1 X2)^2, (X2 - a2 X1)^2}], the cost of the linear pair at ``a``."""
    return _objective(a, source, evaluation, np.minimum)


def g_eval(a, source: SourceModel, evaluation: Union[EvalConfig, SampleSet] = EvalConfig()) -> EvalReport:
    """E[max{...}], the convex part subtracted from ``f_analytic``."""
    return _objective(a, source, evaluation, np.maximum)


def f_analytic(a, source: SourceModel) -> float:
    s1, s2 = source.sigma1_sq, source.sigma2_sq
    c12 = source.cov[0, 1]
    return (1 + a[1] ** 2) * s1 + (1 + a[0] ** 2) * s2 - 2 * c12 * (a[0] + a[1])


def f_on(a, sset: SampleSet) -> float:
    """Convex quadratic part evaluated on a sample set."""
    t1, t2 = pair_terms(a, sset.points)
    return sset.mean(t1 + t2)


def closed_form_open_loop(source: SourceModel) -> float:
    """Cost of always sending the largest-variance sensor: the other variances."""
    v = source.variances
    return float(np.sum(np.delete(v, np.argmax(v))))
