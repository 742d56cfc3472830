"""Scheduling and estimation policies.

Schedulers map an observation to the message ``(index, value)`` sent over the
channel; estimators map that message back to a full estimate. Every estimator
reproduces the transmitted value in the transmitted coordinate (in the
transformed coordinates for the decorrelating pair).

Public scalar functions use 1-based sensor indices, as in ``ChannelMessage``.
The batch ``select``/``estimate`` methods work on ``(N, n)`` arrays and use
0-based index arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .source import Decorrelation, SourceModel
from .truncnorm import QuadratureFailure, truncated_mean, truncated_mean_quad

__all__ = [
    "ChannelMessage",
    "RepresentationFn",
    "QuadratureFailure",
    "max_schedule",
    "open_loop_schedule",
    "nearest_neighbor_schedule",
    "linear_induced_schedule",
    "decorrelating_schedule",
    "mean_estimate",
    "soft_threshold_eta",
    "soft_threshold_eta_vec",
    "soft_threshold_estimate",
    "conditional_mean_under_max",
    "conditional_mean_under_max_vec",
    "pw_linear_estimate",
    "decorrelating_estimate",
    "aux_P",
    "aux_T",
    "discrepancy_H",
    "Scheduler",
    "Estimator",
    "MaxScheduler",
    "OpenLoopScheduler",
    "NearestNeighborScheduler",
    "LinearInducedScheduler",
    "DecorrelatingScheduler",
    "MeanEstimator",
    "SoftThresholdEstimator",
    "PiecewiseLinearEstimator",
    "DecorrelatingEstimator",
    "ConditionalMeanUnderMaxEstimator",
]

# Truncation mass past this many kernel standard deviations is below double precision.
_GUARD_SDS = 12.0
ETA_TOL = 1e-10


@dataclass(frozen=True)
class ChannelMessage:
    index: int  # 1-based sensor index
    value: float


RepresentationFn = Callable[[np.ndarray], np.ndarray]
"""Scalar map applied elementwise; must accept and return float arrays."""


# --- schedulers -----------------------------------------------------------


def max_schedule(x) -> int:
    """Index of the largest-magnitude entry; ties go to the smaller index."""
    return int(np.argmax(np.abs(np.asarray(x, dtype=float)))) + 1


def open_loop_schedule(source: SourceModel) -> int:
    return int(np.argmax(source.variances)) + 1


def nearest_neighbor_schedule(x, eta1: RepresentationFn, eta2: RepresentationFn) -> int:
    """Best-response scheduler for estimators with representation functions eta1, eta2."""
    x1, x2 = (float(v) for v in x)
    r1 = abs(x1 - float(eta1(np.float64(x2))))
    r2 = abs(x2 - float(eta2(np.float64(x1))))
    return 1 if r1 >= r2 else 2


def linear_induced_schedule(x, a) -> int:
    x1, x2 = (float(v) for v in x)
    return 1 if (x2 - a[1] * x1) ** 2 <= (x1 - a[0] * x2) ** 2 else 2


def decorrelating_schedule(x, dec: Decorrelation) -> int:
    return max_schedule(dec.w @ np.asarray(x, dtype=float))


# --- estimators -----------------------------------------------------------


def mean_estimate(msg: ChannelMessage, n: int) -> np.ndarray:
    if not 1 <= msg.index <= n:
        raise IndexError(f"message index {msg.index} outside 1..{n}")
    out = np.zeros(n)
    out[msg.index - 1] = msg.value
    return out


def _soft_kernel(xi, sigma_sq, rho):
    sd = math.sqrt(sigma_sq * (1.0 - rho * rho))
    return rho * xi, sd


def soft_threshold_eta(xi: float, sigma_sq: float, rho: float) -> float:
    """Soft-thresholding representation function.

    Conditional mean of N(rho*xi, sigma_sq*(1 - rho**2)) restricted to
    [-|xi|, |xi|], by adaptive quadrature to absolute accuracy 1e-10.
    """
    if sigma_sq <= 0:
        raise ValueError("sigma_sq must be positive")
    if not -1.0 < rho < 1.0:
        raise ValueError("rho must lie in (-1, 1)")
    xi = float(xi)
    if xi == 0.0:
        return 0.0
    b = abs(xi)
    m, sd = _soft_kernel(xi, sigma_sq, rho)
    if min(b - m, m + b) > _GUARD_SDS * sd:
        return min(max(m, -b), b)
    return truncated_mean_quad(m, sd, -b, b, tol=ETA_TOL)


def soft_threshold_eta_vec(xi, sigma_sq: float, rho: float) -> np.ndarray:
    """Closed-form, vectorized twin of :func:`soft_threshold_eta`."""
    xi = np.asarray(xi, dtype=float)
    b = np.abs(xi)
    m, sd = _soft_kernel(xi, sigma_sq, rho)
    safe = np.where(b > 0.0, b, 1.0)
    out = truncated_mean(m, sd, -safe, safe)
    return np.where(b > 0.0, out, 0.0)


def soft_threshold_estimate(msg: ChannelMessage, sigma_sq: float, rho: float) -> np.ndarray:
    other = soft_threshold_eta(msg.value, sigma_sq, rho)
    if msg.index == 1:
        return np.array([msg.value, other])
    if msg.index == 2:
        return np.array([other, msg.value])
    raise IndexError(f"message index {msg.index} outside 1..2")


def _cond_kernel(source: SourceModel, i: int):
    # law of the untransmitted coordinate given the transmitted one (0-based i)
    c = source.cov
    j = 1 - i
    return c[i, j] / c[i, i], math.sqrt(c[j, j] - c[i, j] ** 2 / c[i, i])


def conditional_mean_under_max(source: SourceModel, i: int, xi: float) -> float:
    """E[X_j | X_i = xi, |X_j| <= |X_i|] for the untransmitted j, by quadrature.

    Exact best response to max-scheduling. For unequal variances no optimality
    result backs the resulting pair; treat it as a heuristic best response.
    """
    if source.dim != 2:
        raise ValueError("two-sensor sources only")
    if i not in (1, 2):
        raise IndexError(f"index {i} outside 1..2")
    xi = float(xi)
    if xi == 0.0:
        return 0.0
    slope, sd = _cond_kernel(source, i - 1)
    b = abs(xi)
    m = slope * xi
    if min(b - m, m + b) > _GUARD_SDS * sd:
        return m
    return truncated_mean_quad(m, sd, -b, b, tol=ETA_TOL)


def conditional_mean_under_max_vec(source: SourceModel, i: int, xi) -> np.ndarray:
    """Vectorized closed-form twin of :func:`conditional_mean_under_max`."""
    slope, sd = _cond_kernel(source, i - 1)
    xi = np.asarray(xi, dtype=float)
    b = np.abs(xi)
    safe = np.where(b > 0.0, b, 1.0)
    out = truncated_mean(slope * xi, sd, -safe, safe)
    return np.where(b > 0.0, out, 0.0)


def pw_linear_estimate(msg: ChannelMessage, a) -> np.ndarray:
    if msg.index == 1:
        return np.array([msg.value, a[1] * msg.value])
    if msg.index == 2:
        return np.array([a[0] * msg.value, msg.value])
    raise IndexError(f"message index {msg.index} outside 1..2")


def decorrelating_estimate(msg: ChannelMessage, dec: Decorrelation) -> np.ndarray:
    return dec.w.T @ mean_estimate(msg, dec.w.shape[0])


# --- auxiliary functions of the soft-thresholding analysis ----------------


def aux_P(xi: float, sigma_sq: float, rho: float) -> float:
    return xi - soft_threshold_eta(xi, sigma_sq, rho)


def aux_T(xi: float, sigma_sq: float, rho: float) -> float:
    return xi + soft_threshold_eta(xi, sigma_sq, rho)


def discrepancy_H(x, sigma_sq: float, rho: float, eta=None):
    """(x2 - eta(x1))**2 - (x1 - eta(x2))**2; nonpositive values favour sensor 1.

    ``x`` is a 2-vector or an ``(N, 2)`` array. Arrays use the closed-form
    eta unless ``eta`` is given.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        e = eta or (lambda v: soft_threshold_eta(v, sigma_sq, rho))
        return (x[1] - e(x[0])) ** 2 - (x[0] - e(x[1])) ** 2
    e = eta or (lambda v: soft_threshold_eta_vec(v, sigma_sq, rho))
    return (x[:, 1] - e(x[:, 0])) ** 2 - (x[:, 0] - e(x[:, 1])) ** 2


# --- policy objects for batch evaluation ----------------------------------


class Scheduler(Protocol):
    name: str

    def select(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return 0-based indices and transmitted values for rows of ``x``."""
        ...


class Estimator(Protocol):
    name: str

    def estimate(self, index: np.ndarray, value: np.ndarray, n: int) -> np.ndarray:
        ...


def _take(x, idx):
    return np.take_along_axis(x, idx[:, None], axis=1)[:, 0]


def _binary_select(x, first):
    idx = np.where(first, 0, 1)
    return idx, _take(x, idx)


@dataclass(frozen=True)
class MaxScheduler:
    name: str = field(default="max", init=False)

    def select(self, x):
        idx = np.argmax(np.abs(x), axis=1)
        return idx, _take(x, idx)

    def __call__(self, x) -> int:
        return max_schedule(x)


@dataclass(frozen=True)
class OpenLoopScheduler:
    """Always transmit the sensor with the largest variance."""

    index: int  # 1-based
    name: str = field(default="open-loop", init=False)

    @classmethod
    def for_source(cls, source: SourceModel) -> "OpenLoopScheduler":
        return cls(open_loop_schedule(source))

    def select(self, x):
        idx = np.full(x.shape[0], self.index - 1)
        return idx, x[:, self.index - 1].copy()

    def __call__(self, x) -> int:
        return self.index


@dataclass(frozen=True)
class NearestNeighborScheduler:
    eta1: RepresentationFn
    eta2: RepresentationFn
    name: str = field(default="nearest-neighbor", init=False)

    def select(self, x):
        r1 = np.abs(x[:, 0] - self.eta1(x[:, 1]))
        r2 = np.abs(x[:, 1] - self.eta2(x[:, 0]))
        return _binary_select(x, r1 >= r2)

    def __call__(self, x) -> int:
        return nearest_neighbor_schedule(x, self.eta1, self.eta2)


@dataclass(frozen=True)
class LinearInducedScheduler:
    a: tuple[float, float]
    name: str = field(default="linear", init=False)

    def select(self, x):
        a1, a2 = self.a
        first = (x[:, 1] - a2 * x[:, 0]) ** 2 <= (x[:, 0] - a1 * x[:, 1]) ** 2
        return _binary_select(x, first)

    def __call__(self, x) -> int:
        return linear_induced_schedule(x, self.a)


@dataclass(frozen=True, eq=False)
class DecorrelatingScheduler:
    """Max-scheduling in decorrelated coordinates; transmits ``(W x)[i]``."""

    dec: Decorrelation
    name: str = field(default="decorrelating", init=False)

    def select(self, x):
        return MaxScheduler().select(x @ self.dec.w.T)

    def __call__(self, x) -> int:
        return decorrelating_schedule(x, self.dec)


@dataclass(frozen=True)
class MeanEstimator:
    name: str = field(default="mean", init=False)

    def estimate(self, index, value, n):
        out = np.zeros((index.shape[0], n))
        np.put_along_axis(out, index[:, None], value[:, None], axis=1)
        return out

    def __call__(self, msg: ChannelMessage, n: int = 2) -> np.ndarray:
        return mean_estimate(msg, n)


def _fill_other(index, value, other):
    out = np.empty((index.shape[0], 2))
    first = index == 0
    out[:, 0] = np.where(first, value, other)
    out[:, 1] = np.where(first, other, value)
    return out


@dataclass(frozen=True)
class SoftThresholdEstimator:
    sigma_sq: float
    rho: float
    name: str = field(default="soft", init=False)

    def estimate(self, index, value, n):
        if n != 2:
            raise ValueError("soft-thresholding is defined for two sensors")
        return _fill_other(index, value, soft_threshold_eta_vec(value, self.sigma_sq, self.rho))

    def __call__(self, msg: ChannelMessage) -> np.ndarray:
        return soft_threshold_estimate(msg, self.sigma_sq, self.rho)


@dataclass(frozen=True)
class PiecewiseLinearEstimator:
    a: tuple[float, float]
    name: str = field(default="linear", init=False)

    def estimate(self, index, value, n):
        if n != 2:
            raise ValueError("piecewise-linear estimation is defined for two sensors")
        slope = np.where(index == 0, self.a[1], self.a[0])
        return _fill_other(index, value, slope * value)

    def __call__(self, msg: ChannelMessage) -> np.ndarray:
        return pw_linear_estimate(msg, self.a)


@dataclass(frozen=True, eq=False)
class DecorrelatingEstimator:
    dec: Decorrelation
    name: str = field(default="decorrelating", init=False)

    def estimate(self, index, value, n):
        return value[:, None] * self.dec.w[index]

    def __call__(self, msg: ChannelMessage) -> np.ndarray:
        return decorrelating_estimate(msg, self.dec)


@dataclass(frozen=True, eq=False)
class ConditionalMeanUnderMaxEstimator:
    """Heuristic best response to max-scheduling for unequal variances."""

    source: SourceModel
    name: str = field(default="cond-mean", init=False)

    def estimate(self, index, value, n):
        if n != 2 or self.source.dim != 2:
            raise ValueError("conditional-mean estimation is defined for two sensors")
        first = index == 0
        other = np.where(
            first,
            conditional_mean_under_max_vec(self.source, 1, value),
            conditional_mean_under_max_vec(self.source, 2, value),
        )
        return _fill_other(index, value, other)

    def __call__(self, msg: ChannelMessage) -> np.ndarray:
        other = conditional_mean_under_max(self.source, msg.index, msg.value)
        return np.array([msg.value, other] if msg.index == 1 else [other, msg.value])
