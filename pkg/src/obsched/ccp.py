"""Piecewise-linear estimator design by the convex-concave procedure.

The objective J_q(a) = F(a) - G(a) splits into a convex quadratic F and a
convex G (expected pointwise max). Each CCP step linearizes G at the current
iterate and minimizes the convex surrogate in closed form.

All expectations inside one run are taken over a single frozen
:class:`~obsched.cost.SampleSet`. F is then built from that set's own second
moments, so the surrogate majorizes the sample objective exactly and every
step is a descent step on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy import integrate

from .cost import EvalConfig, EvalReport, SampleSet, angular_rule, jq, mc_sample_set
from .source import SourceModel, make_source
from .truncnorm import QuadratureFailure

__all__ = [
    "NotConverged",
    "CcpConfig",
    "CcpTrace",
    "subgradient_g",
    "ccp_step",
    "ccp_solve",
    "sample_set_for",
    "symmetric_linear_astar",
    "grid_search_oracle",
]


class NotConverged(RuntimeError):
    def __init__(self, trace: "CcpTrace"):
        super().__init__(f"CCP stopped after {trace.iterations} iterations without converging")
        self.trace = trace


@dataclass(frozen=True)
class CcpConfig:
    a0: tuple[float, float] = (0.0, 0.0)
    tol: float = 1e-6
    max_iter: int = 500
    eval: EvalConfig = EvalConfig(samples=1_000_000, seed=2019)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class CcpTrace:
    iterates: list[np.ndarray] = field(default_factory=list)
    costs: list[float] = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    @property
    def a(self) -> np.ndarray:
        return self.iterates[-1]

    @property
    def cost(self) -> float:
        return self.costs[-1]


def sample_set_for(source: SourceModel, evaluation: Union[EvalConfig, SampleSet]) -> SampleSet:
    if isinstance(evaluation, SampleSet):
        return evaluation
    if evaluation.method == "quad":
        return angular_rule(source, evaluation.angles)
    return mc_sample_set(source, evaluation.samples, evaluation.seed)


def _jq_and_subgradient(a, sset: SampleSet) -> tuple[float, np.ndarray]:
    x = sset.points
    r1 = x[:, 0] - a[0] * x[:, 1]
    r2 = x[:, 1] - a[1] * x[:, 0]
    first = np.abs(r1) >= np.abs(r2)
    cost = sset.mean(np.where(first, r2 * r2, r1 * r1))
    g1 = sset.mean(np.where(first, r1 * x[:, 1], 0.0))
    g2 = sset.mean(np.where(first, 0.0, r2 * x[:, 0]))
    return cost, -2.0 * np.array([g1, g2])


def subgradient_g(a, source: SourceModel, sset: SampleSet) -> np.ndarray:
    """Subgradient of G at ``a`` on a frozen sample set.

    Ties |r1| = |r2| take the first branch. ``source`` only fixes the
    dimension; the expectation is over ``sset``.
    """
    if source.dim != 2:
        raise ValueError("two-sensor sources only")
    return _jq_and_subgradient(a, sset)[1]


def ccp_step(a, g, source: SourceModel) -> np.ndarray:
    """Minimizer of F(a') - g.a' : a1 = g1/(2 s2^2) + rho s1/s2, a2 = g2/(2 s1^2) + rho s2/s1."""
    c = source.cov
    return np.array([(0.5 * g[0] + c[0, 1]) / c[1, 1], (0.5 * g[1] + c[0, 1]) / c[0, 0]])


def ccp_solve(
    source: SourceModel,
    config: CcpConfig = CcpConfig(),
    sset: SampleSet | None = None,
    raise_on_failure: bool = False,
) -> CcpTrace:
    """Run the CCP fixed-point iteration until the sup-norm step drops below tol.

    ``sset`` overrides ``config.eval`` with an existing frozen sample set.
    ``costs[k]`` is J_q at ``iterates[k]`` on that set.
    """
    if source.dim != 2:
        raise ValueError("two-sensor sources only")
    sset = sset if sset is not None else sample_set_for(source, config.eval)
    moments = make_source(sset.second_moments())

    a = np.asarray(config.a0, dtype=float)
    trace = CcpTrace()
    for _ in range(config.max_iter):
        cost, g = _jq_and_subgradient(a, sset)
        trace.iterates.append(a)
        trace.costs.append(cost)
        a_next = ccp_step(a, g, moments)
        step = float(np.max(np.abs(a_next - a)))
        a = a_next
        trace.iterations += 1
        if step < config.tol:
            trace.converged = True
            break
    trace.iterates.append(a)
    trace.costs.append(_jq_and_subgradient(a, sset)[0])
    if raise_on_failure and not trace.converged:
        raise NotConverged(trace)
    return trace


def symmetric_linear_astar(sigma_sq: float, rho: float) -> float:
    """Optimal common slope for equal-variance sources.

    a* = rho sigma^2 / (2 E[X1^2 1(|X1| >= |X2|)]). In polar coordinates the
    radial integral is closed form, leaving
    E[...] = sigma^2 * 2 / (pi sqrt(1 - rho^2)) * int_{-pi/4}^{pi/4} cos^2 / q^2,
    q(theta) = (1 - rho sin 2 theta) / (1 - rho^2).
    """
    if sigma_sq <= 0:
        raise ValueError("sigma_sq must be positive")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    if rho == 0.0:
        return 0.0
    k = 1.0 - rho * rho

    def integrand(t):
        q = (1.0 - rho * math.sin(2.0 * t)) / k
        return math.cos(t) ** 2 / (q * q)

    val, err = integrate.quad(integrand, -math.pi / 4, math.pi / 4, epsabs=0.0, epsrel=1e-12)
    if err > 1e-8 * abs(val):
        raise QuadratureFailure(f"relative error {err / val:.2g} above 1e-8")
    kept = sigma_sq * 2.0 / (math.pi * math.sqrt(k)) * val
    return rho * sigma_sq / (2.0 * kept)


def _surface_brute(grid, x1, x2, w, block=16):
    n = grid.shape[0]
    surface = np.empty((n, n))
    for i, a1 in enumerate(grid):
        t1 = (x1 - a1 * x2) ** 2
        for j in range(0, n, block):
            t2 = (x2 - grid[j : j + block, None] * x1) ** 2
            surface[i, j : j + block] = np.minimum(t1, t2) @ w
    return surface


def _surface_sweep(grid, x1, x2, w):
    # For fixed a1, min(c, (x2 - a2 x1)^2) departs from c exactly on an
    # a2-interval around x2/x1; accumulate the quadratic correction over those
    # intervals with difference arrays instead of touching every (a2, sample).
    n = grid.shape[0]
    surface = np.empty((n, n))
    nz = x1 != 0.0
    ratio = np.where(nz, x2 / np.where(nz, x1, 1.0), 0.0)
    ax1 = np.abs(x1)
    qa, qb = w * x1 * x1, -2.0 * w * x1 * x2
    for i, a1 in enumerate(grid):
        c = (x1 - a1 * x2) ** 2
        half = np.where(nz, np.sqrt(c) / np.where(nz, ax1, 1.0), np.inf)
        inside0 = ~nz & (x2 * x2 <= c)
        lo = np.where(nz, ratio - half, np.where(inside0, -np.inf, np.inf))
        hi = np.where(nz, ratio + half, np.where(inside0, np.inf, -np.inf))
        start = np.searchsorted(grid, lo, side="left")
        stop = np.searchsorted(grid, hi, side="right")
        keep = start < stop
        start, stop = start[keep], stop[keep]
        acc = []
        for coef in (w * (x2 * x2 - c), qb, qa):
            k = coef[keep]
            d = np.bincount(start, k, minlength=n + 1) - np.bincount(stop, k, minlength=n + 1)
            acc.append(np.cumsum(d)[:n])
        surface[i] = float(c @ w) + acc[0] + grid * acc[1] + grid * grid * acc[2]
    return surface


def grid_search_oracle(
    source: SourceModel,
    a_range: tuple[float, float] = (0.0, 1.0),
    resolution: int = 200,
    evaluation: Union[EvalConfig, SampleSet] = EvalConfig(),
    method: str = "sweep",
) -> tuple[np.ndarray, EvalReport, np.ndarray]:
    """Exhaustive minimum of J_q over a ``resolution``-square grid.

    ``method="brute"`` evaluates every (grid point, sample) pair directly;
    ``"sweep"`` computes the same surface in O(samples) per grid row.
    Returns the best grid point, its report on the same sample set and the
    cost surface (rows indexed by a1, columns by a2).
    """
    if resolution < 50:
        raise ValueError("resolution must be >= 50")
    sset = sample_set_for(source, evaluation)
    x1, x2 = sset.points[:, 0], sset.points[:, 1]
    w = sset.weights if sset.weights is not None else np.full(sset.size, 1.0 / sset.size)
    grid = np.linspace(a_range[0], a_range[1], resolution)
    if method == "brute":
        surface = _surface_brute(grid, x1, x2, w)
    elif method == "sweep":
        surface = _surface_sweep(grid, x1, x2, w)
    else:
        raise ValueError(f"unknown method {method!r}")
    i, j = np.unravel_index(np.argmin(surface), surface.shape)
    best = np.array([grid[i], grid[j]])
    return best, jq(best, source, sset), surface
