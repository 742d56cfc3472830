"""Reproduction experiments: the coefficient table, the two performance
sweeps, the soft-thresholding curve and the piecewise-linear cost surface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import policies as pol
from .ccp import CcpConfig, ccp_solve, grid_search_oracle, sample_set_for, symmetric_linear_astar
from .cost import EvalConfig, closed_form_open_loop, evaluate_cost, jq
from .source import SourceModel, bivariate, eigendecompose

TABLE1_RHOS = tuple(round(0.1 * k, 1) for k in range(10))

# rho -> (J_q*, a1*, a2*) reported for sigma1^2 = 5, sigma2^2 = 7
TABLE1_REFERENCE = {
    0.0: (2.1271, 0.0007, 0.0012),
    0.1: (2.1099, 0.0552, 0.0678),
    0.2: (2.0579, 0.1131, 0.1330),
    0.3: (1.9704, 0.1709, 0.2023),
    0.4: (1.8457, 0.2292, 0.2772),
    0.5: (1.6815, 0.2936, 0.3513),
    0.6: (1.4741, 0.3612, 0.4345),
    0.7: (1.2179, 0.4336, 0.5314),
    0.8: (0.9038, 0.5189, 0.6426),
    0.9: (0.5149, 0.6255, 0.7897),
}

SWEEP_SIGMA1 = (0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0)
SWEEP_RHOS = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95)


@dataclass(frozen=True)
class Table1Row:
    rho: float
    jq: float
    a1: float
    a2: float
    iterations: int
    converged: bool
    stderr: float


def table1(
    rhos=TABLE1_RHOS,
    sigma1_sq: float = 5.0,
    sigma2_sq: float = 7.0,
    optimizer: EvalConfig = EvalConfig(samples=1_000_000, seed=2019),
    report_samples: int = 10_000_000,
    report_seed: int = 2020,
    tol: float = 1e-6,
    max_iter: int = 500,
) -> list[Table1Row]:
    """CCP optimum per correlation, re-scored on an independent sample set."""
    rows = []
    for rho in rhos:
        src = bivariate(sigma1_sq, sigma2_sq, rho)
        trace = ccp_solve(src, CcpConfig(tol=tol, max_iter=max_iter, eval=optimizer))
        if optimizer.method == "quad":
            rep = jq(trace.a, src, optimizer)
        else:
            rep = jq(trace.a, src, EvalConfig(samples=report_samples, seed=report_seed))
        rows.append(
            Table1Row(rho, rep.cost, float(trace.a[0]), float(trace.a[1]), trace.iterations, trace.converged, rep.stderr)
        )
    return rows


@dataclass(frozen=True)
class IndependentRow:
    sigma1_sq: float
    cost_max_mean: float
    cost_open_loop: float
    stderr: float


def sweep_independent(sigma1_grid=SWEEP_SIGMA1, sigma2_sq: float = 1.0, evaluation: EvalConfig = EvalConfig(seed=11)):
    rows = []
    for s1 in sigma1_grid:
        src = bivariate(s1, sigma2_sq, 0.0)
        rep = evaluate_cost(src, pol.MaxScheduler(), pol.MeanEstimator(), evaluation)
        rows.append(IndependentRow(s1, rep.cost, closed_form_open_loop(src), rep.stderr))
    return rows


@dataclass(frozen=True)
class SymmetricRow:
    rho: float
    cost_soft: float
    cost_decorrelating: float
    cost_linear: float
    stderr_soft: float
    stderr_decorrelating: float
    stderr_linear: float
    a_star: float


def symmetric_pairs(src: SourceModel):
    """The three schemes compared for equal-variance sources, as (scheduler, estimator)."""
    s2, rho = src.sigma1_sq, src.rho
    dec = eigendecompose(src)
    a = symmetric_linear_astar(s2, rho)
    return {
        "soft": (pol.MaxScheduler(), pol.SoftThresholdEstimator(s2, rho)),
        "decorrelating": (pol.DecorrelatingScheduler(dec), pol.DecorrelatingEstimator(dec)),
        "linear": (pol.MaxScheduler(), pol.PiecewiseLinearEstimator((a, a))),
    }, a


def sweep_symmetric(rhos=SWEEP_RHOS, sigma_sq: float = 1.0, evaluation: EvalConfig = EvalConfig(seed=13)):
    """Costs of the three schemes on common random numbers."""
    rows = []
    for rho in rhos:
        if not 0.0 <= rho <= 0.95:
            raise ValueError("symmetric sweep needs 0 <= rho <= 0.95")
        src = bivariate(sigma_sq, sigma_sq, rho)
        pairs, a = symmetric_pairs(src)
        reps = {k: evaluate_cost(src, s, e, evaluation) for k, (s, e) in pairs.items()}
        rows.append(
            SymmetricRow(
                rho,
                reps["soft"].cost,
                reps["decorrelating"].cost,
                reps["linear"].cost,
                reps["soft"].stderr,
                reps["decorrelating"].stderr,
                reps["linear"].stderr,
                a,
            )
        )
    return rows


def eta_curve(rhos=(0.0, 0.3, 0.6, 0.9), sigma_sq: float = 1.0, xi_max: float = 4.0, points: int = 161):
    """Rows (rho, xi, eta) of the soft-thresholding function on a symmetric grid."""
    xs = np.linspace(-xi_max, xi_max, points)
    return [(rho, float(x), pol.soft_threshold_eta(x, sigma_sq, rho)) for rho in rhos for x in xs]


def cost_surface(
    src: SourceModel,
    a_range=(0.0, 1.0),
    resolution: int = 200,
    evaluation: EvalConfig = EvalConfig(samples=1_000_000, seed=2019),
):
    """Grid of J_q values plus the grid minimizer."""
    sset = sample_set_for(src, evaluation)
    best, rep, surface = grid_search_oracle(src, a_range, resolution, sset)
    grid = np.linspace(a_range[0], a_range[1], resolution)
    rows = [(float(a1), float(a2), float(surface[i, j])) for i, a1 in enumerate(grid) for j, a2 in enumerate(grid)]
    return rows, best, rep
