"""Numerical property suite behind ``obsched check``.

Each check returns a :class:`CheckResult`; ``run_checks`` runs them all in a
fixed order with fixed seeds.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import policies as pol
from .ccp import CcpConfig, ccp_solve, subgradient_g, symmetric_linear_astar
from .cost import EvalConfig, evaluate_cost_mc, evaluate_cost_quadrature, g_eval, mc_sample_set
from .source import bivariate, eigendecompose, make_source, sample

__all__ = ["CheckResult", "CHECKS", "run_checks"]

RHOS = (0.0, 0.3, 0.6, 0.9)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


def _estimators_2d():
    src = bivariate(5.0, 7.0, 0.5)
    sym = bivariate(1.0, 1.0, 0.6)
    return [
        pol.MeanEstimator(),
        pol.SoftThresholdEstimator(1.0, 0.0),
        pol.SoftThresholdEstimator(1.0, 0.6),
        pol.SoftThresholdEstimator(2.5, 0.9),
        pol.PiecewiseLinearEstimator((0.3612, 0.4345)),
        pol.ConditionalMeanUnderMaxEstimator(src),
        pol.ConditionalMeanUnderMaxEstimator(sym),
    ]


def check_identity_structure() -> tuple[bool, str]:
    rng = np.random.default_rng(101)
    values = np.concatenate([[0.0, -0.0, 1e-300, -7.5, 40.0], rng.normal(0, 3, 200)])
    bad = []
    for est in _estimators_2d():
        for i in (1, 2):
            for v in values[:40]:
                if est(pol.ChannelMessage(i, float(v)))[i - 1] != v:
                    bad.append(f"{est.name}:scalar")
            idx = np.full(values.shape, i - 1)
            if not np.array_equal(est.estimate(idx, values, 2)[:, i - 1], values):
                bad.append(f"{est.name}:batch")
    for n in (2, 5):
        for i in range(1, n + 1):
            out = pol.mean_estimate(pol.ChannelMessage(i, 3.25), n)
            if out[i - 1] != 3.25 or np.count_nonzero(out) != 1:
                bad.append(f"mean:n={n}")
    # decorrelating pair: identity holds in the transformed coordinates
    cov = np.array([[2.0, 0.7, 0.1], [0.7, 1.0, -0.3], [0.1, -0.3, 1.5]])
    dec = eigendecompose(make_source(cov))
    est = pol.DecorrelatingEstimator(dec)
    worst = 0.0
    for i in range(3):
        idx = np.full(values.shape, i)
        back = est.estimate(idx, values, 3) @ dec.w.T
        worst = max(worst, float(np.max(np.abs(back[:, i] - values) / np.maximum(1.0, np.abs(values)))))
    if worst > 1e-12:
        bad.append(f"decorrelating:{worst:.1e}")
    return not bad, "all estimators reproduce the sent value" if not bad else ", ".join(sorted(set(bad)))


def check_eta_odd() -> tuple[bool, str]:
    worst = 0.0
    for rho in RHOS:
        for s2 in (1.0, 4.0):
            for xi in np.linspace(0.01, 6 * math.sqrt(s2), 300):
                e = pol.soft_threshold_eta(xi, s2, rho) + pol.soft_threshold_eta(-xi, s2, rho)
                worst = max(worst, abs(e))
    return worst <= 1e-8, f"max |eta(-x)+eta(x)| = {worst:.2e}"


def check_eta_bounded() -> tuple[bool, str]:
    worst = -math.inf
    for rho in RHOS:
        for xi in np.linspace(-6.0, 6.0, 401):
            worst = max(worst, abs(pol.soft_threshold_eta(xi, 1.0, rho)) - abs(xi))
    return worst <= 0.0, f"max |eta(x)| - |x| = {worst:.2e}"


def check_p_t_monotone() -> tuple[bool, str]:
    worst = math.inf
    for rho in RHOS:
        grid = np.linspace(-6.0, 6.0, 2000)
        eta = np.array([pol.soft_threshold_eta(v, 1.0, rho) for v in grid])
        worst = min(worst, float(np.min(np.diff(grid - eta))), float(np.min(np.diff(grid + eta))))
    return worst >= -1e-8, f"min increment of P, T = {worst:.2e}"


def check_h_sign() -> tuple[bool, str]:
    mismatches = 0
    for k, rho in enumerate((0.3, 0.6, 0.9)):
        x = sample(bivariate(1.0, 1.0, rho), 10_000, 300 + k)
        h = pol.discrepancy_H(x, 1.0, rho)
        pick1 = np.argmax(np.abs(x), axis=1) == 0
        ok = ((h <= 0) == pick1) | (np.abs(h) < 1e-8)
        mismatches += int(np.count_nonzero(~ok))
    return mismatches == 0, f"{mismatches} sign mismatches on 3x10^4 points"


def check_nearest_neighbor_reduction() -> tuple[bool, str]:
    zero = lambda v: np.zeros_like(v)  # noqa: E731
    x = sample(bivariate(1.0, 1.0, 0.4), 10_000, 17)
    ties = np.array([[1.0, -1.0], [-2.0, 2.0], [0.0, 0.0], [3.0, 3.0]])
    x = np.concatenate([x, ties])
    nn = pol.NearestNeighborScheduler(zero, zero)
    batch_ok = np.array_equal(nn.select(x)[0], pol.MaxScheduler().select(x)[0])
    scalar_ok = all(nn(row) == pol.max_schedule(row) for row in x[:2000])
    return batch_ok and scalar_ok, "identical decisions" if batch_ok and scalar_ok else "decisions differ"


def check_ccp_descent() -> tuple[bool, str]:
    worst = -math.inf
    sources = [bivariate(5.0, 7.0, r) for r in (0.0, 0.3, 0.6, 0.9)]
    sources += [bivariate(1.0, 1.0, r) for r in (0.2, 0.8)]
    for src in sources:
        tr = ccp_solve(src, CcpConfig(eval=EvalConfig(method="quad")))
        worst = max(worst, float(np.max(np.diff(tr.costs), initial=-math.inf)))
    return worst <= 1e-10, f"max cost increase per step = {worst:.2e}"


def check_subgradient_hyperplane() -> tuple[bool, str]:
    src = bivariate(5.0, 7.0, 0.6)
    sset = mc_sample_set(src, 100_000, 23)
    rng = np.random.default_rng(29)
    worst = math.inf
    for _ in range(100):
        a, b = rng.uniform(-1.0, 2.0, 2), rng.uniform(-1.0, 2.0, 2)
        ga, gb = g_eval(a, src, sset), g_eval(b, src, sset)
        slack = gb.cost - (ga.cost + subgradient_g(a, src, sset) @ (b - a)) + 3 * gb.stderr
        worst = min(worst, slack)
    return worst >= 0.0, f"min slack over 100 pairs = {worst:.3e}"


def check_independent_nullity() -> tuple[bool, str]:
    # Four independent sensors under max-scheduling: the unsent coordinates
    # have zero conditional mean given the sent value. E[X_j | U=i] vanishes
    # for any sign-symmetric law, so test E[X_j sign(X_i) | U=i], which is
    # nonzero whenever the conditional mean is a nonzero odd function.
    variances = (1.0, 2.0, 0.5, 3.0)
    x = sample(make_source(np.diag(variances)), 1_000_000, 41)
    sent = np.argmax(np.abs(x), axis=1)
    worst = 0.0
    for i in range(4):
        rows = x[sent == i]
        for j in range(4):
            if j == i:
                continue
            v = rows[:, j] * np.sign(rows[:, i])
            worst = max(worst, abs(v.mean()) / (v.std(ddof=1) / math.sqrt(v.size)))
    return worst <= 3.0, f"max |mean|/stderr over 12 (sent, unsent) pairs = {worst:.2f}"


def _builtin_pairs():
    asym = bivariate(5.0, 7.0, 0.5)
    sym = bivariate(1.0, 1.0, 0.6)
    a_sym = symmetric_linear_astar(1.0, 0.6)
    out = []
    for src in (asym, sym):
        dec = eigendecompose(src)
        out += [
            (src, pol.MaxScheduler(), pol.MeanEstimator()),
            (src, pol.OpenLoopScheduler.for_source(src), pol.MeanEstimator()),
            (src, pol.LinearInducedScheduler((0.2936, 0.3513)), pol.PiecewiseLinearEstimator((0.2936, 0.3513))),
            (src, pol.DecorrelatingScheduler(dec), pol.DecorrelatingEstimator(dec)),
            (src, pol.MaxScheduler(), pol.ConditionalMeanUnderMaxEstimator(src)),
        ]
    out += [
        (sym, pol.MaxScheduler(), pol.SoftThresholdEstimator(1.0, 0.6)),
        (sym, pol.MaxScheduler(), pol.PiecewiseLinearEstimator((a_sym, a_sym))),
    ]
    return out


def check_mc_quadrature_agreement() -> tuple[bool, str]:
    worst = 0.0
    for k, (src, sch, est) in enumerate(_builtin_pairs()):
        mc = evaluate_cost_mc(src, sch, est, 100_000, 500 + k)
        quad = evaluate_cost_quadrature(src, sch, est, 1024)
        worst = max(worst, abs(mc.cost - quad.cost) / mc.stderr)
    return worst <= 3.0, f"max |MC - quad| / stderr = {worst:.2f}"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "identity-structure": check_identity_structure,
    "eta-odd-symmetry": check_eta_odd,
    "eta-bounded": check_eta_bounded,
    "P-T-monotone": check_p_t_monotone,
    "H-sign-pattern": check_h_sign,
    "nearest-neighbor-reduction": check_nearest_neighbor_reduction,
    "ccp-descent": check_ccp_descent,
    "subgradient-hyperplane": check_subgradient_hyperplane,
    "independent-nullity-n4": check_independent_nullity,
    "mc-quadrature-agreement": check_mc_quadrature_agreement,
}


def run_checks(names=None) -> list[CheckResult]:
    results = []
    for name in names or CHECKS:
        t0 = time.perf_counter()
        try:
            passed, detail = CHECKS[name]()
        except ArithmeticError as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
    return results
