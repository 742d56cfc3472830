import math

import numpy as np
import pytest
from scipy import integrate, stats

from obsched.ccp import (
    CcpConfig,
    NotConverged,
    ccp_solve,
    ccp_step,
    grid_search_oracle,
    sample_set_for,
    subgradient_g,
    symmetric_linear_astar,
)
from obsched.cost import EvalConfig, angular_rule, g_eval, jq, mc_sample_set
from obsched.experiments import TABLE1_REFERENCE
from obsched.source import bivariate

QUAD = EvalConfig(method="quad")


def _subgradient_terms(a, x):
    r1 = x[:, 0] - a[0] * x[:, 1]
    r2 = x[:, 1] - a[1] * x[:, 0]
    first = np.abs(r1) >= np.abs(r2)
    return -2 * np.where(first, r1 * x[:, 1], 0.0), -2 * np.where(first, 0.0, r2 * x[:, 0])


def test_subgradient_vanishes_independent_symmetric():
    src = bivariate(1, 1, 0)
    sset = mc_sample_set(src, 100_000, 3)
    g = subgradient_g((0, 0), src, sset)
    for gi, terms in zip(g, _subgradient_terms((0, 0), sset.points)):
        assert abs(gi) <= 3 * terms.std(ddof=1) / math.sqrt(terms.size)


@pytest.mark.parametrize("a", [(0.3, 0.4), (0.1, 0.9), (0.6, 0.2), (-0.3, 1.2)])
def test_subgradient_matches_finite_differences(a, table_source):
    sset = mc_sample_set(table_source, 100_000, 17)
    g = subgradient_g(a, table_source, sset)
    h = 1e-4
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (g_eval(np.add(a, e), table_source, sset).cost - g_eval(np.subtract(a, e), table_source, sset).cost) / (2 * h)
        assert fd == pytest.approx(g[k], rel=5e-3)


def test_subgradient_on_tie_line_supports_g():
    # a1 = a2 with equal variances; the first-branch choice must still support G
    src = bivariate(1, 1, 0.5)
    sset = mc_sample_set(src, 100_000, 19)
    a = np.array([0.3, 0.3])
    g = subgradient_g(a, src, sset)
    ga = g_eval(a, src, sset).cost
    for b in np.random.default_rng(2).uniform(-1, 2, (200, 2)):
        # G is exactly convex on the frozen sample set
        assert g_eval(b, src, sset).cost >= ga + g @ (b - a) - 1e-10


def test_ccp_step_examples():
    src = bivariate(5, 7, 0.5)
    assert ccp_step((0, 0), (0, 0), src) == pytest.approx([0.5 * math.sqrt(5 / 7), 0.5 * math.sqrt(7 / 5)])
    assert np.array_equal(ccp_step((0, 0), (0, 0), bivariate(5, 7, 0)), [0, 0])
    out = ccp_step((0, 0), (-0.7, -1.0), src)
    assert out == pytest.approx([-0.05 + 0.5 * math.sqrt(5 / 7), -0.1 + 0.5 * math.sqrt(7 / 5)], abs=1e-14)


def test_ccp_step_solves_first_order_condition(table_source):
    g = np.array([0.3, -0.8])
    a = ccp_step((0, 0), g, table_source)
    c = table_source.cov
    grad_f = np.array([2 * a[0] * c[1, 1] - 2 * c[0, 1], 2 * a[1] * c[0, 0] - 2 * c[0, 1]])
    assert grad_f == pytest.approx(g, abs=1e-13)


def test_config_validation():
    with pytest.raises(ValueError):
        CcpConfig(tol=0)
    with pytest.raises(ValueError):
        CcpConfig(max_iter=0)


@pytest.mark.parametrize("rho", [0.0, 0.5])
def test_ccp_table_rows(rho):
    src = bivariate(5, 7, rho)
    trace = ccp_solve(src)
    ref_j, ref_a1, ref_a2 = TABLE1_REFERENCE[rho]
    assert trace.converged
    assert trace.a == pytest.approx([ref_a1, ref_a2], abs=0.02)
    assert trace.cost == pytest.approx(ref_j, abs=0.01)


def test_ccp_mc_descent_exact_on_frozen_set(table_source):
    trace = ccp_solve(table_source, CcpConfig(eval=EvalConfig(samples=200_000, seed=5)))
    assert np.all(np.diff(trace.costs) <= 1e-12)


def test_ccp_quad_descent_and_fixed_point(table_source):
    cfg = CcpConfig(eval=QUAD)
    trace = ccp_solve(table_source, cfg)
    assert trace.converged
    assert np.all(np.diff(trace.costs) <= 1e-10)
    a = trace.a
    c = table_source.cov
    grad_f = np.array([2 * a[0] * c[1, 1] - 2 * c[0, 1], 2 * a[1] * c[0, 0] - 2 * c[0, 1]])
    g = subgradient_g(a, table_source, angular_rule(table_source))
    assert np.max(np.abs(grad_f - g)) <= 10 * cfg.tol * 7.0


@pytest.mark.parametrize("rho", [0.2, 0.5, 0.8])
def test_ccp_symmetric_matches_closed_form(rho):
    trace = ccp_solve(bivariate(1, 1, rho), CcpConfig(eval=QUAD))
    star = symmetric_linear_astar(1.0, rho)
    assert trace.a == pytest.approx([star, star], abs=1e-3)


def test_not_converged_carries_trace(table_source):
    cfg = CcpConfig(max_iter=2, eval=EvalConfig(samples=20_000, seed=1))
    trace = ccp_solve(table_source, cfg)
    assert not trace.converged and trace.iterations == 2
    assert len(trace.iterates) == len(trace.costs) == 3
    with pytest.raises(NotConverged) as info:
        ccp_solve(table_source, cfg, raise_on_failure=True)
    assert info.value.trace.iterations == 2


def test_ccp_custom_start(table_source):
    cfg = CcpConfig(a0=(0.9, 0.1), eval=QUAD)
    a = ccp_solve(table_source, cfg).a
    assert a == pytest.approx(ccp_solve(table_source, CcpConfig(eval=QUAD)).a, abs=1e-4)


# --- symmetric closed form ----------------------------------------------------


def _kept_moment_dblquad(rho):
    # E[X1^2 1(|X1| >= |X2|)] for unit variances, by direct 2-D quadrature
    dist = stats.multivariate_normal(cov=[[1, rho], [rho, 1]])
    f = lambda y, x: x * x * dist.pdf([x, y])  # noqa: E731
    val, _ = integrate.dblquad(f, -10, 10, lambda x: -abs(x), lambda x: abs(x), epsabs=1e-11, epsrel=1e-10)
    return val


def test_astar_rho_zero():
    assert symmetric_linear_astar(2.0, 0.0) == 0.0


@pytest.mark.parametrize("rho", [0.3, 0.5, 0.8])
def test_astar_against_dblquad(rho):
    expected = rho / (2 * _kept_moment_dblquad(rho))
    assert symmetric_linear_astar(1.0, rho) == pytest.approx(expected, rel=1e-7)


def test_astar_example_range_and_mc():
    v = symmetric_linear_astar(1.0, 0.5)
    assert 0 < v < 0.5
    x = mc_sample_set(bivariate(1, 1, 0.5), 2_000_000, 44).points
    terms = x[:, 0] ** 2 * (np.abs(x[:, 0]) >= np.abs(x[:, 1]))
    kept, se = terms.mean(), terms.std(ddof=1) / math.sqrt(terms.size)
    assert abs(0.5 / (2 * kept) - v) <= 3 * se * 0.5 / (2 * kept**2)


@pytest.mark.parametrize("s2", [0.5, 2.0, 10.0])
def test_astar_scale_invariant(s2):
    for rho in (0.1, 0.6, 0.95):
        assert symmetric_linear_astar(s2, rho) == pytest.approx(symmetric_linear_astar(1.0, rho), abs=1e-6)


def test_astar_below_one():
    assert all(symmetric_linear_astar(1.0, r) < 1 for r in np.linspace(0, 0.999, 50))


def test_astar_domain():
    with pytest.raises(ValueError):
        symmetric_linear_astar(1.0, -0.2)
    with pytest.raises(ValueError):
        symmetric_linear_astar(0.0, 0.2)


# --- grid oracle ----------------------------------------------------------------


def test_grid_sweep_matches_brute(table_source):
    sset = mc_sample_set(table_source, 20_000, 8)
    _, _, brute = grid_search_oracle(table_source, (-0.5, 1.5), 50, sset, method="brute")
    _, _, sweep = grid_search_oracle(table_source, (-0.5, 1.5), 50, sset, method="sweep")
    assert np.max(np.abs(brute - sweep)) <= 1e-10 * np.max(brute)


def test_grid_sweep_handles_zero_coordinates():
    pts = np.array([[0.0, 1.0], [0.0, -0.2], [1.0, 0.0], [0.5, 0.5], [-2.0, 0.3]])
    sset = type(mc_sample_set(bivariate(1, 1, 0), 10, 1))(points=pts, weights=np.full(5, 0.2))
    src = bivariate(1, 1, 0)
    _, _, brute = grid_search_oracle(src, (-1, 1), 50, sset, method="brute")
    _, _, sweep = grid_search_oracle(src, (-1, 1), 50, sset, method="sweep")
    assert np.allclose(brute, sweep, atol=1e-12)


def test_grid_rejects_coarse_and_unknown(table_source):
    sset = mc_sample_set(table_source, 10_000, 1)
    with pytest.raises(ValueError):
        grid_search_oracle(table_source, (0, 1), 49, sset)
    with pytest.raises(ValueError):
        grid_search_oracle(table_source, (0, 1), 50, sset, method="nope")


@pytest.mark.parametrize("rho", sorted(TABLE1_REFERENCE))
def test_grid_agrees_with_ccp_on_table_rows(rho):
    src = bivariate(5, 7, rho)
    sset = mc_sample_set(src, 200_000, 2019)
    trace = ccp_solve(src, sset=sset)
    best, rep, _ = grid_search_oracle(src, (0, 1), 60, sset)
    spacing = 1 / 59
    assert np.max(np.abs(best - trace.a)) <= spacing
    ccp_rep = jq(trace.a, src, sset)
    assert rep.cost >= ccp_rep.cost - 3 * ccp_rep.stderr
    assert abs(rep.cost - ccp_rep.cost) <= 3 * ccp_rep.stderr


def test_sample_set_for_dispatch(table_source):
    assert sample_set_for(table_source, QUAD).weights is not None
    mc = sample_set_for(table_source, EvalConfig(samples=10_000, seed=1))
    assert mc.is_mc and mc.size == 10_000
