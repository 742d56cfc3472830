"""End-to-end acceptance criteria.

Each test prints one ``ACCEPT <n> PASS|FAIL ...`` line (also visible under
pytest's output capture) and asserts the criterion.
"""

import math
import time

import numpy as np
import pytest

from obsched import experiments as exp
from obsched import policies as pol
from obsched.ccp import CcpConfig, ccp_solve, grid_search_oracle, sample_set_for, symmetric_linear_astar
from obsched.checks import run_checks
from obsched.cost import EvalConfig, closed_form_open_loop, evaluate_cost_mc, evaluate_cost_quadrature, jq
from obsched.source import bivariate

pytestmark = pytest.mark.slow

SYM_RHOS = tuple(round(0.1 * k, 1) for k in range(1, 10))


@pytest.fixture
def report(request):
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def emit(n, ok, detail):
        line = f"ACCEPT {n} {'PASS' if ok else 'FAIL'}  {detail}"
        if tr is not None:
            tr.write_line("")
            tr.write_line(line)
        else:
            print(line)
        return ok

    return emit


def test_1_table1_reproduction(report):
    t0 = time.perf_counter()
    rows = exp.table1()  # 10^6 optimizer samples, 10^7 fresh reporting samples
    elapsed = time.perf_counter() - t0
    worst_j = worst_a = 0.0
    for r in rows:
        ref_j, ref_a1, ref_a2 = exp.TABLE1_REFERENCE[r.rho]
        worst_j = max(worst_j, abs(r.jq - ref_j))
        worst_a = max(worst_a, abs(r.a1 - ref_a1), abs(r.a2 - ref_a2))
    converged = all(r.converged for r in rows)
    decreasing = all(a.jq > b.jq for a, b in zip(rows, rows[1:]))
    ok = worst_j <= 0.01 and worst_a <= 0.02 and converged and decreasing and elapsed < 600
    report(
        1,
        ok,
        f"coefficient table: max|dJ|={worst_j:.4f} (<=0.01), max|da|={worst_a:.4f} (<=0.02), "
        f"converged={converged}, Jq decreasing={decreasing}, {elapsed:.0f}s (<600s)",
    )
    assert ok


def test_2_symmetric_closed_form(report):
    t0 = time.perf_counter()
    worst = 0.0
    for rho in SYM_RHOS:
        trace = ccp_solve(bivariate(1.0, 1.0, rho), CcpConfig(eval=EvalConfig(method="quad")))
        star = symmetric_linear_astar(1.0, rho)
        worst = max(worst, float(np.max(np.abs(trace.a - star))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-3
    report(2, ok, f"CCP vs closed-form a*: max dev {worst:.2e} (<=1e-3) over rho=0.1..0.9, {elapsed:.1f}s")
    assert ok


def test_3_independent_value_and_dominance(report):
    target = 1 - 2 / math.pi
    unit = bivariate(1.0, 1.0, 0.0)
    mc = evaluate_cost_mc(unit, pol.MaxScheduler(), pol.MeanEstimator(), 10_000_000, 7)
    quad = evaluate_cost_quadrature(unit, pol.MaxScheduler(), pol.MeanEstimator(), 1024)
    z = abs(mc.cost - target) / mc.stderr
    dq = abs(quad.cost - target)
    slack = []
    for row in exp.sweep_independent(evaluation=EvalConfig(samples=1_000_000, seed=11)):
        src = bivariate(row.sigma1_sq, 1.0, 0.0)
        assert row.cost_open_loop == closed_form_open_loop(src) == min(row.sigma1_sq, 1.0)
        slack.append(row.cost_open_loop + 3 * row.stderr - row.cost_max_mean)
    ok = z <= 3 and dq <= 1e-3 and min(slack) >= 0
    report(
        3,
        ok,
        f"1-2/pi: MC {mc.cost:.6f} ({z:.2f} stderr, <=3), quad |err|={dq:.1e} (<=1e-3); "
        f"dominance min slack {min(slack):.4f} over {len(slack)} sigma1^2 values",
    )
    assert ok


def test_4_scheme_ordering(report):
    worst = math.inf
    failures = []
    for row in exp.sweep_symmetric(rhos=SYM_RHOS, evaluation=EvalConfig(samples=10_000_000, seed=13)):
        s1 = row.cost_decorrelating + 3 * max(row.stderr_soft, row.stderr_decorrelating) - row.cost_soft
        s2 = row.cost_linear + 3 * max(row.stderr_decorrelating, row.stderr_linear) - row.cost_decorrelating
        worst = min(worst, s1, s2)
        if s1 < 0 or s2 < 0:
            failures.append(row.rho)
    ok = not failures
    report(4, ok, f"soft <= decorrelating <= linear(a*) at rho=0.1..0.9, 10^7 samples: min slack {worst:.2e}, failing rho {failures}")
    assert ok


def test_5_grid_global_check(report):
    src = bivariate(5.0, 7.0, 0.6)
    sset = sample_set_for(src, EvalConfig(samples=1_000_000, seed=2019))
    trace = ccp_solve(src, sset=sset)
    ccp_rep = jq(trace.a, src, sset)
    best, grid_rep, surface = grid_search_oracle(src, (0.0, 1.0), 200, sset)
    floor = ccp_rep.cost - 3 * ccp_rep.stderr
    spacing = 1.0 / 199
    near = float(np.max(np.abs(best - trace.a)))
    ok = float(surface.min()) >= floor
    report(
        5,
        ok,
        f"200x200 grid min {surface.min():.6f} >= CCP {ccp_rep.cost:.6f} - 3*{ccp_rep.stderr:.4f}; "
        f"grid argmin ({best[0]:.4f}, {best[1]:.4f}) is {near / spacing:.2f} spacings from CCP a",
    )
    assert ok


def test_6_property_suite(report):
    t0 = time.perf_counter()
    results = run_checks()
    elapsed = time.perf_counter() - t0
    failed = [r.name for r in results if not r.passed]
    ok = not failed and elapsed < 120
    report(6, ok, f"{len(results) - len(failed)}/{len(results)} properties pass in {elapsed:.1f}s (<120s); failed: {failed}")
    for r in results:
        print(f"  {'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    assert ok
