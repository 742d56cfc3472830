import numpy as np
import pytest
from scipy import stats

from obsched.truncnorm import truncated_mean, truncated_mean_quad


def _scipy_mean(m, sd, lo, hi):
    return stats.truncnorm.mean((lo - m) / sd, (hi - m) / sd, loc=m, scale=sd)


CASES = [
    (0.0, 1.0, -1.0, 1.0),
    (1.6, 0.6, -2.0, 2.0),
    (0.5, 0.3, -0.2, 0.2),
    (3.0, 0.5, -1.0, 1.0),
    (-3.0, 0.5, -1.0, 1.0),
    (8.0, 1.0, 0.0, 1.0),
    (0.2, 2.0, -0.1, 0.1),
]


@pytest.mark.parametrize("m, sd, lo, hi", CASES)
def test_closed_form_matches_scipy(m, sd, lo, hi):
    assert truncated_mean(m, sd, lo, hi) == pytest.approx(_scipy_mean(m, sd, lo, hi), abs=1e-9)


@pytest.mark.parametrize("m, sd, lo, hi", CASES)
def test_quadrature_matches_closed_form(m, sd, lo, hi):
    assert truncated_mean_quad(m, sd, lo, hi) == pytest.approx(truncated_mean(m, sd, lo, hi), abs=1e-9)


def test_far_tail_stays_inside_interval():
    # 40 sds away: mass underflows in naive formulas; mean hugs the near edge
    v = truncated_mean(41.0, 1.0, -1.0, 1.0)
    assert 0.97 < v <= 1.0
    assert truncated_mean_quad(41.0, 1.0, -1.0, 1.0) == pytest.approx(v, abs=1e-9)
    assert truncated_mean(-41.0, 1.0, -1.0, 1.0) == pytest.approx(-v, abs=1e-15)


def test_vectorized_shapes():
    m = np.linspace(-3, 3, 7)
    out = truncated_mean(m, 1.0, -np.ones(7), np.ones(7))
    assert out.shape == (7,)
    assert np.allclose(out, -out[::-1], atol=1e-15)


def test_random_agreement():
    rng = np.random.default_rng(8)
    m = rng.normal(0, 5, 300)
    sd = rng.uniform(0.05, 3, 300)
    hw = rng.uniform(0.01, 6, 300)
    closed = truncated_mean(m, sd, -hw, hw)
    quad = np.array([truncated_mean_quad(*args) for args in zip(m, sd, -hw, hw)])
    assert np.max(np.abs(closed - quad)) < 1e-7


@pytest.mark.parametrize("hw", [5e-324, 1e-300, 1e-13, 3e-7])
@pytest.mark.parametrize("m", [0.0, 0.7, -2.0, 30.0])
def test_narrow_intervals(hw, m):
    # density is linear over the interval, so the mean sits at the midpoint to O(hw^2)
    for lo, hi in ((-hw, hw), (1.0 - hw, 1.0 + hw)):
        if not lo < hi:  # 1 +- hw can round to an empty interval
            continue
        closed = truncated_mean(m, 1.0, lo, hi)
        quad = truncated_mean_quad(m, 1.0, lo, hi)
        assert np.isfinite(closed) and lo <= closed <= hi
        assert quad == pytest.approx(closed, abs=1e-15)
        assert closed == pytest.approx(0.5 * (lo + hi), abs=1e-12)
