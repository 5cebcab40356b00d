import numpy as np
import pytest

from geopipe.noise import ScheduleError, VarianceSchedule, alpha_bar, forward_noise


def product_oracle(betas, t):
    acc = 1.0
    for b in betas[:t]:
        acc = acc * (1.0 - b)
    return acc


def test_constant_beta():
    s = VarianceSchedule.constant(0.1, 10)
    assert abs(alpha_bar(s, 3) - 0.729) <= 1e-15


def test_t_zero():
    assert alpha_bar(VarianceSchedule.linear(), 0) == 1.0


def test_random_schedule_matches_oracle(rng):
    betas = rng.uniform(1e-4, 0.05, 500)
    s = VarianceSchedule(betas)
    for t in range(0, 501, 7):
        want = product_oracle(list(betas), t)
        assert abs(alpha_bar(s, t) - want) <= 1e-15 * want


def test_out_of_range():
    s = VarianceSchedule.constant(0.1, 5)
    for t in (-1, 6, 2.5):
        with pytest.raises(ScheduleError):
            alpha_bar(s, t)


def test_invalid_betas():
    for bad in ([0.0], [1.0], [0.5, -0.1], []):
        with pytest.raises(ScheduleError):
            VarianceSchedule(bad)


def test_default_linear_strictly_decreasing():
    s = VarianceSchedule.linear()
    assert s.T == 1000
    assert s.betas[0] == 1e-4 and s.betas[-1] == 0.02
    assert np.all(np.diff(s.alpha_bars) < 0) and s.alpha_bars[-1] > 0


def test_zero_noise(rng):
    s = VarianceSchedule.linear()
    z0 = rng.normal(size=64)
    np.testing.assert_array_equal(forward_noise(z0, 400, np.zeros(64), s), np.sqrt(alpha_bar(s, 400)) * z0)


def test_t0_identity(rng):
    s = VarianceSchedule.linear()
    z0 = rng.normal(size=64)
    np.testing.assert_array_equal(forward_noise(z0, 0, rng.normal(size=64), s), z0)


def test_variance_preserved(rng):
    s = VarianceSchedule.linear()
    for t in (1, 250, 1000):
        zt = forward_noise(rng.standard_normal(10**6), t, rng.standard_normal(10**6), s)
        assert 0.99 <= zt.var() <= 1.01


def test_linearity(rng):
    s = VarianceSchedule.linear()
    z1, z2, e1, e2 = rng.normal(size=(4, 128))
    a, b = 0.7, -1.3
    lhs = forward_noise(a * z1 + b * z2, 333, a * e1 + b * e2, s)
    rhs = a * forward_noise(z1, 333, e1, s) + b * forward_noise(z2, 333, e2, s)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12


def test_length_mismatch():
    with pytest.raises(ScheduleError):
        forward_noise(np.zeros(3), 1, np.zeros(4), VarianceSchedule.linear())
