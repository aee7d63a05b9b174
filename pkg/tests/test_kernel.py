import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgelab.errors import DegenerateProcessError, DomainError
from bridgelab.kernel import (
    KernelParams,
    complex_normal,
    kernel_params,
    log_normal,
    ouve_kernel,
    sample_state,
    sb_marginal,
    sb_potentials,
)
from bridgelab.process import ProcessSpec

OUVE = ProcessSpec.ouve(1.5, c=0.01, k=10.0)
SBVE = ProcessSpec.sbve(c=0.01, k=10.0)


def brute_force_bridge(c, k, t):
    """Product of the two Gaussian potentials on a dense grid: mean weights and variance."""
    lk = math.log(k)
    s2 = c * (k ** (2 * t) - 1) / (2 * lk)
    s1 = c * (k**2 - 1) / (2 * lk)
    sb2 = s1 - s2
    x = np.linspace(-3, 4, 400001)
    x0, y = 1.0, 0.0
    dens = np.exp(-((x - x0) ** 2) / (2 * s2) - ((x - y) ** 2) / (2 * sb2))
    dens /= dens.sum()
    mean = float((x * dens).sum())
    var = float(((x - mean) ** 2 * dens).sum())
    return mean, var


def test_ouve_at_zero_is_identity():
    kp = ouve_kernel(OUVE, 0.0)
    assert (kp.w_x, kp.w_y, kp.var) == (1.0, 0.0, 0.0)


def test_ouve_weights_midpoint():
    kp = ouve_kernel(OUVE, 0.5)
    assert kp.w_x == pytest.approx(math.exp(-0.75), rel=1e-14)
    assert kp.w_y == pytest.approx(1 - math.exp(-0.75), rel=1e-14)
    assert kp.w_x + kp.w_y == pytest.approx(1.0, abs=1e-15)


def test_ouve_variance_at_one():
    closed = 0.01 * (100 - math.exp(-3)) / (2 * (1.5 + math.log(10)))
    assert ouve_kernel(OUVE, 1.0).var == pytest.approx(closed, rel=1e-13)
    assert closed == pytest.approx(0.131424, rel=1e-5)


def test_sb_endpoints():
    k0, k1 = sb_marginal(SBVE, 0.0), sb_marginal(SBVE, 1.0)
    assert (k0.w_x, k0.w_y, k0.var) == (1.0, 0.0, 0.0)
    assert (k1.w_x, k1.w_y, k1.var) == (0.0, 1.0, 0.0)


def test_sb_midpoint_against_brute_force():
    kp = sb_marginal(SBVE, 0.5)
    assert kp.w_y == pytest.approx(1 / 11, rel=1e-13)
    mean, var = brute_force_bridge(0.01, 10.0, 0.5)
    assert kp.mean(1.0, 0.0) == pytest.approx(mean, rel=1e-6)
    assert kp.var == pytest.approx(var, rel=1e-5)
    assert kp.var == pytest.approx(0.0177666, rel=1e-5)


def test_kernel_params_dispatch():
    assert kernel_params(OUVE, 0.3) == ouve_kernel(OUVE, 0.3)
    assert kernel_params(SBVE, 0.3) == sb_marginal(SBVE, 0.3)
    with pytest.raises(DomainError):
        ouve_kernel(SBVE, 0.3)


def test_potentials():
    assert sb_potentials(SBVE, 0.0).psi_bar.var == 0.0
    assert sb_potentials(SBVE, 1.0).psi.var == 0.0
    for t in np.linspace(0, 1, 7):
        pot = sb_potentials(SBVE, t)
        assert pot.psi.mean_weight == 1.0 and pot.psi_bar.mean_weight == 1.0


def test_degenerate_process():
    with pytest.raises(DegenerateProcessError):
        sb_marginal(ProcessSpec.sbve(c=0.0), 0.5)


def test_sample_state_exact_when_noise_free():
    rng = np.random.default_rng(0)
    x0 = np.array([1 + 2j, -0.5j])
    y = np.array([3.0 + 0j, 0.25 + 0j])
    np.testing.assert_array_equal(sample_state(KernelParams(0.0, 1.0, 0.0, 0.0), x0, y, rng), x0)
    np.testing.assert_array_equal(sample_state(KernelParams(1.0, 0.0, 1.0, 0.0), x0, y, rng), y)


def test_sample_state_mc_mean():
    kp = ouve_kernel(OUVE, 0.5)
    rng = np.random.default_rng(7)
    n = 100_000
    draws = sample_state(kp, np.ones((n, 1), complex), np.zeros((n, 1), complex), rng)
    # per real part the variance is var / 2
    assert abs(draws.real.mean() - 0.4723665527410147) < 3 * math.sqrt(kp.var / 2 / n)
    assert abs(np.var(draws) - kp.var) < 4 * kp.var * math.sqrt(1 / n)


def test_sample_state_shape_mismatch():
    with pytest.raises(DomainError):
        sample_state(ouve_kernel(OUVE, 0.5), np.zeros(2), np.zeros(3), np.random.default_rng(0))


def test_complex_normal_variance():
    z = complex_normal(np.random.default_rng(1), (200_000,), var=2.0)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(2.0, rel=0.02)
    assert np.var(z.real) == pytest.approx(1.0, rel=0.02)


def test_log_normal_matches_scipy():
    from scipy.stats import norm

    x = np.linspace(-2, 2, 9)
    np.testing.assert_allclose(log_normal(x, 0.3, 0.7), norm.logpdf(x, 0.3, math.sqrt(0.7)), rtol=1e-13)


def test_negative_variance_rejected():
    with pytest.raises(DomainError):
        KernelParams(0.5, 0.5, 0.5, -1e-3)


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.0, 1.0), gamma=st.floats(0.1, 5.0))
def test_weights_partition_unity(t, gamma):
    kp = ouve_kernel(ProcessSpec.ouve(gamma, c=0.01), t)
    assert kp.w_x + kp.w_y == pytest.approx(1.0, abs=1e-14)
    sb = sb_marginal(SBVE, t)
    assert sb.w_x + sb.w_y == pytest.approx(1.0, abs=1e-14)
    assert 0.0 <= sb.w_x <= 1.0 and sb.var >= 0.0


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.01, 0.99))
def test_bridge_is_potential_product(t):
    """Marginal = normalised product of the two potentials."""
    pot, kp = sb_potentials(SBVE, t), sb_marginal(SBVE, t)
    prec = 1 / pot.psi.var + 1 / pot.psi_bar.var
    x0, y = 0.7, -1.3
    mean = (pot.psi_bar.mean_weight * x0 / pot.psi_bar.var + pot.psi.mean_weight * y / pot.psi.var) / prec
    assert kp.var == pytest.approx(1 / prec, rel=1e-10)
    assert kp.mean(x0, y) == pytest.approx(mean, rel=1e-10, abs=1e-12)
