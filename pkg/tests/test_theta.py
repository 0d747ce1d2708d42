import math

import mpmath
import numpy as np
import pytest

from thetafay.theta import (DerivativeSpec, HalfCharacteristic, RiemannMatrix,
                            RiemannMatrixError, ThetaArgumentError,
                            log_derivs, quasi_periodicity_residual, theta,
                            theta_batch, theta_deriv, truncation_radius)

# frozen reference: brute-force radius-30 sum for B = (-2*pi)
THETA0_MINUS_2PI = 1.0864348112133082


def _random_riemann(g, rng):
    R = rng.standard_normal((g, g))
    S = R @ R.T + g * np.eye(g)
    T = 0.4 * rng.standard_normal((g, g))
    return RiemannMatrix(-S + 1j * (T + T.T))


def test_theta_value_g1_frozen():
    B = RiemannMatrix([[-2.0 * math.pi]])
    val = theta(HalfCharacteristic.zero(1), np.zeros(1), B)
    brute = sum(math.exp(-math.pi * m * m) for m in range(-30, 31))
    assert abs(val.to_complex() - THETA0_MINUS_2PI) < 1e-10
    assert abs(val.to_complex() - brute) < 1e-10


def test_theta_matches_jtheta_oracle():
    # Theta(z|B) = theta3(v, q) with q = exp(B/2), z = 2*pi*i*v
    B = RiemannMatrix([[-1.7 + 0.9j]])
    q = complex(mpmath.exp((-1.7 + 0.9j) / 2))
    zero = HalfCharacteristic.zero(1)
    for zval in (0.0, 0.31 + 0.12j, -1.2 + 2.4j, 3.0 - 0.7j):
        v = zval / (2j * math.pi)
        ref = complex(mpmath.jtheta(3, math.pi * v, q))
        got = theta(zero, np.array([zval]), B).to_complex()
        assert abs(got - ref) <= 1e-12 * max(1.0, abs(ref))


def test_quasi_periodicity_sweep():
    rng = np.random.default_rng(11)
    for g in (1, 2, 3, 4):
        B = _random_riemann(g, rng)
        for _ in range(25):
            z = 2j * np.pi * rng.random(g) + B.entries @ rng.random(g)
            N = rng.integers(-2, 3, g)
            M = rng.integers(-2, 3, g)
            assert quasi_periodicity_residual(z, N, M, B) <= 1e-10


def test_quasi_periodicity_with_characteristic():
    rng = np.random.default_rng(5)
    B = _random_riemann(2, rng)
    char = HalfCharacteristic.of((0.5, 0.0), (0.0, 0.5))
    for _ in range(10):
        z = 2j * np.pi * rng.random(2) + B.entries @ rng.random(2)
        N = rng.integers(-2, 3, 2)
        M = rng.integers(-2, 3, 2)
        assert quasi_periodicity_residual(z, N, M, B, char) <= 1e-10


def test_derivative_stacks_match_finite_differences():
    rng = np.random.default_rng(23)
    B = _random_riemann(2, rng)
    zero = HalfCharacteristic.zero(2)
    step = 1e-5
    for _ in range(50):
        z = 2j * np.pi * rng.random(2) + B.entries @ rng.random(2)
        v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        w = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        f = theta(zero, z, B).to_complex()
        fp = theta(zero, z + step * v, B).to_complex()
        fm = theta(zero, z - step * v, B).to_complex()
        d1 = theta_deriv(DerivativeSpec.of([v]), zero, z, B).to_complex()
        assert abs(d1 - (fp - fm) / (2 * step)) <= 1e-6 * max(1.0, abs(d1))
        d2 = theta_deriv(DerivativeSpec.of([v, v]), zero, z, B).to_complex()
        fd2 = (fp - 2 * f + fm) / step ** 2
        assert abs(d2 - fd2) <= 1e-4 * max(1.0, abs(d2))
        dvw = theta_deriv(DerivativeSpec.of([v, w]), zero, z, B).to_complex()
        gp = theta(zero, z + step * w + step * v, B).to_complex()
        gm1 = theta(zero, z + step * w - step * v, B).to_complex()
        gm2 = theta(zero, z - step * w + step * v, B).to_complex()
        gmm = theta(zero, z - step * w - step * v, B).to_complex()
        fd_vw = (gp - gm1 - gm2 + gmm) / (4 * step ** 2)
        assert abs(dvw - fd_vw) <= 1e-4 * max(1.0, abs(dvw))


def test_theta_batch_shares_enumeration():
    rng = np.random.default_rng(3)
    B = _random_riemann(2, rng)
    zero = HalfCharacteristic.zero(2)
    z = 2j * np.pi * rng.random(2) + B.entries @ rng.random(2)
    v = rng.standard_normal(2) + 0j
    vals = theta_batch(zero, z, B, [(), (v,), (v, v)])
    assert abs(vals[0].to_complex()
               - theta(zero, z, B).to_complex()) < 1e-14
    single = theta_deriv(DerivativeSpec.of([v, v]), zero, z, B)
    assert abs(vals[2].to_complex() - single.to_complex()) \
        <= 1e-12 * max(1.0, abs(single.to_complex()))


def test_log_derivs_match_finite_differences():
    rng = np.random.default_rng(7)
    B = _random_riemann(2, rng)
    zero = HalfCharacteristic.zero(2)
    z = 2j * np.pi * rng.random(2) + B.entries @ rng.random(2)
    v = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    step = 1e-4

    def ln_theta(arg):
        val = theta(zero, arg, B)
        return val.abs_log() + 1j * np.angle(val.to_complex())

    d1, d2 = log_derivs(zero, z, B, [v], [(0,), (0, 0)])
    f0 = ln_theta(z)
    fp = ln_theta(z + step * v)
    fm = ln_theta(z - step * v)
    assert abs(d1 - (fp - fm) / (2 * step)) <= 1e-6 * max(1.0, abs(d1))
    assert abs(d2 - (fp - 2 * f0 + fm) / step ** 2) \
        <= 1e-5 * max(1.0, abs(d2))


def test_truncation_radius_grows_with_precision():
    B = RiemannMatrix([[-2.0 * math.pi]])
    r_loose = truncation_radius(B, 1e-6)
    r_tight = truncation_radius(B, 1e-14)
    assert r_tight.radius > r_loose.radius > 0
    assert r_tight.contains(r_loose)


def test_invalid_period_matrix_rejected():
    with pytest.raises(RiemannMatrixError):
        RiemannMatrix([[1.0]])            # positive real part
    with pytest.raises(RiemannMatrixError):
        RiemannMatrix([[-1.0, 0.2], [0.3, -1.0]])   # not symmetric


def test_argument_dimension_mismatch_rejected():
    B = RiemannMatrix([[-2.0 * math.pi]])
    with pytest.raises(ThetaArgumentError):
        theta(HalfCharacteristic.zero(1), np.zeros(2), B)


def test_odd_characteristic_vanishes_at_origin():
    B = RiemannMatrix([[-2.0 * math.pi]])
    odd = HalfCharacteristic.of((0.5,), (0.5,))
    assert odd.parity() == 1
    val = theta(odd, np.zeros(1), B)
    mag = 0.0 if val.is_zero else abs(val.to_complex())
    assert mag < 1e-12
