import numpy as np
import pytest

from conftest import random_arguments, swapped_pair
from thetafay.fay import (FayError, degenerate_identity_residual, fay_scalars,
                          new_identity_residual, prime_form,
                          q2_integral_oracle, residual_report,
                          trisecant_residual)
from thetafay.theta import HalfCharacteristic, log_derivs


def _analytic_points(surface):
    return [surface.point(v) for v in
            (0.31 + 0.2j, -0.77 + 0.5j, 1.1 - 0.3j, 0.05 + 0.9j)]


def test_trisecant_genus1_analytic(g1_analytic):
    a, b, c, d = _analytic_points(g1_analytic)
    worst = max(trisecant_residual(g1_analytic, a, b, c, d, z)
                for z in random_arguments(g1_analytic, 50, 17))
    assert worst <= 1e-8


def test_trisecant_genus2(g2_real):
    a = g2_real.point(6.0 + 0.5j, sheet=0)
    b = g2_real.point(7.0 - 0.3j, sheet=1)
    c = g2_real.point(5.5 - 0.8j, sheet=0)
    d = g2_real.point(6.5 + 1.1j, sheet=1)
    worst = max(trisecant_residual(g2_real, a, b, c, d, z)
                for z in random_arguments(g2_real, 50, 19))
    assert worst <= 1e-8


@pytest.mark.parametrize("fixture,pa,pb", [
    ("g1_real", (4.0 + 0.4j, 0), (4.6 - 0.7j, 1)),
    ("g2_real", (6.0 + 0.5j, 0), (7.0 - 0.3j, 1)),
    ("g3_real", (0.5 + 0.3j, 0), (-0.2 - 0.4j, 1)),
])
def test_new_identity_sweep(request, fixture, pa, pb):
    surface = request.getfixturevalue(fixture)
    a = surface.point(pa[0], sheet=pa[1])
    b = surface.point(pb[0], sheet=pb[1])
    scal = fay_scalars(surface, a, b)
    worst = max(new_identity_residual(surface, a, b, z, scal)
                for z in random_arguments(surface, 30, 29))
    assert worst <= 1e-7


def test_degenerate_identity_sweep(g1_real, g2_real):
    for surface, ca, cb in ((g1_real, 4.0 + 0.4j, 4.6 - 0.7j),
                            (g2_real, 6.0 + 0.5j, 7.0 - 0.3j)):
        a = surface.point(ca, sheet=0)
        b = surface.point(cb, sheet=1)
        scal = fay_scalars(surface, a, b)
        worst = max(degenerate_identity_residual(surface, a, b, z, scal)
                    for z in random_arguments(surface, 30, 31))
        assert worst <= 1e-8


def test_constancy_scan_matches_k2(g2_real):
    # f_(b,a)(z) rebuilt from raw log-derivatives must be z-independent
    # and equal to -K2
    a = g2_real.point(6.0 + 0.5j, sheet=0)
    b = g2_real.point(7.0 - 0.3j, sheet=1)
    scal = fay_scalars(g2_real, a, b)
    r = scal.contour.r
    ja = g2_real.point_jet(a)
    zero = HalfCharacteristic.zero(g2_real.genus)
    values = []
    for z in random_arguments(g2_real, 20, 37):
        s0 = log_derivs(zero, z, g2_real.B, [ja.V, ja.W],
                        [(1,), (0, 0), (0,)])
        sr = log_derivs(zero, z + r, g2_real.B, [ja.V, ja.W],
                        [(1,), (0, 0), (0,)])
        dp_rho = sr[0] - s0[0]
        daa_rho = sr[1] - s0[1]
        da_rho = sr[2] - s0[2]
        values.append(dp_rho + daa_rho + (da_rho - scal.K1) ** 2
                      + 2.0 * s0[1])
    values = np.asarray(values)
    mean = np.mean(values)
    assert np.std(values) <= 1e-8 * max(1.0, abs(mean))
    assert abs(-mean - scal.K2) <= 1e-8 * max(1.0, abs(scal.K2))


def test_new_identity_lattice_shift_invariance(g1_real):
    a = g1_real.point(4.0 + 0.4j, sheet=0)
    b = g1_real.point(4.6 - 0.7j, sheet=1)
    scal = fay_scalars(g1_real, a, b)
    z = np.array([0.37 + 0.21j])
    shift = 2j * np.pi * np.array([2.0]) + g1_real.B.entries @ np.array([-1.0])
    r1 = new_identity_residual(g1_real, a, b, z, scal)
    r2 = new_identity_residual(g1_real, a, b, z + shift, scal)
    assert r1 <= 1e-10 and r2 <= 1e-10


@pytest.mark.parametrize("fixture,pa,pb", [
    ("g1_real", (4.0 + 0.4j, 0), (4.6 - 0.7j, 1)),
    ("g2_real", (6.0 + 0.5j, 0), (7.0 - 0.3j, 1)),
    ("g1_conj", (0.3 + 0.4j, 0), None),
    ("g1_no_ovals", (0.5 + 0.2j, 0), None),
    ("super_g1", (0.4 + 0.5j, 0), (0.6 - 0.7j, 1)),
    ("cubic", (0.3 + 0.2j, 0), (-0.4 + 0.6j, 2)),
])
def test_q2_two_routes(request, fixture, pa, pb):
    surface = request.getfixturevalue(fixture)
    if pb is None:
        a, b = swapped_pair(surface, pa[0])
    else:
        a = surface.point(pa[0], sheet=pa[1])
        b = surface.point(pb[0], sheet=pb[1])
    scal = fay_scalars(surface, a, b)
    oracle = q2_integral_oracle(surface, a, b, 4)
    assert abs(oracle - scal.q2) <= 1e-6 * abs(scal.q2)


def test_q2_sign_law_swapped_pairs(g1_conj, g1_no_ovals):
    # contour crossing a real oval: q2 < 0; no real ovals: q2 > 0
    a, b = swapped_pair(g1_conj, 0.3 + 0.4j)
    q2 = fay_scalars(g1_conj, a, b).q2
    assert abs(q2.imag) <= 1e-8 * abs(q2)
    assert q2.real < 0
    a, b = swapped_pair(g1_no_ovals, 0.5 + 0.2j)
    q2 = fay_scalars(g1_no_ovals, a, b).q2
    assert abs(q2.imag) <= 1e-8 * abs(q2)
    assert q2.real > 0


def test_q2_oracle_contour_deformation_invariance(g1_conj):
    a, b = swapped_pair(g1_conj, 0.3 + 0.4j)
    base = q2_integral_oracle(g1_conj, a, b, 4)
    moved = q2_integral_oracle(g1_conj, a, b, 4, via=0.8 - 0.9j)
    assert abs(moved - base) <= 1e-6 * abs(base)


def test_prime_form_antisymmetry_and_short_distance(g1_analytic):
    a = g1_analytic.point(0.31 + 0.2j)
    b = g1_analytic.point(0.31 + 0.2j + 1e-4)
    e_ab = prime_form(g1_analytic, a, b).to_complex()
    e_ba = prime_form(g1_analytic, b, a).to_complex()
    assert abs(e_ab + e_ba) <= 1e-10 * abs(e_ab)
    # E(a,b) ~ k(a) - k(b) as the points merge
    assert abs(e_ab + 1e-4) <= 1e-7


def test_k2_survives_theta_divisor_contour(super_g1):
    # the Abel increment of this fiber pair lands exactly on the theta
    # divisor; K2 must come out finite and the identity must still close
    fiber = super_g1.fiber_over(2.0)
    a = fiber[-1]
    b = fiber[0]
    scal = fay_scalars(super_g1, a, b)
    assert np.isfinite(scal.K2.real) and np.isfinite(scal.K2.imag)
    assert abs(scal.K2) < 1e3
    worst = max(new_identity_residual(super_g1, a, b, z, scal)
                for z in random_arguments(super_g1, 10, 41))
    assert worst <= 1e-8


def test_fay_scalars_contour_override(g1_real):
    a = g1_real.point(4.0 + 0.4j, sheet=0)
    b = g1_real.point(4.6 - 0.7j, sheet=1)
    fwd = fay_scalars(g1_real, a, b)
    rev = fay_scalars(g1_real, b, a, contour=-fwd.contour.r)
    assert np.max(np.abs(rev.contour.r + fwd.contour.r)) < 1e-14
    # q1 is contour-independent and symmetric
    assert abs(rev.q1 - fwd.q1) <= 1e-9 * max(1.0, abs(fwd.q1))


def test_coincident_endpoints_rejected(g1_real):
    a = g1_real.point(4.0 + 0.4j, sheet=0)
    with pytest.raises(FayError):
        fay_scalars(g1_real, a, g1_real.point(4.0 + 0.4j, sheet=0))


def test_residual_report_shape(g1_real):
    a = g1_real.point(4.0 + 0.4j, sheet=0)
    b = g1_real.point(4.6 - 0.7j, sheet=1)
    rep = residual_report("new", g1_real, [a, b], [1e-12, 3e-12])
    assert rep["identity"] == "new"
    assert rep["zSamples"] == 2
    assert rep["maxResidual"] == 3e-12
    assert rep["surfaceHash"] == g1_real.metadata["content_hash"]
