import numpy as np
import pytest

from thetafay.kp import (KpError, fiber_second_derivative_defect,
                         kp_constant_c, kp_nnls_relation_residual,
                         kp_residual, kp_solution,
                         second_kind_constant_oracle)
from thetafay.wave import nnls_real_solution


def _marked(surface):
    if surface.genus == 1:
        return surface.point(4.0, sheet=0)
    return surface.point(6.0, sheet=0)


def test_constant_matches_second_kind_oracle_genus1(g1_real):
    a = _marked(g1_real)
    d = np.array([0.2 + 0.1j])
    c = kp_constant_c(g1_real, a, d)
    oracle = second_kind_constant_oracle(g1_real, a)
    assert abs(c - oracle) <= 1e-6 * max(1.0, abs(oracle))


def test_constant_matches_second_kind_oracle_genus2(g2_real):
    a = _marked(g2_real)
    d = np.array([0.2 + 0.1j, -0.1 + 0.05j])
    c = kp_constant_c(g2_real, a, d)
    oracle = second_kind_constant_oracle(g2_real, a)
    assert abs(c - oracle) <= 1e-7 * max(1.0, abs(oracle))


def test_constant_is_shift_independent(g1_real):
    a = _marked(g1_real)
    c1 = kp_constant_c(g1_real, a, np.array([0.2 + 0.1j]))
    c2 = kp_constant_c(g1_real, a, np.array([-0.4 + 0.3j]))
    assert abs(c1 - c2) <= 1e-9 * max(1.0, abs(c1))


def test_kp_residual_genus1(g1_real):
    data = kp_solution(g1_real, _marked(g1_real), np.array([0.2 + 0.1j]))
    rep = kp_residual(data)
    assert rep.rel_to_field_scale <= 1e-7


def test_kp_residual_genus2(g2_real):
    data = kp_solution(g2_real, _marked(g2_real),
                       np.array([0.2 + 0.1j, -0.1 + 0.05j]))
    rep = kp_residual(data)
    assert rep.rel_to_field_scale <= 1e-7


def test_translation_covariance(g1_real):
    # shifting x by delta equals absorbing i V delta into the theta shift
    d = np.array([0.2 + 0.1j])
    data = kp_solution(g1_real, _marked(g1_real), d)
    delta = 0.37
    shifted = kp_solution(g1_real, _marked(g1_real),
                          d + 1j * data.V * delta, c=data.c)
    for (x, y, t) in ((0.1, -0.2, 0.05), (-0.3, 0.4, -0.15)):
        lhs = data.u(x + delta, y, t)
        rhs = shifted.u(x, y, t)
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_lattice_shift_invariance(g1_real):
    d = np.array([0.2 + 0.1j])
    data = kp_solution(g1_real, _marked(g1_real), d)
    shift = 2j * np.pi * np.array([3.0]) + g1_real.B.entries @ np.array([-2.0])
    moved = kp_solution(g1_real, _marked(g1_real), d + shift, c=data.c)
    for (x, y, t) in ((0.1, -0.2, 0.05), (-0.3, 0.4, -0.15)):
        lhs = data.u(x, y, t)
        rhs = moved.u(x, y, t)
        assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(lhs))


def test_broken_constant_detected(g1_real):
    data = kp_solution(g1_real, _marked(g1_real), np.array([0.2 + 0.1j]))
    broken = kp_solution(g1_real, _marked(g1_real), data.d, c=data.c + 0.1)
    rep = kp_residual(broken)
    assert rep.rel_to_field_scale > 1e-3


def test_divisor_points_skipped_and_reported(g1_real):
    # d placed on the theta divisor: the origin grid node must be skipped
    d = 1j * np.pi * np.ones(1) + 0.5 * g1_real.B.entries @ np.ones(1)
    data = kp_solution(g1_real, _marked(g1_real), np.array([0.2 + 0.1j]))
    data = kp_solution(g1_real, _marked(g1_real), d, c=data.c)
    grid = {"x": np.array([0.0, 0.31]), "y": np.array([0.0]),
            "t": np.array([0.0])}
    rep = kp_residual(data, grid)
    assert rep.skipped >= 1
    assert rep.rel_to_field_scale <= 1e-7


def test_fiber_jets_close_second_derivative(g1_real, super_g1):
    for surface, z_a in ((g1_real, 4.0), (super_g1, 2.0)):
        g = surface.genus
        rng = np.random.default_rng(13)
        for _ in range(5):
            z = 2j * np.pi * rng.random(g) + surface.B.entries @ rng.random(g)
            assert fiber_second_derivative_defect(surface, z_a, z) <= 1e-9


def test_relation_to_single_component(g1_real):
    rep = kp_nnls_relation_residual(g1_real, 4.0, [1.0 + 0.2j],
                                    np.array([0.15 + 0.1j]))
    names = {e["name"]: e["maxAbs"] for e in rep.per_equation}
    assert names["relation"] <= 1e-8 * max(1.0, rep.field_scale)
    assert names["gammaTwoRoutes"] <= 1e-9 * max(1.0, rep.field_scale)


def test_relation_to_two_components(super_g1):
    rep = kp_nnls_relation_residual(super_g1, 2.0, [1.0 + 0.2j, 0.7 - 0.4j],
                                    np.array([0.15 + 0.1j]))
    names = {e["name"]: e["maxAbs"] for e in rep.per_equation}
    assert names["relation"] <= 1e-8 * max(1.0, rep.field_scale)
    assert names["gammaTwoRoutes"] <= 1e-9 * max(1.0, rep.field_scale)


def test_relation_real_form(g1_real):
    bundle, signs = nnls_real_solution(g1_real, 4.0, np.array([0.2]),
                                       np.array([0]))
    amps = [comp.amp for comp in bundle.components[:1]]
    rep = kp_nnls_relation_residual(g1_real, 4.0, amps, np.array([0.2]),
                                    signs=signs)
    names = {e["name"]: e["maxAbs"] for e in rep.per_equation}
    assert names["relation"] <= 1e-8 * max(1.0, rep.field_scale)


def test_oracle_requires_algebraic_model(g1_analytic):
    with pytest.raises(KpError):
        second_kind_constant_oracle(g1_analytic,
                                    g1_analytic.point(0.31 + 0.2j))
