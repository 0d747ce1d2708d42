import numpy as np
import pytest

from conftest import swapped_pair
from thetafay.wave import (DSParams, WaveError, ds1_real_solution,
                           ds2_real_solution, ds_complex_solution,
                           ds_covariance_deviation, ds_system_residual,
                           flow_grid, linear_potential_residual, nls_residual,
                           nls_solution, nnls_complex_solution,
                           nnls_covariance_deviation, nnls_real_residual,
                           nnls_real_solution, nnls_system_residual,
                           smoothness_scan, stationary_check)


def _ds_points(surface):
    if surface.genus == 1:
        return (surface.point(4.0 + 0.4j, sheet=0),
                surface.point(4.6 - 0.7j, sheet=1))
    return (surface.point(6.0 + 0.5j, sheet=0),
            surface.point(7.0 - 0.3j, sheet=1))


DS_PARAMS = DSParams(1.0, 1.3, 1.0 + 0.2j, 0.4, np.array([0.1 + 0.2j]))


def test_ds_complex_residual_genus1(g1_real):
    a, b = _ds_points(g1_real)
    bundle = ds_complex_solution(g1_real, a, b, DS_PARAMS)
    res = ds_system_residual(bundle)
    assert res.rel_to_field_scale <= 1e-8
    assert res.fd_max_rel is not None and res.fd_max_rel <= 1e-5
    assert [e["name"] for e in res.per_equation] == [
        "evolutionPsi", "evolutionPsiStar", "potentialCoupling"]


def test_ds_complex_residual_genus2(g2_real):
    a, b = _ds_points(g2_real)
    params = DSParams(1.0, 1.3, 1.0 + 0.2j, 0.4,
                      np.array([0.1 + 0.2j, -0.05 + 0.15j]))
    bundle = ds_complex_solution(g2_real, a, b, params)
    res = ds_system_residual(bundle)
    assert res.rel_to_field_scale <= 1e-8


def test_ds_covariance(g1_real):
    a, b = _ds_points(g1_real)
    dev = ds_covariance_deviation(g1_real, a, b, DS_PARAMS,
                                  beta=1.2 - 0.3j, mu1=0.2 + 0.1j,
                                  mu2=-0.15 + 0.05j)
    assert dev <= 1e-8


def test_ds1_reality_both_signs(g1_real):
    a = g1_real.point(4.0, sheet=0)
    b = g1_real.point(5.0, sheet=0)
    for rho in (1, -1):
        bundle = ds1_real_solution(g1_real, a, b, d_R=np.array([0.17]),
                                   T=np.array([0]), rho=rho)
        assert bundle.reality["deviation"] <= 1e-8
        res = ds_system_residual(bundle)
        assert res.rel_to_field_scale <= 1e-8
        scan = smoothness_scan(bundle, flow_grid(bundle, (5, 5, 5)))
        assert scan["divisorHits"] == 0


def test_ds2_sign_law_crossing(g1_conj):
    a, b = swapped_pair(g1_conj, 0.3 + 0.4j)
    bundle, rho = ds2_real_solution(g1_conj, a, b, L=np.array([0]),
                                    T=np.array([0]), d_I=np.array([0.2]))
    assert rho == 1        # contour crosses a real oval
    res = ds_system_residual(bundle)
    assert res.rel_to_field_scale <= 1e-8


def test_ds2_sign_law_avoiding(g1_no_ovals):
    a, b = swapped_pair(g1_no_ovals, 0.5 + 0.2j)
    bundle, rho = ds2_real_solution(g1_no_ovals, a, b, L=np.array([0]),
                                    T=np.array([0]), d_I=np.array([0.2]))
    assert rho == -1       # no real ovals to cross
    res = ds_system_residual(bundle)
    assert res.rel_to_field_scale <= 1e-8


def test_ds2_incompatible_lattice_pair_rejected(g1_conj):
    a, b = swapped_pair(g1_conj, 0.3 + 0.4j)
    with pytest.raises(WaveError):
        ds2_real_solution(g1_conj, a, b, L=np.array([0]),
                          T=np.array([1]), d_I=np.array([0.2]))


def test_nls_defocusing_on_all_real_branch(g1_real):
    a = g1_real.point(4.0, sheet=0)
    bundle, rho = nls_solution(g1_real, a, d_R=np.array([0.1]),
                               T=np.array([0]))
    assert rho == -1
    res = nls_residual(bundle, rho)
    assert res.rel_to_field_scale <= 1e-8
    # pairing gates: the partner sits on the opposite sheet
    assert bundle.reality["vGate"] <= 1e-9
    assert bundle.reality["wGate"] <= 1e-9


def test_nls_focusing_on_conjugate_branch(g1_conj):
    a = g1_conj.point(2.0, sheet=0)
    bundle, rho = nls_solution(g1_conj, a, d_R=np.array([0.1]),
                               T=np.array([0]))
    assert rho == 1
    res = nls_residual(bundle, rho)
    assert res.rel_to_field_scale <= 1e-8


def test_nls_wrong_coupling_detected(g1_real):
    a = g1_real.point(4.0, sheet=0)
    bundle, rho = nls_solution(g1_real, a, d_R=np.array([0.1]),
                               T=np.array([0]))
    res = nls_residual(bundle, -rho)
    assert res.rel_to_field_scale > 1e-3


def test_linear_potential(g1_real):
    a = g1_real.point(4.0 + 0.4j, sheet=0)
    b = g1_real.point(4.6 - 0.7j, sheet=1)
    res = linear_potential_residual(g1_real, a, b, d=np.array([0.1 + 0.2j]))
    assert res.rel_to_field_scale <= 1e-8


def test_nnls_complex_n2(super_g1):
    bundle = nnls_complex_solution(super_g1, 2.0, [1.0 + 0.2j, 0.7 - 0.4j],
                                   np.array([0.15 + 0.1j]))
    res = nnls_system_residual(bundle)
    assert res.rel_to_field_scale <= 1e-8
    assert len(bundle.components) == 4


def test_nnls_matches_nls_for_single_pair(g1_real):
    d = np.array([0.15])
    bundle = nnls_complex_solution(g1_real, 4.0, [1.0 + 0.2j], d)
    fiber = g1_real.fiber_over(4.0)
    res = nnls_system_residual(bundle)
    assert res.rel_to_field_scale <= 1e-8
    # scalar path fed the same base point and theta shift must produce
    # the same normalized profile
    nls_bundle, _ = nls_solution(g1_real, fiber[-1], d_R=np.array([0.15]),
                                 T=np.array([0]))
    grid = flow_grid(bundle, (4, 4))
    worst = 0.0
    scale = 0.0
    for x in grid["x"][:3]:
        for t in grid["t"][:3]:
            lhs = bundle.field("psi1", x, t)
            ratio_ref = nls_bundle.field("psi", x, t) \
                / nls_bundle.components[0].amp
            ratio = lhs / bundle.components[0].amp
            worst = max(worst, abs(ratio - ratio_ref))
            scale = max(scale, abs(ratio_ref))
    assert worst <= 1e-9 * scale


def test_nnls_real_signs(g1_real, g1_conj):
    bundle, signs = nnls_real_solution(g1_real, 4.0, np.array([0.2]),
                                       np.array([0]))
    assert signs == [-1]               # all-real branch: defocusing
    res = nnls_real_residual(bundle, signs)
    assert res.rel_to_field_scale <= 1e-8
    bundle, signs = nnls_real_solution(g1_conj, 2.0, np.array([0.2]),
                                       np.array([0]))
    assert signs == [1]                # conjugate branch: focusing
    res = nnls_real_residual(bundle, signs)
    assert res.rel_to_field_scale <= 1e-8


def test_nnls_real_on_plane_cubic_fiber(cubic):
    bundle, signs = nnls_real_solution(cubic, 0.0, np.array([0.1]),
                                       np.array([0]))
    assert len(signs) == 2
    assert all(s in (-1, 1) for s in signs)
    res = nnls_real_residual(bundle, signs)
    assert res.rel_to_field_scale <= 1e-8


def test_nnls_covariance(super_g1):
    dev = nnls_covariance_deviation(super_g1, 2.0, [1.0 + 0.2j, 0.7 - 0.4j],
                                    np.array([0.15 + 0.1j]),
                                    beta=1.1 - 0.2j, mu=0.15 + 0.1j)
    assert dev <= 1e-8


def test_stationary_point(g1_sym):
    a = g1_sym.point(1.0, kind="sqrtBranch")
    b = g1_sym.point(0.3, sheet=1)
    res = stationary_check(g1_sym, a, b, d=np.array([0.1 + 0.05j]))
    assert res.rel_to_field_scale <= 1e-7


def test_perturbed_dispersion_detected(g1_real):
    a, b = _ds_points(g1_real)
    bundle = ds_complex_solution(g1_real, a, b, DS_PARAMS)
    broken = bundle.perturbed_g3(0.1)
    res = ds_system_residual(broken, fd_check=False)
    assert res.rel_to_field_scale >= 1e-3


def test_zero_amplitude_rejected():
    with pytest.raises(WaveError):
        DSParams(1.0, 1.0, 0.0, 0.0, np.zeros(1))
    with pytest.raises(WaveError):
        DSParams(0.0, 1.0, 1.0, 0.0, np.zeros(1))
