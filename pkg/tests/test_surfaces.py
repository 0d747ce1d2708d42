import json
import math

import mpmath
import numpy as np
import pytest

from conftest import G1_REAL, G2_REAL, random_arguments
from thetafay.surfaces import (SurfaceError, build_surface, config_hash,
                               infer_lattice_pair)


def _agm(a, b):
    for _ in range(60):
        a, b = 0.5 * (a + b), math.sqrt(a * b)
        if abs(a - b) < 1e-16:
            break
    return a


def test_genus1_period_against_agm_and_carlson(g1_real):
    # branch points 0 < 1 < 2 < 3: modulus from the cross-ratio
    m = (1.0 * 1.0) / (2.0 * 2.0)
    K = math.pi / (2.0 * _agm(1.0, math.sqrt(1.0 - m)))
    Kp = math.pi / (2.0 * _agm(1.0, math.sqrt(m)))
    expected = -2.0 * math.pi * K / Kp
    got = g1_real.B.entries[0, 0]
    assert abs(got - expected) < 1e-10
    # same number through Carlson symmetric integrals
    rf = lambda mm: float(mpmath.elliprf(0.0, 1.0 - mm, 1.0))
    carlson = -2.0 * math.pi * rf(m) / rf(1.0 - m)
    assert abs(got - carlson) < 1e-10


def test_period_matrix_shape_and_symmetry(g2_real, g3_real):
    for surface in (g2_real, g3_real):
        B = surface.B.entries
        assert B.shape == (surface.genus, surface.genus)
        assert np.max(np.abs(B - B.T)) < 1e-10
        eig = np.linalg.eigvalsh(B.real)
        assert np.all(eig < 0)


def test_real_structure_census(g1_real, g2_real, g3_real, g1_conj,
                               g1_no_ovals):
    for surface in (g1_real, g2_real, g3_real):
        H = surface.real_structure.H
        assert np.all(H == 0)          # M-curve
    for surface in (g1_conj, g1_no_ovals):
        # (B - conj(B)) / (2*pi*i) integer-valued; entries canonical in {0,1}
        H = surface.real_structure.H
        assert set(np.unique(H)) <= {0, 1}
    for surface in (g1_real, g2_real, g3_real, g1_conj, g1_no_ovals):
        defect = np.max(np.abs((surface.B.entries
                                - np.conj(surface.B.entries))
                               / (2j * np.pi)
                               - surface.real_structure.H))
        assert defect < 1e-8


def test_m_curve_jets_imaginary_at_fixed_points(g2_real):
    a = surface_point = g2_real.point(6.0, sheet=0)
    jet = g2_real.point_jet(surface_point)
    assert np.max(np.abs(jet.V.real)) < 1e-10 * np.max(np.abs(jet.V))
    assert np.max(np.abs(jet.W.real)) < 1e-8 * max(np.max(np.abs(jet.W)),
                                                   1e-12)
    del a


def test_scaled_parameter_rescales_jet(g1_real):
    base = g1_real.point(4.5, sheet=0)
    jet = g1_real.point_jet(base)
    scaled = g1_real.point(4.5, sheet=0, kind="scaled", beta=2.0)
    jet2 = g1_real.point_jet(scaled)
    assert np.allclose(jet2.V, jet.V / 2.0, rtol=1e-10)
    assert np.allclose(jet2.W, jet.W / 4.0, rtol=1e-10)


def test_fiber_over_hyperelliptic(g1_real):
    fiber = g1_real.fiber_over(4.0)
    assert len(fiber) == 2
    ys = sorted((p.y for p in fiber), key=lambda v: v.real)
    assert abs(ys[0] + ys[1]) < 1e-12 * abs(ys[1])
    jets = [g1_real.point_jet(p) for p in fiber]
    total = sum(j.V for j in jets)
    scale = max(np.max(np.abs(j.V)) for j in jets)
    assert np.max(np.abs(total)) <= 1e-8 * scale


def test_fiber_over_superelliptic(super_g1):
    fiber = super_g1.fiber_over(2.0)
    assert len(fiber) == 3
    zeta = np.exp(2j * np.pi / 3.0)
    ys = [p.y for p in fiber]
    ratios = sorted(np.angle(y / ys[0]) for y in ys)
    expected = sorted(np.angle(zeta ** k) for k in range(3))
    assert np.allclose(ratios, expected, atol=1e-10)
    jets = [super_g1.point_jet(p) for p in fiber]
    total = sum(j.V for j in jets)
    scale = max(np.max(np.abs(j.V)) for j in jets)
    assert np.max(np.abs(total)) <= 1e-8 * scale


def test_abel_path_reversal_negates_increment(g2_real):
    a = g2_real.point(6.0 + 0.5j, sheet=0)
    b = g2_real.point(7.0 - 0.3j, sheet=1)
    fwd = g2_real.abel_between(a, b)
    rev = g2_real.abel_between(b, a)
    assert np.max(np.abs(fwd.r + rev.r)) < 1e-12 * max(np.max(np.abs(fwd.r)),
                                                       1.0)


def test_infer_lattice_pair_fixed_points(g1_real):
    a = g1_real.point(4.0, sheet=0)
    b = g1_real.point(5.0, sheet=0)
    r = g1_real.abel_between(a, b).r
    N, M, res = infer_lattice_pair(g1_real, r, "fixedPoints")
    assert res < 1e-8
    assert N.dtype.kind == "i" and M.dtype.kind == "i"


def test_sqrt_branch_parameter_gating(g1_sym):
    # sqrtBranch only at a branch point, affine only away from one
    p = g1_sym.point(1.0, kind="sqrtBranch")
    assert p.param_kind == "sqrtBranch"
    with pytest.raises(SurfaceError):
        g1_sym.point(0.5, kind="sqrtBranch")
    with pytest.raises(SurfaceError):
        g1_sym.point(1.0, sheet=0)       # affine at a branch point


def test_config_hash_keys_content():
    assert config_hash(G1_REAL) == config_hash(json.loads(json.dumps(G1_REAL)))
    assert config_hash(G1_REAL) != config_hash(G2_REAL)


def test_build_errors():
    with pytest.raises(SurfaceError):
        build_surface({"provider": "unknown"})
    with pytest.raises(SurfaceError):
        build_surface({"provider": "hyperelliptic",
                       "parameters": {"branchPoints": [0.0, 0.0, 1.0, 2.0]}})


def test_direct_file_provider_round_trip(tmp_path, g1_analytic):
    # inject the analytic torus as raw data and compare Abel increments
    B = g1_analytic.B.entries
    pa = g1_analytic.point(0.31 + 0.2j)
    pb = g1_analytic.point(-0.77 + 0.5j)
    r = g1_analytic.abel_between(pa, pb).r
    data = {
        "genus": 1,
        "B": [[[B[0, 0].real, B[0, 0].imag]]],
        "points": [
            {"jets": {"V": [[1.0, 0.0]], "W": [[0.0, 0.0]],
                      "U": [[0.0, 0.0]]},
             "abelIncrements": [[0.0, 0.0]]},
            {"jets": {"V": [[1.0, 0.0]], "W": [[0.0, 0.0]],
                      "U": [[0.0, 0.0]]},
             "abelIncrements": [[r[0].real, r[0].imag]]},
        ],
    }
    path = tmp_path / "surface.json"
    path.write_text(json.dumps(data))
    surf = build_surface({"provider": "directFile",
                          "parameters": {"path": str(path)}})
    p0 = surf.point(0)
    p1 = surf.point(1)
    r2 = surf.abel_between(p0, p1).r
    assert np.max(np.abs(r2 - r)) < 1e-14


def test_quasi_periodic_arguments_cover_cell(g2_real):
    zs = random_arguments(g2_real, 5, 9)
    assert len(zs) == 5
    assert all(z.shape == (2,) for z in zs)
