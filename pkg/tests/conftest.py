import numpy as np
import pytest

from thetafay.surfaces import build_surface

# shipped configurations exercised throughout the suite
G1_REAL = {"provider": "hyperelliptic",
           "parameters": {"branchPoints": [0.0, 1.0, 2.0, 3.0]}}
G2_REAL = {"provider": "hyperelliptic",
           "parameters": {"branchPoints": [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]}}
G3_REAL = {"provider": "hyperelliptic",
           "parameters": {"branchPoints": [-4.0, -3.0, -2.0, -1.0,
                                           1.0, 2.0, 3.0, 4.0]}}
G1_CONJ = {"provider": "hyperelliptic",
           "parameters": {"branchPoints": [1 + 1j, 1 - 1j, -1 + 1j,
                                           -1 - 1j]}}
G1_NO_OVALS = {"provider": "hyperelliptic",
               "parameters": {"branchPoints": [1j, -1j, 2j, -2j],
                              "lead": -1.0}}
G1_SYM = {"provider": "hyperelliptic",
          "parameters": {"branchPoints": [-2.0, -1.0, 1.0, 2.0]}}
G1_ANALYTIC = {"provider": "genus1Analytic",
               "parameters": {"modulus": [-2.0, 1.0]}}
SUPER_G1 = {"provider": "superellipticCubicRoot",
            "parameters": {"branchPoints": [0.0, 1.0]}}


def _cubic_coeffs():
    # y^3 - 3y = lambda^3 - 3*lambda - 1/2, smooth, genus 1, all-real fiber
    # over small real lambda
    c = np.zeros((4, 4), dtype=complex)
    c[0, 3] = 1.0
    c[0, 1] = -3.0
    c[3, 0] = -1.0
    c[1, 0] = 3.0
    c[0, 0] = 0.5
    return c.tolist()


CUBIC = {"provider": "planeCubic",
         "parameters": {"coefficients": _cubic_coeffs()}}


@pytest.fixture(scope="session")
def g1_real():
    return build_surface(G1_REAL)


@pytest.fixture(scope="session")
def g2_real():
    return build_surface(G2_REAL)


@pytest.fixture(scope="session")
def g3_real():
    return build_surface(G3_REAL)


@pytest.fixture(scope="session")
def g1_conj():
    return build_surface(G1_CONJ)


@pytest.fixture(scope="session")
def g1_no_ovals():
    return build_surface(G1_NO_OVALS)


@pytest.fixture(scope="session")
def g1_sym():
    return build_surface(G1_SYM)


@pytest.fixture(scope="session")
def g1_analytic():
    return build_surface(G1_ANALYTIC)


@pytest.fixture(scope="session")
def super_g1():
    return build_surface(SUPER_G1)


@pytest.fixture(scope="session")
def cubic():
    return build_surface(CUBIC)


def random_arguments(surface, n, seed):
    """Random theta arguments inside one lattice cell."""
    rng = np.random.default_rng(seed)
    g = surface.genus
    B = surface.B.entries
    return [2j * np.pi * rng.random(g) + B @ rng.random(g)
            for _ in range(n)]


def swapped_pair(surface, lam):
    """(a, b) with b the anti-involution image of a: conjugate
    coordinate, conjugate y."""
    a = surface.point(lam, sheet=0)
    roots = surface.provider.roots_at(np.conj(lam))
    sheet = int(np.argmin(np.abs(roots - np.conj(a.y))))
    return a, surface.point(complex(np.conj(lam)), sheet=sheet)
