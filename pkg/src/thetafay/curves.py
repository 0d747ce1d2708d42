"""Algebraic curve models: cyclic covers y^N = f(lambda) and smooth plane
curves F(lambda, y) = 0 with constant leading y-coefficient.

A model only answers fiber queries (all y over a given lambda) plus
bookkeeping about ramification; sheet tracking and integration live in
geometry.py.
"""
from __future__ import annotations

import cmath

import numpy as np


class CurveError(ValueError):
    pass


class CyclicCoverCurve:
    """y^N = lead * prod_k (lambda - root_k), simple roots."""

    def __init__(self, roots, n_sheets=2, lead=1.0 + 0j):
        roots = [complex(r) for r in roots]
        m = len(roots)
        for i in range(m):
            for j in range(i + 1, m):
                if abs(roots[i] - roots[j]) < 1e-10 * max(1.0, abs(roots[i])):
                    raise CurveError("coincident branch points %s and %s"
                                     % (roots[i], roots[j]))
        if lead == 0:
            raise CurveError("zero leading coefficient")
        self.roots = tuple(roots)
        self.n_sheets = int(n_sheets)
        self.lead = complex(lead)

    def f_value(self, lam):
        w = self.lead
        for r in self.roots:
            w = w * (lam - r)
        return w

    def y_roots(self, lam):
        """All n_sheets values of y over lam, deterministic order."""
        w = self.f_value(lam)
        N = self.n_sheets
        if w == 0:
            return np.zeros(N, dtype=complex)
        r = cmath.exp(cmath.log(w) / N)
        zeta = cmath.exp(2j * cmath.pi / N)
        return np.array([r * zeta ** j for j in range(N)], dtype=complex)

    @property
    def branch_lambdas(self):
        return self.roots

    def genus(self):
        m = len(self.roots)
        N = self.n_sheets
        if N == 2:
            # 2g+2 or 2g+1 branch points
            return (m - 1) // 2 if m % 2 else (m - 2) // 2
        if N == 3:
            return m - 1 if m % 3 else m - 2
        raise CurveError("unsupported cover degree %d" % N)

    def dy_dlam(self, lam, y):
        # N y^{N-1} y' = f'(lam)
        fp = 0j
        for i in range(len(self.roots)):
            t = self.lead
            for j, r in enumerate(self.roots):
                if j != i:
                    t = t * (lam - r)
            fp += t
        return fp / (self.n_sheets * y ** (self.n_sheets - 1))


class PlaneCurve:
    """Sum_{i,j} c[i,j] lambda^i y^j = 0 with constant leading y-coefficient."""

    def __init__(self, coeffs):
        c = np.asarray(coeffs, dtype=complex)
        if c.ndim != 2:
            raise CurveError("coefficient table must be 2-d")
        self.coeffs = c
        self.y_degree = c.shape[1] - 1
        if self.y_degree < 2:
            raise CurveError("y-degree must be at least 2")
        lead_col = c[:, self.y_degree]
        if abs(lead_col[0]) < 1e-14 or np.any(np.abs(lead_col[1:]) > 1e-14):
            raise CurveError(
                "leading y-coefficient must be a nonzero constant in lambda")
        self.n_sheets = self.y_degree
        self._lam_powers = c.shape[0]

    def F(self, lam, y):
        lp = np.array([lam ** i for i in range(self._lam_powers)])
        yp = np.array([y ** j for j in range(self.coeffs.shape[1])])
        return complex(lp @ self.coeffs @ yp)

    def F_y(self, lam, y):
        lp = np.array([lam ** i for i in range(self._lam_powers)])
        yp = np.array([j * y ** (j - 1) if j else 0j
                       for j in range(self.coeffs.shape[1])])
        return complex(lp @ self.coeffs @ yp)

    def F_lam(self, lam, y):
        lp = np.array([i * lam ** (i - 1) if i else 0j
                       for i in range(self._lam_powers)])
        yp = np.array([y ** j for j in range(self.coeffs.shape[1])])
        return complex(lp @ self.coeffs @ yp)

    def y_roots(self, lam):
        lp = np.array([lam ** i for i in range(self._lam_powers)])
        poly = lp @ self.coeffs          # coefficients of y^0..y^d
        r = np.roots(poly[::-1])
        # deterministic order
        idx = np.lexsort((r.imag.round(10), r.real.round(10)))
        return r[idx]

    def critical_lambdas(self):
        """lambda where the fiber polynomial has a multiple root."""
        import sympy
        lam_s, y_s = sympy.symbols("lam y")
        expr = 0
        for i in range(self.coeffs.shape[0]):
            for j in range(self.coeffs.shape[1]):
                cij = self.coeffs[i, j]
                if cij != 0:
                    expr += sympy.nsimplify(complex(cij), rational=False) \
                        * lam_s ** i * y_s ** j
        disc = sympy.resultant(expr, sympy.diff(expr, y_s), y_s)
        poly = sympy.Poly(disc, lam_s)
        coefs = [complex(c) for c in poly.all_coeffs()]
        return np.roots(coefs)

    def smoothness_check(self, tol=1e-8):
        """At every affine critical point require F_lam != 0."""
        for lam in self.critical_lambdas():
            ys = self.y_roots(lam)
            # multiple root(s): the ones nearly coinciding
            for i in range(len(ys)):
                near = [j for j in range(len(ys))
                        if j != i and abs(ys[j] - ys[i]) < 1e-5]
                if not near:
                    continue
                if abs(self.F_lam(lam, ys[i])) < tol:
                    raise CurveError(
                        "plane curve singular near (%s, %s)" % (lam, ys[i]))
        return True
