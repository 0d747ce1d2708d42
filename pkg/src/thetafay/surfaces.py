"""Surface models: period matrices, Abel-map increments, point jets.

Providers
---------
hyperelliptic           y^2 = lead * prod (lambda - lambda_k), genus <= 4
superellipticCubicRoot  y^3 = prod (lambda - lambda_k), genus 1
planeCubic              smooth F(lambda, y) = 0 of y-degree 3, genus 1
genus1Analytic          period matrix given directly, points are Jacobian
                        arguments
directFile              exact data injected from a JSON file

Homology conventions (hyperelliptic): branch points are sorted by
(Re, Im); consecutive points are paired into segments and the A_k cycle
is a stadium-shaped loop around the k-th pairing, with B_k a loop
around the span from the end of pairing k to the start of the last
pairing.  Two pairings are tried (segments starting at the first or at
the second sorted point); the one passing the runtime gates (symmetric
B, negative-definite real part, integer conjugation matrix H on real
configurations) is kept and recorded in the model metadata.  For real
configurations this realizes the A-cycles on loci fixed by the
anti-involution, so that the normalized A-periods are real and the
holomorphic differentials pull back to their negated conjugates.
"""
from __future__ import annotations

import cmath
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .curves import CurveError, CyclicCoverCurve, PlaneCurve
from .geometry import (
    capsule_loop,
    circle_loop,
    continue_along,
    continue_root,
    detoured_path,
    integrate_from_singular,
    integrate_polyline,
    jet_rescale,
    pushed_polyline,
    winding_number,
)
from .theta import (
    HalfCharacteristic,
    RiemannMatrix,
    theta,
    theta_batch,
)

TWO_PI_I = 2j * math.pi


class SurfaceError(ValueError):
    pass


@dataclass(frozen=True)
class MarkedPoint:
    """A point of the surface with a chosen local parameter.

    param_kind: affine (k = lambda - lambda0), sqrtBranch
    (k = (lambda - lambda0)^(1/2) at a double branch point), or scaled
    (k -> beta k + mu k^2 + nu k^3 on top of the affine parameter).
    """

    base_coordinate: complex
    y: complex = 0j
    sheet: int = 0
    param_kind: str = "affine"
    beta: complex = 1.0 + 0j
    mu: complex = 0j
    nu: complex = 0j
    label: str = ""

    def same_place(self, other) -> bool:
        scale = max(1.0, abs(self.base_coordinate))
        return (abs(self.base_coordinate - other.base_coordinate) < 1e-12 * scale
                and abs(self.y - other.y) < 1e-9 * max(1.0, abs(self.y)))


@dataclass
class PointJet:
    """First three local Taylor coefficients of each normalized
    differential: omega_j = (V_j + W_j k + U_j k^2 / 2 + O(k^3)) dk."""

    V: np.ndarray
    W: np.ndarray
    U: np.ndarray


@dataclass
class AbelPath:
    r: np.ndarray
    a: MarkedPoint
    b: MarkedPoint
    contour_tag: str = ""
    doubling_defect: float = 0.0


@dataclass
class RealStructure:
    H: np.ndarray
    tau_kind: str


def _dist_to_segment(s, p, q):
    seg = q - p
    L2 = abs(seg) ** 2
    if L2 == 0:
        return abs(s - p)
    t = ((s - p) * seg.conjugate()).real / L2
    t = min(1.0, max(0.0, t))
    return abs(p + t * seg - s)


def _unit(w):
    return w / abs(w) if w != 0 else 1.0 + 0j


# ---------------------------------------------------------------------------
# algebraic providers


class _AlgebraicProvider:
    """Shared machinery for curve-backed surfaces.

    Subclass contract: set .curve, .genus, .singular (tuple of lambda
    obstacles: branch points / critical values), .phi(lam, y)
    (unnormalized differential basis vector), then call
    _finish_build(...) to store normalization data.
    """

    name = "algebraic"

    curve = None
    genus = 0
    singular: tuple = ()
    order = 24

    def roots_at(self, lam):
        return self.curve.y_roots(lam)

    def phi(self, lam, y):  # pragma: no cover - abstract
        raise NotImplementedError

    def omega(self, lam, y):
        return self.C @ self.phi(lam, y)

    # -- geometry defaults

    @property
    def _min_sep(self):
        s = self.singular
        if len(s) < 2:
            return 1.0
        return min(abs(s[i] - s[j]) for i in range(len(s))
                   for j in range(i + 1, len(s)))

    def _clearance(self):
        return 0.25 * self._min_sep

    # -- marked points

    def make_point(self, lam, sheet=0, kind="affine", beta=1.0, mu=0.0,
                   nu=0.0, label=""):
        lam = complex(lam)
        near_branch = min((abs(lam - s) for s in self.singular), default=np.inf)
        if kind == "sqrtBranch":
            if self.curve.n_sheets != 2:
                raise SurfaceError("sqrtBranch parameter requires a double cover")
            if near_branch > 1e-9 * max(1.0, abs(lam)):
                raise SurfaceError("sqrtBranch point must sit at a branch point")
            j = int(np.argmin([abs(lam - s) for s in self.singular]))
            lam = complex(self.singular[j])
            return MarkedPoint(lam, 0j, 0, "sqrtBranch", complex(beta),
                               complex(mu), complex(nu), label)
        if near_branch < 1e-9 * max(1.0, abs(lam)):
            raise SurfaceError(
                "point at a branch point requires paramKind sqrtBranch")
        roots = self.roots_at(lam)
        if not 0 <= sheet < len(roots):
            raise SurfaceError("sheet index out of range")
        return MarkedPoint(lam, complex(roots[sheet]), int(sheet), kind,
                           complex(beta), complex(mu), complex(nu), label)

    def validate_point(self, p: MarkedPoint):
        if p.param_kind == "sqrtBranch":
            return
        roots = self.roots_at(p.base_coordinate)
        d = np.min(np.abs(roots - p.y))
        if d > 1e-6 * max(1.0, abs(p.y)):
            raise SurfaceError("marked point is not on the surface")

    # -- jets

    def point_jet(self, p: MarkedPoint, radius_factor=0.1) -> PointJet:
        self.validate_point(p)
        if p.param_kind == "scaled":
            base = MarkedPoint(p.base_coordinate, p.y, p.sheet, "affine")
            j = self.point_jet(base, radius_factor)
            V, W, U = jet_rescale(j.V, j.W, j.U, p.beta, p.mu, p.nu)
            return PointJet(V, W, U)
        lam0 = p.base_coordinate
        if p.param_kind == "affine":
            dist = min(abs(lam0 - s) for s in self.singular)
            if dist < 1e-9:
                raise SurfaceError(
                    "affine parameter at a branch point; use sqrtBranch")
            r = radius_factor * dist
            M = 64
            ks = r * np.exp(2j * np.pi * np.arange(M) / M)
            lams = lam0 + ks
            y = continue_root(self.roots_at, lam0, lams[0], p.y)
            hs = np.empty((M, self.genus), dtype=complex)
            y_first = y
            for i in range(M):
                if i:
                    y = continue_root(self.roots_at, lams[i - 1], lams[i], y)
                hs[i] = self.omega(lams[i], y)
            y_close = continue_root(self.roots_at, lams[-1], lams[0], y)
            if abs(y_close - y_first) > 1e-6 * max(1.0, abs(y_first)):
                raise SurfaceError("jet circle did not close on one sheet")
            c0 = hs.mean(axis=0)
            c1 = (hs * (1.0 / ks)[:, None]).mean(axis=0)
            c2 = (hs * (1.0 / ks ** 2)[:, None]).mean(axis=0)
            jet = PointJet(c0, c1, 2.0 * c2)
        elif p.param_kind == "sqrtBranch":
            others = [s for s in self.singular if s != lam0]
            dist = min(abs(lam0 - s) for s in others)
            rk = math.sqrt(radius_factor * dist)
            M = 128
            ks = rk * np.exp(2j * np.pi * np.arange(M) / M)
            lams = lam0 + ks ** 2
            # outgoing sheet convention: y ~ k * principal sqrt of the
            # reduced polynomial at the branch point
            s0 = self.curve.lead
            for rt in self.curve.roots:
                if rt != lam0:
                    s0 *= lam0 - rt
            y_est = ks[0] * cmath.sqrt(s0)
            roots = self.roots_at(lams[0])
            y = roots[int(np.argmin(np.abs(roots - y_est)))]
            y_first = y
            hs = np.empty((M, self.genus), dtype=complex)
            for i in range(M):
                if i:
                    y = continue_root(self.roots_at, lams[i - 1], lams[i], y)
                hs[i] = self.omega(lams[i], y) * 2.0 * ks[i]
            y_close = continue_root(self.roots_at, lams[-1], lams[0], y)
            if abs(y_close - y_first) > 1e-6 * max(1.0, abs(y_first)):
                raise SurfaceError("jet circle did not close")
            c0 = hs.mean(axis=0)
            c1 = (hs * (1.0 / ks)[:, None]).mean(axis=0)
            c2 = (hs * (1.0 / ks ** 2)[:, None]).mean(axis=0)
            jet = PointJet(c0, c1, 2.0 * c2)
        else:
            raise SurfaceError("unknown paramKind %r" % (p.param_kind,))
        if not (np.all(np.isfinite(jet.V)) and np.all(np.isfinite(jet.W))
                and np.all(np.isfinite(jet.U))):
            raise SurfaceError("non-finite jet")
        if p.param_kind != "sqrtBranch" and p.beta != 1.0:
            raise SurfaceError("scale parameters require paramKind scaled")
        return jet

    # -- abel map

    def _connect(self, lam_a, y_a, lam_b, y_b):
        """Waypoints lam_a -> lam_b whose lift ends on y_b."""
        clearance = self._clearance()
        sing = list(self.singular)

        def matches(path):
            y_end = continue_along(self.roots_at, path, y_a)
            return abs(y_end - y_b) <= 1e-6 * max(1.0, abs(y_b))

        base = detoured_path(lam_a, lam_b, sing, clearance)
        if matches(base):
            return base
        # route through winding loops around one or two ramification
        # obstacles until the lift lands on the requested sheet
        mid = 0.5 * (lam_a + lam_b)
        order1 = sorted(sing, key=lambda s: abs(s - mid))
        n = self.curve.n_sheets

        def loop_around(s, from_pt):
            others = [t for t in sing if t != s]
            rho = 0.4 * min((abs(s - t) for t in others), default=1.0)
            entry = s + rho * _unit(from_pt - s)
            return entry, rho, others

        for s in order1:
            entry, rho, others = loop_around(s, lam_a)
            head = detoured_path(lam_a, entry, sing, clearance)
            tail = detoured_path(entry, lam_b, sing, clearance)
            loop = circle_loop(s, rho, n_seg=16,
                               start_angle=cmath.phase(entry - s))
            for w in range(1, n):
                cand = head + (loop[1:]) * w + tail[1:]
                if matches(cand):
                    return cand
        for s1 in order1:
            for s2 in order1:
                if s2 == s1:
                    continue
                e1, r1, o1 = loop_around(s1, lam_a)
                e2, r2, o2 = loop_around(s2, e1)
                l1 = circle_loop(s1, r1, n_seg=16,
                                 start_angle=cmath.phase(e1 - s1))
                l2 = circle_loop(s2, r2, n_seg=16,
                                 start_angle=cmath.phase(e2 - s2))
                head = detoured_path(lam_a, e1, sing, clearance)
                mid_path = detoured_path(e1, e2, sing, clearance)
                tail = detoured_path(e2, lam_b, sing, clearance)
                for w1 in range(1, n):
                    for w2 in range(1, n):
                        cand = (head + l1[1:] * w1 + mid_path[1:]
                                + l2[1:] * w2 + tail[1:])
                        if matches(cand):
                            return cand
        raise SurfaceError("could not connect the requested sheets")

    def abel_between(self, a: MarkedPoint, b: MarkedPoint,
                     order=None) -> AbelPath:
        if a.same_place(b):
            raise SurfaceError("abel_between endpoints must differ")
        order = order or self.order
        f = self.omega

        def ensure_offset(p, towards):
            """Replace a ramification endpoint by a nearby regular point,
            returning (lam, y, singular_tail)."""
            if p.param_kind != "sqrtBranch":
                self.validate_point(p)
                return p.base_coordinate, p.y, None
            lam0 = p.base_coordinate
            others = [s for s in self.singular if s != lam0]
            eps = 0.05 * min(abs(lam0 - s) for s in others)
            lam1 = lam0 + eps * _unit(towards - lam0)
            s0 = self.curve.lead
            for rt in self.curve.roots:
                if rt != lam0:
                    s0 *= lam0 - rt
            y_est = cmath.sqrt(lam1 - lam0) * cmath.sqrt(s0)
            roots = self.roots_at(lam1)
            y1 = roots[int(np.argmin(np.abs(roots - y_est)))]
            return lam1, y1, lam0

        la, ya, sing_a = ensure_offset(a, b.base_coordinate)
        lb, yb, sing_b = ensure_offset(b, a.base_coordinate)
        path = self._connect(la, ya, lb, yb)

        def run(ordr):
            total = np.zeros(self.genus, dtype=complex)
            if sing_a is not None:
                total += integrate_from_singular(
                    self.roots_at, f, sing_a, la, ya, ordr, 2)
            val, _ = integrate_polyline(self.roots_at, f, path, ya, ordr,
                                        singular=self.singular)
            total += val
            if sing_b is not None:
                total -= integrate_from_singular(
                    self.roots_at, f, sing_b, lb, yb, ordr, 2)
            return total

        r = run(order)
        r2 = run(2 * order)
        tag = "polyline with ramification detours (%d waypoints)" % len(path)
        return AbelPath(r, a, b, tag, float(np.max(np.abs(r - r2))))

    # -- fibers of f = lambda

    def fiber_over(self, z_a):
        z_a = complex(z_a)
        crit = min((abs(z_a - s) for s in self.singular), default=np.inf)
        if crit < 1e-6:
            j = int(np.argmin([abs(z_a - s) for s in self.singular]))
            raise SurfaceError(
                "fiber base %s too close to critical value %s"
                % (z_a, self.singular[j]))
        roots = self.roots_at(z_a)
        sep = min(abs(roots[i] - roots[j]) for i in range(len(roots))
                  for j in range(i + 1, len(roots)))
        if sep < 1e-6:
            raise SurfaceError("fiber roots nearly collide over %s" % z_a)
        keyed = sorted(range(len(roots)),
                       key=lambda i: (-round(roots[i].real, 9),
                                      -round(roots[i].imag, 9)))
        return [MarkedPoint(z_a, complex(roots[i]), int(i), "affine",
                            label="fiber%d" % rank)
                for rank, i in enumerate(keyed)]

    # -- periods of arbitrary differentials over the A-cycles

    def a_periods(self, f_scalar, avoid=()):
        """Integrals of f_scalar(lam, y) dlam over each A-cycle.

        Each A-cycle is stored as an integer combination of lifted
        loops: a list of (coefficient, waypoints, starting y).  avoid:
        pole locations of f; loops are deformed off them so no contour
        runs through a pole (enclosed-residue windings remain and must
        be tolerated by the caller)."""
        out = np.zeros(self.genus, dtype=complex)
        for k, combo in enumerate(self._a_loops):
            acc = 0j
            for coeff, loop, y0 in combo:
                if coeff == 0:
                    continue
                if avoid:
                    loop, y0 = self._avoided_loop(loop, y0, avoid)
                val, y_end = integrate_polyline(
                    self.roots_at, lambda l, y: [f_scalar(l, y)], loop, y0,
                    self.order, singular=list(self.singular) + list(avoid))
                if abs(y_end - y0) > 1e-6 * max(1.0, abs(y0)):
                    raise SurfaceError("A-cycle lift did not close")
                acc += coeff * val[0]
            out[k] = acc
        return out

    def normalized_correction(self, f_scalar, avoid=()):
        """Coefficients c with eta = f - sum_j c_j omega_j having zero
        A-periods (over pole-avoiding contour representatives)."""
        return self.a_periods(f_scalar, avoid) / TWO_PI_I

    def _avoided_loop(self, loop, y0, avoid):
        """Deform a closed loop radially away from the avoid points,
        keeping every branch-point winding (residue windings around the
        avoid points may change, which shifts pole periods by 2 i pi)."""
        if not avoid:
            return loop, y0
        clr = 0.4 * min(abs(x - s) for x in avoid for s in self.singular)
        sep = min((abs(x1 - x2) for x1 in avoid for x2 in avoid if x1 != x2),
                  default=math.inf)
        clr = min(clr, 0.45 * sep)
        if min(_dist_to_segment(x, loop[i], loop[i + 1])
               for x in avoid for i in range(len(loop) - 1)) >= clr:
            return loop, y0
        new = pushed_polyline(loop, avoid, clr)
        for s in self.singular:
            if winding_number(new, s) != winding_number(loop, s):
                raise SurfaceError("loop deformation moved across a "
                                   "ramification point")
        y0n = continue_root(self.roots_at, loop[0], new[0], y0)
        return new, y0n

    def b_periods(self, f_scalar, avoid=()):
        """Integrals of f_scalar(lam, y) dlam over each B-cycle.

        avoid: pole locations of f; loops are deformed off them, so the
        result is meaningful modulo 2 i pi residue windings.  The
        A-shift part of the stored basis is omitted (it drops out for
        differentials with zero A-periods)."""
        out = np.zeros(self.genus, dtype=complex)
        for k, combo in enumerate(self._b_combos):
            acc = 0j
            for coeff, loop, y0 in combo:
                if coeff == 0:
                    continue
                loop, y0 = self._avoided_loop(loop, y0, avoid)
                val, y_end = integrate_polyline(
                    self.roots_at, lambda l, y: [f_scalar(l, y)], loop, y0,
                    self.order, singular=list(self.singular) + list(avoid))
                if abs(y_end - y0) > 1e-6 * max(1.0, abs(y0)):
                    raise SurfaceError("B-cycle lift did not close")
                acc += coeff * val[0]
            out[k] = acc
        return out


def _complete_unimodular(c1, c2):
    """(d1, d2) with c1*d2 - c2*d1 = 1."""
    a, b = c1, c2
    x0, x1, y0, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    # a = gcd = c1*x0 + c2*y0
    if a < 0:
        x0, y0 = -x0, -y0
        a = -a
    if a != 1:
        raise SurfaceError("A-direction not primitive")
    return -y0, x0


def _capsule_around(enclosed, others, n_arc=10):
    p, q = enclosed[0], enclosed[-1]
    d_in = max(_dist_to_segment(s, p, q) for s in enclosed)
    d_out = min(_dist_to_segment(s, p, q) for s in others) if others else np.inf
    if d_out <= d_in * 1.05 + 1e-12:
        raise SurfaceError("no separating loop radius for %s" % (enclosed,))
    rho = d_in + 0.5 * (min(d_out, d_in + 2.0 * (d_out - d_in)) - d_in)
    loop = capsule_loop(p, q, rho, n_arc=n_arc)
    for s in enclosed:
        if winding_number(loop, s) != 1:
            raise SurfaceError("capsule fails to enclose %s" % (s,))
    for s in others:
        if winding_number(loop, s) != 0:
            raise SurfaceError("capsule wrongly encloses %s" % (s,))
    return loop


class HyperellipticProvider(_AlgebraicProvider):
    name = "hyperelliptic"

    def __init__(self, branch_points, lead=1.0, order=24, strategy=None):
        bps = sorted((complex(b) for b in branch_points),
                     key=lambda w: (round(w.real, 12), round(w.imag, 12)))
        if len(bps) % 2:
            raise SurfaceError("need an even number of branch points")
        self.curve = CyclicCoverCurve(bps, 2, lead)
        self.genus = self.curve.genus()
        if not 1 <= self.genus <= 4:
            raise SurfaceError("genus %d outside supported range" % self.genus)
        self.singular = tuple(bps)
        self.order = int(order)
        self.lead = complex(lead)
        spread = max(abs(b - bps[0]) for b in bps)
        self._base_lam = max(b.real for b in bps) + 1.0 + 0.25 * spread
        self._build(strategy)

    def phi(self, lam, y):
        return np.array([lam ** j / y for j in range(self.genus)],
                        dtype=complex)

    def _pairings(self, strategy):
        bps = self.singular
        g = self.genus
        if strategy == "cuts":
            a_sets = [bps[2 * k:2 * k + 2] for k in range(g)]
            b_sets = [bps[2 * k + 1:2 * g + 1] for k in range(g)]
        elif strategy == "gaps":
            a_sets = [bps[2 * k + 1:2 * k + 3] for k in range(g)]
            b_sets = [bps[2 * k + 2:2 * g + 2] for k in range(g)]
        else:
            raise SurfaceError("unknown pairing %r" % (strategy,))
        return a_sets, b_sets

    def _loop_data(self, point_sets):
        """(loop, y at loop start) for capsules around each point set."""
        out = []
        y_base = self.roots_at(self._base_lam)[0]
        for S in point_sets:
            others = [s for s in self.singular if s not in S]
            loop = _capsule_around(list(S), others)
            approach = detoured_path(self._base_lam, loop[0],
                                     list(self.singular), self._clearance())
            y0 = continue_along(self.roots_at, approach, y_base)
            out.append((loop, y0))
        return out

    def _loop_periods(self, loops, order):
        P = np.zeros((self.genus, len(loops)), dtype=complex)
        for k, (loop, y0) in enumerate(loops):
            val, y_end = integrate_polyline(self.roots_at, self.phi, loop,
                                            y0, order, singular=self.singular)
            if abs(y_end - y0) > 1e-6 * max(1.0, abs(y0)):
                raise SurfaceError("period loop lift did not close")
            P[:, k] = val
        return P

    def _build(self, strategy):
        real_config = self._is_real_config()
        if real_config and self.genus == 1 and strategy is None:
            self._build_g1_real()
            return
        errors = []
        strategies = [strategy] if strategy else ["gaps", "cuts"]
        for strat in strategies:
            try:
                result = self._try_strategy(strat, real_config)
            except SurfaceError as exc:
                errors.append("%s: %s" % (strat, exc))
                continue
            (self.C, B, H, a_loops, b_loops,
             self._b_signs, defect) = result
            self._a_loops = [[(1, loop, y0)] for loop, y0 in a_loops]
            self._b_loops = b_loops
            self._b_combos = [[(int(self._b_signs[k]), b_loops[k][0],
                                b_loops[k][1])] for k in range(self.genus)]
            self.B_matrix = B
            self.H = H
            self.strategy = strat
            self.build_defect = defect
            return
        raise SurfaceError("no homology pairing passed the gates: "
                           + "; ".join(errors))

    def _build_g1_real(self):
        """Genus-1 real configuration: adapt the homology basis at the
        lattice level so the A-period of the unnormalized differential
        is real (primitive +1-eigenvector of complex conjugation acting
        on the period lattice).  This forces conj of the pulled-back
        normalized differential to be -omega, which is what the
        conjugation laws for Abel increments assume."""
        a_sets, b_sets = self._pairings("gaps")
        a_loops = self._loop_data(a_sets)
        b_loops = self._loop_data(b_sets)

        def periods(order):
            wa = self._loop_periods(a_loops, order)[0, 0]
            wb = self._loop_periods(b_loops, order)[0, 0]
            return wa, wb

        wA, wB = periods(self.order)
        Bm = np.array([[wA.real, wB.real], [wA.imag, wB.imag]])
        if abs(np.linalg.det(Bm)) < 1e-12 * (abs(wA) * abs(wB)):
            raise SurfaceError("degenerate period lattice")

        def coords(w):
            c = np.linalg.solve(Bm, [w.real, w.imag])
            ci = np.rint(c)
            if np.max(np.abs(c - ci)) > 1e-6:
                raise SurfaceError("conjugate period off the lattice "
                                   "(defect %.3e)" % np.max(np.abs(c - ci)))
            return ci.astype(int)

        # conjugation action on the lattice in the (wA, wB) basis
        T = np.column_stack([coords(np.conj(wA)), coords(np.conj(wB))])
        if not np.array_equal(T @ T, np.eye(2, dtype=int)):
            raise SurfaceError("conjugation action is not an involution")
        # primitive +1-eigenvector
        K = T - np.eye(2, dtype=int)
        cand = None
        for v in (np.array([-K[0, 1], K[0, 0]]), np.array([-K[1, 1], K[1, 0]]),
                  np.array([1, 0]), np.array([0, 1])):
            if np.any(v) and np.array_equal(K @ v, np.zeros(2, dtype=int)):
                g = math.gcd(int(v[0]), int(v[1]))
                cand = v // g
                break
        if cand is None:
            raise SurfaceError("no real period direction in the lattice")
        c1, c2 = int(cand[0]), int(cand[1])
        v1 = c1 * wA + c2 * wB
        if abs(v1.imag) > 1e-8 * abs(v1):
            raise SurfaceError("adapted A-period not real")
        # completion to a unimodular basis
        d1, d2 = _complete_unimodular(c1, c2)
        v2 = d1 * wA + d2 * wB
        if (v2 / v1).imag < 0:
            v2, d1, d2 = -v2, -d1, -d2
        # conj(v2) = m v1 - v2; canonicalize m into {0, 1}
        m = (np.conj(v2) + v2) / v1
        mi = int(round(m.real))
        if abs(m - mi) > 1e-8:
            raise SurfaceError("adapted basis conjugation defect %.3e"
                               % abs(m - mi))
        k = (mi % 2 - mi) // 2
        v2 += k * v1
        d1 += k * c1
        d2 += k * c2
        mi = mi % 2
        self.C = np.array([[TWO_PI_I / v1]])
        B1 = np.array([[TWO_PI_I * v2 / v1]])
        self.B_matrix = B1
        self.H = np.array([[mi]])
        self._a_loops = [[(c1, a_loops[0][0], a_loops[0][1]),
                          (c2, b_loops[0][0], b_loops[0][1])]]
        self._b_combos = [[(d1, a_loops[0][0], a_loops[0][1]),
                           (d2, b_loops[0][0], b_loops[0][1])]]
        self._b_loops = b_loops
        self._b_signs = np.ones(1)
        self.strategy = "g1-lattice-adapted"
        wA2, wB2 = periods(2 * self.order)
        v1_2 = c1 * wA2 + c2 * wB2
        v2_2 = d1 * wA2 + d2 * wB2
        B2 = TWO_PI_I * v2_2 / v1_2
        self.build_defect = float(abs(B2 - B1[0, 0]))
        if self.build_defect > 1e-9:
            raise SurfaceError("period quadrature not converged (%.3e)"
                               % self.build_defect)

    def _try_strategy(self, strat, real_config):
        a_sets, b_sets = self._pairings(strat)
        a_loops = self._loop_data(a_sets)
        b_loops = self._loop_data(b_sets)
        P_A = self._loop_periods(a_loops, self.order)
        cond = np.linalg.cond(P_A)
        if cond > 1e10:
            raise SurfaceError(
                "A-period normalization ill-conditioned (cond %.3e)" % cond)
        C = TWO_PI_I * np.linalg.inv(P_A)
        P_B = self._loop_periods(b_loops, self.order)
        B0 = C @ P_B
        # fix the B-cycle orientations column by column
        g = self.genus
        signs = np.ones(g)
        for k in range(1, g):
            if abs(B0[0, k] - B0[k, 0]) > abs(B0[0, k] + B0[k, 0]):
                signs[k] = -1.0
        B1 = B0 * signs[None, :]
        scale = np.max(np.abs(B1))
        if np.max(np.abs(B1 - B1.T)) > 1e-8 * scale:
            raise SurfaceError("period matrix not symmetric after "
                               "orientation fix")
        B1 = 0.5 * (B1 + B1.T)
        if np.max(np.linalg.eigvalsh(B1.real)) >= 0:
            signs = -signs
            B1 = -B1
        if np.max(np.linalg.eigvalsh(B1.real)) >= 0:
            raise SurfaceError("Re(B) not negative definite")
        H = None
        shift = None
        if real_config:
            Hf = B1.imag / math.pi
            H = np.rint(Hf)
            if np.max(np.abs(Hf - H)) > 1e-8:
                raise SurfaceError(
                    "conjugation matrix H not integral (defect %.3e)"
                    % float(np.max(np.abs(Hf - H))))
            H = H.astype(int)
            # canonical census form: shift B_j -> B_j + sum_k S_jk A_k
            # (S symmetric integer) to bring H into {0,1} entries
            Hc = np.mod(H, 2)
            if not np.array_equal(Hc, H):
                shift = (Hc - H) // 2
                B1 = B1 + TWO_PI_I * shift
                H = Hc
        # convergence gates: doubled quadrature order
        P_A2 = self._loop_periods(a_loops, 2 * self.order)
        norm_defect = np.max(np.abs(C @ P_A2 / TWO_PI_I - np.eye(g)))
        if norm_defect > 1e-9:
            raise SurfaceError("A-period normalization defect %.3e"
                               % norm_defect)
        P_B2 = self._loop_periods(b_loops, 2 * self.order)
        B2 = (TWO_PI_I * np.linalg.inv(P_A2) @ P_B2) * signs[None, :]
        B2 = 0.5 * (B2 + B2.T)
        if shift is not None:
            B2 = B2 + TWO_PI_I * shift
        defect = float(np.max(np.abs(B2 - B1)))
        if defect > 1e-9:
            raise SurfaceError("period quadrature not converged (%.3e)"
                               % defect)
        return C, B1, H, a_loops, b_loops, signs, defect

    def _is_real_config(self):
        if abs(self.lead.imag) > 1e-12:
            return False
        bps = list(self.singular)
        for b in bps:
            if min(abs(b.conjugate() - c) for c in bps) > 1e-10:
                return False
        return True

    def tau_kind(self):
        bps = list(self.singular)
        n_real = sum(1 for b in bps if abs(b.imag) < 1e-10)
        pairs = (len(bps) - n_real) // 2
        return ("branch conjugation: %d real, %d conjugate pairs; "
                "lead %s; pairing %s" % (n_real, pairs, self.lead,
                                         self.strategy))

    # third-kind differential with poles at b (+1) and a (-1)
    def third_kind(self, a: MarkedPoint, b: MarkedPoint):
        self.validate_point(a)
        self.validate_point(b)
        la, ya = a.base_coordinate, a.y
        lb, yb = b.base_coordinate, b.y

        def raw(lam, y):
            return ((y + yb) / (lam - lb) - (y + ya) / (lam - la)) / (2.0 * y)

        c = self.normalized_correction(raw, avoid=(la, lb))

        def eta(lam, y):
            return raw(lam, y) - c @ self.omega(lam, y)

        return eta

    # second-kind differential with principal part dk/k^2 at a regular
    # point a, A-periods removed
    def second_kind(self, a: MarkedPoint):
        self.validate_point(a)
        if a.param_kind != "affine":
            raise SurfaceError("second_kind expects an affine point")
        la, ya = a.base_coordinate, a.y
        yp = self.curve.dy_dlam(la, ya)

        def raw(lam, y):
            yhat = ya + yp * (lam - la)
            return (y + yhat) / (2.0 * y * (lam - la) ** 2)

        c = self.normalized_correction(raw, avoid=(la,))

        def eta(lam, y):
            return raw(lam, y) - c @ self.omega(lam, y)

        return eta


class _MonodromyGenus1Provider(_AlgebraicProvider):
    """Genus-1 surfaces built from monodromy-guided cycle search plus
    2-d lattice reduction of the collected periods."""

    def _phi_scalar(self, lam, y):  # pragma: no cover - abstract
        raise NotImplementedError

    def phi(self, lam, y):
        return np.array([self._phi_scalar(lam, y)], dtype=complex)

    def _build_lattice(self, real_config):
        crit = list(self.singular)
        spread = max((abs(a - b) for a in crit for b in crit), default=1.0)
        self._base_lam = max(c.real for c in crit) + 1.0 + 0.3 * max(1.0, spread)
        fiber = self.roots_at(self._base_lam)
        n = len(fiber)
        loops = []
        for c in crit:
            others = [t for t in crit if t != c]
            rho = 0.4 * min((abs(c - t) for t in others), default=1.0)
            entry = c + rho * _unit(self._base_lam - c)
            approach = detoured_path(self._base_lam, entry, others,
                                     self._clearance())
            circ = circle_loop(c, rho, n_seg=16,
                               start_angle=cmath.phase(entry - c))
            back = list(reversed(approach))
            loops.append(approach + circ[1:] + back[1:])

        f = self.phi
        vals = np.zeros((len(loops), n), dtype=complex)
        perms = []
        for i, loop in enumerate(loops):
            perm = []
            for s in range(n):
                v, y_end = integrate_polyline(self.roots_at, f, loop,
                                              fiber[s], self.order,
                                              singular=self.singular)
                perm.append(int(np.argmin(np.abs(fiber - y_end))))
                vals[i, s] = v[0]
            perms.append(perm)

        # closed lifted cycles from loop words of length <= 3
        collected = []   # (period, word, start sheet)
        words = [(i,) for i in range(len(loops))]
        words += [(i, j) for i in range(len(loops)) for j in range(len(loops))]
        words += [(i, j, k) for i in range(len(loops))
                  for j in range(len(loops)) for k in range(len(loops))]
        for w in words:
            for s in range(n):
                cur, p = s, 0j
                for i in w:
                    p += vals[i, cur]
                    cur = perms[i][cur]
                if cur == s and abs(p) > 1e-9:
                    collected.append((p, w, s))
        if not collected:
            raise SurfaceError("no closed cycles found")
        scale = max(abs(p) for p, _, _ in collected)
        basis = _lattice_reduce([p for p, _, _ in collected], 1e-8 * scale)
        v1, v2, trans = _adapt_basis(basis, real_config)
        B = np.array([[TWO_PI_I * (v2 / v1)]])
        self.B_matrix = B
        self.C = np.array([[TWO_PI_I / v1]])
        self._collected = collected
        self._basis = (v1, v2)
        if real_config:
            Hf = B.imag / math.pi
            H = np.rint(Hf)
            if np.max(np.abs(Hf - H)) > 1e-8:
                raise SurfaceError("H not integral on a real configuration")
            self.H = H.astype(int)
        else:
            self.H = None
        # an integer combination of collected cycles realizing the
        # A-cycle (coordinates (1,0) in the reduced basis)
        self._a_combo = _cycle_combo(collected, v1, v2, (1, 0))
        self._b_combo = _cycle_combo(collected, v1, v2, (0, 1))
        self._loops = loops
        self._fiber = fiber
        self.strategy = "monodromy-lattice"
        # convergence gate at doubled order
        p0, w0, s0 = collected[0]
        v, _ = integrate_polyline(self.roots_at, f,
                                  _word_path(loops, perms, w0, s0)[0],
                                  fiber[s0], 2 * self.order,
                                  singular=self.singular)
        self.build_defect = abs(v[0] - p0)
        if self.build_defect > 1e-9 * max(1.0, abs(p0)):
            raise SurfaceError("period quadrature not converged (%.3e)"
                               % self.build_defect)

    def _combo_period(self, combo, f_scalar, avoid=()):
        total = 0j
        f = lambda l, y: [f_scalar(l, y)]
        for coeff, (p, w, s) in zip(combo[0], combo[1]):
            if coeff == 0:
                continue
            path, _ = _word_path(self._loops, self._perms_cache, w, s)
            y0 = self._fiber[s]
            if avoid:
                path, y0 = self._avoided_loop(path, y0, avoid)
            v, y_end = integrate_polyline(
                self.roots_at, f, path, y0, self.order,
                singular=list(self.singular) + list(avoid))
            if abs(y_end - y0) > 1e-6 * max(1.0, abs(y0)):
                raise SurfaceError("cycle combination did not close")
            total += coeff * v[0]
        return np.array([total])

    def a_periods(self, f_scalar, avoid=()):
        return self._combo_period(self._a_combo, f_scalar, avoid)

    def b_periods(self, f_scalar, avoid=()):
        return self._combo_period(self._b_combo, f_scalar, avoid)

    # generic third kind via a meromorphic ansatz with unit residues
    def third_kind(self, a: MarkedPoint, b: MarkedPoint):
        self.validate_point(a)
        self.validate_point(b)
        la, lb = a.base_coordinate, b.base_coordinate
        cands = self._third_kind_candidates(la, lb)
        pole_pts = []
        for lam_c, main_y, sign in ((la, a.y, -1.0), (lb, b.y, +1.0)):
            roots = self.roots_at(lam_c)
            for j, y in enumerate(roots):
                want = sign if abs(y - main_y) < 1e-8 * max(1.0, abs(main_y)) \
                    else 0.0
                pole_pts.append((lam_c, complex(y), want))
        rows = []
        rhs = []
        for lam_c, y_c, want in pole_pts:
            rows.append([_residue_at(self, h, lam_c, y_c) for h in cands])
            rhs.append(want)
        A = np.array(rows, dtype=complex)
        x, *_ = np.linalg.lstsq(A, np.array(rhs, dtype=complex), rcond=None)
        resid = np.max(np.abs(A @ x - np.array(rhs)))
        if resid > 1e-6:
            raise SurfaceError("third-kind residue system inconsistent "
                               "(defect %.3e)" % resid)

        def raw(lam, y):
            return sum(c * h(lam, y) for c, h in zip(x, cands))

        c = self.normalized_correction(raw, avoid=(la, lb))

        def eta(lam, y):
            return raw(lam, y) - c @ self.omega(lam, y)

        return eta

    def _third_kind_candidates(self, la, lb):  # pragma: no cover - abstract
        raise NotImplementedError


def _residue_at(provider, h, lam_c, y_c):
    dist = min(abs(lam_c - s) for s in provider.singular)
    r = 0.1 * min(dist, 1.0)
    M = 32
    ks = r * np.exp(2j * np.pi * np.arange(M) / M)
    y = continue_root(provider.roots_at, lam_c, lam_c + ks[0], y_c)
    acc = 0j
    for i in range(M):
        if i:
            y = continue_root(provider.roots_at, lam_c + ks[i - 1],
                              lam_c + ks[i], y)
        acc += h(lam_c + ks[i], y) * ks[i]
    return acc / M


def _word_path(loops, perms, word, sheet):
    path = list(loops[word[0]])
    cur = perms[word[0]][sheet] if perms else sheet
    for i in word[1:]:
        path += loops[i][1:]
        if perms:
            cur = perms[i][cur]
    return path, cur


def _lattice_reduce(periods, tol):
    """Basis of the rank-2 lattice generated by the given complex values."""
    pts = sorted((p for p in periods if abs(p) > tol), key=abs)
    if not pts:
        raise SurfaceError("no nonzero periods")
    basis = []

    def reduce_against(p):
        if len(basis) == 2:
            Bm = np.array([[basis[0].real, basis[1].real],
                           [basis[0].imag, basis[1].imag]])
            c = np.linalg.solve(Bm, [p.real, p.imag])
            return p - round(c[0]) * basis[0] - round(c[1]) * basis[1], c
        if len(basis) == 1:
            t = p / basis[0]
            if abs(t.imag) < 1e-8 * max(1.0, abs(t)):
                return p - round(t.real) * basis[0], None
        return p, None

    for p in pts:
        w, coords = reduce_against(p)
        if abs(w) <= tol:
            continue
        if len(basis) < 2:
            basis.append(w)
            basis.sort(key=abs)
            continue
        # w enlarges the lattice: rebuild from rational coordinates
        c1 = Fraction(coords[0]).limit_denominator(64)
        c2 = Fraction(coords[1]).limit_denominator(64)
        den = np.lcm(c1.denominator, c2.denominator)
        rows = np.array([[den, 0], [0, den],
                         [int(c1 * den), int(c2 * den)]], dtype=np.int64)
        hnf = _hnf_2col(rows)
        basis = [(hnf[0, 0] * basis[0] + hnf[0, 1] * basis[1]) / den,
                 (hnf[1, 0] * basis[0] + hnf[1, 1] * basis[1]) / den]
        basis.sort(key=abs)
    if len(basis) < 2:
        raise SurfaceError("collected periods do not span a rank-2 lattice")
    # Gauss reduction
    b1, b2 = basis
    for _ in range(64):
        if abs(b2) < abs(b1):
            b1, b2 = b2, b1
        m = round(((b2 * b1.conjugate()).real) / abs(b1) ** 2)
        if m == 0:
            break
        b2 = b2 - m * b1
    return b1, b2


def _hnf_2col(rows):
    """Row-style Hermite form of an integer matrix with 2 columns;
    returns the 2 nonzero rows."""
    rows = [list(map(int, r)) for r in rows]

    def reduce_col(col, pivot_rows):
        live = [r for r in rows if r not in pivot_rows and r[col] != 0]
        while len(live) > 1:
            live.sort(key=lambda r: abs(r[col]))
            a, b = live[0], live[1]
            q = b[col] // a[col]
            for j in range(2):
                b[j] -= q * a[j]
            live = [r for r in rows if r not in pivot_rows and r[col] != 0]
        return live[0] if live else None

    p0 = reduce_col(0, [])
    pivots = [p0] if p0 else []
    p1 = reduce_col(1, pivots)
    if p1:
        pivots.append(p1)
    if len(pivots) < 2:
        raise SurfaceError("degenerate lattice in Hermite reduction")
    return np.array(pivots, dtype=np.int64)


def _adapt_basis(basis, real_config):
    """Choose a unimodular transform of the reduced basis giving
    Re(B) < 0 and, on real configurations, integral H."""
    b1, b2 = basis
    best = None
    for a in range(-3, 4):
        for b in range(-3, 4):
            for c in range(-3, 4):
                for d in range(-3, 4):
                    if a * d - b * c not in (1, -1):
                        continue
                    v1 = a * b1 + b * b2
                    v2 = c * b1 + d * b2
                    if v1 == 0:
                        continue
                    tau = v2 / v1
                    if tau.imag <= 1e-12:
                        continue
                    if real_config:
                        # a real A-period makes the normalized differential
                        # anti-invariant under conjugation, the convention
                        # every reality law downstream relies on
                        if abs(v1.imag) > 1e-7 * abs(v1):
                            continue
                        h = 2.0 * tau.real
                        if abs(h - round(h)) > 1e-8 or round(h) not in (0, 1):
                            continue
                    key = (-tau.imag, abs(tau.real), a, b, c, d)
                    if best is None or key < best[0]:
                        best = (key, v1, v2, (a, b, c, d))
    if best is None:
        raise SurfaceError("no admissible period basis found")
    return best[1], best[2], best[3]


def _cycle_combo(collected, v1, v2, target):
    """Integer combination of collected cycles with lattice coordinates
    equal to target in the basis (v1, v2)."""
    Bm = np.array([[v1.real, v2.real], [v1.imag, v2.imag]])
    coords = []
    for p, w, s in collected:
        c = np.linalg.solve(Bm, [p.real, p.imag])
        ci = np.rint(c).astype(int)
        if np.max(np.abs(c - ci)) > 1e-6:
            raise SurfaceError("cycle period off the lattice")
        coords.append(tuple(ci))
    t = np.array(target)
    # single cycle
    for i, c in enumerate(coords):
        if tuple(c) == tuple(t):
            coeffs = [0] * len(collected)
            coeffs[i] = 1
            return coeffs, collected
    # pair combination with small coefficients
    for i in range(len(coords)):
        for j in range(len(coords)):
            if i == j:
                continue
            ci, cj = np.array(coords[i]), np.array(coords[j])
            for xi in range(-3, 4):
                for xj in range(-3, 4):
                    if np.array_equal(xi * ci + xj * cj, t):
                        coeffs = [0] * len(collected)
                        coeffs[i] = xi
                        coeffs[j] += xj
                        return coeffs, collected
    raise SurfaceError("could not realize the A-cycle from collected cycles")


class SuperellipticProvider(_MonodromyGenus1Provider):
    name = "superellipticCubicRoot"

    def __init__(self, branch_points, order=24):
        roots = [complex(b) for b in branch_points]
        self.curve = CyclicCoverCurve(roots, 3, 1.0)
        self.genus = self.curve.genus()
        if self.genus != 1:
            raise SurfaceError("superelliptic provider supports genus 1 only")
        self.singular = tuple(roots)
        self.order = int(order)
        self._basis_exponents = self._holomorphic_exponents()
        real = all(abs(r.imag) < 1e-12 for r in roots) or all(
            min(abs(r.conjugate() - t) for t in roots) < 1e-10 for r in roots)
        self._build_lattice(real)
        self._perms_cache = self._recompute_perms()

    def _recompute_perms(self):
        perms = []
        for loop in self._loops:
            perm = []
            for s in range(len(self._fiber)):
                y_end = continue_along(self.roots_at, loop, self._fiber[s])
                perm.append(int(np.argmin(np.abs(self._fiber - y_end))))
            perms.append(perm)
        return perms

    def _holomorphic_exponents(self):
        """(a, b) with lambda^a dlambda / y^b holomorphic; exact order
        count at the (simple, fully ramified) finite roots and at
        infinity."""
        m = len(self.curve.roots)
        out = []
        for b in range(1, 3):
            for a in range(0, m + 1):
                ok = True
                for r in self.curve.roots:
                    ordr = (3 * a if r == 0 else 0) + 2 - b
                    if ordr < 0:
                        ok = False
                if m % 3:
                    if b * m - 3 * a - 4 < 0:
                        ok = False
                else:
                    if b * m // 3 - a - 2 < 0:
                        ok = False
                if ok:
                    out.append((a, b))
        if len(out) != self.genus:
            raise SurfaceError("holomorphy filter found %d differentials, "
                               "expected %d" % (len(out), self.genus))
        return out

    def _phi_scalar(self, lam, y):
        a, b = self._basis_exponents[0]
        return lam ** a / y ** b

    def tau_kind(self):
        return "cyclic cube-root cover, real branch locus"

    def _third_kind_candidates(self, la, lb):
        cands = []
        for lam_c in (la, lb):
            # j runs over 0..2: residues over a regular fiber form a
            # Vandermonde system, so all three y-powers are needed
            for (i, j) in ((0, 0), (1, 0), (0, 1), (0, 2)):
                def h(lam, y, i=i, j=j, lc=lam_c):
                    return lam ** i * y ** j / (3.0 * y ** 2 * (lam - lc))
                cands.append(h)
        return cands


class PlaneCubicProvider(_MonodromyGenus1Provider):
    name = "planeCubic"

    def __init__(self, coeffs, order=24):
        self.curve = PlaneCurve(coeffs)
        if self.curve.y_degree != 3:
            raise SurfaceError("plane cubic must have y-degree 3")
        self.curve.smoothness_check()
        self.genus = 1
        crit = self.curve.critical_lambdas()
        # deduplicate
        uniq = []
        for c in crit:
            if all(abs(c - u) > 1e-8 for u in uniq):
                uniq.append(complex(c))
        self.singular = tuple(sorted(uniq, key=lambda w: (round(w.real, 10),
                                                          round(w.imag, 10))))
        self.order = int(order)
        real = bool(np.max(np.abs(self.curve.coeffs.imag)) < 1e-12)
        self._build_lattice(real)
        self._perms_cache = self._recompute_perms()

    def _recompute_perms(self):
        perms = []
        for loop in self._loops:
            perm = []
            for s in range(len(self._fiber)):
                y_end = continue_along(self.roots_at, loop, self._fiber[s])
                perm.append(int(np.argmin(np.abs(self._fiber - y_end))))
            perms.append(perm)
        return perms

    def _phi_scalar(self, lam, y):
        return 1.0 / self.curve.F_y(lam, y)

    def tau_kind(self):
        return "real plane cubic, conjugation (lambda, y) -> (conj, conj)"

    def _third_kind_candidates(self, la, lb):
        cands = []
        for lam_c in (la, lb):
            for (i, j) in ((0, 0), (1, 0), (0, 1), (0, 2)):
                def h(lam, y, i=i, j=j, lc=lam_c):
                    return lam ** i * y ** j / (self.curve.F_y(lam, y)
                                                * (lam - lc))
                cands.append(h)
        return cands


# ---------------------------------------------------------------------------
# analytic / file-backed providers


class Genus1AnalyticProvider:
    """Points are Jacobian arguments; the period matrix is given."""

    name = "genus1Analytic"

    def __init__(self, modulus):
        self.B_matrix = np.array([[complex(modulus)]])
        self.genus = 1
        h = self.B_matrix.imag[0, 0] / math.pi
        if abs(h - round(h)) < 1e-10:
            self.H = np.array([[int(round(h))]])
        else:
            self.H = None
        self.strategy = "analytic"
        self.build_defect = 0.0

    def make_point(self, u, kind="affine", beta=1.0, mu=0.0, nu=0.0,
                   label="", sheet=0):
        if kind not in ("affine", "scaled"):
            raise SurfaceError("analytic surface supports affine/scaled "
                               "parameters only")
        return MarkedPoint(complex(u), 0j, 0, kind, complex(beta),
                           complex(mu), complex(nu), label)

    def point_jet(self, p, radius_factor=0.1):
        V = np.array([1.0 + 0j])
        W = np.array([0j])
        U = np.array([0j])
        if p.param_kind == "scaled":
            V, W, U = jet_rescale(V, W, U, p.beta, p.mu, p.nu)
        return PointJet(V, W, U)

    def abel_between(self, a, b, order=None):
        if a.same_place(b):
            raise SurfaceError("abel_between endpoints must differ")
        r = np.array([b.base_coordinate - a.base_coordinate])
        return AbelPath(r, a, b, "difference of Jacobian arguments", 0.0)

    def fiber_over(self, z_a):
        raise SurfaceError("analytic surface has no covering map")

    def tau_kind(self):
        return "analytic torus"


class DirectFileProvider:
    """Exact injected data: marked points are integer indices."""

    name = "directFile"

    def __init__(self, path):
        with open(path) as fh:
            data = json.load(fh)
        self.genus = int(data["genus"])

        def cplx(v):
            return complex(v[0], v[1]) if isinstance(v, (list, tuple)) \
                else complex(v)

        self.B_matrix = np.array([[cplx(x) for x in row]
                                  for row in data["B"]])
        self._points = []
        for entry in data["points"]:
            jets = entry["jets"]
            jet = PointJet(np.array([cplx(x) for x in jets["V"]]),
                           np.array([cplx(x) for x in jets["W"]]),
                           np.array([cplx(x) for x in jets["U"]]))
            inc = np.array([cplx(x) for x in entry["abelIncrements"]])
            self._points.append((jet, inc))
        oc = data.get("oddChar")
        self.odd_char = HalfCharacteristic.of(oc[0], oc[1]) if oc else None
        self.H = np.array(data["H"], dtype=int) if data.get("H") is not None \
            else None
        self.strategy = "directFile"
        self.build_defect = 0.0

    def make_point(self, index, **_):
        i = int(index)
        if not 0 <= i < len(self._points):
            raise SurfaceError("point index out of range")
        return MarkedPoint(complex(i), 0j, i, "affine", label="file%d" % i)

    def point_jet(self, p, radius_factor=0.1):
        return self._points[p.sheet][0]

    def abel_between(self, a, b, order=None):
        if a.sheet == b.sheet:
            raise SurfaceError("abel_between endpoints must differ")
        r = self._points[b.sheet][1] - self._points[a.sheet][1]
        return AbelPath(r, a, b, "stored Abel increments", 0.0)

    def fiber_over(self, z_a):
        raise SurfaceError("file-backed surface has no covering map")

    def tau_kind(self):
        return "injected data"


# ---------------------------------------------------------------------------
# model + build


class SurfaceModel:
    """Immutable bundle of period data and a point-query provider."""

    def __init__(self, provider, config, quadrature_order):
        self.provider = provider
        self.config = config
        self.quadrature_order = quadrature_order
        self.genus = provider.genus
        self.B = RiemannMatrix(provider.B_matrix)
        if getattr(provider, "odd_char", None) is not None:
            self.odd_char = provider.odd_char
        else:
            self.odd_char = odd_nonsingular_char(self.B)
        if provider.H is not None:
            self.real_structure = RealStructure(np.asarray(provider.H),
                                                provider.tau_kind())
        else:
            self.real_structure = None
        self.metadata = {
            "strategy": provider.strategy,
            "build_defect": provider.build_defect,
            "content_hash": config_hash(config),
        }

    def point(self, coordinate, sheet=0, kind="affine", **kw):
        return self.provider.make_point(coordinate, sheet=sheet, kind=kind,
                                        **kw)

    def point_jet(self, p, radius_factor=0.1):
        return self.provider.point_jet(p, radius_factor)

    def abel_between(self, a, b, order=None):
        return self.provider.abel_between(a, b, order=order)

    def fiber_over(self, z_a):
        return self.provider.fiber_over(z_a)


def config_hash(config) -> str:
    def canon(x):
        if isinstance(x, complex):
            return [x.real, x.imag]
        if isinstance(x, dict):
            return {k: canon(v) for k, v in sorted(x.items())}
        if isinstance(x, (list, tuple)):
            return [canon(v) for v in x]
        return x
    payload = json.dumps(canon(config), sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def build_surface(config, quadrature_order=24) -> SurfaceModel:
    """Build a SurfaceModel from a provider config dict."""
    if quadrature_order <= 0:
        raise SurfaceError("quadratureOrder must be positive")
    provider_name = config.get("provider")
    params = config.get("parameters", {})
    try:
        return _build_provider(provider_name, params, config,
                               quadrature_order)
    except CurveError as exc:
        raise SurfaceError(str(exc)) from exc


def _build_provider(provider_name, params, config, quadrature_order):
    if provider_name == "hyperelliptic":
        provider = HyperellipticProvider(
            [_as_complex(b) for b in params["branchPoints"]],
            lead=_as_complex(params.get("lead", 1.0)),
            order=quadrature_order)
    elif provider_name == "superellipticCubicRoot":
        provider = SuperellipticProvider(
            [_as_complex(b) for b in params["branchPoints"]],
            order=quadrature_order)
    elif provider_name == "planeCubic":
        provider = PlaneCubicProvider(params["coefficients"],
                                      order=quadrature_order)
    elif provider_name == "genus1Analytic":
        provider = Genus1AnalyticProvider(_as_complex(params["modulus"]))
    elif provider_name == "directFile":
        provider = DirectFileProvider(params["path"])
    else:
        raise SurfaceError("unknown provider %r" % (provider_name,))
    return SurfaceModel(provider, config, quadrature_order)


def _as_complex(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


# ---------------------------------------------------------------------------
# characteristics and real-structure queries


def _all_half_chars(g):
    vals = (0.0, 0.5)
    out = []
    for dp_bits in range(2 ** g):
        for dpp_bits in range(2 ** g):
            dp = tuple(vals[(dp_bits >> i) & 1] for i in range(g))
            dpp = tuple(vals[(dpp_bits >> i) & 1] for i in range(g))
            out.append(HalfCharacteristic(dp, dpp))
    out.sort(key=lambda c: (c.delta_prime, c.delta_double_prime))
    return out


def odd_nonsingular_char(B: RiemannMatrix) -> HalfCharacteristic:
    """Lexicographically first odd characteristic with a nonvanishing
    theta gradient at 0."""
    g = B.genus
    zero = np.zeros(g, dtype=complex)
    even_scale = 0.0
    odd_cands = []
    for c in _all_half_chars(g):
        if c.parity() == 0:
            v = theta(c, zero, B)
            even_scale = max(even_scale,
                             0.0 if v.is_zero else math.exp(v.abs_log()))
        else:
            odd_cands.append(c)
    for c in odd_cands:
        dirs = [tuple(1.0 if i == j else 0.0 for i in range(g))
                for j in range(g)]
        vals = theta_batch(c, zero, B, [(np.asarray(d),) for d in dirs])
        grad = math.sqrt(sum(
            0.0 if v.is_zero else math.exp(2 * v.abs_log()) for v in vals))
        if grad >= 1e-8 * even_scale:
            return c
    raise SurfaceError("no nonsingular odd characteristic found")


def infer_lattice_pair(surface: SurfaceModel, r, mode: str):
    """Integer (N, M) in the conjugation law of an Abel increment.

    fixedPoints:   conj(r) = -r - 2 i pi N - B M
    swappedPoints: conj(r) =  r - 2 i pi N      (M = 0)
    """
    if surface.real_structure is None:
        raise SurfaceError("surface has no real structure")
    if isinstance(r, AbelPath):
        r = r.r
    r = np.asarray(r, dtype=complex)
    B = surface.B.entries
    g = surface.genus
    if mode == "fixedPoints":
        # real part: 2 Re r = -Re(B) M; imag part: 2 pi N = -Im(B) M
        Mf = np.linalg.solve(B.real, -2.0 * r.real)
        M = np.rint(Mf)
        Nf = -(B.imag @ Mf) / (2.0 * math.pi)
        N = np.rint(Nf)
        residual = float(max(np.max(np.abs(Mf - M)), np.max(np.abs(Nf - N))))
    elif mode == "swappedPoints":
        M = np.zeros(g)
        # conj(r) - r = -2i Im r = -2 i pi N
        Nf = r.imag / math.pi
        N = np.rint(Nf)
        residual = float(np.max(np.abs(Nf - N)))
    else:
        raise SurfaceError("unknown mode %r" % (mode,))
    if residual > 1e-3:
        raise SurfaceError(
            "conjugation law defect %.3e: homology basis is not adapted "
            "to the anti-involution" % residual)
    if mode == "fixedPoints":
        H = surface.real_structure.H
        check = 2.0 * N + H @ M
        if np.max(np.abs(check)) > 1e-8:
            raise SurfaceError("2N + HM != 0 for the inferred pair")
    return N.astype(int), M.astype(int), residual
