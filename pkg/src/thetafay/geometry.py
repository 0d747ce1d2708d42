"""Path construction and quadrature helpers for curve integrals.

Paths in the lambda-plane are polylines (lists of complex waypoints).
Integration uses Gauss-Legendre nodes per piece, with pieces sized by
the distance to the nearest singular point, and the fiber coordinate y
continued stepwise along the nodes.
"""
from __future__ import annotations

import cmath
import math

import numpy as np


class ContinuationError(RuntimeError):
    pass


class PathError(ValueError):
    pass


def continue_root(roots_at, lam0, lam1, y0, max_depth=48):
    """Analytically continue y from (lam0, y0) to lam1.

    roots_at(lam) returns the full fiber over lam.  A step is accepted
    when the nearest root moves by less than 10% of |y| (or stays well
    separated from the other roots); otherwise the step is bisected.
    """
    def step(l0, l1, y, depth):
        roots = roots_at(l1)
        d = np.abs(roots - y)
        j = int(np.argmin(d))
        dy = d[j]
        others = np.delete(d, j)
        sep = np.min(np.abs(np.delete(roots, j) - roots[j])) if len(others) else np.inf
        if dy <= 0.1 * abs(y) or dy <= 0.25 * sep:
            return roots[j]
        if depth >= max_depth:
            raise ContinuationError(
                "analytic continuation lost the sheet near %s" % (l1,))
        mid = 0.5 * (l0 + l1)
        ym = step(l0, mid, y, depth + 1)
        return step(mid, l1, ym, depth + 1)

    if lam0 == lam1:
        return y0
    return step(lam0, lam1, y0, 0)


def continue_along(roots_at, waypoints, y0):
    """Continue y along a polyline; returns final y."""
    y = y0
    for i in range(len(waypoints) - 1):
        y = continue_root(roots_at, waypoints[i], waypoints[i + 1], y)
    return y


def _split_piece(p, q, singular, min_frac=1.0 / 256.0):
    """Subdivide [p,q] so each piece is short relative to the nearest
    singular point."""
    out = []
    length = abs(q - p)
    if length == 0:
        return out

    def rec(a, b, depth):
        mid = 0.5 * (a + b)
        d = min((abs(mid - s) for s in singular), default=np.inf)
        if abs(b - a) <= max(0.6 * d, length * min_frac) or depth > 10:
            out.append((a, b))
        else:
            rec(a, mid, depth + 1)
            rec(mid, b, depth + 1)

    rec(p, q, 0)
    return out


def integrate_polyline(roots_at, f, waypoints, y0, order, singular=()):
    """Integrate the differential f(lam, y) dlam along a lifted polyline.

    f returns a vector (coefficients of several differentials at once).
    Returns (integral vector, final y).
    """
    nodes, wts = np.polynomial.legendre.leggauss(order)
    total = None
    y = y0
    for i in range(len(waypoints) - 1):
        for (a, b) in _split_piece(waypoints[i], waypoints[i + 1], singular):
            mid = 0.5 * (a + b)
            half = 0.5 * (b - a)
            lams = mid + half * nodes
            acc = None
            y_run = y
            prev = a
            for lam, w in zip(lams, wts):
                y_run = continue_root(roots_at, prev, lam, y_run)
                val = np.asarray(f(lam, y_run), dtype=complex) * (w * half)
                acc = val if acc is None else acc + val
                prev = lam
            y = continue_root(roots_at, prev, b, y_run)
            total = acc if total is None else total + acc
    if total is None:
        raise PathError("empty integration path")
    return total, y


def integrate_from_singular(roots_at, f, lam_sing, lam_end, y_end, order,
                            root_power):
    """Integrate f(lam,y) dlam from a ramification point lam_sing to lam_end.

    Substitutes lam = lam_sing + (lam_end-lam_sing) s^root_power, which
    absorbs an algebraic endpoint singularity of type
    (lam-lam_sing)^(-(root_power-1)/root_power).  y is continued
    backwards from the regular endpoint.  Returns the integral oriented
    lam_sing -> lam_end.
    """
    m = root_power
    delta = lam_end - lam_sing
    nodes, wts = np.polynomial.legendre.leggauss(order)
    s = 0.5 * (nodes + 1.0)          # (0,1)
    w = 0.5 * wts
    lams = lam_sing + delta * s ** m
    jac = m * delta * s ** (m - 1)
    # continue y from the regular end backwards through the nodes
    ys = np.empty(len(s), dtype=complex)
    y_run = y_end
    prev = lam_end
    for i in range(len(s) - 1, -1, -1):
        y_run = continue_root(roots_at, prev, lams[i], y_run)
        ys[i] = y_run
        prev = lams[i]
    total = None
    for i in range(len(s)):
        val = np.asarray(f(lams[i], ys[i]), dtype=complex) * (w[i] * jac[i])
        total = val if total is None else total + val
    return total


def winding_number(poly, point):
    """Winding of a closed polyline around point."""
    angle = 0.0
    for i in range(len(poly) - 1):
        a = poly[i] - point
        b = poly[i + 1] - point
        angle += cmath.phase(b / a)
    return int(round(angle / (2.0 * math.pi)))


def capsule_loop(p, q, rho, n_arc=10):
    """Counterclockwise stadium-shaped closed polyline around segment [p,q]."""
    if p == q:
        u = 1.0 + 0j
    else:
        u = (q - p) / abs(q - p)
    # straight edge on the +i*u side from p to q, arc around q passing
    # q + u*rho, straight edge back on the -i*u side, arc around p
    pts = [p + 1j * u * rho, q + 1j * u * rho]
    for k in range(1, n_arc):
        ang = math.pi / 2.0 - math.pi * k / n_arc
        pts.append(q + rho * u * cmath.exp(1j * ang))
    pts.append(q - 1j * u * rho)
    pts.append(p - 1j * u * rho)
    for k in range(1, n_arc):
        ang = -math.pi / 2.0 - math.pi * k / n_arc
        pts.append(p + rho * u * cmath.exp(1j * ang))
    pts.append(pts[0])
    # ensure counterclockwise (positive signed area)
    area = 0.0
    for i in range(len(pts) - 1):
        area += (pts[i].real * pts[i + 1].imag - pts[i + 1].real * pts[i].imag)
    if area < 0:
        pts = pts[::-1]
    return pts


def circle_loop(center, radius, n_seg=24, start_angle=0.0, turns=1):
    """Closed counterclockwise circle polyline."""
    pts = [center + radius * cmath.exp(1j * (start_angle + 2.0 * math.pi * turns * k / (n_seg * turns)))
           for k in range(n_seg * turns + 1)]
    return pts


def _detour_disk(pts, x, clearance):
    """Replace every portion of a polyline inside |z-x| < clearance by
    an arc of the clearance circle (shorter arc; counterclockwise when
    the crossing is diametral)."""
    if abs(pts[0] - x) < clearance or abs(pts[-1] - x) < clearance:
        raise PathError("polyline endpoint inside clearance disk")
    out = [pts[0]]
    entry = None
    for i in range(len(pts) - 1):
        p, q = pts[i], pts[i + 1]
        seg = q - p
        L2 = (seg * seg.conjugate()).real
        # |p + t seg - x|^2 = clearance^2
        hits = []
        if L2 > 0:
            w = p - x
            bq = (w * seg.conjugate()).real
            cq = (w * w.conjugate()).real - clearance * clearance
            disc = bq * bq - L2 * cq
            if disc > 0:
                rt = math.sqrt(disc)
                for t in ((-bq - rt) / L2, (-bq + rt) / L2):
                    if 1e-12 < t < 1.0 - 1e-12:
                        hits.append(t)
        for t in hits:
            z = p + t * seg
            if entry is None:
                entry = z
                out.append(z)
            else:
                a1 = cmath.phase(entry - x)
                a2 = cmath.phase(z - x)
                d = (a2 - a1) % (2.0 * math.pi)
                if d > math.pi + 1e-9:
                    d -= 2.0 * math.pi
                n = max(2, int(math.ceil(abs(d) / (math.pi / 12.0))))
                # radius bumped so arc chords keep the clearance
                r = clearance / math.cos(0.5 * abs(d) / n)
                out.extend(x + r * cmath.exp(1j * (a1 + d * k / n))
                           for k in range(n + 1))
                entry = None
        if entry is None:
            out.append(q)
    if entry is not None:
        raise PathError("unbalanced clearance-disk crossing")
    return out


def pushed_polyline(poly, avoid, clearance):
    """Detour a polyline around each avoid point along circular arcs of
    radius >= clearance.

    Requires clearance < half the pairwise distance between avoid
    points (disjoint disks).  Winding numbers around points farther
    than ~clearance from the original polyline are unchanged; windings
    around the avoid points themselves may change by +-1 when the
    original passes through them (callers must tolerate that).
    """
    av = list(avoid)
    sep = min((abs(av[i] - av[j]) for i in range(len(av))
               for j in range(i + 1, len(av))), default=math.inf)
    if clearance >= 0.5 * sep:
        raise PathError("avoid points closer than twice the clearance")
    pts = list(poly)
    for x in av:
        pts = _detour_disk(pts, x, clearance)
    return pts


def detoured_path(p, q, obstacles, clearance):
    """Polyline p -> q pushed away from obstacle points.

    Straight segment with a perpendicular detour waypoint inserted for
    any obstacle closer than ``clearance`` to the segment interior.
    """
    pts = [p, q]
    changed = True
    guard = 0
    while changed and guard < 40:
        changed = False
        guard += 1
        new_pts = [pts[0]]
        for i in range(len(pts) - 1):
            a, b = pts[i], pts[i + 1]
            seg = b - a
            seg_len = abs(seg)
            worst = None
            for s in obstacles:
                if seg_len == 0:
                    continue
                t = ((s - a) / seg).real
                if 0.02 < t < 0.98:
                    d = abs(a + t * seg - s)
                    if d < clearance and (worst is None or d < worst[0]):
                        worst = (d, t, s)
            if worst is not None:
                d, t, s = worst
                foot = a + t * seg
                if d < 1e-9 * max(1.0, seg_len):
                    n = 1j * seg / seg_len
                    # side must not depend on traversal direction
                    if n.imag < 0 or (n.imag == 0 and n.real < 0):
                        n = -n
                else:
                    n = (foot - s) / d
                new_pts.append(s + n * clearance * 1.5)
                changed = True
            new_pts.append(b)
        pts = new_pts
    return pts


# ---------------------------------------------------------------------------
# truncated power-series utilities for local-parameter rescaling

def invert_param_series(beta, mu, nu=0j):
    """Coefficients of k(ktilde) up to order 3 for ktilde = beta k + mu k^2 + nu k^3."""
    a1 = 1.0 / beta
    a2 = -mu / beta ** 3
    a3 = (2.0 * mu * mu - beta * nu) / beta ** 5
    return a1, a2, a3


def jet_rescale(V, W, U, beta, mu, nu=0j):
    """Re-expand omega = (V + W k + U k^2/2) dk in ktilde = beta k + mu k^2 + nu k^3."""
    V = np.asarray(V, dtype=complex)
    W = np.asarray(W, dtype=complex)
    U = np.asarray(U, dtype=complex)
    a1, a2, a3 = invert_param_series(beta, mu, nu)
    # P(k(kt)) mod kt^3, with k = a1 kt + a2 kt^2 + ...
    p0 = V
    p1 = W * a1
    p2 = W * a2 + 0.5 * U * a1 * a1
    # dk/dkt = a1 + 2 a2 kt + 3 a3 kt^2
    c0 = p0 * a1
    c1 = p1 * a1 + p0 * 2.0 * a2
    c2 = p2 * a1 + p1 * 2.0 * a2 + p0 * 3.0 * a3
    return c0, c1, 2.0 * c2
