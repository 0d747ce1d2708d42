"""Prime form, the fundamental scalars q1, q2, K1, K2, and residuals of
the trisecant-type theta identities.

All identity residuals are normalized by the largest participating term
so that values stay meaningful near the theta divisor, and every theta
value is carried as a ScaledComplex until the final ratio.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .geometry import continue_root, integrate_polyline, continue_along, \
    detoured_path
from .scaled import ScaledComplex
from .surfaces import AbelPath, MarkedPoint, SurfaceError, SurfaceModel
from .theta import HalfCharacteristic, log_derivs, theta, theta_batch


class FayError(ValueError):
    pass


@dataclass(frozen=True)
class FayScalars:
    q1: complex
    q2: complex
    K1: complex
    K2: complex
    pair: tuple
    contour: AbelPath


# ---------------------------------------------------------------------------
# per-surface caches (write-once; idempotent under concurrent writes)


def _cache(surface: SurfaceModel) -> dict:
    c = getattr(surface, "_fay_cache", None)
    if c is None:
        c = {}
        surface._fay_cache = c
    return c


def _point_key(p: MarkedPoint):
    return (round(p.base_coordinate.real, 10), round(p.base_coordinate.imag, 10),
            round(p.y.real, 8), round(p.y.imag, 8), p.sheet, p.param_kind,
            p.beta, p.mu, p.nu)


def _jet(surface, p):
    c = _cache(surface)
    key = ("jet",) + _point_key(p)
    if key not in c:
        c[key] = surface.point_jet(p)
    return c[key]


def _odd_gradient(surface):
    """Gradient of Theta[delta] at 0 for the surface's odd characteristic."""
    c = _cache(surface)
    if "grad" not in c:
        g = surface.genus
        zero = np.zeros(g, dtype=complex)
        dirs = [tuple(1.0 if i == j else 0.0 for i in range(g))
                for j in range(g)]
        vals = theta_batch(surface.odd_char, zero, surface.B,
                           [(np.asarray(d),) for d in dirs])
        c["grad"] = np.array([v.to_complex() for v in vals])
    return c["grad"]


def _theta_scale_log(surface, z):
    """Natural magnitude scale of Theta(z): |F(z)| * |Theta(0)| where F is
    the exact quasi-periodicity factor of the argument reduction."""
    c = _cache(surface)
    if "log_theta0" not in c:
        g = surface.genus
        c["log_theta0"] = theta(HalfCharacteristic.zero(g),
                                np.zeros(g, dtype=complex),
                                surface.B).abs_log()
    z = np.asarray(z, dtype=complex)
    z0, N, M = surface.B.reduce_argument(z)
    Mf = M.astype(float)
    log_f = (-0.5 * (surface.B.entries @ Mf) @ Mf - z0 @ Mf).real
    return log_f + c["log_theta0"]


def _on_divisor(surface, value: ScaledComplex, z, tol=1e-12):
    if value.is_zero:
        return True
    return value.abs_log() - _theta_scale_log(surface, z) < math.log(tol)


# ---------------------------------------------------------------------------
# prime form


def _spinor(surface, p):
    """h_delta(p): principal square root of <grad Theta[delta](0), V_p>,
    cached per point so repeated calls share one branch choice."""
    c = _cache(surface)
    key = ("h",) + _point_key(p)
    if key in c:
        return c[key]
    grad = _odd_gradient(surface)
    V = _jet(surface, p).V
    h2 = complex(grad @ V)
    scale = float(np.linalg.norm(grad) * max(np.linalg.norm(V), 1e-30))
    if abs(h2) <= 1e-12 * scale:
        raise FayError(
            "spinor h_delta^2 vanishes at %s: odd characteristic is "
            "effectively singular there" % (p,))
    c.setdefault(key, cmath.sqrt(h2))
    return c[key]


def prime_form(surface: SurfaceModel, a: MarkedPoint, b: MarkedPoint
               ) -> ScaledComplex:
    """E(a,b) = Theta[delta](int_b^a) / (h_delta(a) h_delta(b))."""
    if a.same_place(b):
        raise FayError("prime form endpoints must differ")
    ha = _spinor(surface, a)
    hb = _spinor(surface, b)
    r = surface.abel_between(b, a).r        # mu(a) - mu(b)
    num = theta(surface.odd_char, r, surface.B)
    return num / (ha * hb)


def _prime_from_diff(surface, diff, ha, hb):
    return theta(surface.odd_char, diff, surface.B) / (ha * hb)


# ---------------------------------------------------------------------------
# fundamental scalars


def fay_scalars(surface: SurfaceModel, a: MarkedPoint, b: MarkedPoint,
                contour=None) -> FayScalars:
    """q1, q2 and K1, K2 for the marked pair (a, b).

    contour: optional Abel increment (AbelPath or g-vector) overriding
    abel_between.  A different lattice representative of the same
    increment changes q2, K1, K2 consistently, so callers combining
    scalars of (a, b) and (b, a) can force the reversed representative.
    """
    if a.same_place(b):
        raise FayError("fay_scalars endpoints must differ")
    B = surface.B
    g = surface.genus
    delta = surface.odd_char
    zero_char = HalfCharacteristic.zero(g)
    ja = _jet(surface, a)
    jb = _jet(surface, b)
    if contour is None:
        path = surface.abel_between(a, b)
    elif isinstance(contour, AbelPath):
        path = contour
    else:
        path = AbelPath(np.asarray(contour, dtype=complex), a, b,
                        "caller-supplied increment", 0.0)
    r = path.r                               # int_a^b = mu(b) - mu(a)

    grad = _odd_gradient(surface)
    da0 = complex(grad @ ja.V)               # D_a Theta[delta](0)
    dpa0 = complex(grad @ ja.W)              # D'_a Theta[delta](0)
    db0 = complex(grad @ jb.V)
    gscale = float(np.linalg.norm(grad))
    if abs(da0) <= 1e-12 * gscale * max(1.0, float(np.linalg.norm(ja.V))):
        raise FayError("D_a Theta[delta](0) vanishes: move the point a")

    t_delta_r = theta(delta, r, B)
    if _on_divisor(surface, t_delta_r, r):
        raise FayError(
            "Theta[delta] vanishes at the Abel increment: points in "
            "special position; move one of them")

    # odd-characteristic log-derivatives at r
    q1, da_ln_delta_r = log_derivs(delta, r, B, [ja.V, jb.V],
                                   [(0, 1), (0,)])
    q2 = (ScaledComplex.of(da0 * db0) / (t_delta_r * t_delta_r)).to_complex()
    K1 = 0.5 * dpa0 / da0 + da_ln_delta_r
    K2 = _k2_scalar(surface, r, K1, ja)
    return FayScalars(q1=q1, q2=q2, K1=K1, K2=K2, pair=(a, b), contour=path)


def _k2_scalar(surface, r, K1, ja):
    """K2 read off the z-independent identity at a well-conditioned z0.

    z0 = 0 is preferred (odd zero-characteristic derivatives vanish
    there), but Theta(r) may vanish -- the Abel increment of a pair in
    special position with the theta divisor -- so fall back to generic
    arguments until both Theta(z0) and Theta(z0 + r) are comfortably off
    the divisor.
    """
    B = surface.B
    g = surface.genus
    zero_char = HalfCharacteristic.zero(g)
    idx = np.arange(1, g + 1, dtype=float)
    candidates = [np.zeros(g, dtype=complex)] + [
        2j * np.pi * (u * idx / g) + B.entries @ (v * idx / g)
        for u, v in ((0.29, 0.41), (0.173, 0.62), (0.52, 0.235))]
    for z0 in candidates:
        margin = math.log(1e-5)
        tz = theta(zero_char, z0, B)
        tr = theta(zero_char, z0 + r, B)
        if (tz.is_zero or tr.is_zero
                or tz.abs_log() - _theta_scale_log(surface, z0) < margin
                or tr.abs_log() - _theta_scale_log(surface, z0 + r) < margin):
            continue
        s0 = log_derivs(zero_char, z0, B, [ja.V, ja.W],
                        [(1,), (0, 0), (0,)])
        sr = log_derivs(zero_char, z0 + r, B, [ja.V, ja.W],
                        [(1,), (0, 0), (0,)])
        dp_rho = sr[0] - s0[0]
        daa_rho = sr[1] - s0[1]
        da_rho = sr[2] - s0[2]
        return -(dp_rho + daa_rho + (da_rho - K1) ** 2 + 2.0 * s0[1])
    raise FayError("no well-conditioned argument found for the K2 scalar")


# ---------------------------------------------------------------------------
# identity residuals


def _abel_or_zero(surface, a, x):
    if a.same_place(x):
        return np.zeros(surface.genus, dtype=complex)
    return surface.abel_between(a, x).r


def trisecant_residual(surface: SurfaceModel, a, b, c, d, z) -> float:
    """Normalized residual of the three-term trisecant identity.

    All Abel values are taken relative to the point a, so each marked
    point enters every term with one consistent lattice representative.
    """
    z = np.asarray(z, dtype=complex)
    B = surface.B
    ua = np.zeros(surface.genus, dtype=complex)
    ub = _abel_or_zero(surface, a, b)
    uc = _abel_or_zero(surface, a, c)
    ud = _abel_or_zero(surface, a, d)
    h = {id(p): _spinor(surface, p) for p in (a, b, c, d)}
    zero_char = HalfCharacteristic.zero(surface.genus)

    def E(px, ux, py, uy):
        return _prime_from_diff(surface, ux - uy, h[id(px)], h[id(py)])

    def T(w):
        return theta(zero_char, w, B)

    term1 = E(a, ua, b, ub) * E(c, uc, d, ud) \
        * T(z + ua - uc) * T(z + ud - ub)
    term2 = E(a, ua, c, uc) * E(d, ud, b, ub) \
        * T(z + ua - ub) * T(z + ud - uc)
    term3 = E(a, ua, d, ud) * E(c, uc, b, ub) \
        * T(z) * T(z + ua - uc + ud - ub)
    mags = [t.abs_log() for t in (term1, term2, term3)]
    top = max(mags)
    if top < math.log(1e-300):
        raise FayError("all trisecant terms below scale 1e-300: "
                       "degenerate argument z")
    resid = term1 + term2 - term3
    if resid.is_zero:
        return 0.0
    return math.exp(resid.abs_log() - top)


def new_identity_residual(surface: SurfaceModel, a, b, z,
                          scalars: FayScalars | None = None) -> float:
    """Normalized residual of the five-term second-order identity in the
    direction pair (V_a, W_a)."""
    z = np.asarray(z, dtype=complex)
    B = surface.B
    zero_char = HalfCharacteristic.zero(surface.genus)
    if scalars is None:
        scalars = fay_scalars(surface, a, b)
    r = scalars.contour.r
    ja = _jet(surface, a)

    for arg in (z, z + r):
        if _on_divisor(surface, theta(zero_char, arg, B), arg):
            raise FayError("z lies on the theta divisor (shifted by the "
                           "Abel increment); choose another sample")

    dp_zr, daa_zr, da_zr = log_derivs(zero_char, z + r, B, [ja.V, ja.W],
                                      [(1,), (0, 0), (0,)])
    dp_z, daa_z, da_z = log_derivs(zero_char, z, B, [ja.V, ja.W],
                                   [(1,), (0, 0), (0,)])
    t1 = dp_zr - dp_z
    t2 = daa_zr - daa_z
    t3 = (da_zr - da_z - scalars.K1) ** 2
    t4 = 2.0 * daa_z
    t5 = scalars.K2
    terms = (t1, t2, t3, t4, t5)
    top = max(abs(t) for t in terms)
    if top == 0.0:
        return 0.0
    return abs(sum(terms)) / top


def degenerate_identity_residual(surface: SurfaceModel, a, b, z,
                                 scalars: FayScalars | None = None) -> float:
    """Normalized residual of D_a D_b ln Theta(z) = q1 + q2 * ratio."""
    z = np.asarray(z, dtype=complex)
    B = surface.B
    zero_char = HalfCharacteristic.zero(surface.genus)
    if scalars is None:
        scalars = fay_scalars(surface, a, b)
    r = scalars.contour.r
    ja = _jet(surface, a)
    jb = _jet(surface, b)

    th_z = theta(zero_char, z, B)
    if _on_divisor(surface, th_z, z):
        raise FayError("z lies on the theta divisor; choose another sample")
    th_p = theta(zero_char, z + r, B)
    th_m = theta(zero_char, z - r, B)

    lhs = log_derivs(zero_char, z, B, [ja.V, jb.V], [(0, 1)])[0]
    ratio = (th_p * th_m / (th_z * th_z)).to_complex()
    quot = scalars.q2 * ratio
    terms = (lhs, scalars.q1, quot)
    top = max(abs(t) for t in terms)
    if top == 0.0:
        return 0.0
    return abs(lhs - scalars.q1 - quot) / top


# ---------------------------------------------------------------------------
# integral route to q2


def _param_value(p: MarkedPoint, dlam: complex) -> complex:
    """Value of the declared local parameter at base offset dlam."""
    if p.param_kind == "affine":
        return dlam
    if p.param_kind == "scaled":
        return p.beta * dlam + p.mu * dlam ** 2 + p.nu * dlam ** 3
    raise FayError("q2 integral oracle supports affine/scaled points only")


def _lattice_class(B, dv):
    """Integer (N, M) with dv = 2 i pi N + B M, dv known mod 2 i pi Z^g."""
    Mf = np.linalg.solve(B.entries.real, dv.real)
    M = np.rint(Mf)
    Nf = (dv.imag - B.entries.imag @ Mf) / (2.0 * math.pi)
    N = np.rint(Nf)
    res = float(max(np.max(np.abs(Mf - M)), np.max(np.abs(Nf - N))))
    if res > 1e-6:
        raise FayError("contour class is not a lattice vector "
                       "(defect %.3e)" % res)
    return N.astype(int), M.astype(int)


def q2_integral_oracle(surface: SurfaceModel, a: MarkedPoint,
                       b: MarkedPoint, shrink_steps: int,
                       via: complex | None = None) -> complex:
    """q2(a,b) via the third-kind differential with residues -1 at a, +1
    at b: the limit of -(k_a k_b)^{-1} exp{int Omega} over shrinking
    symmetric offsets, Richardson-extrapolated.

    The raw limit depends on the homology class of the contour.  The
    B-periods of Omega recover (by the bilinear relation) the Abel
    increment of a contour that crosses no basis cycle, which pins the
    class of the contour actually used and of the one abel_between
    reports; the value is translated to the latter class, so the oracle
    is contour-independent and directly comparable with the theta route.

    via: optional waypoint deforming the middle of the contour.
    """
    prov = surface.provider
    if not hasattr(prov, "third_kind"):
        raise FayError("surface provider cannot construct a third-kind "
                       "differential; the integral oracle is unsupported")
    if int(shrink_steps) < 3:
        raise FayError("shrinkSteps must be at least 3 for the three-point "
                       "extrapolation")
    for p in (a, b):
        _param_value(p, 0j)                  # reject sqrtBranch points
    eta = prov.third_kind(a, b)
    la, ya = a.base_coordinate, a.y
    lb, yb = b.base_coordinate, b.y
    sing = list(prov.singular)

    if via is None:
        path0 = prov._connect(la, ya, lb, yb)
    else:
        clearance = prov._clearance()
        path0 = detoured_path(la, complex(via), sing, clearance) \
            + detoured_path(complex(via), lb, sing, clearance)[1:]
        y_end = continue_along(prov.roots_at, path0, ya)
        if abs(y_end - yb) > 1e-6 * max(1.0, abs(yb)):
            raise FayError("deformed contour is not homotopic to the "
                           "reference contour (sheet mismatch)")
    u_a = (path0[1] - la) / abs(path0[1] - la)
    u_b = (path0[-2] - lb) / abs(path0[-2] - lb)

    def moderate_offset(lam, other, seg_len):
        d = min([abs(lam - s) for s in sing] + [abs(lam - other)])
        return min(0.1 * d, 0.5 * seg_len)

    h0a = moderate_offset(la, lb, abs(path0[1] - la))
    h0b = moderate_offset(lb, la, abs(path0[-2] - lb))
    a1 = la + h0a * u_a
    b1 = lb + h0b * u_b
    ya1 = continue_root(prov.roots_at, la, a1, ya)
    yb1 = continue_root(prov.roots_at, lb, b1, yb)

    # fixed middle leg a1 -> b1, independent of the shrinking offsets
    path = [a1] + list(path0[1:-1]) + [b1]
    mid, y_mid_end = integrate_polyline(
        prov.roots_at, lambda l, y: [eta(l, y)], path, ya1,
        prov.order, singular=sing + [la, lb])
    if abs(y_mid_end - yb1) > 1e-6 * max(1.0, abs(yb1)):
        raise FayError("middle contour lift did not land on the sheet of b")

    def inner_leg(lam0, y0, lam_t, pole, pole_sign, ordr):
        """int eta over [lam0 -> lam_t] with the simple pole at ``pole``
        subtracted analytically (pole_sign is the residue of eta there)."""
        f = lambda l, y: [eta(l, y) - pole_sign / (l - pole)]
        val, _ = integrate_polyline(prov.roots_at, f, [lam0, lam_t], y0,
                                    ordr, singular=sing)
        return val[0] + pole_sign * cmath.log((lam_t - pole) / (lam0 - pole))

    eps0 = min(1e-2, 0.25 * min(h0a, h0b))
    vals = []
    for j in range(int(shrink_steps)):
        eps = eps0 / 4.0 ** j
        at = la + eps * u_a
        bt = lb + eps * u_b
        yat = continue_root(prov.roots_at, la, at, ya)
        ybt = continue_root(prov.roots_at, lb, bt, yb)
        total = mid[0]
        total += inner_leg(at, yat, a1, la, -1.0, prov.order)
        total += inner_leg(b1, yb1, bt, lb, +1.0, prov.order)
        kva = _param_value(a, eps * u_a)
        kvb = _param_value(b, eps * u_b)
        vals.append(-cmath.exp(total - cmath.log(kva) - cmath.log(kvb)))

    diffs = [abs(vals[i + 1] - vals[i]) for i in range(len(vals) - 1)]
    scale = max(abs(v) for v in vals)
    for i in range(len(diffs) - 1):
        if diffs[i + 1] > 0.9 * diffs[i] and diffs[i + 1] > 1e-12 * scale:
            raise FayError("offset extrapolation is not contracting "
                           "(%.3e -> %.3e)" % (diffs[i], diffs[i + 1]))
    v1 = [(4.0 * vals[i + 1] - vals[i]) / 3.0 for i in range(len(vals) - 1)]
    v2 = [(16.0 * v1[i + 1] - v1[i]) / 15.0 for i in range(len(v1) - 1)]
    raw = v2[-1]

    # translate to the contour class reported by abel_between
    B = surface.B
    r0 = prov.b_periods(eta, avoid=(la, lb))  # bilinear relation: no-crossing r
    r_used, _ = integrate_polyline(prov.roots_at, prov.omega, path0, ya,
                                   prov.order, singular=sing)
    _, M_used = _lattice_class(B, r_used - r0)
    base = raw * cmath.exp(-complex(r0 @ M_used))
    r_fay = surface.abel_between(a, b).r
    _, M = _lattice_class(B, r_fay - r0)
    Mf = M.astype(float)
    return base * cmath.exp(complex((B.entries @ Mf) @ Mf + 2.0 * (r0 @ Mf)))


# ---------------------------------------------------------------------------
# residual reports


def residual_report(identity: str, surface: SurfaceModel, points,
                    residuals) -> dict:
    residuals = [float(x) for x in residuals]
    return {
        "identity": identity,
        "surfaceHash": surface.metadata["content_hash"],
        "points": [
            {"coordinate": [p.base_coordinate.real, p.base_coordinate.imag],
             "sheet": p.sheet, "paramKind": p.param_kind,
             "label": p.label}
            for p in points],
        "zSamples": len(residuals),
        "maxResidual": max(residuals) if residuals else 0.0,
        "meanResidual": (sum(residuals) / len(residuals)) if residuals
        else 0.0,
    }
