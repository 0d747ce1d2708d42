"""Theta-functional wave fields and their residual validation.

Every field here is a quotient form
    C * exp{linear phase} * Theta(z + u) / Theta(z),    z = Z - d,
with Z a linear flow in the spacetime variables.  Spacetime derivatives
are therefore directional theta derivatives through Z and all PDE
residuals are evaluated analytically (log-derivative cumulant stacks);
central finite differences act only as spot-check oracles at the
best-conditioned grid point.  Residuals are reported relative to the
field scale on the grid, and grid points on the theta divisor are
skipped and counted.
"""
from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, replace

import numpy as np

from .fay import FayError, fay_scalars, _on_divisor, _theta_scale_log
from .surfaces import MarkedPoint, SurfaceError, SurfaceModel, \
    infer_lattice_pair
from .theta import HalfCharacteristic, log_derivs, theta


class WaveError(ValueError):
    pass


# ---------------------------------------------------------------------------
# parameter bundles


@dataclass(frozen=True)
class DSParams:
    """Constants of the Davey-Stewartson quotient form."""

    kappa1: complex
    kappa2: complex
    A: complex
    h: complex
    d: np.ndarray
    alpha_kind: str = "DS1"          # DS1: alpha = i, DS2: alpha = 1

    def __post_init__(self):
        if self.kappa1 == 0 or self.kappa2 == 0 or self.A == 0:
            raise WaveError("kappa1, kappa2 and A must be nonzero")
        if self.alpha_kind not in ("DS1", "DS2"):
            raise WaveError("alphaKind must be DS1 or DS2")
        object.__setattr__(self, "d", np.asarray(self.d, dtype=complex))


@dataclass(frozen=True)
class NnlsParams:
    """Constants of the multi-component quotient form."""

    amplitudes: tuple
    d: np.ndarray
    z_a: complex
    theta_phase: float = 0.0

    def __post_init__(self):
        amps = tuple(complex(A) for A in self.amplitudes)
        if any(A == 0 for A in amps):
            raise WaveError("component amplitudes must be nonzero")
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "d", np.asarray(self.d, dtype=complex))


@dataclass(frozen=True)
class ResidualReport:
    max_abs: float
    rel_to_field_scale: float
    per_equation: tuple
    grid_spec: dict
    method: str
    field_scale: float = 0.0
    skipped: int = 0
    fd_max_rel: float | None = None

    def to_dict(self) -> dict:
        return {
            "maxAbs": self.max_abs,
            "relToFieldScale": self.rel_to_field_scale,
            "perEquation": [dict(e) for e in self.per_equation],
            "gridSpec": self.grid_spec,
            "method": self.method,
            "fieldScale": self.field_scale,
            "skipped": self.skipped,
            "fdMaxRel": self.fd_max_rel,
        }


# ---------------------------------------------------------------------------
# solution bundles


@dataclass(frozen=True)
class _Component:
    label: str
    amp: complex
    shift: np.ndarray            # theta-argument offset of the numerator
    phase: tuple                 # exp{sum_c phase[c] * coordinate_c}


class SolutionBundle:
    """Closures and frequency data of one constructed solution family.

    coords names the spacetime variables; dirs[i] is dZ/dcoords[i]; the
    theta arguments are z = Z - d.  Components are quotient forms; the
    auxiliary field phi (Davey-Stewartson only) is reconstructed from
    second log-derivatives and the constant h.
    """

    def __init__(self, kind, surface, coords, dirs, d, components, freq,
                 h=None, reality=None, params=None, scalars=None):
        self.kind = kind
        self.surface = surface
        self.coords = tuple(coords)
        self.dirs = tuple(np.asarray(v, dtype=complex) for v in dirs)
        self.d = np.asarray(d, dtype=complex)
        self.components = tuple(components)
        self.freq = dict(freq)
        self.h = h
        self.reality = reality
        self.scalars = tuple(scalars) if scalars else ()
        self.flow_vectors = {c: v for c, v in zip(self.coords, self.dirs)}
        self.provenance = {
            "surfaceHash": surface.metadata["content_hash"],
            "kind": kind,
            "params": params or {},
        }
        self._zero = HalfCharacteristic.zero(surface.genus)

    # -- geometry of the flow

    def z_of(self, vals):
        z = -self.d.copy()
        for v, e in zip(vals, self.dirs):
            z = z + complex(v) * e
        return z

    def on_divisor(self, vals, tol=1e-12) -> bool:
        z = self.z_of(vals)
        return _on_divisor(self.surface, theta(self._zero, z, self.surface.B),
                           z, tol)

    # -- field evaluation

    def _quotient(self, z, shift):
        B = self.surface.B
        num = theta(self._zero, z + shift, B)
        den = theta(self._zero, z, B)
        if den.is_zero or _on_divisor(self.surface, den, z):
            raise WaveError("field evaluated on the theta divisor")
        return (num / den).to_complex()

    def field(self, label, *vals):
        comp = self._comp(label)
        z = self.z_of(vals)
        ph = cmath.exp(sum(p * complex(v) for p, v in zip(comp.phase, vals)))
        return comp.amp * self._quotient(z, comp.shift) * ph

    def _comp(self, label) -> _Component:
        for c in self.components:
            if c.label == label:
                return c
        raise WaveError("no component %r in this bundle" % (label,))

    def closure(self, label):
        return lambda *vals: self.field(label, *vals)

    def phi_value(self, *vals):
        """(1/2)(ln Theta)_xi.xi + (1/2)(ln Theta)_eta.eta + h/4."""
        if self.kind not in ("ds",):
            raise WaveError("phi is defined for Davey-Stewartson bundles")
        z = self.z_of(vals)
        dxx, dee = log_derivs(self._zero, z, self.surface.B,
                              [self.dirs[0], self.dirs[1]],
                              [(0, 0), (1, 1)])
        return 0.5 * (dxx + dee) + 0.25 * self.h

    @property
    def psi(self):
        return self.closure(self.components[0].label)

    @property
    def psi_star(self):
        return self.closure(self.components[1].label)

    @property
    def phi(self):
        return lambda *vals: self.phi_value(*vals)

    def perturbed_g3(self, delta):
        """Copy with the t-frequency of psi/psi* shifted by +-delta/2
        (broken dispersion relation, detector sanity)."""
        t_idx = len(self.coords) - 1
        comps = []
        for c in self.components:
            sgn = 1.0 if not c.label.endswith("Star") else -1.0
            phase = list(c.phase)
            phase[t_idx] = phase[t_idx] + 0.5j * sgn * delta
            comps.append(replace(c, phase=tuple(phase)))
        out = SolutionBundle(self.kind, self.surface, self.coords, self.dirs,
                             self.d, comps, self.freq, h=self.h,
                             reality=self.reality,
                             params=self.provenance["params"],
                             scalars=self.scalars)
        return out


# ---------------------------------------------------------------------------
# grids


def flow_grid(bundle: SolutionBundle, shape=(5, 5, 5), cells=1.0) -> dict:
    """Real sampling grid sized so that Z traverses about ``cells``
    lattice cells along each coordinate."""
    B = bundle.surface.B.entries
    cell = min([2.0 * math.pi] + [float(np.linalg.norm(B[:, j]))
                                  for j in range(B.shape[1])])
    grid = {}
    for c, e, n in zip(bundle.coords, bundle.dirs, shape):
        speed = max(float(np.linalg.norm(e)), 1e-12)
        half = 0.5 * cells * cell / speed
        grid[c] = np.linspace(-half, half, int(n))
    return grid


def _grid_points(bundle, grid):
    axes = [np.asarray(grid[c]) for c in bundle.coords]
    return list(itertools.product(*axes))


def _grid_spec(bundle, grid):
    return {c: {"min": float(np.min(np.asarray(grid[c]).real)),
                "max": float(np.max(np.asarray(grid[c]).real)),
                "steps": int(len(grid[c]))}
            for c in bundle.coords}


# ---------------------------------------------------------------------------
# Davey-Stewartson construction


def _ds_bundle(surface, a, b, scal_ab, scal_ba, params: DSParams,
               reality=None) -> SolutionBundle:
    ja = surface.point_jet(a)
    jb = surface.point_jet(b)
    k1, k2 = complex(params.kappa1), complex(params.kappa2)
    e_xi = 1j * k1 * ja.V
    e_eta = -1j * k2 * jb.V
    e_t = 0.5j * (k1 * k1 * ja.W - k2 * k2 * jb.W)
    G1 = k1 * scal_ab.K1
    G2 = k2 * scal_ba.K1
    G3 = k1 * k1 * scal_ab.K2 + k2 * k2 * scal_ba.K2 + params.h
    r = scal_ab.contour.r
    A = complex(params.A)
    comps = [
        _Component("psi", A, r, (-1j * G1, -1j * G2, 0.5j * G3)),
        _Component("psiStar", -k1 * k2 * scal_ab.q2 / A, -r,
                   (1j * G1, 1j * G2, -0.5j * G3)),
    ]
    return SolutionBundle(
        "ds", surface, ("xi", "eta", "t"), (e_xi, e_eta, e_t), params.d,
        comps, {"G1": G1, "G2": G2, "G3": G3}, h=params.h, reality=reality,
        params={"kappa1": k1, "kappa2": k2, "A": A, "h": params.h,
                "alphaKind": params.alpha_kind},
        scalars=(scal_ab, scal_ba))


def ds_complex_solution(surface: SurfaceModel, a: MarkedPoint,
                        b: MarkedPoint, params: DSParams) -> SolutionBundle:
    """psi, psi*, phi solving the complexified Davey-Stewartson system."""
    scal_ab = fay_scalars(surface, a, b)
    scal_ba = fay_scalars(surface, b, a, contour=-scal_ab.contour.r)
    return _ds_bundle(surface, a, b, scal_ab, scal_ba, params)


def _ds_point_residuals(bundle, vals):
    """Per-equation residuals of the complexified system at one point,
    plus the participating field values; None when on the divisor."""
    surf = bundle.surface
    B = surf.B
    z = bundle.z_of(vals)
    zero = bundle._zero
    th_z = theta(zero, z, B)
    if th_z.is_zero or _on_divisor(surf, th_z, z):
        return None
    (psi_c, star_c) = bundle.components
    r = psi_c.shift
    dirs = list(bundle.dirs)
    ms_z = [(0,), (1,), (2,), (0, 0), (1, 1), (0, 0, 0, 1), (0, 1, 1, 1)]
    ms_s = [(0,), (1,), (2,), (0, 0), (1, 1)]
    sz = log_derivs(zero, z, B, dirs, ms_z)
    sp = log_derivs(zero, z + r, B, dirs, ms_s)
    sm = log_derivs(zero, z - r, B, dirs, ms_s)
    th_p = theta(zero, z + r, B)
    th_m = theta(zero, z - r, B)

    phase = [cmath.exp(sum(p * complex(v) for p, v in zip(c.phase, vals)))
             for c in (psi_c, star_c)]
    psi = psi_c.amp * (th_p / th_z).to_complex() * phase[0]
    star = star_c.amp * (th_m / th_z).to_complex() * phase[1]
    phi = 0.5 * (sz[3] + sz[4]) + 0.25 * bundle.h

    def quotient_part(comp, s_shift, sign_t):
        # residual of +-i f_t + (f_xixi + f_etaeta)/2 + 2 phi f, over f
        Lx = comp.phase[0] + s_shift[0] - sz[0]
        Le = comp.phase[1] + s_shift[1] - sz[1]
        Lt = comp.phase[2] + s_shift[2] - sz[2]
        dxx = s_shift[3] - sz[3]
        dee = s_shift[4] - sz[4]
        return (sign_t * 1j * Lt + 0.5 * (Lx * Lx + dxx + Le * Le + dee)
                + 2.0 * phi)

    eq1 = psi * quotient_part(psi_c, sp, +1.0)
    eq2 = star * quotient_part(star_c, sm, -1.0)

    # phi_xi.eta + ((psi psi*)_xixi + (psi psi*)_etaeta)/2
    pp = psi_c.amp * star_c.amp * (th_p * th_m / (th_z * th_z)).to_complex()
    Sx = sp[0] + sm[0] - 2.0 * sz[0]
    Se = sp[1] + sm[1] - 2.0 * sz[1]
    Sxx = sp[3] + sm[3] - 2.0 * sz[3]
    See = sp[4] + sm[4] - 2.0 * sz[4]
    phi_xe = 0.5 * (sz[5] + sz[6])
    eq3 = phi_xe + 0.5 * pp * ((Sx * Sx + Sxx) + (Se * Se + See))
    return {"eq": (eq1, eq2, eq3),
            "fields": (psi, star, phi),
            "extras": {"psi_t": psi * (psi_c.phase[2] + sp[2] - sz[2]),
                       "pp": pp}}


def _fd2(f, vals, i, step):
    up = list(vals)
    dn = list(vals)
    up[i] += step
    dn[i] -= step
    return (f(*up) - 2.0 * f(*vals) + f(*dn)) / step ** 2


def _fd1(f, vals, i, step):
    up = list(vals)
    dn = list(vals)
    up[i] += step
    dn[i] -= step
    return (f(*up) - f(*dn)) / (2.0 * step)


def _fd_mixed(f, vals, i, j, step):
    out = 0.0j
    for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        v = list(vals)
        v[i] += si * step
        v[j] += sj * step
        out += si * sj * f(*v)
    return out / (4.0 * step ** 2)


def _ds_fd_probe(bundle, vals, step=1e-4, tol=1e-5):
    """Compare the analytic derivative stacks entering the system
    residual against central finite differences at one probe point."""
    res = _ds_point_residuals(bundle, vals)
    if res is None:
        raise WaveError("finite-difference probe landed on the divisor")
    psi, star, phi = res["fields"]
    psi_f = bundle.psi
    phi_f = bundle.phi

    def pp_f(*v):
        return bundle.field("psi", *v) * bundle.field("psiStar", *v)

    eq1, eq2, eq3 = res["eq"]
    # reassemble eq1 and eq3 from finite differences of the closures
    fd_eq1 = (1j * _fd1(psi_f, vals, 2, step)
              + 0.5 * (_fd2(psi_f, vals, 0, step)
                       + _fd2(psi_f, vals, 1, step))
              + 2.0 * phi * psi)
    fd_eq3 = (_fd_mixed(phi_f, vals, 0, 1, step)
              + 0.5 * (_fd2(pp_f, vals, 0, step) + _fd2(pp_f, vals, 1, step)))
    scale = max(abs(psi), abs(star), abs(phi), 1e-30)
    worst = max(abs(fd_eq1 - eq1), abs(fd_eq3 - eq3)) / scale
    # the residuals themselves are ~0; also compare a raw derivative
    ana_t = res["extras"]["psi_t"]
    fd_t = _fd1(psi_f, vals, 2, step)
    worst = max(worst, abs(fd_t - ana_t) / max(abs(ana_t), scale))
    if worst > tol:
        raise WaveError("analytic/finite-difference mismatch %.3e at the "
                        "probe point" % worst)
    return float(worst)


def ds_system_residual(bundle: SolutionBundle, grid=None,
                       fd_check=True) -> ResidualReport:
    """Residuals of the three complexified Davey-Stewartson equations."""
    if bundle.kind != "ds":
        raise WaveError("expected a Davey-Stewartson bundle")
    if grid is None:
        grid = flow_grid(bundle, (3, 3, 3))
    pts = _grid_points(bundle, grid)
    names = ("evolutionPsi", "evolutionPsiStar", "potentialCoupling")
    eq_max = [0.0, 0.0, 0.0]
    scale = 0.0
    skipped = 0
    best = None
    for vals in pts:
        res = _ds_point_residuals(bundle, vals)
        if res is None:
            skipped += 1
            continue
        for i, e in enumerate(res["eq"]):
            eq_max[i] = max(eq_max[i], abs(e))
        mag = max(abs(f) for f in res["fields"])
        scale = max(scale, mag)
        if best is None or mag > best[0]:
            best = (mag, vals)
    if scale == 0.0:
        raise WaveError("all grid points skipped or fields vanish")
    fd_rel = _ds_fd_probe(bundle, best[1]) if fd_check else None
    max_abs = max(eq_max)
    return ResidualReport(
        max_abs=max_abs, rel_to_field_scale=max_abs / scale,
        per_equation=tuple({"name": n, "maxAbs": m}
                           for n, m in zip(names, eq_max)),
        grid_spec=_grid_spec(bundle, grid), method="analytic",
        field_scale=scale, skipped=skipped, fd_max_rel=fd_rel)


# ---------------------------------------------------------------------------
# reality mechanics


def _bil(x, M):
    return complex(np.asarray(x, dtype=complex) @ np.asarray(M, dtype=float))


def reality_deviation(bundle: SolutionBundle, sign: float, grid,
                      pairing: str, labels=None) -> float:
    """sup |f* - sign * conj(f)| / sup |f| over the grid.

    pairing "real": all coordinates real; "conjPair": the first two
    coordinates are (w, conj(w)) with w complex, the last is real.
    """
    if labels is None:
        labels = [(bundle.components[0].label, bundle.components[1].label)]
    if pairing == "real":
        pts = _grid_points(bundle, grid)
    elif pairing == "conjPair":
        pts = [(w, np.conj(w), t)
               for w in np.asarray(grid[bundle.coords[0]])
               for t in np.asarray(grid[bundle.coords[2]])]
    else:
        raise WaveError("unknown pairing %r" % (pairing,))
    worst = 0.0
    scale = 0.0
    for vals in pts:
        if bundle.on_divisor(vals):
            continue
        for base, star in labels:
            f = bundle.field(base, *vals)
            fs = bundle.field(star, *vals)
            worst = max(worst, abs(fs - sign * np.conj(f)))
            scale = max(scale, abs(f))
    if scale == 0.0:
        raise WaveError("field vanishes on the reality grid")
    return worst / scale


def ds1_real_solution(surface: SurfaceModel, a: MarkedPoint, b: MarkedPoint,
                      d_R, T, theta_phase=0.0, kappa1_tilde=1.0, kappa2=1.0,
                      h=0.0, rho=1, grid=None):
    """DS1 family: tau-fixed points, real d_R, integer T, rho = +-1.

    kappa1 is derived from the reality constraint; the reality deviation
    is verified on a real grid before returning.
    """
    if surface.real_structure is None:
        raise WaveError("DS1 construction needs a real structure")
    rho = int(rho)
    if rho not in (1, -1):
        raise WaveError("rho must be +-1")
    kt1 = float(kappa1_tilde)
    k2 = float(kappa2)
    if kt1 == 0.0 or k2 == 0.0:
        raise WaveError("kappa constants must be nonzero real")
    scal_ab = fay_scalars(surface, a, b)
    r = scal_ab.contour.r
    scal_ba = fay_scalars(surface, b, a, contour=-r)
    N, M, _ = infer_lattice_pair(surface, r, "fixedPoints")
    H = surface.real_structure.H
    d_R = np.asarray(d_R, dtype=float)
    T = np.asarray(T, dtype=int)
    d = d_R + 0.5j * math.pi * (np.diag(H) - 2.0 * T)
    Bm = surface.B.entries @ M.astype(float)
    expo = cmath.exp(0.5 * _bil(Bm, M) + _bil(r + d, M))
    kappa1 = -rho * kt1 * kt1 * k2 * scal_ab.q2 * expo
    if abs(kappa1.imag) > 1e-8 * abs(kappa1):
        raise WaveError(
            "derived kappa1 is not real (Im/|.| = %.3e): q2 times the "
            "lattice exponential must be real on a compatible basis"
            % (abs(kappa1.imag) / abs(kappa1)))
    kappa1 = kappa1.real
    amp = abs(kt1 * k2 * scal_ab.q2) * math.exp(float(d_R @ M))
    A = amp * cmath.exp(1j * float(theta_phase))
    params = DSParams(kappa1, k2, A, float(h), d, "DS1")
    reality = {"type": "DS1", "rho": rho, "N": N.tolist(), "M": M.tolist(),
               "dR": d_R.tolist(), "T": T.tolist(),
               "theta": float(theta_phase), "kappa1Tilde": kt1}
    bundle = _ds_bundle(surface, a, b, scal_ab, scal_ba, params,
                        reality=reality)
    if grid is None:
        grid = flow_grid(bundle, (5, 5, 5))
    dev = reality_deviation(bundle, rho, grid, "real")
    if dev > 1e-8:
        flipped = ds1_real_solution(surface, a, b, d_R, T, theta_phase,
                                    kappa1_tilde, kappa2, h, -rho, grid) \
            if _reality_ok(surface, a, b, d_R, T, theta_phase, kappa1_tilde,
                           kappa2, h, -rho, grid) else None
        if flipped is not None:
            raise WaveError(
                "requested rho=%+d violates the reality condition "
                "(deviation %.3e); the computed sign is %+d"
                % (rho, dev, -rho))
        raise WaveError("reality deviation %.3e exceeds 1e-8 for both "
                        "signs" % dev)
    bundle.reality["deviation"] = dev
    return bundle


def _reality_ok(surface, a, b, d_R, T, theta_phase, kt1, k2, rho, grid):
    try:
        ds1_real_solution(surface, a, b, d_R, T, theta_phase, kt1, k2,
                          0.0, rho, grid)
        return True
    except WaveError:
        return False


def ds2_real_solution(surface: SurfaceModel, a: MarkedPoint, b: MarkedPoint,
                      L, T, d_I, theta_phase=0.0, kappa1=1.0 + 0j, h=0.0,
                      grid=None):
    """DS2 family: tau-swapped points; returns (bundle, rho).

    rho is an output, fixed by the sign of q2 and the parity <N, L>.
    """
    if surface.real_structure is None:
        raise WaveError("DS2 construction needs a real structure")
    H = surface.real_structure.H
    L = np.asarray(L, dtype=int)
    T = np.asarray(T, dtype=int)
    chk = 2 * T + H @ L - np.diag(H)
    if np.any(chk != 0):
        raise WaveError("2T + HL != diag(H): incompatible (T, L) pair")
    k1 = complex(kappa1)
    if k1 == 0:
        raise WaveError("kappa1 must be nonzero")
    k2 = np.conj(k1)
    scal_ab = fay_scalars(surface, a, b)
    r = scal_ab.contour.r
    scal_ba = fay_scalars(surface, b, a, contour=-r)
    N, _, _ = infer_lattice_pair(surface, r, "swappedPoints")
    q2 = scal_ab.q2
    if abs(q2.imag) > 1e-8 * abs(q2):
        raise WaveError("q2 is not real (Im/|.| = %.3e): the points are "
                        "not swapped by the anti-involution with "
                        "compatible parameters" % (abs(q2.imag) / abs(q2)))
    rho = int(round(-math.copysign(1.0, q2.real)
                    * (-1.0) ** (int(N @ L) % 2)))
    d_I = np.asarray(d_I, dtype=float)
    d = 0.5 * surface.B.entries.real @ L.astype(float) + 1j * d_I
    amp = abs(k1) * math.sqrt(abs(q2)) * math.exp(-0.5 * float(r.real @ L))
    A = amp * cmath.exp(1j * float(theta_phase))
    params = DSParams(k1, k2, A, float(h), d, "DS2")
    reality = {"type": "DS2", "rho": rho, "N": N.tolist(), "L": L.tolist(),
               "T": T.tolist(), "dI": d_I.tolist(),
               "theta": float(theta_phase)}
    bundle = _ds_bundle(surface, a, b, scal_ab, scal_ba, params,
                        reality=reality)
    G1, G2, G3 = bundle.freq["G1"], bundle.freq["G2"], bundle.freq["G3"]
    gs = max(abs(G1), abs(G2), abs(G3), 1.0)
    if abs(np.conj(G1) - G2) > 1e-8 * gs:
        raise WaveError("conj(G1) != G2 (defect %.3e)" % abs(np.conj(G1) - G2))
    if abs(G3.imag) > 1e-9 * gs:
        raise WaveError("G3 is not real (Im = %.3e)" % G3.imag)
    if grid is None:
        grid = flow_grid(bundle, (5, 5, 5))
        # complex transverse samples for the conjugate-pair check
        w = grid[bundle.coords[0]]
        grid[bundle.coords[0]] = w + 0.37j * (w[::-1] if len(w) else w)
    dev = reality_deviation(bundle, rho, grid, "conjPair")
    if dev > 1e-8:
        raise WaveError("DS2 reality deviation %.3e exceeds 1e-8 for the "
                        "computed sign %+d" % (dev, rho))
    bundle.reality["deviation"] = dev
    return bundle, rho


# ---------------------------------------------------------------------------
# NLS reduction


def _sigma_partner(surface: SurfaceModel, a: MarkedPoint) -> MarkedPoint:
    """Point over the same base coordinate on the opposite sheet of a
    double cover, carrying the same declared local parameter."""
    prov = surface.provider
    if getattr(getattr(prov, "curve", None), "n_sheets", 0) != 2:
        raise WaveError("the two-sheet partner needs a double cover")
    roots = prov.roots_at(a.base_coordinate)
    j = int(np.argmin(np.abs(roots + a.y)))
    if abs(roots[j] + a.y) > 1e-8 * max(1.0, abs(a.y)):
        raise WaveError("no opposite-sheet partner found")
    return surface.point(a.base_coordinate, sheet=j, kind=a.param_kind,
                         beta=a.beta, mu=a.mu, nu=a.nu)


def nls_solution(surface: SurfaceModel, a: MarkedPoint, d_R=None, T=None,
                 theta_phase=0.0, h=0.0, grid=None):
    """Scalar NLS family from an involution-paired point pair.

    Returns (bundle, rho).  The partner b lies over the same base
    coordinate on the opposite sheet, so V_a + V_b = W_a + W_b = 0; the
    sign rho is an output of the reality constraint and is both the
    psi*-pairing sign and the coupling sign of the scalar equation
    (psi* carries the amplitude +q2/A, matching the multi-component
    convention).
    """
    if surface.real_structure is None:
        raise WaveError("NLS construction needs a real structure")
    b = _sigma_partner(surface, a)
    ja = surface.point_jet(a)
    jb = surface.point_jet(b)
    v_gate = float(np.linalg.norm(ja.V + jb.V) / np.linalg.norm(ja.V))
    w_gate = float(np.linalg.norm(ja.W + jb.W)
                   / max(np.linalg.norm(ja.W), 1e-30))
    if v_gate > 1e-9 or w_gate > 1e-9:
        raise WaveError("points are not involution-paired: "
                        "|V_a+V_b| rel %.3e, |W_a+W_b| rel %.3e"
                        % (v_gate, w_gate))
    g = surface.genus
    d_R = np.zeros(g) if d_R is None else np.asarray(d_R, dtype=float)
    T = np.zeros(g, dtype=int) if T is None else np.asarray(T, dtype=int)
    scal_ab = fay_scalars(surface, a, b)
    r = scal_ab.contour.r
    scal_ba = fay_scalars(surface, b, a, contour=-r)
    N, M, _ = infer_lattice_pair(surface, r, "fixedPoints")
    H = surface.real_structure.H
    d = d_R + 0.5j * math.pi * (np.diag(H) - 2.0 * T)
    Bm = surface.B.entries @ M.astype(float)
    val = scal_ab.q2 * cmath.exp(0.5 * _bil(Bm, M) + _bil(r + d, M))
    if abs(val.imag) > 1e-8 * abs(val):
        raise WaveError("reality constraint value is not real "
                        "(Im/|.| = %.3e)" % (abs(val.imag) / abs(val)))
    rho = int(math.copysign(1.0, val.real))
    amp = math.sqrt(abs(val))
    A = amp * cmath.exp(1j * float(theta_phase))
    q1 = scal_ab.q1
    if abs(q1.imag) > 1e-8 * max(abs(q1), 1.0):
        raise WaveError("q1 is not real; the frequency shift would not "
                        "preserve |psi|")
    G1 = scal_ab.K1
    G2 = scal_ba.K1
    G3 = scal_ab.K2 + scal_ba.K2 + h
    e_x = 0.5j * (ja.V - jb.V)
    e_t = 0.5j * (ja.W - jb.W)
    p_x = -0.5j * (G1 + G2)
    p_t = 1j * (0.5 * G3 - 2.0 * q1 - 0.5 * h)
    comps = [
        _Component("psi", A, r, (p_x, p_t)),
        _Component("psiStar", scal_ab.q2 / A, -r, (-p_x, -p_t)),
    ]
    reality = {"type": "NLS", "rho": rho, "N": N.tolist(), "M": M.tolist(),
               "q1": q1, "h": float(h), "vGate": v_gate, "wGate": w_gate}
    bundle = SolutionBundle(
        "nls", surface, ("x", "t"), (e_x, e_t), d, comps,
        {"E": (0.5 * (G1 + G2),), "F": (0.5 * G3 - 2.0 * q1 - 0.5 * h,),
         "G3": G3},
        h=float(h), reality=reality,
        params={"dR": d_R.tolist(), "T": T.tolist(),
                "theta": float(theta_phase), "h": float(h)},
        scalars=(scal_ab, scal_ba))
    if grid is None:
        grid = flow_grid(bundle, (7, 7))
    dev = reality_deviation(bundle, rho, grid, "real")
    if dev > 1e-8:
        raise WaveError("NLS reality deviation %.3e exceeds 1e-8" % dev)
    bundle.reality["deviation"] = dev
    return bundle, rho


def _schrodinger_point_residual(bundle, vals, coupling):
    """i f_t + f_xx + coupling(vals, fields) * f for every component of a
    two-coordinate bundle; returns (eqs, fields) or None on the divisor."""
    surf = bundle.surface
    B = surf.B
    zero = bundle._zero
    z = bundle.z_of(vals)
    th_z = theta(zero, z, B)
    if th_z.is_zero or _on_divisor(surf, th_z, z):
        return None
    dirs = list(bundle.dirs)
    sz = log_derivs(zero, z, B, dirs, [(0,), (1,), (0, 0)])
    fields = []
    stacks = []
    for comp in bundle.components:
        sh = log_derivs(zero, z + comp.shift, B, dirs,
                        [(0,), (1,), (0, 0)])
        th = theta(zero, z + comp.shift, B)
        ph = cmath.exp(sum(p * complex(v)
                           for p, v in zip(comp.phase, vals)))
        fields.append(comp.amp * (th / th_z).to_complex() * ph)
        stacks.append(sh)
    coup = coupling(vals, fields)
    eqs = []
    for comp, f, sh in zip(bundle.components, fields, stacks):
        sign_t = -1.0 if comp.label.endswith("Star") else 1.0
        Lx = comp.phase[0] + sh[0] - sz[0]
        Lt = comp.phase[1] + sh[1] - sz[1]
        dxx = sh[2] - sz[2]
        eqs.append(f * (sign_t * 1j * Lt + Lx * Lx + dxx + coup))
    return eqs, fields


def _schrodinger_residual_report(bundle, grid, coupling, names,
                                 fd_check=True):
    pts = _grid_points(bundle, grid)
    eq_max = [0.0] * len(names)
    scale = 0.0
    skipped = 0
    best = None
    for vals in pts:
        out = _schrodinger_point_residual(bundle, vals, coupling)
        if out is None:
            skipped += 1
            continue
        eqs, fields = out
        for i, e in enumerate(eqs):
            eq_max[i] = max(eq_max[i], abs(e))
        mag = max(abs(f) for f in fields)
        scale = max(scale, mag)
        if best is None or mag > best[0]:
            best = (mag, vals)
    if scale == 0.0:
        raise WaveError("all grid points skipped or fields vanish")
    fd_rel = None
    if fd_check:
        fd_rel = _schrodinger_fd_probe(bundle, best[1], coupling)
    max_abs = max(eq_max)
    return ResidualReport(
        max_abs=max_abs, rel_to_field_scale=max_abs / scale,
        per_equation=tuple({"name": n, "maxAbs": m}
                           for n, m in zip(names, eq_max)),
        grid_spec=_grid_spec(bundle, grid), method="analytic",
        field_scale=scale, skipped=skipped, fd_max_rel=fd_rel)


def _schrodinger_fd_probe(bundle, vals, coupling, step=1e-4, tol=1e-5):
    out = _schrodinger_point_residual(bundle, vals, coupling)
    if out is None:
        raise WaveError("finite-difference probe landed on the divisor")
    eqs, fields = out
    comp = bundle.components[0]
    f = bundle.closure(comp.label)
    coup = coupling(vals, fields)
    fd_eq = (1j * _fd1(f, vals, 1, step) + _fd2(f, vals, 0, step)
             + coup * fields[0])
    scale = max(max(abs(x) for x in fields), 1e-30)
    worst = abs(fd_eq - eqs[0]) / scale
    if worst > tol:
        raise WaveError("analytic/finite-difference mismatch %.3e at the "
                        "probe point" % worst)
    return float(worst)


def nls_residual(bundle: SolutionBundle, rho: int, grid=None,
                 fd_check=True) -> ResidualReport:
    """Residual of i psi_t + psi_xx + 2 rho |psi|^2 psi on a real grid."""
    if bundle.kind != "nls":
        raise WaveError("expected an NLS bundle")
    if grid is None:
        grid = flow_grid(bundle, (7, 7))

    def coupling(vals, fields):
        return 2.0 * rho * abs(fields[0]) ** 2

    return _schrodinger_residual_report(
        bundle, grid, coupling, ("evolutionPsi", "evolutionPsiStar"),
        fd_check)


def linear_potential_residual(surface: SurfaceModel, a: MarkedPoint,
                              b: MarkedPoint, d, A=1.0, grid=None,
                              fd_check=True) -> ResidualReport:
    """Residual of the linear Schrodinger equation
    i psi_t + psi_xx + 2 u psi = 0 for the single-pair quotient field
    with potential u = -D_a^2 ln Theta(Z - d)."""
    scal = fay_scalars(surface, a, b)
    ja = surface.point_jet(a)
    d = np.asarray(d, dtype=complex)
    comps = [_Component("psi", complex(A), scal.contour.r,
                        (-1j * scal.K1, 1j * scal.K2))]
    bundle = SolutionBundle(
        "linear", surface, ("x", "t"), (1j * ja.V, 1j * ja.W), d, comps,
        {"K1": scal.K1, "K2": scal.K2}, params={"A": complex(A)},
        scalars=(scal,))
    if grid is None:
        grid = flow_grid(bundle, (7, 7))

    zero = bundle._zero

    def coupling(vals, fields):
        z = bundle.z_of(vals)
        daa = log_derivs(zero, z, surface.B, [bundle.dirs[0]], [(0, 0)])[0]
        # dirs[0] = i V_a, so D_a^2 = -(d/dx)^2 direction stack
        u = daa            # equals -D_a^2 ln Theta(z)
        return 2.0 * u

    return _schrodinger_residual_report(bundle, grid, coupling,
                                        ("evolutionPsi",), fd_check)


# ---------------------------------------------------------------------------
# multi-component NLS


def nnls_complex_solution(surface: SurfaceModel, z_a, amplitudes, d,
                          theta_phase=0.0) -> SolutionBundle:
    """Component pairs over the fiber of a degree-(n+1) covering map."""
    fiber = surface.fiber_over(z_a)
    n = len(fiber) - 1
    if n < 1:
        raise WaveError("fiber must contain at least two points")
    amplitudes = tuple(complex(A) for A in amplitudes)
    if len(amplitudes) != n:
        raise WaveError("expected %d amplitudes, got %d"
                        % (n, len(amplitudes)))
    base = fiber[-1]
    jets = [surface.point_jet(p) for p in fiber]
    vsum = np.sum([j.V for j in jets], axis=0)
    vscale = max(float(np.linalg.norm(j.V)) for j in jets)
    gate = float(np.linalg.norm(vsum)) / vscale
    if gate > 1e-8:
        raise WaveError("fiber direction vectors do not cancel "
                        "(relative defect %.3e): the base value is too "
                        "close to a critical value or the fiber is "
                        "incomplete" % gate)
    scal = [fay_scalars(surface, base, fiber[j]) for j in range(n)]
    q1_sum = sum(s.q1 for s in scal)
    e_x = 1j * jets[-1].V
    e_t = 1j * jets[-1].W
    comps = []
    E, F = [], []
    ph = cmath.exp(1j * float(theta_phase))
    for j, s in enumerate(scal):
        Ej = s.K1
        Fj = s.K2 - 2.0 * q1_sum
        E.append(Ej)
        F.append(Fj)
        rj = s.contour.r
        Aj = amplitudes[j] * ph
        comps.append(_Component("psi%d" % (j + 1), Aj, rj,
                                (-1j * Ej, 1j * Fj)))
        comps.append(_Component("psi%dStar" % (j + 1), s.q2 / Aj, -rj,
                                (1j * Ej, -1j * Fj)))
    d = np.asarray(d, dtype=complex)
    return SolutionBundle(
        "nnls", surface, ("x", "t"), (e_x, e_t), d, comps,
        {"E": tuple(E), "F": tuple(F), "q1Sum": q1_sum,
         "vGate": gate},
        params={"zA": complex(z_a), "amplitudes": list(amplitudes),
                "theta": float(theta_phase)},
        scalars=scal)


def nnls_system_residual(bundle: SolutionBundle, grid=None,
                         fd_check=True) -> ResidualReport:
    """Residuals of all 2n coupled equations of the complexified
    multi-component system."""
    if bundle.kind != "nnls":
        raise WaveError("expected a multi-component bundle")
    if grid is None:
        grid = flow_grid(bundle, (4, 4))
    n = len(bundle.components) // 2
    q2s = [s.q2 for s in bundle.scalars]
    surf = bundle.surface
    zero = bundle._zero

    def coupling(vals, fields):
        # 2 sum_k psi_k psi*_k; products of the evaluated closures
        return 2.0 * sum(fields[2 * k] * fields[2 * k + 1]
                         for k in range(n))

    names = []
    for j in range(n):
        names.append("evolutionPsi%d" % (j + 1))
        names.append("evolutionPsi%dStar" % (j + 1))
    # reorder: _schrodinger_point_residual walks components in order
    report = _schrodinger_residual_report(bundle, grid, coupling,
                                          tuple(names), fd_check)
    del surf, zero, q2s
    return report


def nnls_real_solution(surface: SurfaceModel, z_a, d_R, T, theta_phase=0.0,
                       alphas=None, grid=None):
    """Real multi-component family over a fixed real fiber.

    Returns (bundle, signs): each sign s_j is measured from the reality
    deviation; when intersection indices alphas are supplied, the
    measured signs are cross-checked against the parity law.
    """
    if surface.real_structure is None:
        raise WaveError("real construction needs a real structure")
    fiber = surface.fiber_over(z_a)
    n = len(fiber) - 1
    g = surface.genus
    d_R = np.asarray(d_R, dtype=float)
    T = np.asarray(T, dtype=int)
    H = surface.real_structure.H
    d = d_R + 0.5j * math.pi * (np.diag(H) - 2.0 * T)
    base = fiber[-1]
    Ms = []
    amps = []
    for j in range(n):
        path = surface.abel_between(base, fiber[j])
        Nj, Mj, _ = infer_lattice_pair(surface, path.r, "fixedPoints")
        Ms.append(Mj)
        q2 = fay_scalars(surface, base, fiber[j]).q2
        amps.append(math.sqrt(abs(q2)) * math.exp(0.5 * float(d_R @ Mj)))
    bundle = nnls_complex_solution(surface, z_a, amps, d, theta_phase)
    if grid is None:
        grid = flow_grid(bundle, (5, 5))
    signs = []
    for j in range(n):
        labels = [("psi%d" % (j + 1), "psi%dStar" % (j + 1))]
        dev_p = reality_deviation(bundle, +1, grid, "real", labels)
        dev_m = reality_deviation(bundle, -1, grid, "real", labels)
        if dev_p <= 1e-8 and dev_m > 1e-8:
            signs.append(+1)
        elif dev_m <= 1e-8 and dev_p > 1e-8:
            signs.append(-1)
        else:
            raise WaveError(
                "component %d admits no reality sign (deviations "
                "%+.3e / %-.3e): the configuration violates the "
                "real-fiber hypotheses" % (j + 1, dev_p, dev_m))
    if alphas is not None:
        for j, alpha in enumerate(alphas):
            expected = (-1.0) ** (1 + int(alpha) + int(T @ Ms[j]))
            if int(expected) != signs[j]:
                raise WaveError(
                    "component %d: measured sign %+d disagrees with the "
                    "intersection-parity law value %+d"
                    % (j + 1, signs[j], int(expected)))
    bundle.reality = {"type": "nNLS", "signs": signs,
                      "M": [m.tolist() for m in Ms],
                      "dR": d_R.tolist(), "T": T.tolist(),
                      "theta": float(theta_phase)}
    return bundle, signs


def nnls_real_residual(bundle: SolutionBundle, signs, grid=None,
                       fd_check=True) -> ResidualReport:
    """Residual of the real multi-component system with the coupling
    2 sum_k s_k |psi_k|^2."""
    if grid is None:
        grid = flow_grid(bundle, (4, 4))
    n = len(bundle.components) // 2

    def coupling(vals, fields):
        return 2.0 * sum(signs[k] * abs(fields[2 * k]) ** 2
                         for k in range(n))

    names = []
    for j in range(n):
        names.append("evolutionPsi%d" % (j + 1))
        names.append("evolutionPsi%dStar" % (j + 1))
    return _schrodinger_residual_report(bundle, grid, coupling,
                                        tuple(names), fd_check)


# ---------------------------------------------------------------------------
# stationarity and smoothness


def stationary_check(surface: SurfaceModel, a: MarkedPoint,
                     b: MarkedPoint, d, A=1.0, grid=None) -> ResidualReport:
    """Verify the vanishing-flow mechanism at a square-root parameter.

    Gate 1: the second jet vector W_a vanishes relative to V_a.
    Gate 2: |psi| of the single-pair quotient field is t-independent.
    """
    if a.param_kind != "sqrtBranch":
        raise WaveError("stationary point must carry a sqrtBranch "
                        "parameter")
    ja = surface.point_jet(a)
    w_rel = float(np.linalg.norm(ja.W) / np.linalg.norm(ja.V))
    if w_rel > 1e-8:
        raise WaveError("W_a does not vanish (relative norm %.3e): the "
                        "marked point is not a critical point of the "
                        "degree-two map" % w_rel)
    scal = fay_scalars(surface, a, b)
    d = np.asarray(d, dtype=complex)
    comps = [_Component("psi", complex(A), scal.contour.r,
                        (-1j * scal.K1, 1j * scal.K2))]
    bundle = SolutionBundle(
        "linear", surface, ("x", "t"), (1j * ja.V, 1j * ja.W), d, comps,
        {"K1": scal.K1, "K2": scal.K2}, params={"A": complex(A)},
        scalars=(scal,))
    if grid is None:
        grid = flow_grid(bundle, (9, 5))
        # the vanishing flow makes the lattice-cell span along t
        # unbounded; cover the same span as x instead
        span = float(np.max(np.abs(grid["x"])))
        grid["t"] = np.linspace(-span, span, 5)
    xs = np.asarray(grid["x"])
    ts = np.asarray(grid["t"])
    psi = bundle.psi
    variation = 0.0
    scale = 0.0
    for x in xs:
        mods = [abs(psi(x, t)) for t in ts]
        variation = max(variation, max(mods) - min(mods))
        scale = max(scale, max(mods))
    rel = variation / scale
    per = ({"name": "wGate", "maxAbs": w_rel},
           {"name": "timeInvariance", "maxAbs": variation})
    return ResidualReport(
        max_abs=variation, rel_to_field_scale=rel, per_equation=per,
        grid_spec=_grid_spec(bundle, grid), method="analytic",
        field_scale=scale)


def smoothness_scan(bundle: SolutionBundle, grid=None) -> dict:
    """Log-scale-aware minimum of |Theta(Z - d)| over the grid.

    divisorHits counts points whose magnitude falls below 1e-10 of the
    grid median."""
    if grid is None:
        grid = flow_grid(bundle, (7,) * len(bundle.coords))
    logs = []
    for vals in _grid_points(bundle, grid):
        z = bundle.z_of(vals)
        v = theta(bundle._zero, z, bundle.surface.B)
        logs.append(-math.inf if v.is_zero else v.abs_log())
    logs = np.asarray(logs)
    median = float(np.median(logs))
    hits = int(np.sum(logs < median + math.log(1e-10)))
    min_log = float(np.min(logs))
    return {
        "minAbsTheta": math.exp(min_log) if min_log > -700 else 0.0,
        "divisorHits": hits,
        "minAbsLogTheta": min_log,
        "medianAbsLogTheta": median,
        "gridPoints": int(len(logs)),
    }


# ---------------------------------------------------------------------------
# local-parameter covariance


def ds_covariance_deviation(surface: SurfaceModel, a: MarkedPoint,
                            b: MarkedPoint, params: DSParams, beta,
                            mu1, mu2, grid=None) -> float:
    """Pointwise deviation between the solution family built from the
    rescaled local parameters and the transformed original fields."""
    beta = complex(beta)
    mu1 = complex(mu1)
    mu2 = complex(mu2)
    base = ds_complex_solution(surface, a, b, params)
    a2 = surface.point(a.base_coordinate, sheet=a.sheet, kind="scaled",
                       beta=beta, mu=mu1)
    b2 = surface.point(b.base_coordinate, sheet=b.sheet, kind="scaled",
                       beta=beta, mu=mu2)
    scaled = ds_complex_solution(surface, a2, b2, params)
    l1 = params.kappa1 * mu1 / beta
    l2 = params.kappa2 * mu2 / beta
    alpha = params.h * (1.0 - beta * beta)
    if grid is None:
        grid = flow_grid(scaled, (3, 3, 3))
    worst = 0.0
    scale = 0.0
    for xi, eta, t in _grid_points(base, grid):
        args = (beta * xi + beta * l1 * t, beta * eta + beta * l2 * t,
                beta * beta * t)
        ph = cmath.exp(-1j * (l1 * xi + l2 * eta
                              + 0.5 * (l1 * l1 + l2 * l2 - alpha) * t))
        lhs = base.field("psi", xi, eta, t)
        rhs = scaled.field("psi", *args) * ph
        worst = max(worst, abs(lhs - rhs))
        lhs_s = base.field("psiStar", xi, eta, t)
        rhs_s = beta * beta * scaled.field("psiStar", *args) / ph
        worst = max(worst, abs(lhs_s - rhs_s))
        lhs_p = base.phi_value(xi, eta, t)
        rhs_p = beta * beta * scaled.phi_value(*args) + 0.25 * alpha
        worst = max(worst, abs(lhs_p - rhs_p))
        scale = max(scale, abs(lhs), abs(lhs_s), abs(lhs_p))
    return worst / scale


def nnls_covariance_deviation(surface: SurfaceModel, z_a, amplitudes, d,
                              beta, mu, grid=None) -> float:
    """Same check for the multi-component family under a common
    rescaling of all fiber parameters."""
    beta = complex(beta)
    mu = complex(mu)
    base = nnls_complex_solution(surface, z_a, amplitudes, d)
    fiber = surface.fiber_over(z_a)
    scaled_pts = [surface.point(p.base_coordinate, sheet=p.sheet,
                                kind="scaled", beta=beta, mu=mu)
                  for p in fiber]
    scaled = _nnls_from_points(surface, scaled_pts, amplitudes, d)
    lam = mu / beta
    if grid is None:
        grid = flow_grid(scaled, (4, 4))
    n = len(fiber) - 1
    worst = 0.0
    scale = 0.0
    for x, t in _grid_points(base, grid):
        args = (beta * x + 2.0 * beta * lam * t, beta * beta * t)
        ph = cmath.exp(-1j * (lam * x + lam * lam * t))
        for j in range(1, n + 1):
            lhs = base.field("psi%d" % j, x, t)
            rhs = scaled.field("psi%d" % j, *args) * ph
            worst = max(worst, abs(lhs - rhs))
            lhs_s = base.field("psi%dStar" % j, x, t)
            rhs_s = beta * beta * scaled.field("psi%dStar" % j, *args) / ph
            worst = max(worst, abs(lhs_s - rhs_s))
            scale = max(scale, abs(lhs), abs(lhs_s))
    return worst / scale


def _nnls_from_points(surface, fiber, amplitudes, d, theta_phase=0.0):
    """nnls bundle from explicit fiber points (shared by the covariance
    check, which rescales the declared parameters)."""
    n = len(fiber) - 1
    base = fiber[-1]
    jets = [surface.point_jet(p) for p in fiber]
    scal = [fay_scalars(surface, base, fiber[j]) for j in range(n)]
    q1_sum = sum(s.q1 for s in scal)
    comps = []
    E, F = [], []
    ph = cmath.exp(1j * float(theta_phase))
    for j, s in enumerate(scal):
        Ej, Fj = s.K1, s.K2 - 2.0 * q1_sum
        E.append(Ej)
        F.append(Fj)
        Aj = complex(amplitudes[j]) * ph
        comps.append(_Component("psi%d" % (j + 1), Aj, s.contour.r,
                                (-1j * Ej, 1j * Fj)))
        comps.append(_Component("psi%dStar" % (j + 1), s.q2 / Aj,
                                -s.contour.r, (1j * Ej, -1j * Fj)))
    return SolutionBundle(
        "nnls", surface, ("x", "t"), (1j * jets[-1].V, 1j * jets[-1].W),
        np.asarray(d, dtype=complex), comps,
        {"E": tuple(E), "F": tuple(F), "q1Sum": q1_sum},
        params={"amplitudes": [complex(A) for A in amplitudes]},
        scalars=scal)
