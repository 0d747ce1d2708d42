"""Riemann theta functions with half-integer characteristics.

Evaluates

    Theta[delta](z | B) = sum_m exp{ 1/2 <B(m+d'), m+d'> + <m+d', z + 2 i pi d''> }

for a symmetric B with negative-definite real part, together with
directional-derivative lattice sums (each summand multiplied by
prod_k <m+d', v_k>) and logarithmic directional derivatives of
arbitrary order (via the moment/cumulant expansion over set
partitions).

Large arguments are reduced modulo the period lattice
2 i pi Z^g + B Z^g before summation and the quasi-periodicity factor is
folded into the ScaledComplex log scale, so values along unbounded
linear flows stay representable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .scaled import ScaledComplex

TWO_PI = 2.0 * math.pi

DEFAULT_TOL = 1e-12
FIELD_TOL = 1e-10


class ThetaArgumentError(ValueError):
    pass


class RiemannMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class HalfCharacteristic:
    """Half-integer characteristic delta = [d' d''], entries in {0, 1/2}."""

    delta_prime: tuple
    delta_double_prime: tuple

    @staticmethod
    def zero(g: int) -> "HalfCharacteristic":
        return HalfCharacteristic((0.0,) * g, (0.0,) * g)

    @staticmethod
    def of(dp: Sequence[float], dpp: Sequence[float]) -> "HalfCharacteristic":
        def norm(v):
            out = []
            for x in v:
                if abs(x) < 1e-14:
                    out.append(0.0)
                elif abs(x - 0.5) < 1e-14:
                    out.append(0.5)
                else:
                    raise ThetaArgumentError(
                        "characteristic entries must be 0 or 1/2, got %r" % (x,))
            return tuple(out)
        return HalfCharacteristic(norm(dp), norm(dpp))

    @property
    def genus(self) -> int:
        return len(self.delta_prime)

    def parity(self) -> int:
        """0 for even, 1 for odd: parity of 4<d', d''>."""
        s = 4.0 * sum(a * b for a, b in
                      zip(self.delta_prime, self.delta_double_prime))
        return int(round(s)) % 2

    @property
    def is_zero(self) -> bool:
        return all(x == 0.0 for x in self.delta_prime) and \
            all(x == 0.0 for x in self.delta_double_prime)


class RiemannMatrix:
    """g x g symmetric complex matrix with negative-definite real part."""

    def __init__(self, entries):
        B = np.asarray(entries, dtype=complex)
        if B.ndim != 2 or B.shape[0] != B.shape[1]:
            raise RiemannMatrixError("period matrix must be square")
        scale = np.max(np.abs(B))
        if scale == 0.0:
            raise RiemannMatrixError("zero period matrix")
        asym = np.max(np.abs(B - B.T))
        if asym > 1e-12 * scale:
            raise RiemannMatrixError(
                "period matrix not symmetric: max asymmetry %.3e" % asym)
        B = 0.5 * (B + B.T)
        eig = np.linalg.eigvalsh(B.real)
        if np.max(eig) >= 0.0:
            raise RiemannMatrixError(
                "Re(B) must be negative definite; eigenvalues %s" % eig)
        self.entries = B
        self.genus = B.shape[0]
        # Cholesky factor of -Re(B): -Re(B) = L L^T
        self._chol = np.linalg.cholesky(-B.real)
        self._chol_T = self._chol.T
        self._chol_T_inv = np.linalg.inv(self._chol_T)
        self._re_inv = np.linalg.inv(B.real)
        self._box_cache: dict = {}

    def __repr__(self):
        return "RiemannMatrix(genus=%d)" % self.genus

    def lattice_vector(self, N, M):
        N = np.asarray(N, dtype=float)
        M = np.asarray(M, dtype=float)
        return TWO_PI * 1j * N + self.entries @ M

    def reduce_argument(self, z):
        """Split z = z0 + 2 i pi N + B M with N, M integer and z0 small.

        Returns (z0, N, M).
        """
        z = np.asarray(z, dtype=complex)
        y1 = self._re_inv @ z.real
        M = np.rint(y1)
        y2 = (z.imag - self.entries.imag @ y1) / TWO_PI
        N = np.rint(y2)
        z0 = z - TWO_PI * 1j * N - self.entries @ M
        return z0, N.astype(int), M.astype(int)

    def _integer_box(self, bounds):
        key = tuple(bounds)
        cached = self._box_cache.get(key)
        if cached is None:
            axes = [np.arange(-b, b + 1) for b in bounds]
            grid = np.meshgrid(*axes, indexing="ij")
            cached = np.stack([a.ravel() for a in grid], axis=-1).astype(float)
            self._box_cache[key] = cached
        return cached


@dataclass(frozen=True)
class DerivativeSpec:
    """Ordered directions for a directional-derivative stack."""

    directions: tuple

    @staticmethod
    def of(dirs) -> "DerivativeSpec":
        return DerivativeSpec(tuple(tuple(complex(x) for x in v) for v in dirs))

    @property
    def order(self) -> int:
        return len(self.directions)


@dataclass(frozen=True)
class LatticeBound:
    """Ellipsoid |L^T n| <= radius plus its enclosing integer box."""

    radius: float
    box: tuple

    def contains(self, other: "LatticeBound") -> bool:
        return self.radius >= other.radius and all(
            a >= b for a, b in zip(self.box, other.box))


def _check_tol(tol):
    if not (0.0 < tol <= 1e-4):
        raise ThetaArgumentError("tol must lie in (0, 1e-4], got %r" % tol)


def truncation_radius(B: RiemannMatrix, tol: float, deriv_order: int = 0,
                      center_shift: float = 0.0) -> LatticeBound:
    """Ellipsoidal truncation bound for the theta lattice sum.

    The bound is computed in the metric of the Cholesky factor L of
    -Re(B): summands at |L^T n| > radius, including polynomial
    derivative factors up to ``deriv_order``, total below tol relative
    to the largest retained summand.
    """
    _check_tol(tol)
    if deriv_order < 0:
        raise ThetaArgumentError("deriv_order must be >= 0")
    g = B.genus
    # center offset: the peak summand sits within |L^T frac| of the origin
    r0 = center_shift + 0.5 * float(np.sum(np.abs(B._chol_T)))
    q = deriv_order + g + 1
    R = 3.0
    target = math.log(1.0 / tol)
    for _ in range(40):
        R_new = math.sqrt(2.0 * (target + q * math.log(1.0 + R) + 3.0))
        if abs(R_new - R) < 1e-12:
            R = R_new
            break
        R = R_new
    R += r0
    col_norms = np.linalg.norm(B._chol_T_inv, axis=1)
    box = tuple(int(math.ceil(R * c + 1.0)) for c in col_norms)
    return LatticeBound(R, box)


def _raw_sums(B: RiemannMatrix, char: HalfCharacteristic, z0, frac,
              specs, tol, deriv_order):
    """Lattice sums at the reduced argument for a batch of direction stacks.

    specs: list of tuples of direction vectors (numpy arrays).
    Returns list of ScaledComplex.
    """
    g = B.genus
    bound = truncation_radius(B, tol, deriv_order,
                              center_shift=float(np.linalg.norm(B._chol_T @ frac)))
    m = B._integer_box(bound.box)
    dp = np.asarray(char.delta_prime, dtype=float)
    dpp = np.asarray(char.delta_double_prime, dtype=float)
    n = m + dp
    u = (n + frac) @ B._chol
    keep = np.einsum("ij,ij->i", u, u) <= bound.radius ** 2
    n = n[keep]
    w = z0 + TWO_PI * 1j * dpp
    exps = 0.5 * np.einsum("ij,jk,ik->i", n, B.entries, n) + n @ w
    order = np.argsort(exps.real, kind="stable")
    n = n[order]
    exps = exps[order]
    emax = exps.real[-1] if len(exps) else 0.0
    weights = np.exp(exps - emax)
    out = []
    for spec in specs:
        f = weights
        for v in spec:
            f = f * (n @ np.asarray(v, dtype=complex))
        out.append(ScaledComplex(complex(np.sum(f)), emax).normalized())
    return out


def theta_batch(char: HalfCharacteristic, z, B: RiemannMatrix,
                specs, tol: float = DEFAULT_TOL):
    """Evaluate theta and derivative stacks sharing one lattice enumeration.

    specs is a list of tuples of g-vectors (possibly empty tuples for a
    plain evaluation).  Arguments are reduced modulo the lattice; the
    quasi-periodicity factor is exact, so derivatives pick up the
    product-rule terms in the integer vector M.
    """
    _check_tol(tol)
    z = np.asarray(z, dtype=complex)
    if z.shape != (B.genus,):
        raise ThetaArgumentError("argument dimension %s does not match genus %d"
                                 % (z.shape, B.genus))
    if char.genus != B.genus:
        raise ThetaArgumentError("characteristic genus mismatch")
    specs = [tuple(np.asarray(v, dtype=complex) for v in s) for s in specs]
    max_order = max((len(s) for s in specs), default=0)
    z0, N, M = B.reduce_argument(z)
    frac = B._re_inv @ z0.real

    reduced = bool(np.any(N) or np.any(M))
    if not reduced:
        return _raw_sums(B, char, z0, frac, specs, tol, max_order)

    # Theta(z) = F(z) * Theta(z0),
    # F(z) = exp{ -1/2<BM,M> - <z0,M> + 2 i pi (<d',N> - <d'',M>) },
    # D_v F = -<v, M> F; product rule over subsets of each stack.
    dp = np.asarray(char.delta_prime, dtype=float)
    dpp = np.asarray(char.delta_double_prime, dtype=float)
    Mf = M.astype(float)
    log_f = (-0.5 * (B.entries @ Mf) @ Mf - z0 @ Mf
             + TWO_PI * 1j * (dp @ N - dpp @ Mf))

    # gather raw sub-stacks needed (dedupe by position mask per spec)
    sub_specs = []
    sub_index = {}
    plans = []
    for spec in specs:
        k = len(spec)
        plan = []
        for mask in range(1 << k):
            kept = tuple(i for i in range(k) if mask >> i & 1)
            coeff = 1.0 + 0j
            for i in range(k):
                if not (mask >> i & 1):
                    coeff *= -(spec[i] @ Mf)
            if coeff == 0:
                continue
            key = (id(spec), kept) if False else None
            sub = tuple(spec[i] for i in kept)
            skey = tuple(tuple(v) for v in sub)
            if skey not in sub_index:
                sub_index[skey] = len(sub_specs)
                sub_specs.append(sub)
            plan.append((sub_index[skey], coeff))
        plans.append(plan)
    raw = _raw_sums(B, char, z0, frac, sub_specs, tol, max_order)
    out = []
    for plan in plans:
        acc = ScaledComplex(0j)
        for idx, coeff in plan:
            acc = acc + raw[idx] * coeff
        out.append(acc.scaled_by_exp(log_f))
    return out


def theta(char: HalfCharacteristic, z, B: RiemannMatrix,
          tol: float = DEFAULT_TOL) -> ScaledComplex:
    return theta_batch(char, z, B, [()], tol)[0]


def theta_deriv(spec: DerivativeSpec, char: HalfCharacteristic, z,
                B: RiemannMatrix, tol: float = DEFAULT_TOL) -> ScaledComplex:
    dirs = tuple(np.asarray(v, dtype=complex) for v in spec.directions)
    for v in dirs:
        if v.shape != (B.genus,):
            raise ThetaArgumentError("direction dimension mismatch")
    return theta_batch(char, z, B, [dirs], tol)[0]


def quasi_periodicity_residual(z, N, M, B: RiemannMatrix,
                               char: HalfCharacteristic | None = None,
                               tol: float = 1e-13) -> float:
    """Relative deviation in the lattice-shift law for theta."""
    if char is None:
        char = HalfCharacteristic.zero(B.genus)
    z = np.asarray(z, dtype=complex)
    N = np.asarray(N, dtype=int)
    M = np.asarray(M, dtype=int)
    shifted = theta(char, z + B.lattice_vector(N, M), B, tol)
    base = theta(char, z, B, tol)
    dp = np.asarray(char.delta_prime, dtype=float)
    dpp = np.asarray(char.delta_double_prime, dtype=float)
    Mf = M.astype(float)
    log_f = (-0.5 * (B.entries @ Mf) @ Mf - z @ Mf
             + TWO_PI * 1j * (dp @ N - dpp @ Mf))
    rhs = base.scaled_by_exp(log_f)
    diff = shifted - rhs
    if rhs.is_zero:
        return 0.0 if diff.is_zero else float("inf")
    return math.exp(diff.abs_log() - rhs.abs_log()) if not diff.is_zero else 0.0


# ---------------------------------------------------------------------------
# logarithmic directional derivatives via moments -> cumulants


@lru_cache(maxsize=None)
def set_partitions(n: int):
    """All partitions of {0,..,n-1} as tuples of sorted tuples."""
    if n == 0:
        return ((),)
    result = []
    for part in set_partitions(n - 1):
        elem = n - 1
        result.append(part + ((elem,),))
        for i, block in enumerate(part):
            result.append(part[:i] + (block + (elem,),) + part[i + 1:])
    return tuple(result)


def log_derivs(char: HalfCharacteristic, z, B: RiemannMatrix,
               dirs, multisets, tol: float = DEFAULT_TOL):
    """Cumulants (directional log-derivatives) of ln Theta[delta] at z.

    dirs: list of g-vectors; multisets: list of tuples of indices into
    dirs, one per requested derivative stack (e.g. (0,0,1) means
    D_0 D_0 D_1 ln Theta).  A single lattice enumeration serves all the
    needed moment sub-stacks.  Returns a list of complex values; the
    empty multiset yields ln-scale-free 0 and is not allowed.
    """
    dirs = [np.asarray(v, dtype=complex) for v in dirs]
    needed = {(): ()}
    for ms in multisets:
        k = len(ms)
        for mask in range(1, 1 << k):
            key = tuple(sorted(ms[i] for i in range(k) if mask >> i & 1))
            needed.setdefault(key, key)
    keys = sorted(needed, key=lambda t: (len(t), t))
    specs = [tuple(dirs[i] for i in key) for key in keys]
    vals = theta_batch(char, z, B, specs, tol)
    base = vals[keys.index(())]
    if base.is_zero:
        raise ThetaArgumentError("theta vanishes at the requested argument")
    moments = {key: vals[i].ratio_to(base) for i, key in enumerate(keys)}

    out = []
    for ms in multisets:
        k = len(ms)
        if k == 0:
            raise ThetaArgumentError("empty derivative multiset")
        acc = 0j
        for part in set_partitions(k):
            nb = len(part)
            term = (-1.0) ** (nb - 1) * math.factorial(nb - 1)
            prod = 1.0 + 0j
            for block in part:
                key = tuple(sorted(ms[i] for i in block))
                prod *= moments[key]
            acc += term * prod
        out.append(acc)
    return out


def log_deriv(char: HalfCharacteristic, z, B: RiemannMatrix, dirs,
              tol: float = DEFAULT_TOL) -> complex:
    """Single directional log-derivative D_{v1}..D_{vk} ln Theta[delta](z)."""
    return log_derivs(char, z, B, dirs, [tuple(range(len(dirs)))], tol)[0]
