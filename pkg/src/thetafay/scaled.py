"""Overflow-safe complex scalars.

Theta values along the linear flows Z(x,t) grow like exp(quadratic), so
raw complex doubles overflow long before the interesting regime.  A
``ScaledComplex`` keeps value = mantissa * exp(logScale) with the
mantissa renormalized into [0.5, 2] in modulus.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ScaledComplex:
    """value = mantissa * exp(logScale), |mantissa| in [0.5, 2] if nonzero."""

    mantissa: complex
    logScale: float = 0.0

    @staticmethod
    def of(value: complex) -> "ScaledComplex":
        return ScaledComplex(complex(value), 0.0).normalized()

    def normalized(self) -> "ScaledComplex":
        a = abs(self.mantissa)
        if a == 0.0:
            return ScaledComplex(0j, 0.0)
        if 0.5 <= a <= 2.0:
            return self
        s = math.log(a)
        return ScaledComplex(self.mantissa / a, self.logScale + s)

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0

    def to_complex(self) -> complex:
        if self.is_zero:
            return 0j
        return self.mantissa * cmath.exp(self.logScale)

    def abs_log(self) -> float:
        # log of the modulus; -inf for zero
        if self.is_zero:
            return float("-inf")
        return math.log(abs(self.mantissa)) + self.logScale

    def __mul__(self, other):
        if isinstance(other, ScaledComplex):
            return ScaledComplex(self.mantissa * other.mantissa,
                                 self.logScale + other.logScale).normalized()
        return ScaledComplex(self.mantissa * other, self.logScale).normalized()

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, ScaledComplex):
            if other.is_zero:
                raise ZeroDivisionError("ScaledComplex division by zero")
            return ScaledComplex(self.mantissa / other.mantissa,
                                 self.logScale - other.logScale).normalized()
        return ScaledComplex(self.mantissa / other, self.logScale).normalized()

    def __neg__(self):
        return ScaledComplex(-self.mantissa, self.logScale)

    def __add__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.of(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        # align onto the larger scale to avoid overflow of the summands
        if self.logScale >= other.logScale:
            big, small = self, other
        else:
            big, small = other, self
        shift = small.logScale - big.logScale
        m = big.mantissa + small.mantissa * math.exp(shift) if shift > -745 \
            else big.mantissa
        return ScaledComplex(m, big.logScale).normalized()

    def __sub__(self, other):
        if not isinstance(other, ScaledComplex):
            other = ScaledComplex.of(other)
        return self + (-other)

    def scaled_by_exp(self, log_factor: complex) -> "ScaledComplex":
        """Multiply by exp(log_factor) without overflow."""
        m = self.mantissa * cmath.exp(1j * log_factor.imag)
        return ScaledComplex(m, self.logScale + log_factor.real).normalized()

    def sqrt(self) -> "ScaledComplex":
        if self.is_zero:
            return ScaledComplex(0j, 0.0)
        return ScaledComplex(cmath.sqrt(self.mantissa),
                             0.5 * self.logScale).normalized()

    def ratio_to(self, other: "ScaledComplex") -> complex:
        """self / other collapsed to a plain complex."""
        return (self / other).to_complex()
