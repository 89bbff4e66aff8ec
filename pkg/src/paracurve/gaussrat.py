"""Exact Gaussian-rational coefficients: a + b*i with a, b rational.

This is the coefficient field used by every exact-backend jet.  Arithmetic
is plain Fraction arithmetic on the two components; equality is decidable,
there is no rounding anywhere.
"""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational


def _coerce_part(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    raise TypeError(f"cannot build an exact coefficient from {type(x).__name__}")


class GaussianRational:
    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        object.__setattr__(self, "re", _coerce_part(re))
        object.__setattr__(self, "im", _coerce_part(im))

    def __setattr__(self, name, value):
        raise AttributeError("GaussianRational is immutable")

    # -- predicates ----------------------------------------------------
    def is_zero(self) -> bool:
        return not self.re and not self.im

    def is_one(self) -> bool:
        return self.re == 1 and not self.im

    def is_rational(self) -> bool:
        return not self.im

    # -- arithmetic ----------------------------------------------------
    def __add__(self, other):
        other = as_gaussian(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = as_gaussian(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return as_gaussian(other) - self

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __mul__(self, other):
        other = as_gaussian(other)
        a, b, c, d = self.re, self.im, other.re, other.im
        if not b and not d:
            return GaussianRational(a * c, 0)
        return GaussianRational(a * c - b * d, a * d + b * c)

    __rmul__ = __mul__

    def inverse(self) -> "GaussianRational":
        n = self.re * self.re + self.im * self.im
        if not n:
            raise ZeroDivisionError("inverse of zero Gaussian rational")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * as_gaussian(other).inverse()

    def __rtruediv__(self, other):
        return as_gaussian(other) * self.inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("exponent must be an integer")
        if n < 0:
            return self.inverse() ** (-n)
        result = GaussianRational(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    # -- conversions / comparisons --------------------------------------
    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __eq__(self, other):
        try:
            other = as_gaussian(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        if not self.im:
            return hash(self.re)
        return hash((self.re, self.im))

    def __bool__(self):
        return not self.is_zero()

    def __repr__(self):
        return f"GaussianRational({self.re!r}, {self.im!r})"

    def __str__(self):
        if not self.im:
            return str(self.re)
        if not self.re:
            return f"({self.im})*i"
        return f"({self.re})+({self.im})*i"


def as_gaussian(x) -> GaussianRational:
    """Coerce ints, Fractions and GaussianRationals to GaussianRational."""
    if isinstance(x, GaussianRational):
        return x
    return GaussianRational(_coerce_part(x), 0)


ZERO = GaussianRational(0)
ONE = GaussianRational(1)
I = GaussianRational(0, 1)


def gaussian_from_pair(re: str | Fraction, im: str | Fraction) -> GaussianRational:
    return GaussianRational(Fraction(re), Fraction(im))


def rational_reconstruct(z: complex, max_den: int = 10**6,
                         tol: float = 1e-9) -> GaussianRational | None:
    """Reconstruct a nearby Gaussian rational with small denominator.

    Returns None when no candidate within ``tol`` exists.  Callers must
    verify the candidate exactly; the reconstruction itself is heuristic.
    """
    re = Fraction(z.real).limit_denominator(max_den)
    im = Fraction(z.imag).limit_denominator(max_den)
    if abs(float(re) - z.real) > tol or abs(float(im) - z.imag) > tol:
        return None
    return GaussianRational(re, im)
