"""Attracting directions, saddle domains, opening intervals, and the
placement verdicts that decide whether the numerical construction may run.

Angles are kept as exact rational multiples of pi whenever the input data
allows (axis- or diagonal-aligned Gaussian rationals); comparisons fall
back to floats with a guard band only when exactness is unavailable.
Boundary policy: every domain here is open, a direction exactly on the
boundary is *not* contained; a float-mode direction inside the guard band
yields an explicit indeterminate verdict instead of a boolean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

from .errors import IndeterminateBoundary, PreconditionError
from .gaussrat import GaussianRational

GUARD = 1e-12

IN = "in"
OUT = "out"
BOUNDARY = "boundary"
INDETERMINATE = "indeterminate"


# -- angles in units of pi ---------------------------------------------------------

def _norm2(v):
    """Normalize into [0, 2) (pi units)."""
    if isinstance(v, Fraction):
        return v % 2
    return v % 2.0


def _as_float(v):
    return float(v)


def arg_pi_units(z):
    """Argument in units of pi, exact (Fraction) for axis- or
    diagonal-aligned exact values, float otherwise."""
    if isinstance(z, GaussianRational):
        re, im = z.re, z.im
        if re == 0 and im == 0:
            raise PreconditionError("argument of zero")
        if im == 0:
            return Fraction(0) if re > 0 else Fraction(1)
        if re == 0:
            return Fraction(1, 2) if im > 0 else Fraction(3, 2)
        if abs(re) == abs(im):
            if re > 0 and im > 0:
                return Fraction(1, 4)
            if re < 0 < im:
                return Fraction(3, 4)
            if re < 0 and im < 0:
                return Fraction(5, 4)
            return Fraction(7, 4)
        return _norm2(math.atan2(float(im), float(re)) / math.pi)
    z = complex(z)
    if z == 0:
        raise PreconditionError("argument of zero")
    return _norm2(math.atan2(z.imag, z.real) / math.pi)


@dataclass(frozen=True)
class Direction:
    """A half-line through the origin; ``angle`` in units of pi, in [0,2)."""

    angle: object   # Fraction or float

    @property
    def radians(self):
        return _as_float(self.angle) * math.pi

    @property
    def unit(self):
        return complex(math.cos(self.radians), math.sin(self.radians))

    def is_exact(self):
        return isinstance(self.angle, Fraction)

    def __repr__(self):
        if self.is_exact():
            return f"Direction({self.angle}*pi)"
        return f"Direction({self.radians:.6f} rad)"


# -- angular domains ----------------------------------------------------------------

@dataclass(frozen=True)
class AngularDomain:
    """Finite union of open arcs on the circle, stored as non-wrapping
    (start, end) pairs in pi units with 0 <= start < end <= 2, canonically
    sorted and disjoint.  The full circle carries a flag (no boundary)."""

    arcs: tuple = ()
    full: bool = False

    @classmethod
    def full_circle(cls):
        return cls(arcs=(), full=True)

    @classmethod
    def empty(cls):
        return cls(arcs=(), full=False)

    @classmethod
    def from_arcs(cls, raw):
        """raw: iterable of (start, end) in pi units, arbitrary reals with
        end > start, length <= 2; wrap-around handled by splitting."""
        pieces = []
        for a, b in raw:
            if not (_as_float(b) > _as_float(a)):
                continue
            if _as_float(b) - _as_float(a) >= 2 - GUARD:
                return cls.full_circle()
            a2, b2 = _norm2(a), _norm2(a) + (b - a)
            if _as_float(b2) <= 2:
                pieces.append((a2, b2))
            else:
                pieces.append((a2, _two_like(a2)))
                pieces.append((_zero_like(b2), _norm2(b2)))
        pieces = [(a, b) for a, b in pieces if _as_float(b) > _as_float(a)]
        pieces.sort(key=lambda ab: _as_float(ab[0]))
        merged = []
        for a, b in pieces:
            if merged and _as_float(a) <= _as_float(merged[-1][1]) + 0:
                la, lb = merged[-1]
                if _as_float(b) > _as_float(lb):
                    merged[-1] = (la, b)
            else:
                merged.append((a, b))
        return cls(arcs=tuple(merged), full=False)

    def is_empty(self):
        return not self.full and not self.arcs

    def total_measure(self):
        if self.full:
            return 2.0
        return sum(_as_float(b) - _as_float(a) for a, b in self.arcs)

    def contains(self, direction: Direction, exactness_required=False):
        """Strict membership; raises IndeterminateBoundary when a float
        comparison falls inside the guard band."""
        if self.full:
            return True
        th = direction.angle
        for a, b in self.arcs:
            r = _strict_between(a, th, b)
            if r is True:
                return True
            if r is INDETERMINATE:
                raise IndeterminateBoundary(
                    "direction within the guard band of the boundary")
        return False

    def verdict(self, direction: Direction):
        if self.full:
            return IN
        th = direction.angle
        for a, b in self.arcs:
            r = _strict_between(a, th, b)
            if r is True:
                return IN
            if r is BOUNDARY:
                return BOUNDARY
            if r is INDETERMINATE:
                return INDETERMINATE
        return OUT

    def intersect(self, other: "AngularDomain") -> "AngularDomain":
        if self.full:
            return other
        if other.full:
            return self
        out = []
        for a1, b1 in self.arcs:
            for a2, b2 in other.arcs:
                a = a1 if _as_float(a1) >= _as_float(a2) else a2
                b = b1 if _as_float(b1) <= _as_float(b2) else b2
                if _as_float(b) > _as_float(a):
                    out.append((a, b))
        return AngularDomain.from_arcs(out)

    def arc_containing(self, direction: Direction):
        if self.full:
            return None
        th = direction.angle
        for a, b in self.arcs:
            if _strict_between(a, th, b) is True:
                return (a, b)
        return None

    def __repr__(self):
        if self.full:
            return "AngularDomain(full circle)"
        return "AngularDomain(" + ", ".join(
            f"({a}, {b})*pi" for a, b in self.arcs) + ")"


def _zero_like(v):
    return Fraction(0) if isinstance(v, Fraction) else 0.0


def _two_like(v):
    return Fraction(2) if isinstance(v, Fraction) else 2.0


def _strict_between(a, th, b):
    """True / False / BOUNDARY / INDETERMINATE for a < th < b."""
    exact = isinstance(a, Fraction) and isinstance(b, Fraction) \
        and isinstance(th, Fraction)
    if exact:
        if a < th < b:
            return True
        if th == a or th == b:
            return BOUNDARY
        return False
    fa, fb, ft = _as_float(a), _as_float(b), _as_float(th)
    if abs(ft - fa) <= GUARD or abs(ft - fb) <= GUARD:
        return INDETERMINATE
    return fa < ft < fb


def arcs_for_positive_cosine(offset, w):
    """Solution arcs of cos(w*theta - offset) > 0 for integer w >= 1:
    w open arcs of length pi/w (pi units: length 1/w)."""
    half = Fraction(1, 2) if isinstance(offset, Fraction) else 0.5
    out = []
    for j in range(w):
        two_j = (Fraction(2 * j) if isinstance(offset, Fraction) else 2.0 * j)
        a = (offset - half + two_j) / w
        b = (offset + half + two_j) / w
        out.append((a, b))
    return AngularDomain.from_arcs(out)


# -- the decision layer ----------------------------------------------------------------

@dataclass(frozen=True)
class SectorSpec:
    """Open sector bisected by tau with the given opening and radius."""

    tau: Direction
    opening: float
    radius: float

    def __post_init__(self):
        if not 0 < self.opening < 2 * math.pi:
            raise PreconditionError("opening must lie in (0, 2*pi)")
        if self.radius <= 0:
            raise PreconditionError("radius must be positive")

    def contains_point(self, z: complex):
        if abs(z) >= self.radius or z == 0:
            return False
        d = (math.atan2(z.imag, z.real) - self.tau.radians) % (2 * math.pi)
        if d > math.pi:
            d -= 2 * math.pi
        return abs(d) < self.opening / 2


def attracting_directions(k: int, p: int, lam) -> list:
    """The k+p half-lines with xi^(k+p) = -lam, sorted by angle."""
    if k + p < 1:
        raise PreconditionError("needs k + p >= 1")
    if isinstance(lam, GaussianRational):
        if lam.is_zero():
            raise PreconditionError("lam must be nonzero")
        base = arg_pi_units(-lam)
    else:
        if lam == 0:
            raise PreconditionError("lam must be nonzero")
        base = arg_pi_units(complex(-lam))
    w = k + p
    out = []
    for j in range(w):
        two_j = Fraction(2 * j) if isinstance(base, Fraction) else 2.0 * j
        out.append(Direction(_norm2((base + two_j) / w)))
    out.sort(key=lambda d: _as_float(d.angle))
    return out


def saddle_domain(lam, entries, p: int) -> AngularDomain:
    """Intersection over the nonzero diagonal entries (d_j0, nu_j) of the
    angular sets where Re(-d_j0 / (lam x^(p - nu_j))) > 0; the whole plane
    when p = 0."""
    if p == 0:
        return AngularDomain.full_circle()
    domain = AngularDomain.full_circle()
    for entry in entries:
        if entry is None:
            continue
        d0, nu = entry
        w = p - nu
        ratio = _neg_ratio(d0, lam)
        if w == 0:
            re = ratio.re if isinstance(ratio, GaussianRational) else ratio.real
            if not re > 0:
                return AngularDomain.empty()
            continue
        offset = arg_pi_units(ratio)
        domain = domain.intersect(arcs_for_positive_cosine(offset, w))
        if domain.is_empty():
            return domain
    return domain


def _neg_ratio(d0, lam):
    if isinstance(d0, GaussianRational) and isinstance(lam, GaussianRational):
        return -(d0 / lam)
    return -(complex(d0) / complex(lam))


def interval_I(k: int, p: int, lam, entries, tau: Direction):
    """Supremum of openings eta with S(tau, eta, inf) inside the saddle
    domain intersected with the extra constraints Re(d_j0 x^(k+nu_j)) > 0;
    None when tau violates any constraint.  Returned in radians."""
    W = saddle_domain(lam, entries, p)
    for entry in entries:
        if entry is None:
            continue
        d0, nu = entry
        w = k + nu
        if w == 0:
            re = d0.re if isinstance(d0, GaussianRational) else complex(d0).real
            if not re > 0:
                return None
            continue
        offset = -arg_pi_units(d0)
        W = W.intersect(arcs_for_positive_cosine(offset, w))
    if W.is_empty():
        return None
    cap = 2.0 * math.pi / (k + p)
    if W.full:
        return cap
    arc = W.arc_containing(tau)
    if arc is None:
        return None
    a, b = arc
    room = 2 * min(_as_float(tau.angle) - _as_float(a),
                   _as_float(b) - _as_float(tau.angle)) * math.pi
    return min(cap, room)


@dataclass(frozen=True)
class WellPlacedReport:
    k: int
    p: int
    lam: object
    directions: tuple
    domain: AngularDomain
    verdicts: tuple       # one of IN/OUT/BOUNDARY/INDETERMINATE per direction
    overall: bool
    dim2_case: str | None = None

    def placed_directions(self):
        return tuple(d for d, v in zip(self.directions, self.verdicts)
                     if v == IN)


def well_placed(mnf) -> WellPlacedReport:
    """Full placement report for a reduced map: some attracting direction
    strictly inside the saddle domain."""
    entries = mnf.saddle_entries()
    dirs = attracting_directions(mnf.k, mnf.p, mnf.lam)
    V = saddle_domain(mnf.lam, entries, mnf.p)
    verdicts = tuple(V.verdict(d) for d in dirs)
    overall = any(v == IN for v in verdicts)
    return WellPlacedReport(mnf.k, mnf.p, mnf.lam, tuple(dirs), V, verdicts,
                            overall)


@dataclass(frozen=True)
class Dim2Classification:
    case: str            # 'a', 'b', 'c' or 'd'
    count_direct: int    # attracting directions of F inside V
    count_inverse: int   # attracting directions of F^{-1} inside V
    guaranteed: int      # the proposition's guaranteed count per side
    chosen: str          # 'direct' or 'inverse'
    report_direct: WellPlacedReport
    report_inverse: WellPlacedReport


def dim2_classify(mnf_F, mnf_Finv) -> Dim2Classification:
    """Two-dimensional classification: counts of attracting directions in
    the shared saddle domain for the map and its inverse, the case tag, and
    which side realizes the guaranteed parabolic curves."""
    if mnf_F.nvars != 2 or mnf_Finv.nvars != 2:
        raise PreconditionError("classification is two-dimensional only")
    if (mnf_F.k, mnf_F.p) != (mnf_Finv.k, mnf_Finv.p):
        raise PreconditionError("map and inverse disagree on the exponents")
    rep_F = well_placed(mnf_F)
    rep_I = well_placed(mnf_Finv)
    k, p = mnf_F.k, mnf_F.p
    if p == 0:
        case, guaranteed = "a", k
    elif p < k:
        case, guaranteed = "b", p
    elif k < p:
        case, guaranteed = "c", 1
    else:
        case, guaranteed = "d", p
    cF = len(rep_F.placed_directions())
    cI = len(rep_I.placed_directions())
    chosen = "direct" if cF >= 1 else "inverse"
    return Dim2Classification(case, cF, cI, guaranteed, chosen, rep_F, rep_I)
