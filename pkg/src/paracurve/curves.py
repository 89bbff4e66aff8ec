"""Formal curve parametrizations: multiplicity, tangent lines, transversal
normalization, and invariance against fields and maps.

Curves are always handled through parametrizations; membership of a germ in
the curve ideal is tested as vanishing after substitution, to an explicit
order budget derived from the input truncations.  Every boolean answer
carries that budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import NotInvariantError, PreconditionError, StructureError
from .gaussrat import GaussianRational, as_gaussian
from .jets import EXACT, Jet
from .liealg import FormalField, FormalMap, apply_field, log_map
from .seriesops import compositional_inverse, divide, divide_exponents


class CurveParam:
    """A parametrized formal curve: component jets in one parameter s,
    all with zero constant term and not all zero."""

    __slots__ = ("gamma", "irreducible", "_mult")

    def __init__(self, gamma, irreducible=False):
        gamma = tuple(gamma)
        if not gamma:
            raise StructureError("curve needs at least one component")
        for g in gamma:
            if g.nvars != 1:
                raise StructureError("curve components are univariate jets")
            ct = g.constant_term()
            if not (ct.is_zero() if g.backend == EXACT else ct == 0):
                raise StructureError("curve components must vanish at s=0")
        if all(g.is_zero() for g in gamma):
            raise StructureError("curve parametrization is identically zero")
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "irreducible", bool(irreducible))
        object.__setattr__(self, "_mult", None)

    def __setattr__(self, name, value):
        raise AttributeError("CurveParam is immutable")

    @property
    def nvars(self):
        return len(self.gamma)

    @property
    def order(self):
        return min(g.order for g in self.gamma)

    @property
    def backend(self):
        return self.gamma[0].backend

    def support_gcd(self):
        g = 0
        for comp in self.gamma:
            for e, _ in comp.items():
                g = math.gcd(g, e[0])
        return g

    def derivative(self):
        return tuple(g.diff(0) for g in self.gamma)

    def __eq__(self, other):
        if not isinstance(other, CurveParam):
            return NotImplemented
        return self.gamma == other.gamma

    def equal_terms(self, other):
        return all(a.equal_terms(b) for a, b in zip(self.gamma, other.gamma))

    def __repr__(self):
        return "CurveParam(" + "; ".join(str(g) for g in self.gamma) + ")"


@dataclass(frozen=True)
class TangentLine:
    """Projective tangent direction, normalized so the first nonzero
    coordinate is 1."""

    coords: tuple

    @classmethod
    def from_vector(cls, vec, backend=EXACT):
        vec = list(vec)
        pivot = None
        for v in vec:
            nz = (not v.is_zero()) if backend == EXACT else abs(v) > 0
            if nz:
                pivot = v
                break
        if pivot is None:
            raise StructureError("tangent vector is zero")
        if backend == EXACT:
            inv = pivot.inverse()
            return cls(tuple(v * inv for v in vec))
        return cls(tuple(v / pivot for v in vec))

    def __iter__(self):
        return iter(self.coords)


def multiplicity(curve: CurveParam) -> int:
    """Min order over components of an irreducible parametrization."""
    if curve._mult is not None:
        return curve._mult
    if not curve.irreducible:
        curve = normalize_irreducible(curve)
    m = min(g.min_degree() for g in curve.gamma)
    object.__setattr__(curve, "_mult", m)
    return m


def normalize_irreducible(curve: CurveParam) -> CurveParam:
    """Divide out a common exponent gcd l > 1 (substitute s -> s^(1/l))."""
    l = curve.support_gcd()
    if l <= 1:
        return CurveParam(curve.gamma, irreducible=True)
    comps = tuple(divide_exponents(g, l) for g in curve.gamma)
    return CurveParam(comps, irreducible=True)


def tangent_line(curve: CurveParam) -> TangentLine:
    curve = normalize_irreducible(curve)
    m = multiplicity(curve)
    vec = [g.coefficient((m,)) for g in curve.gamma]
    return TangentLine.from_vector(vec, curve.backend)


def reparametrize(curve: CurveParam, sigma: Jet) -> CurveParam:
    """gamma o sigma for a parameter change sigma of order 1."""
    if sigma.min_degree() != 1:
        raise PreconditionError("parameter changes must have order exactly 1")
    return CurveParam([g.compose([sigma]) for g in curve.gamma],
                      irreducible=curve.irreducible)


@dataclass(frozen=True)
class LinearChange:
    """Ambient linear coordinate change (new = matrix . old), recorded so a
    certificate can replay it.  ``kind`` is 'identity', 'swap' or 'scale'."""

    kind: str
    data: tuple

    def apply_to_vector(self, vec):
        if self.kind == "identity":
            return list(vec)
        if self.kind == "swap":
            i, j = self.data
            out = list(vec)
            out[i], out[j] = out[j], out[i]
            return out
        if self.kind == "scale":
            idx, factor = self.data
            out = list(vec)
            out[idx] = out[idx] * factor if not isinstance(out[idx], Jet) \
                else out[idx].scale(factor)
            return out
        raise StructureError(f"unknown linear change {self.kind!r}")


def to_puiseux(curve: CurveParam):
    """Normalize to (s^m, components of order >= m).

    Returns (list of LinearChange applied to ambient coordinates, new curve).
    The reparametrization extracts an m-th root of the first component; the
    root stays exact when the leading coefficient has an exact rational m-th
    root, otherwise a recorded ambient rescale makes the leading coefficient
    one first.
    """
    curve = normalize_irreducible(curve)
    m = multiplicity(curve)
    changes = []
    comps = list(curve.gamma)
    # tangent must be transversal to {z_1 = 0}: put a minimal-order
    # component first
    if comps[0].min_degree() != m:
        j = next(i for i, g in enumerate(comps) if g.min_degree() == m)
        comps[0], comps[j] = comps[j], comps[0]
        changes.append(LinearChange("swap", (0, j)))
    lead = comps[0].coefficient((m,))
    if not (lead.is_one() if curve.backend == EXACT else abs(lead - 1) < 1e-12):
        root = _exact_root(lead, m) if curve.backend == EXACT else lead ** (1.0 / m)
        if root is None:
            # rescale the first ambient coordinate so the leading coefficient
            # becomes 1; the certificate records the exact factor
            inv = lead.inverse() if curve.backend == EXACT else 1.0 / lead
            comps[0] = comps[0].scale(inv)
            changes.append(LinearChange("scale", (0, inv)))
            lead = comps[0].coefficient((m,))
        else:
            # reparametrize by s -> s/root, exact
            inv = root.inverse() if curve.backend == EXACT else 1.0 / root
            n = min(g.order for g in comps)
            sig = Jet.from_terms({(1,): inv}, 1, n, curve.backend)
            comps = [g.compose([sig]) for g in comps]
            lead = comps[0].coefficient((m,))
    # now solve gamma_1(sigma(s)) = s^m with sigma = s(1 + e(s))
    n = min(g.order for g in comps)
    target = Jet.from_terms({(m,): 1}, 1, n, curve.backend)
    sigma = Jet.variable(0, 1, n, curve.backend)
    for d in range(m + 1, n + 1):
        err = comps[0].compose([sigma]) - target
        coeff = err.coefficient((d,))
        zero = coeff.is_zero() if curve.backend == EXACT else abs(coeff) < 1e-14
        if zero:
            continue
        # a degree-e bump of sigma moves the degree (m-1+e) coefficient by m
        if curve.backend == EXACT:
            adj = -(coeff / as_gaussian(m))
        else:
            adj = -coeff / m
        sigma = sigma + Jet.from_terms({(d - m + 1,): adj}, 1, n, curve.backend)
    out = CurveParam([g.compose([sigma]) for g in comps], irreducible=True)
    return changes, out


def _exact_root(value: GaussianRational, m: int):
    """Exact m-th root of a positive rational with perfect power parts."""
    if not value.is_rational():
        return None
    v = value.re
    if v <= 0:
        if m % 2 == 1 and v < 0:
            neg = _exact_root(GaussianRational(-v), m)
            return None if neg is None else -neg
        return None
    num, den = v.numerator, v.denominator
    rn = round(num ** (1.0 / m))
    rd = round(den ** (1.0 / m))
    for a in (rn - 1, rn, rn + 1):
        for b in (rd - 1, rd, rd + 1):
            if a > 0 and b > 0 and a ** m == num and b ** m == den:
                return GaussianRational(Fraction(a, b))
    return None


# -- invariance ----------------------------------------------------------------

@dataclass(frozen=True)
class InvarianceResult:
    invariant: bool
    h: Jet | None
    budget: int
    witness_order: int | None = None
    witness_component: int | None = None


def order_budget(X: FormalField, curve: CurveParam) -> int:
    m = multiplicity(curve)
    return min(curve.order, X.order * m)


def invariance_h(X: FormalField, curve: CurveParam) -> Jet:
    """Solve X(gamma(s)) = h(s) gamma'(s) for a single h; raises
    NotInvariantError with the first obstruction otherwise."""
    result = check_invariance_field(X, curve)
    if not result.invariant:
        raise NotInvariantError(
            "curve is not invariant for the field",
            order=result.witness_order, component=result.witness_component)
    return result.h


def check_invariance_field(X: FormalField, curve: CurveParam) -> InvarianceResult:
    if X.nvars != curve.nvars:
        raise StructureError("field and curve disagree on nvars")
    budget = order_budget(X, curve)
    gamma = [g.truncate(min(g.order, budget)) for g in curve.gamma]
    values = [a.compose(gamma).truncate(budget) for a in X.components]
    derivs = [g.diff(0) for g in curve.gamma]
    # pivot: the derivative component of minimal order
    pivot = min(range(len(derivs)),
                key=lambda i: (derivs[i]._min_degree_eff(), i))
    dp = derivs[pivot]
    if dp.is_zero():
        raise PreconditionError("curve derivative vanishes to the budget")
    vp = values[pivot]
    r = dp.min_degree()
    if not vp.is_zero() and vp.min_degree() < r:
        return InvarianceResult(False, None, budget,
                                witness_order=vp.min_degree(),
                                witness_component=pivot)
    h = divide(vp, dp)
    h_budget = h.order
    # verify the remaining components to their own budgets
    for i, (v, d) in enumerate(zip(values, derivs)):
        if i == pivot:
            continue
        lhs = v
        rhs = h * d
        check_order = min(lhs.order, rhs.order)
        diff = lhs.truncate(check_order) - rhs.truncate(check_order)
        if not diff.is_zero():
            return InvarianceResult(False, None, budget,
                                    witness_order=diff.min_degree(),
                                    witness_component=i)
    return InvarianceResult(True, h, min(budget, h_budget))


def invariance_map(F: FormalMap, curve: CurveParam):
    """Invariance for a map, via its generator (the three invariance
    conditions are equivalent); returns (bool, h-or-witness result)."""
    X = log_map(F)
    if X.multiplicity() is math.inf:
        h = Jet.zero(1, curve.order, curve.backend)
        return True, InvarianceResult(True, h, curve.order)
    result = check_invariance_field(X, curve)
    return result.invariant, result
