"""Series manipulations built on jets: unit inversion, division, fractional
powers, compositional inverses, univariate substitution.
"""

from __future__ import annotations

from fractions import Fraction

from .errors import DivisibilityError, PreconditionError
from .gaussrat import as_gaussian
from .jets import EXACT, Jet


def invert_unit(u: Jet) -> Jet:
    """1/u for a unit jet (nonzero constant term), by Neumann series."""
    c0 = u.constant_term()
    if (c0.is_zero() if u.backend == EXACT else c0 == 0):
        raise PreconditionError("cannot invert a non-unit jet")
    if u.backend == EXACT:
        c0_inv = c0.inverse()
    else:
        c0_inv = 1.0 / c0
    n = u.order
    w = u.scale(c0_inv) - 1            # order >= 1
    acc = Jet.constant(1, u.nvars, n, u.backend)
    term = Jet.constant(1, u.nvars, n, u.backend)
    k = 0
    while k < n:
        term = (term * (-w)).truncate(n)
        if term.is_zero():
            break
        acc = acc + term
        k += 1
    return acc.scale(c0_inv)


def divide(a: Jet, b: Jet) -> Jet:
    """a / b where b = (unit) * monomial in a single variable (univariate use)."""
    if b.is_zero():
        raise PreconditionError("division by zero jet")
    if b.nvars != 1 or a.nvars != 1:
        raise PreconditionError("series division is univariate")
    v = b.valuation_in_var(0)
    if a.valuation_in_var(0) < v and not a.is_zero():
        raise DivisibilityError("dividend valuation below divisor valuation")
    b_red = b.divide_by_var(0, v)
    a_red = a.divide_by_var(0, v) if not a.is_zero() else a.truncate(max(a.order - v, 0))
    inv = invert_unit(b_red)
    n = min(a_red.order, inv.order)
    return (a_red * inv).truncate(n)


def unit_root(u: Jet, q: int) -> Jet:
    """Principal q-th root of a unit jet with constant term 1, via the
    binomial series (exact on jets: all coefficients stay in the field)."""
    c0 = u.constant_term()
    one_ok = c0.is_one() if u.backend == EXACT else abs(c0 - 1) < 1e-12
    if not one_ok:
        raise PreconditionError("unit_root expects constant term 1")
    if q == 1:
        return u
    n = u.order
    a = u - 1                              # order >= 1
    acc = Jet.constant(1, u.nvars, n, u.backend)
    term = Jet.constant(1, u.nvars, n, u.backend)
    if u.backend == EXACT:
        alpha = Fraction(1, q)
    else:
        alpha = 1.0 / q
    coeff = alpha
    k = 1
    while k <= n:
        term = (term * a).truncate(n)
        if term.is_zero():
            break
        acc = acc + term.scale(as_gaussian(coeff) if u.backend == EXACT else complex(coeff))
        if u.backend == EXACT:
            coeff = coeff * (alpha - k) / (k + 1)
        else:
            coeff = coeff * (alpha - k) / (k + 1)
        k += 1
    return acc


def compositional_inverse(f: Jet) -> Jet:
    """sigma with f(sigma(s)) = s for univariate f of order exactly 1."""
    if f.nvars != 1:
        raise PreconditionError("compositional inverse is univariate")
    if f.min_degree() != 1:
        raise PreconditionError("compositional inverse needs order exactly 1")
    n = f.order
    c1 = f.coefficient((1,))
    if f.backend == EXACT:
        lead_inv = c1.inverse()
    else:
        lead_inv = 1.0 / c1
    s = Jet.variable(0, 1, n, f.backend)
    sigma = s.scale(lead_inv)
    # Newton-free: raise the agreement order one degree at a time
    for d in range(2, n + 1):
        err = f.compose([sigma]) - s
        coeff = err.coefficient((d,))
        if (coeff.is_zero() if f.backend == EXACT else coeff == 0):
            continue
        correction = Jet.from_terms({(d,): -(coeff * lead_inv)
                                     if f.backend == EXACT else -(coeff * lead_inv)},
                                    1, n, f.backend)
        sigma = sigma + correction
    return sigma


def substitute_univariate(f: Jet, g: Jet) -> Jet:
    """f(g(s)) for univariate f, g with g(0) = 0."""
    return f.compose([g])


def substitute_power(f: Jet, q: int) -> Jet:
    """f(s^q) by exponent remapping; trusted order grows to q*(order+1)-1."""
    if f.nvars != 1:
        raise PreconditionError("substitute_power is univariate")
    if q < 1:
        raise PreconditionError("power must be positive")
    terms = {(e[0] * q,): c for e, c in f.items()}
    return Jet(1, q * (f.order + 1) - 1, f.backend, terms)


def divide_exponents(f: Jet, q: int) -> Jet:
    """Inverse of substitute_power: f(s) -> f(s^(1/q)); every exponent must
    be divisible by q."""
    terms = {}
    for e, c in f.items():
        if e[0] % q:
            raise DivisibilityError(f"exponent {e[0]} not divisible by {q}",
                                    monomial=e)
        terms[(e[0] // q,)] = c
    return Jet(1, f.order // q, f.backend, terms)


def truncation(f: Jet, n: int) -> Jet:
    """J_n: drop terms above total degree n (keeps the declared trust)."""
    terms = {e: c for e, c in f.items() if sum(e) <= n}
    return Jet(f.nvars, f.order, f.backend, terms, _normalized=True)
