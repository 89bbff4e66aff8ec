import math
import random
from fractions import Fraction

import pytest

from paracurve.curves import (CurveParam, check_invariance_field, invariance_h,
                              invariance_map, multiplicity,
                              normalize_irreducible, reparametrize,
                              tangent_line, to_puiseux)
from paracurve.errors import NotInvariantError
from paracurve.gaussrat import GaussianRational
from paracurve.jets import Jet
from paracurve.liealg import FormalField, exp_field


def curve(specs, order=8):
    return CurveParam([Jet.from_terms(t, 1, order) for t in specs])


def field(specs, nvars, order=8):
    return FormalField([Jet.from_terms(t, nvars, order) for t in specs])


def euler_curve(order=8):
    return curve([{(1,): 1},
                  {(n,): Fraction(math.factorial(n - 1)) for n in range(1, order + 1)}],
                 order)


def test_multiplicity_basics():
    assert multiplicity(curve([{(1,): 1}, {(2,): 1}])) == 1
    assert multiplicity(curve([{(2,): 1}, {(3,): 1}])) == 2
    c = curve([{(2,): 1}, {(4,): 1, (5,): 1}])
    assert c.support_gcd() == 1
    assert multiplicity(c) == 2


def test_normalize_irreducible():
    c = curve([{(2,): 1}, {(4,): 1}])
    n = normalize_irreducible(c)
    assert n.equal_terms(curve([{(1,): 1}, {(2,): 1}]))
    already = curve([{(1,): 1}, {(3,): 1}])
    assert normalize_irreducible(already).equal_terms(already)
    big = curve([{(6,): 1}, {(9,): 1, (15,): 1}], order=30)
    expect = curve([{(2,): 1}, {(3,): 1, (5,): 1}], order=10)
    assert normalize_irreducible(big).equal_terms(expect)


def test_normalize_idempotent():
    c = curve([{(2,): 1}, {(4,): 1}])
    once = normalize_irreducible(c)
    twice = normalize_irreducible(once)
    assert once.equal_terms(twice)


def test_tangent_line():
    assert tuple(tangent_line(curve([{(1,): 1}, {(2,): 1}]))) == \
        (GaussianRational(1), GaussianRational(0))
    assert tuple(tangent_line(curve([{(2,): 1}, {(3,): 1}]))) == \
        (GaussianRational(1), GaussianRational(0))
    t = tangent_line(curve([{(2,): 1, (3,): 1}, {(2,): 2}]))
    assert tuple(t) == (GaussianRational(1), GaussianRational(2))


def test_to_puiseux_identity_case():
    c = curve([{(1,): 1}, {(2,): 1}])
    changes, out = to_puiseux(c)
    assert changes == []
    assert out.equal_terms(c)


def test_to_puiseux_reparametrizes_first_component():
    c = curve([{(1,): 1, (2,): 1}, {(3,): 1}])
    changes, out = to_puiseux(c)
    assert changes == []
    assert out.gamma[0].equal_terms(Jet.variable(0, 1, out.gamma[0].order))
    # second component: s^3 o (inverse of s+s^2) = s^3 - 3 s^4 + O(s^5)
    assert out.gamma[1].coefficient((3,)) == GaussianRational(1)
    assert out.gamma[1].coefficient((4,)) == GaussianRational(-3)


def test_to_puiseux_swaps_for_transversality():
    c = CurveParam([Jet.from_terms({(3,): 1}, 1, 9),
                    Jet.from_terms({(2,): 1}, 1, 9),
                    Jet.zero(1, 9)])
    changes, out = to_puiseux(c)
    assert any(ch.kind == "swap" for ch in changes)
    assert out.gamma[0].equal_terms(Jet.from_terms({(2,): 1}, 1, out.gamma[0].order))


def test_to_puiseux_cusp_roundtrip():
    rng = random.Random(3)
    for _ in range(5):
        # random unit reparametrization of the cusp still normalizes
        coeffs = {(1,): 1}
        for d in range(2, 5):
            coeffs[(d,)] = Fraction(rng.randint(-2, 2))
        sig = Jet.from_terms(coeffs, 1, 8)
        c = reparametrize(curve([{(2,): 1}, {(3,): 1}]), sig)
        _, out = to_puiseux(c)
        assert out.gamma[0].equal_terms(Jet.from_terms({(2,): 1}, 1, out.gamma[0].order))
        assert multiplicity(out) == 2


def test_invariance_h_euler():
    X = field([{(2, 0): 1}, {(0, 1): 1, (1, 0): -1}], 2)
    g = euler_curve(8)
    h = invariance_h(X, g)
    assert h.coefficient((2,)) == GaussianRational(1)
    assert all(c.is_zero() for e, c in h.items() if e != (2,))


def test_invariance_radial_vs_parabola():
    X = field([{(1, 0): 1}, {(0, 1): 1}], 2)
    c = curve([{(1,): 1}, {(2,): 1}])
    with pytest.raises(NotInvariantError):
        invariance_h(X, c)


def test_invariance_axis_case():
    X = field([{(2, 0): 1, (1, 1): 1}, {(0, 2): 3, (1, 1): 2}], 2)
    axis = CurveParam([Jet.variable(0, 1, 8), Jet.zero(1, 8)])
    h = invariance_h(X, axis)
    assert h.equal_terms(Jet.from_terms({(2,): 1}, 1, 8))


def test_invariance_map_euler():
    Xgen = field([{(3, 0): 1}, {(1, 1): 1, (2, 0): -1}], 2)
    F = exp_field(Xgen)
    ok, res = invariance_map(F, euler_curve(8))
    assert ok
    assert res.h.coefficient((3,)) == GaussianRational(1)


def test_invariance_map_product_counterexample():
    Xgen = field([{(2, 0): 1}, {}], 2)
    F = exp_field(Xgen)
    diag = curve([{(1,): 1}, {(1,): 1}])
    ok, res = invariance_map(F, diag)
    assert not ok


def test_invariance_of_fixed_curve():
    # the y-axis is fixed pointwise by Exp(x^2 y d/dx): h = 0
    Xgen = field([{(2, 1): 1}, {}], 2)
    F = exp_field(Xgen)
    axis = CurveParam([Jet.zero(1, 8), Jet.variable(0, 1, 8)])
    ok, res = invariance_map(F, axis)
    assert ok
    assert res.h.is_zero()


def test_multiplicity_tangent_invariant_under_reparametrization():
    rng = random.Random(5)
    base = curve([{(2,): 1}, {(3,): 1, (4,): 2}])
    for _ in range(5):
        coeffs = {(1,): rng.choice([1, 2, Fraction(1, 2)])}
        for d in range(2, 5):
            coeffs[(d,)] = Fraction(rng.randint(-2, 2))
        sig = Jet.from_terms(coeffs, 1, 8)
        rc = reparametrize(base, sig)
        assert multiplicity(rc) == multiplicity(base)
        tl0 = tuple(tangent_line(base))
        tl1 = tuple(tangent_line(rc))
        assert tl0 == tl1


def test_invariance_consistent_under_reparametrization():
    X = field([{(2, 0): 1}, {(0, 1): 1, (1, 0): -1}], 2)
    g = euler_curve(8)
    sig = Jet.from_terms({(1,): 1, (2,): Fraction(1, 3)}, 1, 8)
    rg = reparametrize(g, sig)
    res = check_invariance_field(X, rg)
    assert res.invariant


def test_invariance_matches_for_inverse_map():
    Xgen = field([{(3, 0): 1}, {(1, 1): 1, (2, 0): -1}], 2)
    F = exp_field(Xgen)
    Finv = exp_field(Xgen.scale(-1))
    g = euler_curve(8)
    ok1, _ = invariance_map(F, g)
    ok2, _ = invariance_map(Finv, g)
    assert ok1 and ok2
