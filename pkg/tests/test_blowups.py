import math
import random
from fractions import Fraction

import pytest

from paracurve.blowups import (BlowUp, Center, Ramification, TransformSequence,
                               blowup_curve, blowup_field, blowup_map,
                               is_invariant_center, is_permissible, nu_along,
                               pushforward_identity_defect, punctual_center,
                               ramify_curve, ramify_field, ramify_map,
                               transform_field, transform_map)
from paracurve.curves import CurveParam
from paracurve.errors import DivisibilityError, PreconditionError
from paracurve.gaussrat import GaussianRational
from paracurve.jets import Jet
from paracurve.liealg import FormalField, FormalMap, exp_field, log_map


def field(specs, nvars, order=8):
    return FormalField([Jet.from_terms(t, nvars, order) for t in specs])


def curve(specs, order=8):
    return CurveParam([Jet.from_terms(t, 1, order) for t in specs])


def test_invariant_center_cases():
    radial = field([{(1, 0): 1}, {(0, 1): 1}], 2)
    ok, _ = is_invariant_center(radial, Center((0, 1)))
    assert ok
    const = field([{(0, 0): 1}, {}], 2)
    ok, _ = is_invariant_center(const, Center((0,)))
    assert not ok
    X = field([{(3, 0): 1}, {(1, 1): 1, (2, 0): -1}], 2)
    ok, _ = is_invariant_center(X, Center((0,)))
    assert ok
    ok, _ = is_invariant_center(X, Center((1,)))
    assert not ok


def test_nu_along_examples():
    X = field([{(2, 0): 1}, {(0, 2): 1}], 2)
    assert nu_along(X, Center((0, 1))) == 2
    X2 = field([{(2, 0): 1}, {(1, 1): 1}], 2)
    assert nu_along(X2, Center((0,))) == 2
    X3 = field([{(1, 0): 1}, {}], 2)
    assert nu_along(X3, Center((0,))) == 1


def test_permissible_punctual_for_singular_field():
    X = field([{(2, 0): 1}, {(1, 1): 1}], 2)
    c = curve([{(1,): 1}, {(2,): 1}])
    res = is_permissible(X, c, punctual_center(2))
    assert res.permissible


def test_permissible_euler_codim2():
    X = field([{(3, 0): 1}, {(1, 1): 1, (2, 0): -1}], 2)
    g = curve([{(1,): 1},
               {(n,): Fraction(math.factorial(n - 1)) for n in range(1, 9)}])
    res = is_permissible(X, g, Center((0, 1)))
    assert res.permissible


def test_permissible_fails_on_tangency():
    X = field([{(2, 0): 1}, {(1, 1): 1}], 2)
    # curve tangent to the y-axis, center = {y = 0}: tangent inside T_0 Z
    c = curve([{(2,): 1}, {(1,): 1}])
    res = is_permissible(X, c, Center((0,)))
    assert not res.permissible and res.clause == "transversality"


def test_blowup_field_linear_example():
    X = field([{(1, 0): 1}, {(0, 1): 2}], 2)
    out = blowup_field(X, punctual_center(2), shift=(0,), pivot=0)
    assert out.equal_terms(field([{(1, 0): 1}, {(0, 1): 1}], 2, out.order))


def test_blowup_field_radial_collapse():
    X = field([{(2, 0): 1}, {(1, 1): 1}], 2)
    out = blowup_field(X, punctual_center(2), shift=(0,), pivot=0)
    assert out.components[1].is_zero()
    assert out.components[0].equal_terms(
        Jet.from_terms({(2, 0): 1}, 2, out.components[0].order))


def test_blowup_field_radial_any_dim():
    X = field([{(1, 0, 0): 1}, {(0, 1, 0): 1}, {(0, 0, 1): 1}], 3)
    out = blowup_field(X, punctual_center(3), shift=(0, 0), pivot=0)
    assert out.components[1].is_zero() and out.components[2].is_zero()
    assert out.components[0].equal_terms(
        Jet.from_terms({(1, 0, 0): 1}, 3, out.components[0].order))


def test_blowup_multiplicity_never_drops():
    rng = random.Random(42)
    pool = [1, -1, 2, Fraction(1, 2)]
    for _ in range(20):
        comps = []
        for _ in range(2):
            terms = {}
            for _ in range(rng.randint(1, 3)):
                e = (rng.randint(0, 3), rng.randint(0, 3))
                if 1 <= sum(e) <= 6:
                    terms[e] = rng.choice(pool)
            comps.append(Jet.from_terms(terms, 2, 8))
        X = FormalField(comps)
        if X.multiplicity() is math.inf or X.multiplicity() < 1:
            continue
        # align to the axis curve so the punctual center is permissible
        axis = CurveParam([Jet.variable(0, 1, 8), Jet.zero(1, 8)])
        if not is_permissible(X, axis, punctual_center(2)).permissible:
            continue
        try:
            out = blowup_field(X, punctual_center(2), shift=(0,), pivot=0)
        except PreconditionError:
            continue
        assert out.multiplicity() >= X.multiplicity()


def test_blowup_curve_examples():
    assert blowup_curve(curve([{(1,): 1}, {(2,): 1}]), punctual_center(2),
                        shift=(0,), pivot=0).equal_terms(
        curve([{(1,): 1}, {(1,): 1}], order=7))
    assert blowup_curve(curve([{(2,): 1}, {(3,): 1}]), punctual_center(2),
                        shift=(0,), pivot=0).equal_terms(
        curve([{(2,): 1}, {(1,): 1}], order=6))
    once = blowup_curve(curve([{(2,): 1}, {(5,): 1}]), punctual_center(2),
                        shift=(0,), pivot=0)
    assert once.equal_terms(curve([{(2,): 1}, {(3,): 1}], order=6))
    twice = blowup_curve(once, punctual_center(2), shift=(0,), pivot=0)
    assert twice.equal_terms(curve([{(2,): 1}, {(1,): 1}], order=4))


def test_blowup_curve_strict_transform_composes_back():
    g = curve([{(1,): 1}, {(2,): 1, (3,): 2}])
    gt = blowup_curve(g, punctual_center(2), shift=(0,), pivot=0)
    # phi o gamma~ = gamma: second coordinate is gamma~_1 * gamma~_2
    prod = (gt.gamma[0] * gt.gamma[1])
    n = min(prod.order, g.gamma[1].order)
    assert prod.truncate(n).equal_terms(g.gamma[1].truncate(n))


def test_ramify_field_examples():
    X1 = field([{(2,): 1}], 1)
    out = ramify_field(X1, 2, 0)
    assert out.components[0].equal_terms(
        Jet.from_terms({(3,): Fraction(1, 2)}, 1, out.components[0].order))
    X2 = field([{(1, 0): 1}, {(0, 1): 1}], 2)
    assert ramify_field(X2, 1, 0).equal_terms(X2)
    out3 = ramify_field(X2, 3, 0)
    assert out3.components[0].equal_terms(
        Jet.from_terms({(1, 0): Fraction(1, 3)}, 2, out3.components[0].order))
    assert out3.components[1].equal_terms(
        Jet.from_terms({(0, 1): 1}, 2, out3.components[1].order))


def test_ramify_field_requires_invariance():
    X = field([{(0, 1): 1}, {}], 2)   # X(x) = y not divisible by x
    with pytest.raises(DivisibilityError):
        ramify_field(X, 2, 0)


def test_ramify_curve_examples():
    c = curve([{(1,): 1}, {(2,): 1}])
    out = ramify_curve(c, 2, 0)
    assert out.gamma[1].equal_terms(Jet.from_terms({(4,): 1}, 1, out.gamma[1].order))
    assert ramify_curve(c, 1, 0).equal_terms(c)
    eul = curve([{(1,): 1},
                 {(n,): Fraction(math.factorial(n - 1)) for n in range(1, 9)}])
    out2 = ramify_curve(eul, 2, 0)
    for n in range(1, 9):
        assert out2.gamma[1].coefficient((2 * n,)) == \
            GaussianRational(Fraction(math.factorial(n - 1)))


def test_pushforward_identity_blowup_and_ramification():
    rng = random.Random(9)
    for _ in range(10):
        # fields leaving the x-axis invariant: the punctual blow-up aligned
        # with that curve is permissible
        X = field([{(2, 0): rng.choice([1, 2]), (3, 0): 1},
                   {(1, 1): rng.choice([1, -1]), (2, 1): rng.randint(-2, 2)}], 2)
        step = BlowUp(punctual_center(2), 0, (0,))
        Xt = transform_field(X, step)
        defect = pushforward_identity_defect(X, Xt, step)
        assert all(d.is_zero() for d in defect)
        step2 = Ramification(2, 0)
        Xt2 = transform_field(X, step2)
        defect2 = pushforward_identity_defect(X, Xt2, step2)
        assert all(d.is_zero() for d in defect2)


def test_map_transform_commutes_with_generator_blowup():
    X = field([{(2, 0): 1, (3, 0): -1}, {(1, 1): 1}], 2, order=8)
    F = exp_field(X)
    step = BlowUp(punctual_center(2), 0, (0,))
    Ft = transform_map(F, step)
    Xt = transform_field(X, step)
    lg = log_map(Ft)
    n = min(lg.order, Xt.order)
    assert lg.truncate(n).equal_terms(Xt.truncate(n))


def test_map_transform_commutes_with_generator_ramification():
    X = field([{(3, 0): 1}, {(1, 1): 1, (2, 0): -1}], 2, order=8)
    F = exp_field(X)
    step = Ramification(2, 0)
    Ft = transform_map(F, step)
    Xt = transform_field(X, step)
    lg = log_map(Ft)
    n = min(lg.order, Xt.order)
    assert lg.truncate(n).equal_terms(Xt.truncate(n))


def test_identity_map_transforms_to_identity():
    F = FormalMap.identity(2, 8)
    for step in (BlowUp(punctual_center(2), 0, (0,)), Ramification(3, 0)):
        Ft = transform_map(F, step)
        assert Ft.equal_terms(FormalMap.identity(2, Ft.order))


def test_divisor_tracking():
    seq = TransformSequence()
    seq.append(BlowUp(punctual_center(2), 0, (0,)))
    assert seq.total_divisor() == {0}
    seq.append(BlowUp(punctual_center(2), 1, (0,)))   # pivot y, shift 0
    assert seq.total_divisor() == {0, 1}
    seq2 = TransformSequence()
    seq2.append(BlowUp(punctual_center(2), 0, (0,)))
    seq2.append(BlowUp(punctual_center(2), 0, (1,)))  # nonzero shift absorbs
    assert seq2.total_divisor() == {0}


def test_invariance_preserved_by_permissible_steps():
    from paracurve.curves import check_invariance_field
    X = field([{(3, 0): 1}, {(1, 1): 1, (2, 0): -1}], 2)
    g = curve([{(1,): 1},
               {(n,): Fraction(math.factorial(n - 1)) for n in range(1, 9)}])
    assert check_invariance_field(X, g).invariant
    step = BlowUp(punctual_center(2), 0, (1,))   # tangent of the curve is [1:1]
    Xt = transform_field(X, step)
    gt = blowup_curve(g, punctual_center(2), shift=(1,), pivot=0)
    assert check_invariance_field(Xt, gt).invariant
