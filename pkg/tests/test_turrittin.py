import random
from fractions import Fraction

import pytest

from paracurve.errors import DegenerateSystemError, NotInFormError
from paracurve.gaussrat import GaussianRational, as_gaussian
from paracurve.jets import Jet
from paracurve.turrittin import (LinearSystem, PolyLinear, Ramify, Shearing,
                                 Strip, apply_T, assembled_true_matrix,
                                 exact_eigendata, is_normal_linear,
                                 leading_split, poincare_rank, replay,
                                 system_from_terms, turrittin_reduce,
                                 validate_normal_form)

ORDER = 16


def sys2(q, rows, order=ORDER):
    return system_from_terms(q, rows, order)


def diag_system(q, *entries, order=ORDER):
    m = len(entries)
    rows = [[entries[i] if i == j else {} for j in range(m)] for i in range(m)]
    return system_from_terms(q, rows, order)


def test_poincare_rank_normalization():
    s = sys2(1, [[{(1,): 1}, {}], [{}, {(1,): 1}]])
    out, stripped = poincare_rank(s)
    assert stripped == 1 and out.q == 0
    s2 = diag_system(1, {(0,): 1}, {(0,): 2})
    out2, st2 = poincare_rank(s2)
    assert st2 == 0 and out2.q == 1
    s3 = sys2(2, [[{(1,): 1}, {(2,): 3}], [{(1,): -1}, {(1,): 1}]])
    out3, st3 = poincare_rank(s3)
    assert st3 == 1 and out3.q == 1
    with pytest.raises(DegenerateSystemError):
        poincare_rank(sys2(1, [[{}, {}], [{}, {}]]))


def test_shearing_identity():
    s = sys2(1, [[{(0,): 1}, {(1,): 1}], [{}, {(0,): 2}]])
    out = apply_T(s, Shearing((0, 0)))
    assert out.equal_terms(s) and out.q == s.q


def test_ramify_chain_rule():
    # x^2 y' = diag(1,2) y under x -> x~^2: rank doubles, matrix doubles
    s = diag_system(1, {(0,): 1}, {(0,): 2})
    out = apply_T(s, Ramify(2))
    assert out.q == 2
    assert out.entry(0, 0).coefficient((0,)) == GaussianRational(2)
    assert out.entry(1, 1).coefficient((0,)) == GaussianRational(4)


def test_polylinear_constant_conjugation():
    s = diag_system(1, {(0,): 1}, {(0,): 2})
    P = [[Jet.constant(1, 1, ORDER), Jet.constant(1, 1, ORDER)],
         [Jet.constant(0, 1, ORDER), Jet.constant(1, 1, ORDER)]]
    out = apply_T(s, PolyLinear(P))
    # P^-1 diag(1,2) P = [[1,-1],[0,2]]
    assert out.entry(0, 1).coefficient((0,)) == GaussianRational(-1)
    assert out.entry(0, 0).coefficient((0,)) == GaussianRational(1)
    assert out.entry(1, 1).coefficient((0,)) == GaussianRational(2)


def test_leading_split_cases():
    d = [[as_gaussian(1), as_gaussian(0)], [as_gaussian(0), as_gaussian(2)]]
    _T, _Ti, blocks = leading_split(d)
    assert sorted(m for _, m in blocks) == [1, 1]
    tri = [[as_gaussian(1), as_gaussian(1)], [as_gaussian(0), as_gaussian(2)]]
    T, Ti, blocks2 = leading_split(tri)
    assert len(blocks2) == 2
    nil = [[as_gaussian(0), as_gaussian(1)], [as_gaussian(0), as_gaussian(0)]]
    eig = exact_eigendata(nil)
    assert eig == [(GaussianRational(0), 2)]


def test_already_final_returns_empty():
    s = diag_system(1, {(0,): 1}, {(0,): 2})
    cert, nf, final = turrittin_reduce(s)
    assert cert.transformations() == []
    assert nf.p == 1
    assert nf.D[0].coefficient((0,)) == GaussianRational(1)
    assert nf.D[1].coefficient((0,)) == GaussianRational(2)
    assert all(c.is_zero() for row in nf.C for c in row)
    assert is_normal_linear(s)


def test_triangular_needs_one_polylinear():
    s = sys2(1, [[{(0,): 1}, {(0,): 1}], [{}, {(0,): 2}]])
    cert, nf, final = turrittin_reduce(s)
    kinds = [type(t).__name__ for t in cert.transformations()]
    assert kinds == ["PolyLinear"]
    assert nf.p == 1
    vals = sorted([complex(nf.D[0].coefficient((0,))).real,
                   complex(nf.D[1].coefficient((0,))).real])
    assert vals == [1.0, 2.0]


def test_nilpotent_leading_shearing_and_ramification():
    # x^2 y' = [[0, 1], [x, 0]] y: fractional slope forces a ramification
    s = sys2(1, [[{}, {(0,): 1}], [{(1,): 1}, {}]], order=24)
    cert, nf, final = turrittin_reduce(s)
    assert any(isinstance(t, Ramify) for t in cert.transformations())
    validate_normal_form(nf)
    assert nf.p >= 1
    # replay: events applied to the input reproduce the working matrix plus
    # the ledger re-add (the assembled true matrix), exactly
    replayed = replay(s, cert.events)
    assert replayed.q == final.q
    true_final = assembled_true_matrix(final, cert)
    n = min(replayed.order, final.order)
    for i in range(final.dim):
        for j in range(final.dim):
            a = replayed.B[i][j]
            b = true_final[i][j]
            assert a.truncate(min(a.order, n)).equal_terms(
                b.truncate(min(b.order, n)))


def test_scalar_ledger_single_block():
    # x^3 y' = (1 + x + x^2 + x^3) y: already principal for m = 1
    s = sys2(2, [[{(0,): 1, (1,): 1, (2,): 1, (3,): 1}]])
    cert, nf, final = turrittin_reduce(s)
    assert cert.transformations() == []
    assert nf.p == 2
    d = nf.D[0]
    assert d.coefficient((0,)) == GaussianRational(1)
    assert d.coefficient((1,)) == GaussianRational(1)
    assert nf.C[0][0] == GaussianRational(1)


def test_rank_reduction_by_shearing():
    # constant nilpotent matrix: regular singular after one shearing
    s = sys2(1, [[{}, {(0,): 1}], [{}, {}]], order=12)
    cert, nf, final = turrittin_reduce(s)
    assert nf.p == 0
    assert any(not c.is_zero() for row in nf.C for c in row)
    shearings = [t for t in cert.transformations() if isinstance(t, Shearing)]
    assert shearings


def test_mixed_two_block_system():
    # leading diag(1, 1, 2): splits into a 2x2 (single eigenvalue) + 1x1
    rows = [[{(0,): 1}, {(1,): 1}, {(0,): 1}],
            [{}, {(0,): 1, (1,): 1}, {(1,): -1}],
            [{}, {}, {(0,): 2}]]
    s = system_from_terms(2, rows, 20)
    cert, nf, final = turrittin_reduce(s)
    validate_normal_form(nf)
    replayed = replay(s, cert.events)
    true_final = assembled_true_matrix(final, cert)
    n = min(replayed.order, final.order)
    for i in range(3):
        for j in range(3):
            lhs = replayed.B[i][j].truncate(min(replayed.B[i][j].order, n))
            rhs = true_final[i][j]
            assert lhs.equal_terms(rhs.truncate(min(rhs.order, n)))


def random_splittable_system(rng, m, q, order=24):
    """Leading matrix built with rational eigenvalues (integer conjugation
    of a diagonal or nilpotent model) plus small higher-order noise."""
    diag = [Fraction(rng.randint(-2, 2)) for _ in range(m)]
    nilpotent = rng.random() < 0.4
    base = [[Fraction(0)] * m for _ in range(m)]
    for i in range(m):
        base[i][i] = Fraction(0) if nilpotent else diag[i]
        if i + 1 < m and rng.random() < 0.6:
            base[i][i + 1] = Fraction(1)
    rows = []
    for i in range(m):
        row = []
        for j in range(m):
            terms = {}
            if base[i][j]:
                terms[(0,)] = base[i][j]
            for d in range(1, 3):
                if rng.random() < 0.35:
                    terms[(d,)] = Fraction(rng.randint(-2, 2))
            row.append(terms)
        rows.append(row)
    return system_from_terms(q, rows, order)


def test_replay_soundness_randomized():
    from paracurve.errors import PrecisionError
    rng = random.Random(77)
    count = 0
    for _ in range(16):
        m = rng.choice([1, 2, 2, 3])
        q = rng.choice([1, 2])
        s = random_splittable_system(rng, m, q)
        if s.is_zero():
            continue
        try:
            cert, nf, final = turrittin_reduce(s)
        except (DegenerateSystemError, NotInFormError, PrecisionError):
            continue
        validate_normal_form(nf)
        count += 1
        replayed = replay(s, cert.events)
        assert replayed.q == final.q
        true_final = assembled_true_matrix(final, cert)
        n = min(replayed.order, final.order)
        for i in range(m):
            for j in range(m):
                a = replayed.B[i][j]
                b = true_final[i][j]
                assert a.truncate(min(a.order, n)).equal_terms(
                    b.truncate(min(b.order, n)))
        # rank monotonicity across recorded shearings
        state = s
        for t in cert.events:
            before = state.q
            state = apply_T(state, t)
            if isinstance(t, Shearing):
                assert state.q <= before
    assert count >= 6


def test_normal_form_full_matrix_roundtrip():
    s = diag_system(1, {(0,): 1, (1,): 5}, {(0,): 2})
    cert, nf, final = turrittin_reduce(s)
    full = nf.full_matrix(final.order, final.backend)
    true_final = assembled_true_matrix(final, cert)
    for i in range(2):
        for j in range(2):
            n = min(full[i][j].order, true_final[i][j].order)
            assert full[i][j].truncate(n).equal_terms(true_final[i][j].truncate(n))
