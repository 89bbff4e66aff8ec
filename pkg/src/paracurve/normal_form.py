"""Full reduction pipeline: curve-following blow-ups to a prepared form,
the associated linear system, realization of its reduction as permissible
steps, and extraction of the principal normal-form data for fields and
tangent-to-identity maps.

Coordinate convention: after adaptation, variable 0 is the distinguished
coordinate x (the exceptional divisor is {x = 0}), variables 1..n-1 are the
transverse block y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .blowups import (BlowUp, Center, CoordChange, Ramification,
                      TransformSequence, is_permissible, punctual_center,
                      transform_curve, transform_field, transform_map)
from .curves import (CurveParam, check_invariance_field, multiplicity,
                     normalize_irreducible, tangent_line, to_puiseux)
from .errors import (BudgetError, NotInFormError, PreconditionError,
                     StructureError)
from .gaussrat import as_gaussian
from .jets import EXACT, Jet, JetTuple, identity_tuple
from .liealg import FormalField, FormalMap, log_map
from .seriesops import compositional_inverse, invert_unit
from .turrittin import (LinearSystem, PolyLinear, Ramify, Shearing, Strip,
                        jets_mat_inverse, jets_mat_mul, turrittin_reduce)

STAGE_CAP = 64


# -- shape containers ---------------------------------------------------------------

@dataclass(frozen=True)
class PreparedField:
    """x^l [ x^(q+1) u(x,y) d/dx + (c(x) + A(x) y + Theta(x,y)) d/dy ]
    with u(0,0) != 0, c(0) = 0, A(0) != 0."""

    l: int
    q: int
    u: Jet                  # multivariate, unit
    c: tuple                # univariate jets, one per transverse variable
    A: tuple                # matrix of univariate jets
    Theta: tuple            # multivariate jets, y-order >= 2
    nvars: int
    source: FormalField     # the prepared field these parts decompose

    def reassemble(self, order, backend=EXACT):
        n = self.nvars
        x = Jet.variable(0, n, order, backend)
        xl = x ** self.l
        comps = [_cap((x ** (self.l + self.q + 1)) * self.u, order)]
        for j in range(n - 1):
            inner = _lift_univariate(self.c[j], n, order, backend)
            for t in range(n - 1):
                yt = Jet.variable(1 + t, n, order, backend)
                inner = inner + _cap(_lift_univariate(
                    self.A[j][t], n, order, backend) * yt, order)
            inner = inner + _cap(self.Theta[j], order)
            comps.append(_cap(xl * inner, order))
        return FormalField(comps)


@dataclass(frozen=True)
class FieldNormalForm:
    """x^k [ x^(p+1) u d/dx + (c + (D(x) + x^p C + O(x^(p+1))) y
    + O(|y|^2)) d/dy ]."""

    k: int
    p: int
    u: Jet
    c: tuple                # univariate jets
    D: tuple                # diagonal univariate polynomial jets
    C: tuple                # constant matrix
    nvars: int
    field: FormalField      # the reduced field itself


@dataclass(frozen=True)
class MapNormalForm:
    """F = (x + lam x^(k+p+1)(1 + psi), y + x^k [b(x) + (D(x) + x^p C
    + x^(p+1) A(x)) y + O(|y|^2)])."""

    k: int
    p: int
    lam: object             # nonzero coefficient
    psi: Jet
    b: tuple
    D: tuple
    C: tuple
    nvars: int
    mapping: FormalMap

    def saddle_entries(self):
        """(leading coefficient, valuation) for each nonzero diagonal entry."""
        out = []
        for d in self.D:
            if d.is_zero():
                out.append(None)
            else:
                nu = d.min_degree()
                out.append((d.coefficient((nu,)), nu))
        return out


@dataclass(frozen=True)
class ContactOrder:
    l: int


def _cap(j: Jet, order):
    return j.truncate(min(j.order, order))


def _lift_univariate(j: Jet, nvars, order, backend):
    terms = {}
    for e, c in j.items():
        key = (e[0],) + (0,) * (nvars - 1)
        terms[key] = c
    return Jet(nvars, min(order, j.order), backend, terms)


def _restrict_yfree(j: Jet):
    """Univariate jet of the y-free part (y set to zero)."""
    terms = {}
    for e, c in j.items():
        if all(v == 0 for v in e[1:]):
            terms[(e[0],)] = c
    return Jet(1, j.order, j.backend, terms, _normalized=True)


def _linear_coefficient(j: Jet, t):
    """Univariate coefficient jet of y_t (terms x^i y_t exactly)."""
    terms = {}
    for e, c in j.items():
        if e[1 + t] == 1 and sum(e[1:]) == 1:
            terms[(e[0],)] = c
    return Jet(1, max(j.order - 1, 0), j.backend, terms, _normalized=True)


def _ydegree2_part(j: Jet):
    terms = {e: c for e, c in j.items() if sum(e[1:]) >= 2}
    return Jet(j.nvars, j.order, j.backend, terms, _normalized=True)


def _xval(j: Jet):
    if j.is_zero():
        return math.inf
    return j.valuation_in_var(0)


# -- prenormalization -----------------------------------------------------------------

def _graph_form(curve: CurveParam) -> CurveParam:
    """Reparametrize so the first component is exactly the parameter."""
    g0 = curve.gamma[0]
    if g0.min_degree() != 1:
        raise PreconditionError("curve is not transversal to {x = 0}")
    s = Jet.variable(0, 1, g0.order, curve.backend)
    if g0.equal_terms(s):
        return curve
    sigma = compositional_inverse(g0)
    return CurveParam([g.compose([sigma]) for g in curve.gamma],
                      irreducible=curve.irreducible)


def _puiseux_changes_to_steps(changes, nvars, order, backend):
    steps = []
    for ch in changes:
        fwd = []
        inv = []
        for i in range(nvars):
            fwd.append(Jet.variable(i, nvars, order, backend))
            inv.append(Jet.variable(i, nvars, order, backend))
        if ch.kind == "swap":
            a, b = ch.data
            fwd[a], fwd[b] = fwd[b], fwd[a]
            inv[a], inv[b] = inv[b], inv[a]
        elif ch.kind == "scale":
            idx, factor = ch.data
            fwd[idx] = fwd[idx].scale(factor)
            inv[idx] = inv[idx].scale(
                factor.inverse() if backend == EXACT else 1.0 / factor)
        steps.append(CoordChange(JetTuple(fwd), JetTuple(inv), label=ch.kind))
    return steps


def _aligned_punctual_step(curve: CurveParam) -> BlowUp:
    tangent = list(tangent_line(curve))
    backend = curve.backend
    pivot = None
    for i, t in enumerate(tangent):
        nz = (not t.is_zero()) if backend == EXACT else abs(t) > 0
        if nz:
            pivot = i
            break
    tp = tangent[pivot]
    shift = []
    for i, t in enumerate(tangent):
        if i == pivot:
            continue
        shift.append(t / tp if backend == EXACT else t / tp)
    n = curve.nvars
    return BlowUp(punctual_center(n), pivot, tuple(shift))


def _resolve_curve(X: FormalField, curve: CurveParam, seq: TransformSequence):
    """Stage A: blow up points until the curve is non-singular, meets a
    single divisor component, and is transversal to it."""
    for _ in range(STAGE_CAP):
        curve = normalize_irreducible(curve)
        m = multiplicity(curve)
        divisor = seq.total_divisor()
        tangent = list(tangent_line(curve))
        backend = curve.backend

        def tangent_nonzero(i):
            t = tangent[i]
            return (not t.is_zero()) if backend == EXACT else abs(t) > 0

        good = m == 1 and len(divisor) <= 1
        if good and divisor:
            good = tangent_nonzero(next(iter(divisor)))
        if good:
            return X, curve
        step = _aligned_punctual_step(curve)
        res = is_permissible(X, curve, step.center)
        if not res.permissible:
            raise PreconditionError(
                f"curve-resolution blow-up not permissible: {res.clause}")
        seq.append(step)
        X = transform_field(X, step)
        curve = transform_curve(curve, step)
        if X.order < 2:
            raise BudgetError("curve resolution exhausted the budget",
                              required_order=2 * curve.order)
    raise BudgetError("curve resolution did not terminate", required_order=None)


def _permute_to_front(var, nvars, order, backend):
    fwd = [Jet.variable(i, nvars, order, backend) for i in range(nvars)]
    inv = [Jet.variable(i, nvars, order, backend) for i in range(nvars)]
    fwd[0], fwd[var] = fwd[var], fwd[0]
    inv[0], inv[var] = inv[var], inv[0]
    return CoordChange(JetTuple(fwd), JetTuple(inv), label="swap")


@dataclass(frozen=True)
class _ReadState:
    e: int            # min x-valuation over all components
    early_exit: bool  # divided field non-singular (x-component unit)
    l: int | None
    q: int | None
    v_c: float
    v_A: float
    v_T: float
    v_pure: float
    k_a: float


def _read_state(X: FormalField) -> _ReadState:
    n = X.nvars
    a = X.components[0]
    k_a = _xval(a)
    pure_a = _restrict_yfree(a)
    v_pure = _xval(pure_a)
    vals_c, vals_A, vals_T = [], [], []
    for j in range(1, n):
        comp = X.components[j]
        vals_c.append(_xval(_restrict_yfree(comp)))
        va = math.inf
        for t in range(n - 1):
            va = min(va, _xval(_linear_coefficient(comp, t)))
        vals_A.append(va)
        vals_T.append(_xval(_ydegree2_part(comp)))
    v_c = min(vals_c) if vals_c else math.inf
    v_A = min(vals_A) if vals_A else math.inf
    v_T = min(vals_T) if vals_T else math.inf
    e_all = min([k_a, v_c, v_A, v_T])
    early = v_pure == e_all and v_pure is not math.inf
    l = min(v_c, v_A, v_T)
    q = None
    if l is not math.inf and v_pure is not math.inf:
        q = int(v_pure) - int(l) - 1
    return _ReadState(e_all if e_all is not math.inf else 0, early,
                      None if l is math.inf else int(l), q,
                      v_c, v_A, v_T, v_pure, k_a)


def _try_read_prepared(X: FormalField) -> PreparedField | None:
    st = _read_state(X)
    if st.l is None or st.v_pure is math.inf:
        return None
    if st.k_a != st.v_pure:
        return None                      # u(0,0) would vanish
    if st.v_A != st.l:
        return None                      # A(0) would vanish
    if st.q is None or st.q < 0:
        return None
    n = X.nvars
    l, q = st.l, st.q
    u = X.components[0].divide_by_var(0, l + q + 1)
    c = []
    A = []
    Theta = []
    for j in range(1, n):
        comp = X.components[j]
        c.append(_restrict_yfree(comp).divide_by_var(0, l)
                 if not _restrict_yfree(comp).is_zero()
                 else _restrict_yfree(comp).truncate(max(comp.order - l, 0)))
        row = []
        for t in range(n - 1):
            lin = _linear_coefficient(comp, t)
            row.append(lin.divide_by_var(0, l) if not lin.is_zero()
                       else lin.truncate(max(lin.order - l, 0)))
        A.append(tuple(row))
        th = _ydegree2_part(comp)
        Theta.append(th.divide_by_var(0, l) if not th.is_zero()
                     else th.truncate(max(th.order - l, 0)))
    return PreparedField(l, q, u, tuple(c), tuple(A), tuple(Theta), n, X)


def _recenter_step(curve: CurveParam, nvars, order, backend, upto=None):
    """Translation y -> y - J_upto(curve graph).  The curve must be in graph
    form (first component = parameter)."""
    fwd = [Jet.variable(0, nvars, order, backend)]
    inv = [Jet.variable(0, nvars, order, backend)]
    for j in range(1, nvars):
        g = curve.gamma[j]
        if upto is not None:
            g = Jet(1, g.order, backend,
                    {e: c for e, c in g.items() if e[0] <= upto},
                    _normalized=True)
        Q = _lift_univariate(g, nvars, order, backend)
        v = Jet.variable(j, nvars, order, backend)
        fwd.append(v - Q)
        inv.append(v + Q)
    return CoordChange(JetTuple(fwd), JetTuple(inv), label="recenter")


def _early_exit_form(X: FormalField, curve: CurveParam,
                     seq: TransformSequence):
    """Divided field is non-singular: one more aligned punctual blow-up
    lands in the p = 0 shape directly."""
    step = _aligned_punctual_step(curve)
    res = is_permissible(X, curve, step.center)
    if not res.permissible:
        raise PreconditionError(
            f"early-exit blow-up not permissible: {res.clause}")
    seq.append(step)
    X = transform_field(X, step)
    curve = transform_curve(curve, step)
    return X, curve


def prenormalize(X: FormalField, curve: CurveParam):
    """Reduce (field, curve) to the prepared shape by permissible punctual
    blow-ups and translations.

    Returns (sequence, PreparedField or FieldNormalForm, curve): a
    FieldNormalForm is returned on the non-singular early exit.
    """
    n = X.nvars
    if n < 2:
        raise PreconditionError("the pipeline needs at least two variables")
    inv = check_invariance_field(X, curve)
    if not inv.invariant:
        raise PreconditionError("curve is not invariant for the field")
    if inv.h is not None and inv.h.is_zero():
        raise PreconditionError(
            "curve lies in the singular locus of the field")
    seq = TransformSequence()
    changes, curve = to_puiseux(curve)
    steps = _puiseux_changes_to_steps(changes, n, X.order, X.backend)
    for s in steps:
        seq.append(s)
        X = transform_field(X, s)
    X, curve = _resolve_curve(X, curve, seq)
    divisor = seq.total_divisor()
    if divisor:
        front = next(iter(divisor))
    else:
        tangent = list(tangent_line(curve))
        backend = curve.backend
        front = next(i for i, t in enumerate(tangent)
                     if ((not t.is_zero()) if backend == EXACT else abs(t) > 0))
    if front != 0:
        step = _permute_to_front(front, n, X.order, X.backend)
        seq.append(step)
        X = transform_field(X, step)
        curve = transform_curve(curve, step)
    curve = _graph_form(curve)
    for _ in range(STAGE_CAP):
        st = _read_state(X)
        if st.early_exit:
            X, curve = _early_exit_form(X, curve, seq)
            nf = read_field_form(X)
            return seq, nf, curve
        prep = _try_read_prepared(X)
        if prep is not None:
            return seq, prep, curve
        if st.v_c < st.v_A:
            # the drift dominates: recenter on the curve graph
            step = _recenter_step(curve, n, X.order, X.backend)
            seq.append(step)
            X = transform_field(X, step)
            curve = transform_curve(curve, step)
            curve = _graph_form(curve)
            continue
        # a blow-up raises the x-weight of every monomial of positive
        # y-degree; aligned with the current tangent
        step = _aligned_punctual_step(curve)
        res = is_permissible(X, curve, step.center)
        if not res.permissible:
            raise PreconditionError(
                f"preparation blow-up not permissible: {res.clause}")
        seq.append(step)
        X = transform_field(X, step)
        curve = transform_curve(curve, step)
        curve = _graph_form(curve)
        if X.order < 3:
            raise BudgetError("preparation exhausted the budget",
                              required_order=2 * curve.order)
    raise BudgetError("preparation did not stabilize", required_order=None)


# -- reading the principal form off a field / map --------------------------------------

def read_field_form(X: FormalField) -> FieldNormalForm:
    """Pattern-match the principal field shape and extract its data."""
    n = X.nvars
    if n < 2:
        raise NotInFormError("needs a transverse block")
    lin_vals = []
    for j in range(1, n):
        for t in range(n - 1):
            lin_vals.append(_xval(_linear_coefficient(X.components[j], t)))
    k = min(lin_vals) if lin_vals else math.inf
    if k is math.inf:
        raise NotInFormError("transverse linear part vanishes to the budget")
    k = int(k)
    a = X.components[0]
    pure = _restrict_yfree(a)
    v_pure = _xval(pure)
    if v_pure is math.inf:
        raise NotInFormError("distinguished component has no pure part")
    if _xval(a) != v_pure:
        raise NotInFormError("distinguished component is not a unit multiple "
                             "of a power of x")
    p = int(v_pure) - k - 1
    if p < 0:
        raise NotInFormError("principal exponents are negative")
    u = a.divide_by_var(0, int(v_pure))
    c = []
    M = []
    for j in range(1, n):
        comp = X.components[j]
        cj = _restrict_yfree(comp)
        if not cj.is_zero() and _xval(cj) < k:
            raise NotInFormError("drift sits below the transverse order")
        c.append(cj.divide_by_var(0, k) if not cj.is_zero()
                 else cj.truncate(max(cj.order - k, 0)))
        row = []
        for t in range(n - 1):
            lin = _linear_coefficient(comp, t)
            row.append(lin.divide_by_var(0, k) if not lin.is_zero()
                       else lin.truncate(max(lin.order - k, 0)))
        M.append(row)
    D, C = _split_principal_matrix(M, p, X.backend)
    nf = FieldNormalForm(k, p, u, tuple(c), D, C, n, X)
    _validate_principal(D, C, p, X.backend)
    return nf


def _split_principal_matrix(M, p, backend):
    m = len(M)
    D = []
    C = []
    for i in range(m):
        d_terms = {}
        crow = []
        for j in range(m):
            e = M[i][j]
            cij = e.coefficient((p,))
            crow.append(cij)
            if i == j:
                d_terms = {ex: cc for ex, cc in e.items() if ex[0] < p}
            else:
                low = {ex: cc for ex, cc in e.items() if ex[0] < p}
                if low:
                    raise NotInFormError(
                        "off-diagonal entry below the principal order")
        D.append(Jet(1, M[i][i].order, backend, d_terms, _normalized=True))
        C.append(tuple(crow))
    return tuple(D), tuple(C)


def _validate_principal(D, C, p, backend):
    m = len(D)
    zero = (lambda v: v.is_zero()) if backend == EXACT else (lambda v: abs(v) < 1e-9)
    if p == 0:
        if all(zero(C[i][j]) for i in range(m) for j in range(m)):
            raise NotInFormError("p = 0 with vanishing constant matrix")
        return
    if all(d.is_zero() or zero(d.constant_term()) for d in D):
        raise NotInFormError("diagonal part vanishes at the origin")
    for i in range(m):
        for j in range(m):
            if i != j and not zero(C[i][j]) and not D[i].equal_terms(D[j]):
                raise NotInFormError(
                    "constant matrix does not commute with the diagonal part")


def detect_map_form(F: FormalMap) -> MapNormalForm:
    """Pattern-match the principal map shape, extracting every field and
    validating the invariants (commutation included)."""
    n = F.nvars
    if n < 2:
        raise NotInFormError("needs a transverse block")
    disp = list(F.displacement())
    lin_vals = []
    for j in range(1, n):
        for t in range(n - 1):
            lin_vals.append(_xval(_linear_coefficient(disp[j], t)))
    k = min(lin_vals) if lin_vals else math.inf
    if k is math.inf:
        raise NotInFormError("transverse linear displacement vanishes")
    k = int(k)
    if k < 1:
        raise NotInFormError("transverse order must be at least one")
    dx = disp[0]
    pure = _restrict_yfree(dx)
    v_pure = _xval(pure)
    if v_pure is math.inf:
        raise NotInFormError("distinguished displacement has no pure part")
    if _xval(dx) < v_pure:
        raise NotInFormError("distinguished displacement not divisible by "
                             "its pure order")
    p = int(v_pure) - k - 1
    if p < 0:
        raise NotInFormError("principal exponents are negative")
    lam = pure.coefficient((int(v_pure),))
    unit = dx.divide_by_var(0, int(v_pure))
    lam_inv = lam.inverse() if F.backend == EXACT else 1.0 / lam
    psi = unit.scale(lam_inv) - 1
    b = []
    M = []
    for j in range(1, n):
        comp = disp[j]
        cj = _restrict_yfree(comp)
        if not cj.is_zero() and _xval(cj) < k:
            raise NotInFormError("drift sits below the transverse order")
        b.append(cj.divide_by_var(0, k) if not cj.is_zero()
                 else cj.truncate(max(cj.order - k, 0)))
        row = []
        for t in range(n - 1):
            lin = _linear_coefficient(comp, t)
            if not lin.is_zero() and _xval(lin) < k:
                raise NotInFormError("linear part below the transverse order")
            row.append(lin.divide_by_var(0, k) if not lin.is_zero()
                       else lin.truncate(max(lin.order - k, 0)))
        M.append(row)
    for bj in b:
        ct = bj.constant_term()
        nz = (not ct.is_zero()) if F.backend == EXACT else abs(ct) > 1e-12
        if nz:
            raise NotInFormError("drift does not vanish at the origin")
    D, C = _split_principal_matrix(M, p, F.backend)
    _validate_principal(D, C, p, F.backend)
    return MapNormalForm(k, p, lam, psi, tuple(b), D, C, n, F)


def exp_relation_defect(mnf: MapNormalForm, fnf: FieldNormalForm):
    """Defect of I + x^k (D + x^p C) = J_{k+p} exp(x^k (D_gen + x^p C_gen)):
    a matrix of univariate jets, zero exactly when the relation holds."""
    k, p = mnf.k, mnf.p
    order = k + p
    backend = mnf.mapping.backend
    m = mnf.nvars - 1
    # argument N = x^k (D_gen + x^p C_gen)
    N = []
    for i in range(m):
        row = []
        for j in range(m):
            entry = Jet.zero(1, order, backend)
            if i == j and not fnf.D[i].is_zero():
                entry = entry + fnf.D[i].with_order(order).mul_by_var(0, k).truncate(order)
            cij = fnf.C[i][j]
            nz = (not cij.is_zero()) if backend == EXACT else abs(cij) > 0
            if nz and k + p <= order:
                entry = entry + Jet.from_terms({(k + p,): cij}, 1, order, backend)
            row.append(entry.truncate(order))
        N.append(row)
    # exp(N), truncated at degree k+p (terminates: N has valuation >= k >= 1)
    acc = [[Jet.constant(1 if i == j else 0, 1, order, backend)
            for j in range(m)] for i in range(m)]
    term = [row[:] for row in acc]
    fact = 1
    jmax = (order // max(k, 1)) + 1
    for jj in range(1, jmax + 1):
        term = jets_mat_mul(term, N, order=order)
        fact *= jj
        scaled = [[e.scale(as_gaussian(Fraction(1, fact)) if backend == EXACT
                           else 1.0 / fact) for e in row] for row in term]
        acc = [[(a.truncate(min(a.order, order)) + s.truncate(min(s.order, order)))
                for a, s in zip(ra, rs)] for ra, rs in zip(acc, scaled)]
    # left side: I + x^k D + x^{k+p} C
    defects = []
    for i in range(m):
        row = []
        for j in range(m):
            lhs = Jet.constant(1 if i == j else 0, 1, order, backend)
            if i == j and not mnf.D[i].is_zero():
                lhs = lhs + mnf.D[i].with_order(order).mul_by_var(0, k).truncate(order)
            cij = mnf.C[i][j]
            nz = (not cij.is_zero()) if backend == EXACT else abs(cij) > 0
            if nz:
                lhs = lhs + Jet.from_terms({(k + p,): cij}, 1, order, backend)
            row.append((lhs - acc[i][j].truncate(min(acc[i][j].order, order)))
                       .truncate(order))
        defects.append(row)
    return defects


# -- associated linear system -----------------------------------------------------------

def associated_system(prep: PreparedField, gammabar) -> LinearSystem:
    """Linear system along the curve graph: x^(q+1) w' = u(x, g(x))^{-1}
    A^(x) w with A^ the transverse linear part after centering on the graph."""
    n = prep.nvars
    m = n - 1
    backend = prep.u.backend
    order = min([prep.u.order]
                + [g.order for g in gammabar]
                + [e.order for row in prep.A for e in row]
                + [c.order for c in prep.c])
    inner = _inner_field(prep, order, backend)
    step = _recenter_from_graph(gammabar, n, order, backend)
    conj = transform_field(inner, step)
    A_hat = []
    for j in range(1, n):
        row = []
        for t in range(m):
            row.append(_linear_coefficient(conj.components[j], t))
        A_hat.append(row)
    s = Jet.variable(0, 1, order, backend)
    args = [s] + [g.truncate(min(g.order, order)) for g in gammabar]
    u_gamma = prep.u.compose(args)
    u_inv = invert_unit(u_gamma)
    B = [[(u_inv * e).truncate(min((u_inv * e).order, order)) for e in row]
         for row in A_hat]
    return LinearSystem(prep.q, B)


def _inner_field(prep: PreparedField, order, backend):
    n = prep.nvars
    x = Jet.variable(0, n, order, backend)
    comps = [_cap((x ** (prep.q + 1)) * prep.u, order)]
    for j in range(n - 1):
        inner = _lift_univariate(prep.c[j], n, order, backend)
        for t in range(n - 1):
            yt = Jet.variable(1 + t, n, order, backend)
            inner = inner + _cap(_lift_univariate(prep.A[j][t], n, order,
                                                  backend) * yt, order)
        inner = inner + _cap(prep.Theta[j], order)
        comps.append(inner)
    return FormalField(comps)


def _recenter_from_graph(gammabar, nvars, order, backend):
    fwd = [Jet.variable(0, nvars, order, backend)]
    inv = [Jet.variable(0, nvars, order, backend)]
    for j in range(1, nvars):
        Q = _lift_univariate(gammabar[j - 1], nvars, order, backend)
        v = Jet.variable(j, nvars, order, backend)
        fwd.append(v - Q)
        inv.append(v + Q)
    return CoordChange(JetTuple(fwd), JetTuple(inv), label="recenter")


# -- realizing the linear certificate as permissible steps ------------------------------

def _poly_linear_to_change(P, nvars, order, backend):
    """y = P(x) y~ as a coordinate change (new = P^{-1} old)."""
    m = nvars - 1
    Pinv = jets_mat_inverse([list(r) for r in P], order)
    fwd = [Jet.variable(0, nvars, order, backend)]
    inv = [Jet.variable(0, nvars, order, backend)]
    for j in range(m):
        acc_f = Jet.zero(nvars, order, backend)
        acc_i = Jet.zero(nvars, order, backend)
        for t in range(m):
            yt = Jet.variable(1 + t, nvars, order, backend)
            acc_f = acc_f + (_lift_univariate(Pinv[j][t], nvars, order, backend)
                             * yt).truncate(order)
            acc_i = acc_i + (_lift_univariate(P[j][t], nvars, order, backend)
                             * yt).truncate(order)
        fwd.append(acc_f)
        inv.append(acc_i)
    return CoordChange(JetTuple(fwd), JetTuple(inv), label="gauge")


def _realize_certificate(tlist, X, curve, seq, nvars, backend):
    """Translate the linear certificate into permissible steps and apply
    them; shearings become codimension-two blow-ups, greedily ordered so
    every intermediate center stays permissible."""
    for t in tlist:
        if isinstance(t, Strip):
            continue
        if isinstance(t, PolyLinear):
            step = _poly_linear_to_change(t.P, nvars, X.order, backend)
            seq.append(step)
            X = transform_field(X, step)
            curve = transform_curve(curve, step)
            curve = _graph_form(curve)
            continue
        if isinstance(t, Ramify):
            if t.alpha == 1:
                continue
            step = Ramification(t.alpha, 0)
            seq.append(step)
            X = transform_field(X, step)
            curve = transform_curve(curve, step)
            continue
        if isinstance(t, Shearing):
            remaining = list(t.exponents)
            total = sum(remaining)
            for _ in range(total):
                progressed = False
                for j in range(len(remaining)):
                    if remaining[j] == 0:
                        continue
                    center = Center((0, 1 + j))
                    res = is_permissible(X, curve, center)
                    if not res.permissible:
                        continue
                    step = BlowUp(center, 0, (0,))
                    seq.append(step)
                    X = transform_field(X, step)
                    curve = transform_curve(curve, step)
                    remaining[j] -= 1
                    progressed = True
                    break
                if not progressed:
                    raise BudgetError(
                        "no permissible order for the shearing blow-ups",
                        required_order=2 * X.order)
            continue
        raise StructureError(f"unknown linear certificate entry {t!r}")
    return X, curve


def _certificate_erosion(tlist):
    e = 0
    for t in tlist:
        if isinstance(t, Shearing):
            e += sum(t.exponents)
    return e


def _ramification_product(tlist):
    beta = 1
    for t in tlist:
        if isinstance(t, Ramify):
            beta *= t.alpha
    return beta


# -- the top-level reductions -------------------------------------------------------------

def reduce_field(X: FormalField, curve: CurveParam, _retries: int = 3):
    """Reduction of (field, curve) to the principal normal form.

    Returns (TransformSequence, FieldNormalForm, transformed curve).
    """
    if not X.is_singular():
        raise PreconditionError("field must vanish at the origin")
    inv = check_invariance_field(X, curve)
    if not inv.invariant:
        raise PreconditionError("curve is not invariant for the field")
    if inv.h is not None and inv.h.is_zero():
        raise PreconditionError("curve lies in the singular locus of the field")
    nu0 = X.multiplicity()
    mult = multiplicity(normalize_irreducible(curve))
    need = 4 * ((0 if nu0 is math.inf else nu0) + mult)
    if X.order < need:
        raise BudgetError("input truncation below the pipeline threshold",
                          required_order=need)
    seq, prep, curve_t = prenormalize(X, curve)
    if isinstance(prep, FieldNormalForm):
        return seq, prep, curve_t
    X_prep = prep.source
    if prep.q == 0:
        nf = read_field_form(X_prep)
        return seq, nf, curve_t
    gammabar = [curve_t.gamma[j] for j in range(1, X.nvars)]
    linsys = associated_system(prep, gammabar)
    cert, nf_lin, _final_lin = turrittin_reduce(linsys)
    tlist = cert.transformations()
    if not tlist:
        nf = read_field_form(X_prep)
        return seq, nf, curve_t
    beta = _ramification_product(tlist)
    kp_pred = beta * (prep.l + prep.q)
    E0 = _certificate_erosion(tlist)
    M = kp_pred + 2 + E0
    m_order = M + 2
    last_err = None
    for attempt in range(_retries):
        try:
            return _reduce_with_conjugations(X_prep, curve_t, seq, tlist,
                                             M, m_order, kp_pred)
        except (BudgetError, NotInFormError) as err:
            last_err = err
            M *= 2
            m_order = M + 2
    raise BudgetError(f"reduction failed after retries: {last_err}",
                      required_order=2 * X.order)


def _prep_order(seq, X):
    order = X.order
    for s in seq:
        if isinstance(s, BlowUp):
            order -= 1
    return max(order, 1)


def _reduce_with_conjugations(X, curve, seq_done, tlist, M, m_order, kp_pred):
    """phi_m (graph recentering to order m), psi_M (M aligned punctual
    blow-ups), then the realized linear certificate."""
    n = X.nvars
    backend = X.backend
    seq = TransformSequence(list(seq_done.steps))
    if X.order < kp_pred + M + 3:
        raise BudgetError("budget too small for the conjugation ladder",
                          required_order=kp_pred + M + 3)
    step = _recenter_step(curve, n, X.order, backend, upto=m_order)
    seq.append(step)
    X = transform_field(X, step)
    curve = transform_curve(curve, step)
    curve = _graph_form(curve)
    for _ in range(M):
        blow = _aligned_punctual_step(curve)
        res = is_permissible(X, curve, blow.center)
        if not res.permissible:
            raise BudgetError(f"scaling blow-up not permissible: {res.clause}",
                              required_order=2 * X.order)
        seq.append(blow)
        X = transform_field(X, blow)
        curve = transform_curve(curve, blow)
    X, curve = _realize_certificate(tlist, X, curve, seq, n, backend)
    nf = read_field_form(X)
    if nf.p == 0:
        m = n - 1
        zero = (lambda v: v.is_zero()) if backend == EXACT \
            else (lambda v: abs(v) < 1e-9)
        if all(zero(nf.C[i][j]) for i in range(m) for j in range(m)):
            # degenerate absorption: the scaling correction cancelled the
            # constant part; rerun the non-singular branch one level down
            X2, curve2 = _early_exit_form(X, curve, seq)
            nf = read_field_form(X2)
            return seq, nf, curve2
    return seq, nf, curve


def reduce_diffeo(F: FormalMap, curve: CurveParam):
    """Reduction of a tangent-to-identity map along an invariant curve.

    Returns (TransformSequence, MapNormalForm, transformed curve); the
    generator commutation, the exponential relation between the principal
    parts, and the fixed-locus shape are all verified on the way out.
    """
    X = log_map(F)
    if X.multiplicity() is math.inf:
        raise PreconditionError("the identity map has no reduction")
    seq, fnf, curve_t = reduce_field(X, curve)
    Ft = seq.apply_map(F)
    mnf = detect_map_form(Ft)
    if mnf.k < 1:
        raise NotInFormError("transverse order must be at least one")
    # generator commutation at the eroded common order
    Xt = seq.apply_field(X)
    lg = log_map(Ft)
    norder = min(lg.order, Xt.order)
    if not lg.truncate(norder).equal_terms(Xt.truncate(norder)):
        raise NotInFormError("generator does not commute with the reduction")
    defects = exp_relation_defect(mnf, fnf)
    for row in defects:
        for d in row:
            if not d.is_zero():
                raise NotInFormError(
                    "principal parts violate the exponential relation")
    _check_fixed_locus(mnf)
    return seq, mnf, curve_t


def _check_fixed_locus(mnf: MapNormalForm):
    F = mnf.mapping
    for j, d in enumerate(F.displacement()):
        if d.is_zero():
            continue
        if d.valuation_in_var(0) < mnf.k:
            raise NotInFormError("fixed locus is smaller than {x = 0}")
    dx = F.displacement()[0]
    pure = _restrict_yfree(dx)
    if pure.is_zero() or _xval(pure) != mnf.k + mnf.p + 1:
        raise NotInFormError("distinguished displacement has the wrong order")


def restricted_dynamics_order(mnf: MapNormalForm, curve: CurveParam) -> int:
    """Order of the one-dimensional restriction to the curve: valuation of
    x o F(gamma(s)) - s; equals k + p + 1."""
    F = mnf.mapping
    gamma = [g.truncate(min(g.order, F.order)) for g in curve.gamma]
    restricted = F.components[0].compose(gamma)
    s = Jet.variable(0, 1, restricted.order, F.backend)
    diff = restricted - s.truncate(restricted.order)
    v = diff.min_degree()
    return None if v is math.inf else int(v)
