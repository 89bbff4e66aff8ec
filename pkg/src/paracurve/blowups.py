"""Permissible transformation calculus: centers, blow-ups, ramifications,
coordinate changes, and replayable certificates.

Only the distinguished chart containing the tracked curve's tangent point is
ever materialized.  A nonzero chart shift (the tangent's coordinates over
the pivot) is folded in as a preliminary shear conjugation, so the blow-up
arithmetic proper is always the monomial substitution: one code path,
certificates stay simple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

from .curves import CurveParam, multiplicity, normalize_irreducible, tangent_line
from .errors import (DivisibilityError, PreconditionError, StructureError)
from .gaussrat import as_gaussian
from .jets import EXACT, Jet, JetTuple
from .liealg import FormalField, FormalMap, apply_field
from .seriesops import divide, invert_unit, substitute_power, unit_root


@dataclass(frozen=True)
class Center:
    """Coordinate-subspace center: the locus where the listed variables
    vanish (after any recorded preliminary coordinate change)."""

    variables: tuple

    def __post_init__(self):
        v = tuple(sorted(set(int(i) for i in self.variables)))
        if not v:
            raise StructureError("center needs at least one defining variable")
        object.__setattr__(self, "variables", v)

    @property
    def codim(self):
        return len(self.variables)

    def zdegree(self, expt):
        return sum(expt[i] for i in self.variables)


def punctual_center(nvars):
    return Center(tuple(range(nvars)))


# -- membership and multiplicity ------------------------------------------------

def is_invariant_center(X: FormalField, Z: Center):
    """X(z_i) in the center ideal for every defining variable, to budget.

    Sufficient for invariance of the full ideal because the defining
    variables generate it and X is a derivation.  Returns (bool, budget).
    """
    budget = X.order
    for i in Z.variables:
        if i >= X.nvars:
            raise StructureError("center variable out of range")
        for e, _ in X.components[i].items():
            if Z.zdegree(e) < 1:
                return False, budget
    return True, budget


def nu_along(X: FormalField, Z: Center) -> int:
    """Multiplicity of X along Z: max l with X(z_i) in I(Z)^l for all
    defining z_i (monomial-wise degree count), capped at the budget."""
    ok, budget = is_invariant_center(X, Z)
    if not ok:
        raise PreconditionError("center is not invariant for the field")
    best = budget + 1
    for i in Z.variables:
        comp = X.components[i]
        if comp.is_zero():
            continue
        best = min(best, min(Z.zdegree(e) for e, _ in comp.items()))
    return best


@dataclass(frozen=True)
class Permissibility:
    permissible: bool
    clause: str | None
    budget: int


def is_permissible(X: FormalField, curve: CurveParam, Z: Center) -> Permissibility:
    """Transversality + invariance + multiplicity along the center at least
    the multiplicity at the origin; names the failed clause."""
    budget = X.order
    tangent = list(tangent_line(curve))
    backend = curve.backend
    transversal = any(
        (not tangent[i].is_zero()) if backend == EXACT else abs(tangent[i]) > 0
        for i in Z.variables)
    if not transversal:
        return Permissibility(False, "transversality", budget)
    ok, budget = is_invariant_center(X, Z)
    if not ok:
        return Permissibility(False, "invariance", budget)
    nu0 = X.multiplicity()
    if nu0 is math.inf:
        return Permissibility(False, "field vanishes to budget", budget)
    if nu_along(X, Z) < nu0:
        return Permissibility(False, "multiplicity along center", budget)
    return Permissibility(True, None, budget)


# -- transformation steps --------------------------------------------------------

@dataclass(frozen=True)
class CoordChange:
    """Invertible polynomial coordinate change; ``forward`` maps new
    coordinates to old ones (substitution tuples), ``inverse`` the reverse."""

    forward: JetTuple
    inverse: JetTuple
    label: str = "change"

    def divisor_update(self, divisor):
        # our changes (shears of non-divisor variables, translations in
        # non-divisor variables, permutations, scalings) either fix each
        # divisor hyperplane or relabel it through a permutation
        out = set()
        for d in divisor:
            comp = self.forward[d]
            # {z_d = 0} in old coordinates = zero set of forward[d]
            lin = [i for i in range(comp.nvars)
                   if not _is_zero_coeff(comp.coefficient(tuple(
                       1 if t == i else 0 for t in range(comp.nvars))), comp.backend)]
            if len(lin) == 1 and len(comp) == 1:
                out.add(lin[0])
            else:
                out.add(d)
        return out


@dataclass(frozen=True)
class BlowUp:
    center: Center
    pivot: int
    shift: tuple   # chart shift for the non-pivot center variables, aligned
                   # with the tracked curve's tangent

    def __post_init__(self):
        if self.pivot not in self.center.variables:
            raise StructureError("pivot must be a defining variable")
        others = [v for v in self.center.variables if v != self.pivot]
        if len(self.shift) != len(others):
            raise StructureError("shift length must be codim - 1")

    @property
    def exceptional_divisor(self):
        return self.pivot

    def shift_map(self):
        others = [v for v in self.center.variables if v != self.pivot]
        return dict(zip(others, self.shift))

    def divisor_update(self, divisor):
        out = {self.pivot}
        shift = self.shift_map()
        for d in divisor:
            if d == self.pivot:
                continue
            if d in shift:
                if _is_zero_coeff_generic(shift[d]):
                    out.add(d)
                # a nonzero shift moves {z_d = 0} off the origin: germ-trivial
            else:
                out.add(d)
        return out


@dataclass(frozen=True)
class Ramification:
    q: int
    variable: int

    def __post_init__(self):
        if self.q < 1:
            raise StructureError("ramification index must be positive")

    @property
    def exceptional_divisor(self):
        return self.variable

    def divisor_update(self, divisor):
        return set(divisor) | ({self.variable} if self.q > 1 else set())


TransformStep = CoordChange | BlowUp | Ramification


def _is_zero_coeff(c, backend):
    return c.is_zero() if backend == EXACT else c == 0


def _is_zero_coeff_generic(c):
    try:
        return c.is_zero()
    except AttributeError:
        return c == 0


# -- substitution helpers --------------------------------------------------------

def _monomial_blowup_subst(jet: Jet, center: Center, pivot: int) -> Jet:
    """Pull back through z_i -> z_pivot * z_i (i in center, i != pivot)."""
    others = [v for v in center.variables if v != pivot]
    terms = {}
    for e, c in jet.items():
        add = sum(e[i] for i in others)
        ne = list(e)
        ne[pivot] += add
        ne = tuple(ne)
        if ne in terms:
            terms[ne] = terms[ne] + c
        else:
            terms[ne] = c
    return Jet(jet.nvars, jet.order, jet.backend, terms)


def _power_subst(jet: Jet, variable: int, q: int) -> Jet:
    """Pull back through z_v -> z_v^q."""
    if q == 1:
        return jet
    terms = {}
    for e, c in jet.items():
        ne = list(e)
        ne[variable] *= q
        terms[tuple(ne)] = c
    return Jet(jet.nvars, jet.order, jet.backend, terms)


def shear_change(nvars, order, backend, pivot, shift_map, sign=1):
    """CoordChange for z_i -> z_i - s_i z_pivot (new from old); ``sign``
    -1 builds the inverse direction."""
    fwd = []
    inv = []
    for i in range(nvars):
        v = Jet.variable(i, nvars, order, backend)
        if i in shift_map and not _is_zero_coeff_generic(shift_map[i]):
            pv = Jet.variable(pivot, nvars, order, backend)
            fwd.append(v - pv.scale(shift_map[i] * sign))
            inv.append(v + pv.scale(shift_map[i] * sign))
        else:
            fwd.append(v)
            inv.append(v)
    return CoordChange(JetTuple(fwd), JetTuple(inv), label="shear")


def apply_change_field(X: FormalField, ch: CoordChange) -> FormalField:
    comps = []
    inv = list(ch.inverse)
    for i in range(X.nvars):
        pushed = apply_field(X, ch.forward[i])
        comps.append(pushed.compose(inv))
    return FormalField(comps)


def apply_change_curve(curve: CurveParam, ch: CoordChange) -> CurveParam:
    gamma = list(curve.gamma)
    comps = [f.compose(gamma) for f in ch.forward]
    return CurveParam(comps, irreducible=curve.irreducible)


def apply_change_map(F: FormalMap, ch: CoordChange) -> FormalMap:
    inner = [c.compose(list(ch.inverse)) for c in F.components]
    comps = [f.compose(inner) for f in ch.forward]
    return FormalMap(comps)


# -- blow-up of fields, curves, maps ----------------------------------------------

def blowup_field(X: FormalField, Z: Center, shift=None, pivot=None,
                 check_multiplicity=True) -> FormalField:
    """Transform of a field under a permissible blow-up (pushforward equals
    the original field); multiplicity never decreases."""
    pivot, shift_map = _resolve_chart(Z, pivot, shift, X.nvars)
    if shift_map:
        X = apply_change_field(
            X, shear_change(X.nvars, X.order, X.backend, pivot, shift_map))
    nu0 = X.multiplicity()
    comps = []
    a_pivot = _monomial_blowup_subst(X.components[pivot], Z, pivot)
    for j in range(X.nvars):
        if j == pivot:
            comps.append(a_pivot)
            continue
        aj = _monomial_blowup_subst(X.components[j], Z, pivot)
        if j in Z.variables:
            zj = Jet.variable(j, X.nvars, aj.order, X.backend)
            num = aj - (zj * a_pivot).truncate(aj.order)
            comps.append(num.divide_by_var(pivot, 1))
        else:
            comps.append(aj)
    out = FormalField(JetTuple(
        c.truncate(min(cc.order for cc in comps)) for c in comps))
    if check_multiplicity and nu0 is not math.inf:
        nu_new = out.multiplicity()
        if nu_new < nu0:
            raise PreconditionError(
                "blow-up lowered the multiplicity: center was not "
                "permissible for the tracked curve")
    return out


def blowup_curve(curve: CurveParam, Z: Center, shift=None, pivot=None) -> CurveParam:
    pivot, shift_map = _resolve_chart(Z, pivot, shift, curve.nvars)
    gamma = list(curve.gamma)
    if shift_map:
        gamma = [g - gamma[pivot].scale(shift_map[i]) if i in shift_map else g
                 for i, g in enumerate(gamma)]
    gp = gamma[pivot]
    vp = gp.min_degree()
    if vp is math.inf:
        raise PreconditionError("pivot component of the curve vanishes")
    out = []
    for j, g in enumerate(gamma):
        if j == pivot or j not in Z.variables:
            out.append(g)
            continue
        if not g.is_zero() and g.min_degree() <= vp:
            raise PreconditionError(
                "curve tangent is not aligned with the blow-up chart")
        out.append(divide(g, gp))
    order = min(g.order for g in out)
    return CurveParam([g.truncate(min(g.order, order)) for g in out],
                      irreducible=curve.irreducible)


def blowup_map(F: FormalMap, Z: Center, shift=None, pivot=None) -> FormalMap:
    pivot, shift_map = _resolve_chart(Z, pivot, shift, F.nvars)
    if shift_map:
        F = apply_change_map(
            F, shear_change(F.nvars, F.order, F.backend, pivot, shift_map))
    comp_pivot = _monomial_blowup_subst(F.components[pivot], Z, pivot)
    den = comp_pivot.divide_by_var(pivot, 1)     # z_P o F o phi = z_P(1 + A)
    den_inv = invert_unit(den)
    comps = []
    for j in range(F.nvars):
        if j == pivot:
            comps.append(comp_pivot)
            continue
        cj = _monomial_blowup_subst(F.components[j], Z, pivot)
        if j in Z.variables:
            num = cj.divide_by_var(pivot, 1)
            comps.append((num * den_inv).truncate(num.order))
        else:
            comps.append(cj)
    order = min(c.order for c in comps)
    return FormalMap([c.truncate(min(c.order, order)) for c in comps])


def _resolve_chart(Z: Center, pivot, shift, nvars):
    others = [v for v in Z.variables if v != (pivot if pivot is not None
                                              else Z.variables[0])]
    if pivot is None:
        pivot = Z.variables[0]
    if pivot >= nvars:
        raise StructureError("pivot out of range")
    others = [v for v in Z.variables if v != pivot]
    if shift is None:
        shift_map = {}
    else:
        shift = list(shift)
        if len(shift) != len(others):
            raise StructureError("shift length must be codim - 1")
        shift_map = {v: s for v, s in zip(others, shift)
                     if not _is_zero_coeff_generic(s)}
    return pivot, shift_map


# -- ramification ------------------------------------------------------------------

def ramify_field(X: FormalField, q: int, variable: int = 0) -> FormalField:
    """Transform of a field under z_v -> z_v^q; requires the hyperplane
    {z_v = 0} to be invariant."""
    if q < 1:
        raise PreconditionError("ramification index must be positive")
    comps = []
    for j, a in enumerate(X.components):
        if j == variable:
            try:
                abar = a.divide_by_var(variable, 1)
            except DivisibilityError as err:
                raise DivisibilityError(
                    "hyperplane is not invariant: ramification impossible",
                    monomial=err.monomial) from err
            sub = _power_subst(abar, variable, q)
            scaled = sub.mul_by_var(variable, 1)
            if X.backend == EXACT:
                from fractions import Fraction
                comps.append(scaled.scale(as_gaussian(Fraction(1, q))))
            else:
                comps.append(scaled.scale(1.0 / q))
        else:
            comps.append(_power_subst(a, variable, q))
    order = min(c.order for c in comps)
    return FormalField([c.truncate(min(c.order, order)) for c in comps])


def ramify_curve(curve: CurveParam, q: int, variable: int = 0) -> CurveParam:
    if q < 1:
        raise PreconditionError("ramification index must be positive")
    gp = curve.gamma[variable]
    s = Jet.variable(0, 1, gp.order, curve.backend)
    if not gp.equal_terms(s):
        raise PreconditionError(
            "ramification needs the curve in graph form with the ramified "
            "component equal to the parameter")
    if q == 1:
        return curve
    comps = []
    for j, g in enumerate(curve.gamma):
        if j == variable:
            comps.append(Jet.variable(0, 1, q * (g.order + 1) - 1, curve.backend))
        else:
            comps.append(substitute_power(g, q))
    order = min(g.order for g in comps)
    return CurveParam([g.truncate(min(g.order, order)) for g in comps],
                      irreducible=curve.irreducible)


def ramify_map(F: FormalMap, q: int, variable: int = 0) -> FormalMap:
    """Transform of a map: the ramified component is the principal q-th
    root of the pulled-back component (binomial series, exact on jets)."""
    if q < 1:
        raise PreconditionError("ramification index must be positive")
    if q == 1:
        return F
    comps = []
    for j, c in enumerate(F.components):
        pulled = _power_subst(c, variable, q)
        if j == variable:
            try:
                unit = pulled.divide_by_var(variable, q)
            except DivisibilityError as err:
                raise DivisibilityError(
                    "hyperplane is not invariant under the map",
                    monomial=err.monomial) from err
            root = unit_root(unit, q)
            comps.append(root.mul_by_var(variable, 1))
        else:
            comps.append(pulled)
    order = min(c.order for c in comps)
    return FormalMap([c.truncate(min(c.order, order)) for c in comps])


# -- unified step application -------------------------------------------------------

def transform_field(X: FormalField, step: TransformStep) -> FormalField:
    if isinstance(step, CoordChange):
        return apply_change_field(X, step)
    if isinstance(step, BlowUp):
        return blowup_field(X, step.center, shift=step.shift, pivot=step.pivot)
    if isinstance(step, Ramification):
        return ramify_field(X, step.q, step.variable)
    raise StructureError(f"unknown step {step!r}")


def transform_curve(curve: CurveParam, step: TransformStep) -> CurveParam:
    if isinstance(step, CoordChange):
        return apply_change_curve(curve, step)
    if isinstance(step, BlowUp):
        return blowup_curve(curve, step.center, shift=step.shift, pivot=step.pivot)
    if isinstance(step, Ramification):
        return ramify_curve(curve, step.q, step.variable)
    raise StructureError(f"unknown step {step!r}")


def transform_map(F: FormalMap, step: TransformStep) -> FormalMap:
    if isinstance(step, CoordChange):
        return apply_change_map(F, step)
    if isinstance(step, BlowUp):
        return blowup_map(F, step.center, shift=step.shift, pivot=step.pivot)
    if isinstance(step, Ramification):
        return ramify_map(F, step.q, step.variable)
    raise StructureError(f"unknown step {step!r}")


# -- pushforward identity (used by replay tests) ---------------------------------

def pushforward_identity_defect(X: FormalField, Xt: FormalField,
                                step: TransformStep):
    """Defect of D(phi) . X~ = X o phi on the chart, as a JetTuple.

    Zero defect (exact) certifies the pushforward identity without forming
    phi^{-1}, which does not exist as a germ along the divisor.
    """
    nvars = X.nvars
    order = min(X.order, Xt.order)
    backend = X.backend
    phi = _step_chart_map(step, nvars, order, backend)
    defects = []
    for i in range(nvars):
        lhs = apply_field(Xt, phi[i])          # X~ applied to z_i o phi
        rhs = X.components[i].compose(list(phi))
        n = min(lhs.order, rhs.order)
        defects.append(lhs.truncate(n) - rhs.truncate(n))
    return JetTuple(defects)


def _step_chart_map(step: TransformStep, nvars, order, backend):
    """The germ map phi (new coords -> old coords) realized by a step."""
    if isinstance(step, CoordChange):
        return JetTuple(list(step.inverse))
    if isinstance(step, BlowUp):
        comps = []
        shift = step.shift_map()
        zp = Jet.variable(step.pivot, nvars, order, backend)
        for i in range(nvars):
            v = Jet.variable(i, nvars, order, backend)
            if i == step.pivot or i not in step.center.variables:
                comps.append(v)
            else:
                inner = v + (zp.scale(shift[i]) if i in shift else Jet.zero(nvars, order, backend))
                comps.append((zp * inner).truncate(order))
        return JetTuple(comps)
    if isinstance(step, Ramification):
        comps = []
        for i in range(nvars):
            v = Jet.variable(i, nvars, order, backend)
            comps.append(v ** step.q if i == step.variable else v)
        return JetTuple(comps)
    raise StructureError(f"unknown step {step!r}")


# -- sequences -------------------------------------------------------------------------

@dataclass
class TransformSequence:
    """Replayable certificate: ordered steps, each checked permissible
    against the transformed pair from the previous step."""

    steps: list = dc_field(default_factory=list)

    def append(self, step):
        self.steps.append(step)

    def __iter__(self):
        return iter(self.steps)

    def __len__(self):
        return len(self.steps)

    def apply_field(self, X: FormalField) -> FormalField:
        for s in self.steps:
            X = transform_field(X, s)
        return X

    def apply_curve(self, curve: CurveParam) -> CurveParam:
        for s in self.steps:
            curve = transform_curve(curve, s)
        return curve

    def apply_map(self, F: FormalMap) -> FormalMap:
        for s in self.steps:
            F = transform_map(F, s)
        return F

    def apply_pair(self, X: FormalField, curve: CurveParam):
        for s in self.steps:
            X = transform_field(X, s)
            curve = transform_curve(curve, s)
        return X, curve

    def total_divisor(self, initial=frozenset()):
        divisor = set(initial)
        for s in self.steps:
            divisor = s.divisor_update(divisor)
        return divisor

    def point_map(self):
        """Numeric composite mapping final-chart points to original
        coordinates (applies the recorded steps' charts in reverse)."""
        steps = list(self.steps)

        def mapper(point):
            vec = [complex(v) for v in point]
            for s in reversed(steps):
                vec = _apply_chart_numeric(s, vec)
            return vec

        return mapper


def _apply_chart_numeric(step, vec):
    n = len(vec)
    if isinstance(step, CoordChange):
        # old = inverse(new) evaluated numerically
        return [step.inverse[i].astype("float").eval_complex(vec)
                for i in range(n)]
    if isinstance(step, BlowUp):
        out = list(vec)
        shift = step.shift_map()
        zp = vec[step.pivot]
        for i in step.center.variables:
            if i == step.pivot:
                continue
            s = shift.get(i, 0)
            out[i] = zp * (vec[i] + complex(s))
        return out
    if isinstance(step, Ramification):
        out = list(vec)
        out[step.variable] = vec[step.variable] ** step.q
        return out
    raise StructureError(f"unknown step {step!r}")
