"""Tangent-to-identity maps, formal vector fields, and the correspondence
between them (time-one map and its generator).

Both series of the correspondence terminate on jets: every application of
the generator (or of the displacement endomorphism) raises order by at
least multiplicity-1, so an explicit ``ceil(N/(mult-1)) + 1`` bound on the
number of summands is used instead of convergence heuristics.  Trusted
truncation orders are tracked through the whole computation and the result
is re-truncated to the guaranteed-correct order.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .errors import PreconditionError, StructureError
from .gaussrat import as_gaussian
from .jets import EXACT, Jet, JetTuple, identity_tuple
from .linalg_exact import row_reduce


class FormalField:
    """A formal vector field: component j is the coefficient of d/dz_j.

    Fields of multiplicity < 2 are legal values (they arise as divided
    transforms); only the generator correspondence requires multiplicity 2.
    """

    __slots__ = ("components",)

    def __init__(self, components):
        comps = components if isinstance(components, JetTuple) else JetTuple(components)
        object.__setattr__(self, "components", comps)

    def is_singular(self):
        """True when the field vanishes at the origin."""
        for c in self.components:
            ct = c.constant_term()
            if not (ct.is_zero() if c.backend == EXACT else abs(ct) == 0):
                return False
        return True

    def __setattr__(self, name, value):
        raise AttributeError("FormalField is immutable")

    @property
    def nvars(self):
        return self.components.nvars

    @property
    def order(self):
        return self.components.order

    @property
    def backend(self):
        return self.components.backend

    def multiplicity(self):
        """min order over components (paper-level nu_0); inf when zero."""
        return min(c.min_degree() for c in self.components)

    def __neg__(self):
        return FormalField([-c for c in self.components])

    def scale(self, scalar):
        return FormalField([c.scale(scalar) for c in self.components])

    def __add__(self, other):
        return FormalField([a + b for a, b in zip(self.components, other.components)])

    def truncate(self, order):
        return FormalField(self.components.truncate(order))

    def __eq__(self, other):
        if not isinstance(other, FormalField):
            return NotImplemented
        return self.components == other.components

    def equal_terms(self, other):
        return all(a.equal_terms(b)
                   for a, b in zip(self.components, other.components))

    def __repr__(self):
        return "FormalField(" + "; ".join(str(c) for c in self.components) + ")"


class FormalMap:
    """A tangent-to-identity map germ: component j is z_j after the map."""

    __slots__ = ("components",)

    def __init__(self, components, check_tangent=True):
        comps = components if isinstance(components, JetTuple) else JetTuple(components)
        if check_tangent:
            n = comps.nvars
            if len(comps) != n:
                raise StructureError("map must have one component per variable")
            for j, c in enumerate(comps):
                ct = c.constant_term()
                if not (ct.is_zero() if c.backend == EXACT else ct == 0):
                    raise StructureError("map components must vanish at the origin")
                for i in range(n):
                    e = tuple(1 if t == i else 0 for t in range(n))
                    coeff = c.coefficient(e)
                    want_one = i == j
                    if c.backend == EXACT:
                        ok = coeff.is_one() if want_one else coeff.is_zero()
                    else:
                        ok = abs(coeff - (1 if want_one else 0)) < 1e-9
                    if not ok:
                        raise StructureError("linear part must be the identity")
        object.__setattr__(self, "components", comps)

    def __setattr__(self, name, value):
        raise AttributeError("FormalMap is immutable")

    @property
    def nvars(self):
        return self.components.nvars

    @property
    def order(self):
        return self.components.order

    @property
    def backend(self):
        return self.components.backend

    def displacement(self):
        """F - id as a JetTuple."""
        ident = identity_tuple(self.nvars, self.order, self.backend)
        return JetTuple(c - v for c, v in zip(self.components, ident))

    def map_order(self):
        """Order of the map: lowest degree where it differs from the identity."""
        return min(d.min_degree() for d in self.displacement())

    def compose_map(self, other):
        """self after other (z -> self(other(z)))."""
        comps = [c.compose(list(other.components)) for c in self.components]
        return FormalMap(comps, check_tangent=False)

    def __eq__(self, other):
        if not isinstance(other, FormalMap):
            return NotImplemented
        return self.components == other.components

    def equal_terms(self, other):
        return all(a.equal_terms(b)
                   for a, b in zip(self.components, other.components))

    def __repr__(self):
        return "FormalMap(" + "; ".join(str(c) for c in self.components) + ")"

    @classmethod
    def identity(cls, nvars, order, backend=EXACT):
        return cls(identity_tuple(nvars, order, backend), check_tangent=False)


# -- derivation action -------------------------------------------------------

def apply_field(field: FormalField, g: Jet) -> Jet:
    """X(g) = sum_j a_j * dg/dz_j, truncated with honest order tracking."""
    if field.nvars != g.nvars:
        raise StructureError("field and jet disagree on nvars")
    if field.backend != g.backend:
        raise StructureError("field and jet disagree on backend")
    total = None
    for j, a in enumerate(field.components):
        term = a * g.diff(j)
        total = term if total is None else _add_mixed(total, term)
    return total


def _add_mixed(a: Jet, b: Jet) -> Jet:
    n = min(a.order, b.order)
    return a.truncate(n) + b.truncate(n)


def _lie_term_count(order, mult):
    if mult < 2:
        raise PreconditionError("generator multiplicity must be >= 2")
    return math.ceil(order / (mult - 1)) + 1


def exp_field(field: FormalField) -> FormalMap:
    """Time-one map of a field with multiplicity >= 2 (finite jet sum)."""
    mult = field.multiplicity()
    if mult is math.inf:
        n = field.nvars
        return FormalMap.identity(n, field.order, field.backend)
    if mult < 2:
        raise PreconditionError(
            "exp_field needs multiplicity >= 2 (tangency to the identity)")
    n = field.nvars
    order = field.order
    backend = field.backend
    jmax = _lie_term_count(order, mult)
    comps = []
    for i in range(n):
        g = Jet.variable(i, n, order, backend)
        acc = g
        term = g
        fact = 1
        for j in range(1, jmax + 1):
            term = apply_field(field, term)
            fact *= j
            if term.is_zero():
                break
            if backend == EXACT:
                scaled = term.scale(as_gaussian(Fraction(1, fact)))
            else:
                scaled = term.scale(1.0 / fact)
            acc = _add_mixed(acc, scaled)
        comps.append(acc.truncate(min(acc.order, order)))
    return FormalMap(comps, check_tangent=False)


def log_map(F: FormalMap, method: str = "newton") -> FormalField:
    """Generator of a tangent-to-identity map.

    ``newton`` (default) peels homogeneous degrees: the degree-d part of the
    generator equals the degree-d defect of the current exponential, which
    keeps everything sparse when the answer is sparse.  ``series`` evaluates
    the alternating displacement series directly; both agree exactly and the
    tests cross-check them.
    """
    k = F.map_order()
    if k is math.inf:
        return FormalField([Jet.zero(F.nvars, F.order, F.backend)
                            for _ in range(F.nvars)])
    if k < 2:
        raise PreconditionError("log_map needs a map of order >= 2")
    if method == "series":
        return _log_map_series(F)
    if method != "newton":
        raise PreconditionError(f"unknown log method {method!r}")
    return _log_map_newton(F)


def _log_map_newton(F: FormalMap) -> FormalField:
    n, order, backend = F.nvars, F.order, F.backend
    disp = F.displacement()
    comps = [Jet.zero(n, order, backend) for _ in range(n)]
    k = F.map_order()
    for d in range(k, order + 1):
        X = FormalField(comps)
        E = exp_field(X) if X.multiplicity() is not math.inf else FormalMap.identity(n, order, backend)
        defects = [dc - ec for dc, ec in
                   zip(disp, (e - v for e, v in
                              zip(E.components,
                                  identity_tuple(n, order, backend))))]
        changed = False
        for i in range(n):
            part = defects[i].homogeneous_part(d)
            if not part.is_zero():
                comps[i] = comps[i] + part
                changed = True
        if not changed:
            continue
    return FormalField(comps)


def _log_map_series(F: FormalMap) -> FormalField:
    n, order, backend = F.nvars, F.order, F.backend
    k = F.map_order()
    jmax = _lie_term_count(order, k)
    comps = []
    Fc = list(F.components)
    for i in range(n):
        g = Jet.variable(i, n, order, backend)
        acc = Jet.zero(n, order, backend)
        current = g
        for j in range(1, jmax + 1):
            current = current.compose(Fc) - current    # (composition - id)^j
            if current.is_zero():
                break
            sign = Fraction((-1) ** (j + 1), j)
            if backend == EXACT:
                scaled = current.scale(as_gaussian(sign))
            else:
                scaled = current.scale(float(sign))
            acc = _add_mixed(acc, scaled)
        comps.append(acc.truncate(min(acc.order, order)))
    return FormalField(comps)


def inverse_map(F: FormalMap) -> FormalMap:
    """Compositional inverse via the negated generator."""
    if F.map_order() is math.inf:
        return F
    return exp_field(log_map(F).scale(-1))


def orders(F: FormalMap, X: FormalField):
    """(order of F, multiplicity of X) for X = log F; asserts agreement and
    equality of the lowest homogeneous parts."""
    kF = F.map_order()
    kX = X.multiplicity()
    if kF != kX:
        raise PreconditionError(f"order mismatch: map {kF}, field {kX}")
    if kF is not math.inf:
        k = kF
        for d_comp, a_comp in zip(F.displacement(), X.components):
            if not d_comp.homogeneous_part(k).equal_terms(a_comp.homogeneous_part(k)):
                raise PreconditionError(
                    "lowest homogeneous parts of map and generator differ")
    return kF, kX


def fixed_ideal_equal(F: FormalMap, X: FormalField | None = None):
    """Check mutual truncated ideal membership of displacement components
    and generator components; returns (bool, witness monomial or None)."""
    if X is None:
        X = log_map(F)
    disp = list(F.displacement())
    gens_a = list(X.components)
    ok1, wit1 = _ideal_contains(gens_a, disp)
    if not ok1:
        return False, wit1
    ok2, wit2 = _ideal_contains(disp, gens_a)
    if not ok2:
        return False, wit2
    return True, None


def _ideal_contains(generators, targets):
    """Each target expressible as sum g_j * generators[j] mod high degree?

    Linear algebra on coefficient vectors: unknowns are the coefficients of
    the multiplier jets, one block per generator.
    """
    gens = [g for g in generators if not g.is_zero()]
    if not gens:
        return all(t.is_zero() for t in targets), None
    n = gens[0].nvars
    order = min(g.order for g in gens)
    if gens[0].backend != EXACT:
        raise PreconditionError("ideal membership is exact-backend only")
    monos = _monomials_upto(n, order)
    mono_index = {m: i for i, m in enumerate(monos)}
    columns = []
    for g in gens:
        gmin = g._min_degree_eff()
        for m in monos:
            if sum(m) + gmin > order:
                continue
            prod_terms = {}
            for e, c in g.items():
                key = tuple(a + b for a, b in zip(e, m))
                if sum(key) <= order:
                    prod_terms[key] = prod_terms.get(key, as_gaussian(0)) + c
            col = [as_gaussian(0)] * len(monos)
            for e, c in prod_terms.items():
                col[mono_index[e]] = c
            columns.append(col)
    # one reduction with all targets as extra columns; consistency per column
    vecs = []
    for t in targets:
        vec = [as_gaussian(0)] * len(monos)
        for e, c in t.items():
            if sum(e) <= order:
                vec[mono_index[e]] = c
        vecs.append(vec)
    ncols = len(columns)
    aug = [[columns[c][r] for c in range(ncols)] + [v[r] for v in vecs]
           for r in range(len(monos))]
    red, _pivots = row_reduce(aug, ncols=ncols)
    for ti, t in enumerate(targets):
        for row in red:
            if all(row[j].is_zero() for j in range(ncols)) and \
               not row[ncols + ti].is_zero():
                witness = min((e for e, _ in t.items()), key=lambda m: (sum(m), m),
                              default=None)
                return False, witness
    return True, None


def _monomials_upto(n, order):
    out = []

    def rec(prefix, remaining):
        if len(prefix) == n:
            out.append(tuple(prefix))
            return
        for e in range(remaining + 1):
            rec(prefix + [e], remaining - e)

    rec([], order)
    out.sort(key=lambda m: (sum(m), m))
    return out
