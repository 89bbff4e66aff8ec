"""Truncated multivariate power series ("jets") over two coefficient backends.

A jet stores a sparse map from exponent vectors to nonzero coefficients,
together with the number of variables and the truncation order: terms of
total degree above the order are discarded, and the order doubles as the
*trusted* order — every order-lowering operation records the new trusted
order on its output instead of silently padding.

Backends:
  * ``'exact'``  — GaussianRational coefficients, zero rounding.
  * ``'float'``  — complex coefficients; coefficients below a relative
    epsilon (default 1e-12 of the largest magnitude) are dropped at
    normalization time.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .errors import DivisibilityError, PreconditionError, StructureError
from .gaussrat import GaussianRational, as_gaussian

EXACT = "exact"
FLOAT = "float"

FLOAT_EPS_REL = 1e-12

INFINITE_ORDER = math.inf


def _coerce_coeff(c, backend):
    if backend == EXACT:
        if isinstance(c, GaussianRational):
            return c
        if isinstance(c, (int, Fraction)):
            return as_gaussian(c)
        raise StructureError(f"exact backend cannot hold {type(c).__name__}")
    if isinstance(c, complex):
        return c
    if isinstance(c, (int, float, Fraction)):
        return complex(c)
    if isinstance(c, GaussianRational):
        return complex(c)
    raise StructureError(f"float backend cannot hold {type(c).__name__}")


def _normalize_terms(terms, order, backend):
    out = {}
    for expt, coeff in terms.items():
        if sum(expt) > order:
            continue
        if backend == EXACT:
            if coeff.is_zero():
                continue
        elif coeff == 0:
            continue
        out[expt] = coeff
    if backend == FLOAT and out:
        top = max(abs(c) for c in out.values())
        cutoff = FLOAT_EPS_REL * top
        out = {e: c for e, c in out.items() if abs(c) > cutoff}
    return out


class Jet:
    __slots__ = ("nvars", "order", "backend", "_terms")

    def __init__(self, nvars, order, backend, terms, _normalized=False):
        if nvars < 1:
            raise StructureError("nvars must be positive")
        if order < 0:
            raise StructureError("truncation order must be >= 0")
        if backend not in (EXACT, FLOAT):
            raise StructureError(f"unknown backend {backend!r}")
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "backend", backend)
        if not _normalized:
            terms = _normalize_terms(terms, order, backend)
        object.__setattr__(self, "_terms", terms)

    def __setattr__(self, name, value):
        raise AttributeError("Jet is immutable")

    # -- constructors ----------------------------------------------------
    @classmethod
    def zero(cls, nvars, order, backend=EXACT):
        return cls(nvars, order, backend, {}, _normalized=True)

    @classmethod
    def constant(cls, value, nvars, order, backend=EXACT):
        c = _coerce_coeff(value, backend)
        return cls(nvars, order, backend, {(0,) * nvars: c})

    @classmethod
    def variable(cls, index, nvars, order, backend=EXACT):
        if not 0 <= index < nvars:
            raise StructureError("variable index out of range")
        e = tuple(1 if i == index else 0 for i in range(nvars))
        one = _coerce_coeff(1, backend)
        return cls(nvars, order, backend, {e: one}, _normalized=True)

    @classmethod
    def from_terms(cls, terms, nvars, order, backend=EXACT):
        coerced = {}
        for expt, coeff in terms.items():
            expt = tuple(int(e) for e in expt)
            if len(expt) != nvars or any(e < 0 for e in expt):
                raise StructureError(f"bad exponent vector {expt}")
            c = _coerce_coeff(coeff, backend)
            if expt in coerced:
                c = coerced[expt] + c
            coerced[expt] = c
        return cls(nvars, order, backend, coerced)

    # -- basic queries ----------------------------------------------------
    def terms_sorted(self):
        """Terms in graded-lexicographic order (reproducible printing):
        ascending total degree, then descending power of earlier variables."""
        return sorted(self._terms.items(),
                      key=lambda kv: (sum(kv[0]), tuple(-e for e in kv[0])))

    def items(self):
        return self._terms.items()

    def __len__(self):
        return len(self._terms)

    def is_zero(self):
        return not self._terms

    def coefficient(self, expt):
        expt = tuple(expt)
        c = self._terms.get(expt)
        if c is None:
            return as_gaussian(0) if self.backend == EXACT else 0j
        return c

    def constant_term(self):
        return self.coefficient((0,) * self.nvars)

    def min_degree(self):
        """Minimal total degree of a stored term; INFINITE_ORDER if zero.

        Callers must read the sentinel as "order > trusted truncation
        order": a jet vanishing to its trusted order is indistinguishable
        from zero.
        """
        if not self._terms:
            return INFINITE_ORDER
        return min(sum(e) for e in self._terms)

    def _min_degree_eff(self):
        d = self.min_degree()
        return self.order + 1 if d is INFINITE_ORDER else d

    def homogeneous_part(self, degree):
        terms = {e: c for e, c in self._terms.items() if sum(e) == degree}
        return Jet(self.nvars, self.order, self.backend, terms, _normalized=True)

    def max_degree(self):
        if not self._terms:
            return 0
        return max(sum(e) for e in self._terms)

    # -- structural helpers -----------------------------------------------
    def _check_compatible(self, other):
        if self.nvars != other.nvars:
            raise StructureError("nvars mismatch")
        if self.backend != other.backend:
            raise StructureError("backend mismatch")

    def truncate(self, order):
        if order >= self.order:
            if order == self.order:
                return self
            # raising the trusted order is never allowed implicitly
            raise PreconditionError("cannot raise truncation order")
        terms = {e: c for e, c in self._terms.items() if sum(e) <= order}
        return Jet(self.nvars, order, self.backend, terms, _normalized=True)

    def with_order(self, order):
        """Re-declare the trusted order (explicit, used by callers that
        know more than the generic bookkeeping, e.g. exact polynomials)."""
        terms = {e: c for e, c in self._terms.items() if sum(e) <= order}
        return Jet(self.nvars, order, self.backend, terms)

    # -- ring operations ----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            other = Jet.constant(other, self.nvars, self.order, self.backend)
        self._check_compatible(other)
        order = min(self.order, other.order)
        terms = dict(self._terms)
        for e, c in other._terms.items():
            if e in terms:
                terms[e] = terms[e] + c
            else:
                terms[e] = c
        return Jet(self.nvars, order, self.backend, terms)

    __radd__ = __add__

    def __neg__(self):
        terms = {e: -c for e, c in self._terms.items()}
        return Jet(self.nvars, self.order, self.backend, terms, _normalized=True)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -_coerce_coeff(other, self.backend))

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, scalar):
        c = _coerce_coeff(scalar, self.backend)
        if (c.is_zero() if self.backend == EXACT else c == 0):
            return Jet.zero(self.nvars, self.order, self.backend)
        terms = {e: v * c for e, v in self._terms.items()}
        return Jet(self.nvars, self.order, self.backend, terms)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction, GaussianRational, float, complex)):
            return self.scale(other)
        self._check_compatible(other)
        order = min(self.order + other._min_degree_eff(),
                    other.order + self._min_degree_eff(),
                    max(self.order, other.order))
        if not self._terms or not other._terms:
            return Jet.zero(self.nvars, order, self.backend)
        # degree buckets let us skip whole blocks past the truncation order
        a_by_deg = {}
        for e, c in self._terms.items():
            a_by_deg.setdefault(sum(e), []).append((e, c))
        b_by_deg = {}
        for e, c in other._terms.items():
            b_by_deg.setdefault(sum(e), []).append((e, c))
        terms = {}
        for da, items_a in a_by_deg.items():
            cap = order - da
            if cap < 0:
                continue
            for db, items_b in b_by_deg.items():
                if db > cap:
                    continue
                for ea, ca in items_a:
                    for eb, cb in items_b:
                        key = tuple(x + y for x, y in zip(ea, eb))
                        prod = ca * cb
                        if key in terms:
                            terms[key] = terms[key] + prod
                        else:
                            terms[key] = prod
        return Jet(self.nvars, order, self.backend, terms)

    __rmul__ = __mul__

    def __pow__(self, n):
        if not isinstance(n, int) or n < 0:
            raise PreconditionError("jet exponent must be a nonnegative integer")
        result = Jet.constant(1, self.nvars, self.order, self.backend)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base if n > 1 else base
            n >>= 1
        return result

    # -- calculus ----------------------------------------------------------
    def diff(self, index):
        if not 0 <= index < self.nvars:
            raise PreconditionError("variable index out of range")
        terms = {}
        for e, c in self._terms.items():
            k = e[index]
            if k == 0:
                continue
            ne = e[:index] + (k - 1,) + e[index + 1:]
            coeff = c * k
            if ne in terms:
                terms[ne] = terms[ne] + coeff
            else:
                terms[ne] = coeff
        return Jet(self.nvars, max(self.order - 1, 0), self.backend, terms)

    def mul_by_var(self, index, k=1):
        if k < 0:
            raise PreconditionError("power must be nonnegative")
        terms = {e[:index] + (e[index] + k,) + e[index + 1:]: c
                 for e, c in self._terms.items()}
        return Jet(self.nvars, self.order + k, self.backend, terms)

    def divide_by_var(self, index, k=1):
        if not 0 <= index < self.nvars:
            raise PreconditionError("variable index out of range")
        if k < 0:
            raise PreconditionError("power must be nonnegative")
        if k == 0:
            return self
        terms = {}
        for e, c in self._terms.items():
            if e[index] < k:
                raise DivisibilityError(
                    f"term {e} not divisible by variable {index} to power {k}",
                    monomial=e)
            terms[e[:index] + (e[index] - k,) + e[index + 1:]] = c
        return Jet(self.nvars, max(self.order - k, 0), self.backend, terms,
                   _normalized=True)

    def valuation_in_var(self, index):
        """Minimal exponent of one variable over stored terms (inf if zero)."""
        if not self._terms:
            return INFINITE_ORDER
        return min(e[index] for e in self._terms)

    # -- composition & evaluation -------------------------------------------
    def compose(self, args):
        """Substitute ``args`` (jets with zero constant term) for the variables."""
        args = list(args)
        if len(args) != self.nvars:
            raise StructureError("argument count must equal nvars")
        if not args:
            raise StructureError("empty substitution")
        backend = self.backend
        for a in args:
            if a.backend != backend:
                raise StructureError("backend mismatch in composition")
            if a.nvars != args[0].nvars:
                raise StructureError("composition arguments disagree on nvars")
            if not (a.constant_term().is_zero() if backend == EXACT
                    else a.constant_term() == 0):
                raise PreconditionError(
                    "composition arguments must have zero constant term")
        out_nvars = args[0].nvars
        order = min([self.order] + [a.order for a in args])
        result = Jet.zero(out_nvars, order, backend)
        one = Jet.constant(1, out_nvars, order, backend)
        powers = {(0,) * self.nvars: one}
        args = [a.truncate(order) if a.order > order else a for a in args]

        def monomial(expt):
            cached = powers.get(expt)
            if cached is not None:
                return cached
            i = max(j for j, e in enumerate(expt) if e)
            prev = expt[:i] + (expt[i] - 1,) + expt[i + 1:]
            value = monomial(prev) * args[i]
            powers[expt] = value
            return value

        for expt, coeff in self.terms_sorted():
            if sum(expt) > order:
                continue
            result = result + monomial(expt).scale(coeff)
        return result.truncate(order) if result.order > order else result

    def eval_complex(self, point):
        """Evaluate the truncated polynomial at a complex point (per-variable
        Horner on the graded term list)."""
        point = [complex(p) for p in point]
        if len(point) != self.nvars:
            raise StructureError("point dimension must equal nvars")
        total = 0j
        powcache = [{0: 1.0 + 0j} for _ in range(self.nvars)]

        def pw(i, k):
            cache = powcache[i]
            if k not in cache:
                cache[k] = pw(i, k - 1) * point[i]
            return cache[k]

        for e, c in self._terms.items():
            val = complex(c)
            for i, k in enumerate(e):
                if k:
                    val *= pw(i, k)
            total += val
        return total

    # -- backend conversion ---------------------------------------------------
    def astype(self, backend):
        if backend == self.backend:
            return self
        if backend == FLOAT:
            terms = {e: complex(c) for e, c in self._terms.items()}
            return Jet(self.nvars, self.order, FLOAT, terms)
        raise PreconditionError("cannot convert float jets to the exact backend")

    # -- comparison / display ---------------------------------------------------
    def __eq__(self, other):
        if not isinstance(other, Jet):
            return NotImplemented
        return (self.nvars == other.nvars and self.backend == other.backend
                and self.order == other.order and self._terms == other._terms)

    def __hash__(self):
        return hash((self.nvars, self.order, self.backend,
                     frozenset(self._terms.items())))

    def equal_terms(self, other):
        """Term-level equality ignoring the declared truncation orders."""
        self._check_compatible(other)
        common = min(self.order, other.order)
        a = {e: c for e, c in self._terms.items() if sum(e) <= common}
        b = {e: c for e, c in other._terms.items() if sum(e) <= common}
        return a == b

    def isclose(self, other, tol=1e-9):
        self._check_compatible(other)
        keys = set(self._terms) | set(other._terms)
        for e in keys:
            if abs(complex(self.coefficient(e)) - complex(other.coefficient(e))) > tol:
                return False
        return True

    def __repr__(self):
        return f"Jet({self})"

    def __str__(self):
        if not self._terms:
            return "0"
        names = _var_names(self.nvars)
        parts = []
        for e, c in self.terms_sorted():
            mono = "*".join(
                f"{names[i]}^{k}" if k > 1 else names[i]
                for i, k in enumerate(e) if k)
            cs = str(c) if self.backend == EXACT else repr(c)
            parts.append(f"{cs}*{mono}" if mono else cs)
        return " + ".join(parts)


def _var_names(nvars):
    if nvars == 1:
        return ("s",)
    if nvars == 2:
        return ("x", "y")
    if nvars == 3:
        return ("x", "y", "z")
    return tuple(f"z{i + 1}" for i in range(nvars))


# -- spec-surface wrappers ------------------------------------------------------

def arith(a: Jet, b: Jet, kind: str) -> Jet:
    """Strict ring arithmetic: operands must agree on nvars, order, backend."""
    if kind == "scale":
        return a.scale(b)
    a._check_compatible(b)
    if a.order != b.order:
        raise StructureError("truncation order mismatch")
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return (a * b).truncate(a.order)
    raise StructureError(f"unknown arithmetic kind {kind!r}")


def compose(f: Jet, args) -> Jet:
    return f.compose(args)


def partial_derivative(f: Jet, index: int) -> Jet:
    return f.diff(index)


def order(f: Jet):
    return f.min_degree()


def divide_by_var(f: Jet, index: int, k: int) -> Jet:
    return f.divide_by_var(index, k)


def eval_complex(f: Jet, point) -> complex:
    return f.eval_complex(point)


# -- jet tuples -----------------------------------------------------------------

class JetTuple:
    """An ordered list of jets sharing nvars, order and backend."""

    __slots__ = ("jets",)

    def __init__(self, jets):
        jets = tuple(jets)
        if not jets:
            raise StructureError("empty jet tuple")
        first = jets[0]
        for j in jets[1:]:
            if j.nvars != first.nvars or j.backend != first.backend:
                raise StructureError("jet tuple components disagree")
        object.__setattr__(self, "jets", jets)

    def __setattr__(self, name, value):
        raise AttributeError("JetTuple is immutable")

    @property
    def nvars(self):
        return self.jets[0].nvars

    @property
    def backend(self):
        return self.jets[0].backend

    @property
    def order(self):
        return min(j.order for j in self.jets)

    def __iter__(self):
        return iter(self.jets)

    def __len__(self):
        return len(self.jets)

    def __getitem__(self, i):
        return self.jets[i]

    def __eq__(self, other):
        if not isinstance(other, JetTuple):
            return NotImplemented
        return self.jets == other.jets

    def truncate(self, order):
        return JetTuple(j.truncate(min(order, j.order)) for j in self.jets)

    def __repr__(self):
        return "JetTuple(" + ", ".join(map(str, self.jets)) + ")"


def identity_tuple(nvars, order, backend=EXACT):
    return JetTuple(Jet.variable(i, nvars, order, backend) for i in range(nvars))
