"""Reduction of linear meromorphic systems x^(q+1) y' = B(x) y to principal
form: after polynomial gauge transformations, shearings and ramifications,
the matrix reads D(x) + x^p C + O(x^(p+1)) with D a diagonal polynomial
matrix of degree < p commuting with the constant matrix C (or p = 0 with
C nonzero).

The reducer works on the full matrix with a slot partition: each block is
analyzed at its own x-scale (its valuation inside the global matrix), so
recorded transformations always act on the full system and replay exactly.
Eigenvalue shifts B -> B - lambda x^v I are kept in a scalar ledger (they
are not gauge transformations of the three recorded kinds) and re-added to
the diagonal polynomial at assembly time.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction

import numpy as np

from .errors import (BudgetError, DegenerateSystemError, NotInFormError,
                     PrecisionError, PreconditionError, StructureError)
from .gaussrat import GaussianRational, as_gaussian, rational_reconstruct
from .jets import EXACT, FLOAT, Jet
from .linalg_exact import char_poly, kernel_basis, mat_inverse, mat_mul, solve
from .seriesops import invert_unit, substitute_power

STEP_CAP = 400


# -- matrices of univariate jets ---------------------------------------------------

def _zero_like(order, backend):
    return Jet.zero(1, order, backend)


def mat_order(B):
    return min(e.order for row in B for e in row)


def mat_valuation(B):
    v = math.inf
    for row in B:
        for e in row:
            v = min(v, e._min_degree_eff() if e.is_zero() else e.min_degree())
    return v


def mat_truncate(B, order):
    return [[e.truncate(min(e.order, order)) for e in row] for row in B]


def mat_constant(B):
    return [[e.constant_term() for e in row] for row in B]


def jets_mat_mul(A, B, order=None):
    m, k, n = len(A), len(B), len(B[0])
    out = []
    for i in range(m):
        row = []
        for j in range(n):
            acc = None
            for t in range(k):
                prod = A[i][t] * B[t][j]
                acc = prod if acc is None else _mixed_add(acc, prod)
            row.append(acc if order is None else acc.truncate(min(acc.order, order)))
        out.append(row)
    return out


def _mixed_add(a, b):
    n = min(a.order, b.order)
    return a.truncate(n) + b.truncate(n)


def jets_mat_inverse(P, order):
    """Inverse of a matrix of jets with invertible constant term."""
    m = len(P)
    backend = P[0][0].backend
    P0 = mat_constant(P)
    if backend == EXACT:
        P0_inv = mat_inverse(P0)
    else:
        P0_inv = np.linalg.inv(np.array(P0, dtype=complex)).tolist()
    P0_inv_jets = [[Jet.constant(c, 1, order, backend) for c in row]
                   for row in P0_inv]
    N = jets_mat_mul(P0_inv_jets, P, order=order)
    for i in range(m):
        N[i][i] = N[i][i] - 1
    acc = [[Jet.constant(1 if i == j else 0, 1, order, backend)
            for j in range(m)] for i in range(m)]
    term = [row[:] for row in acc]
    for _ in range(order):
        term = jets_mat_mul(term, N, order=order)
        term = [[-e for e in row] for row in term]
        if all(e.is_zero() for row in term for e in row):
            break
        acc = [[_mixed_add(a, t) for a, t in zip(ra, rt)]
               for ra, rt in zip(acc, term)]
    return jets_mat_mul(acc, P0_inv_jets, order=order)


# -- core types ---------------------------------------------------------------------

@dataclass(frozen=True)
class LinearSystem:
    """x^(q+1) y' = B(x) y with a matrix of univariate jets."""

    q: int
    B: tuple

    def __post_init__(self):
        rows = tuple(tuple(row) for row in self.B)
        object.__setattr__(self, "B", rows)
        m = len(rows)
        for row in rows:
            if len(row) != m:
                raise StructureError("system matrix must be square")

    @property
    def dim(self):
        return len(self.B)

    @property
    def order(self):
        return mat_order(self.B)

    @property
    def backend(self):
        return self.B[0][0].backend

    def entry(self, i, j):
        return self.B[i][j]

    def is_zero(self):
        return all(e.is_zero() for row in self.B for e in row)

    def equal_terms(self, other, order=None):
        n = order if order is not None else min(self.order, other.order)
        for ra, rb in zip(self.B, other.B):
            for a, b in zip(ra, rb):
                if not a.truncate(min(a.order, n)).equal_terms(
                        b.truncate(min(b.order, n))):
                    return False
        return True


def system_from_terms(q, rows, order, backend=EXACT):
    B = [[Jet.from_terms(t, 1, order, backend) for t in row] for row in rows]
    return LinearSystem(q, B)


@dataclass(frozen=True)
class PolyLinear:
    P: tuple          # matrix of polynomial jets, P(0) invertible

    def __post_init__(self):
        object.__setattr__(self, "P", tuple(tuple(r) for r in self.P))


@dataclass(frozen=True)
class Shearing:
    exponents: tuple  # nonnegative integers, one per dimension

    def __post_init__(self):
        k = tuple(int(v) for v in self.exponents)
        if any(v < 0 for v in k):
            raise StructureError("shearing exponents must be nonnegative")
        object.__setattr__(self, "exponents", k)


@dataclass(frozen=True)
class Ramify:
    alpha: int

    def __post_init__(self):
        if self.alpha < 1:
            raise StructureError("ramification index must be positive")


@dataclass(frozen=True)
class Strip:
    """Rank normalization: divide the matrix by x^s and lower q by s.
    Certificate plumbing (not one of the three gauge kinds)."""

    s: int


TTransformation = PolyLinear | Shearing | Ramify
CertificateEvent = TTransformation | Strip


# -- applying transformations --------------------------------------------------------

def poincare_rank(sys: LinearSystem):
    """Strip common x factors: returns (stripped system, s).  After this
    B(0) != 0, making q the Poincare rank."""
    if sys.is_zero():
        raise DegenerateSystemError("system matrix vanishes to the budget")
    v = mat_valuation(sys.B)
    s = min(v, sys.q)
    if s == 0:
        return sys, 0
    B = [[e.divide_by_var(0, s) if not e.is_zero()
          else e.truncate(max(e.order - s, 0)) for e in row] for row in sys.B]
    return LinearSystem(sys.q - s, B), s


def apply_T(sys: LinearSystem, t: CertificateEvent) -> LinearSystem:
    """One change of variables, no implicit rank normalization (replays are
    deterministic; normalization is its own recorded event)."""
    if isinstance(t, Strip):
        if t.s == 0:
            return sys
        B = [[e.divide_by_var(0, t.s) if not e.is_zero()
              else e.truncate(max(e.order - t.s, 0)) for e in row]
             for row in sys.B]
        return LinearSystem(sys.q - t.s, B)
    if isinstance(t, PolyLinear):
        return _apply_poly_linear(sys, t)
    if isinstance(t, Shearing):
        return _apply_shearing(sys, t)
    if isinstance(t, Ramify):
        return _apply_ramify(sys, t)
    raise StructureError(f"unknown transformation {t!r}")


def _apply_poly_linear(sys, t):
    order = min(sys.order, mat_order(t.P))
    P = mat_truncate(t.P, order)
    P0 = mat_constant(P)
    if sys.backend == EXACT:
        try:
            mat_inverse(P0)
        except PreconditionError:
            raise PreconditionError("gauge matrix constant term not invertible")
    Pinv = jets_mat_inverse(P, order)
    B = mat_truncate(sys.B, order)
    conj = jets_mat_mul(Pinv, jets_mat_mul(B, P, order=order), order=order)
    Pprime = [[e.diff(0) for e in row] for row in P]
    xq1 = Jet.variable(0, 1, order, sys.backend) ** (sys.q + 1) \
        if sys.q + 1 <= order else None
    if xq1 is not None:
        deriv = jets_mat_mul(Pinv, Pprime, order=order)
        deriv = [[(xq1 * e).truncate(min((xq1 * e).order, order))
                  for e in row] for row in deriv]
        conj = [[_mixed_add(a, -b) for a, b in zip(ra, rb)]
                for ra, rb in zip(conj, deriv)]
    return LinearSystem(sys.q, conj)


def _apply_shearing(sys, t):
    m = sys.dim
    k = t.exponents
    if len(k) != m:
        raise StructureError("shearing exponent count must match dimension")
    # raw shifted entries; sigma absorbs any pole (raising the rank)
    sigma = 0
    for i in range(m):
        for j in range(m):
            e = k[i] - k[j]
            entry = sys.B[i][j]
            if e > 0 and not entry.is_zero():
                sigma = max(sigma, e - entry.min_degree())
    out = []
    backend = sys.backend
    for i in range(m):
        row = []
        for j in range(m):
            shift = k[j] - k[i] + sigma
            entry = sys.B[i][j]
            if shift >= 0:
                val = entry.mul_by_var(0, shift)
            else:
                if entry.is_zero():
                    val = entry.truncate(max(entry.order + shift, 0))
                else:
                    val = entry.divide_by_var(0, -shift)
            if i == j and k[i]:
                corr = Jet.from_terms({(sys.q + sigma,): -k[i]}, 1,
                                      max(val.order, sys.q + sigma), backend)
                val = _mixed_add(val, corr)
            row.append(val)
        out.append(row)
    return LinearSystem(sys.q + sigma, out)


def _apply_ramify(sys, t):
    if t.alpha == 1:
        return sys
    B = [[substitute_power(e, t.alpha).scale(t.alpha) for e in row]
         for row in sys.B]
    order = mat_order(B)
    return LinearSystem(sys.q * t.alpha, mat_truncate(B, order))


def replay(sys: LinearSystem, events) -> LinearSystem:
    for t in events:
        sys = apply_T(sys, t)
    return sys


# -- eigen analysis -----------------------------------------------------------------

def exact_eigendata(B0):
    """Distinct eigenvalues with multiplicities over the Gaussian rationals.

    Roots are reconstructed from a numeric solve and then verified exactly;
    an unreconstructible eigenvalue raises PrecisionError (callers may fall
    back to the float backend or supply a factorization).
    """
    m = len(B0)
    coeffs = char_poly(B0)
    numeric = np.linalg.eigvals(np.array([[complex(c) for c in row]
                                          for row in B0]))
    found = []
    remaining = list(coeffs)

    def poly_eval(cs, lam):
        acc = as_gaussian(0)
        for c in reversed(cs):
            acc = acc * lam + c
        return acc

    def poly_divide_root(cs, lam):
        # synthetic division by (t - lam); caller checks the remainder
        n = len(cs) - 1
        out = [as_gaussian(0)] * n
        out[n - 1] = cs[n]
        for i in range(n - 1, 0, -1):
            out[i - 1] = cs[i] + out[i] * lam
        return out

    seen = set()
    for z in numeric:
        cand = rational_reconstruct(complex(z), max_den=10 ** 4, tol=1e-5)
        if cand is None or cand in seen:
            continue
        if not poly_eval(remaining, cand).is_zero():
            continue
        seen.add(cand)
        mult = 0
        work = list(coeffs)
        while len(work) > 1 and poly_eval(work, cand).is_zero():
            work = poly_divide_root(work, cand)
            mult += 1
        found.append((cand, mult))
    total = sum(mu for _, mu in found)
    if total != m:
        raise PrecisionError(
            "could not certify the eigenvalue structure over the Gaussian "
            "rationals; use the float backend or supply a factorization")
    return found


def float_eigendata(B0, gap_factor=1e6):
    arr = np.array([[complex(c) for c in row] for row in B0])
    vals = np.linalg.eigvals(arr)
    scale = max(1.0, float(np.max(np.abs(vals))))
    eps = np.finfo(float).eps * scale
    clusters = []
    for v in sorted(vals, key=lambda z: (z.real, z.imag)):
        for c in clusters:
            if abs(v - c[0]) <= gap_factor * eps:
                c[1] += 1
                break
        else:
            clusters.append([v, 1])
    for a, b in itertools.combinations([c[0] for c in clusters], 2):
        if abs(a - b) < gap_factor * eps:
            raise PrecisionError("eigenvalue clusters unresolvable at working "
                                 "precision")
    return [(complex(c[0]), c[1]) for c in clusters]


def leading_split(B0, backend=EXACT):
    """Similarity separating generalized eigenspaces into diagonal blocks.

    Returns (T, T_inverse, blocks) with blocks a list of (eigenvalue, size);
    T's columns are generalized eigenbases in block order.
    """
    m = len(B0)
    if backend == EXACT:
        eig = exact_eigendata(B0)
        columns = []
        blocks = []
        for lam, mult in eig:
            A = [[B0[i][j] - (lam if i == j else as_gaussian(0))
                  for j in range(m)] for i in range(m)]
            power = A
            for _ in range(mult - 1):
                power = mat_mul(power, A)
            basis = kernel_basis(power)
            if len(basis) != mult:
                raise PrecisionError("generalized eigenspace dimension mismatch")
            columns.extend(basis)
            blocks.append((lam, mult))
        T = [[columns[c][r] for c in range(m)] for r in range(m)]
        Tinv = mat_inverse(T)
        return T, Tinv, blocks
    eig = float_eigendata(B0)
    arr = np.array([[complex(c) for c in row] for row in B0])
    columns = []
    blocks = []
    for lam, mult in eig:
        A = arr - lam * np.eye(m)
        power = np.linalg.matrix_power(A, mult)
        _u, s, vh = np.linalg.svd(power)
        ker = vh[m - mult:].conj().T
        columns.append(ker)
        blocks.append((lam, mult))
    T = np.hstack(columns)
    Tinv = np.linalg.inv(T)
    return T.tolist(), Tinv.tolist(), blocks


# -- principal form -----------------------------------------------------------------

@dataclass(frozen=True)
class SystemNormalForm:
    """Principal data: x^(p+1) y' = (D(x) + x^p C + remainder) y."""

    p: int
    D: tuple          # diagonal univariate polynomial jets (length m)
    C: tuple          # constant matrix
    remainder: tuple  # matrix of jets, every entry of order >= p+1

    @property
    def dim(self):
        return len(self.D)

    def full_matrix(self, order, backend=EXACT):
        m = self.dim
        out = []
        for i in range(m):
            row = []
            for j in range(m):
                e = self.remainder[i][j]
                e = e.truncate(min(e.order, order))
                cij = self.C[i][j]
                add = Jet.from_terms({(self.p,): cij}, 1, order, backend)
                e = _mixed_add(e, add)
                if i == j:
                    e = _mixed_add(e, self.D[i].truncate(min(self.D[i].order, order)))
                row.append(e)
            out.append(row)
        return out


def validate_normal_form(nf: SystemNormalForm, backend=EXACT):
    m = nf.dim
    zero = (lambda c: c.is_zero()) if backend == EXACT else (lambda c: abs(c) < 1e-9)
    if nf.p == 0:
        if all(zero(nf.C[i][j]) for i in range(m) for j in range(m)):
            raise NotInFormError("p = 0 requires a nonzero constant matrix")
        if any(not d.is_zero() for d in nf.D):
            raise NotInFormError("p = 0 requires an empty diagonal part")
    else:
        if all(d.is_zero() or zero(d.constant_term()) for d in nf.D):
            raise NotInFormError("diagonal part must not vanish at the origin")
        for d in nf.D:
            if not d.is_zero() and d.max_degree() > nf.p - 1:
                raise NotInFormError("diagonal degree exceeds p - 1")
        # commutation [D, C] = 0: entries force C_ij = 0 whenever D_i != D_j
        for i in range(m):
            for j in range(m):
                if i != j and not zero(nf.C[i][j]):
                    if not nf.D[i].equal_terms(nf.D[j]):
                        raise NotInFormError(
                            "constant matrix does not commute with the diagonal")
    for row in nf.remainder:
        for e in row:
            if not e.is_zero() and e.min_degree() <= nf.p:
                raise NotInFormError("remainder reaches the principal orders")
    return True


@dataclass
class ReductionCertificate:
    events: list = dc_field(default_factory=list)
    ledger: list = dc_field(default_factory=list)   # (lam, rank r, slots)

    def transformations(self):
        return [e for e in self.events if not isinstance(e, Strip)]

    def ledger_matrix(self, q, m, order, backend=EXACT):
        """The re-add term sum lam x^(q-r) on the recorded slots."""
        out = [[_zero_like(order, backend) for _ in range(m)] for _ in range(m)]
        for lam, r, slots in self.ledger:
            if q - r < 0:
                raise StructureError("ledger exponent below zero")
            for s in slots:
                add = Jet.from_terms({(q - r,): lam}, 1, order, backend)
                out[s][s] = _mixed_add(out[s][s], add)
        return out


def assembled_true_matrix(sys: LinearSystem, cert: ReductionCertificate):
    """Working matrix plus ledger re-add: the matrix of the replayed true
    system at the final rank."""
    m = sys.dim
    led = cert.ledger_matrix(sys.q, m, sys.order, sys.backend)
    return [[_mixed_add(a, b) for a, b in zip(ra, rb)]
            for ra, rb in zip(sys.B, led)]


# -- the reducer ---------------------------------------------------------------------

def _block_valuation(B, slots):
    v = math.inf
    for i in slots:
        for j in slots:
            e = B[i][j]
            v = min(v, e.min_degree() if not e.is_zero() else e.order + 1)
    return v


def _extract_block(B, slots, strip=0):
    out = []
    for i in slots:
        row = []
        for j in slots:
            e = B[i][j]
            if strip and not e.is_zero():
                e = e.divide_by_var(0, strip)
            elif strip:
                e = e.truncate(max(e.order - strip, 0))
            row.append(e)
        out.append(row)
    return out


def _is_nilpotent_exact(M):
    m = len(M)
    power = M
    for _ in range(m):
        if all(c.is_zero() for row in power for c in row):
            return True
        power = mat_mul(power, M)
    return all(c.is_zero() for row in power for c in row)


def _char_poly_jets(B, order):
    """Characteristic polynomial of a matrix of jets: coefficient list
    [a_m, ..., a_1] with chi = t^m + a_1 t^{m-1} + ... + a_m (jets)."""
    m = len(B)
    backend = B[0][0].backend
    coeffs = []
    Mk = [[Jet.constant(1 if i == j else 0, 1, order, backend)
           for j in range(m)] for i in range(m)]
    cs = []
    for k in range(1, m + 1):
        Mk = jets_mat_mul(B, Mk, order=order)
        tr = None
        for i in range(m):
            tr = Mk[i][i] if tr is None else _mixed_add(tr, Mk[i][i])
        if backend == EXACT:
            ck = tr.scale(as_gaussian(Fraction(-1, k)))
        else:
            ck = tr.scale(-1.0 / k)
        cs.append(ck)
        for i in range(m):
            Mk[i][i] = _mixed_add(Mk[i][i], ck)
    return cs  # cs[k-1] is the coefficient of t^(m-k)


def _eigen_slope(B, q, order):
    """Newton slope of the eigenvalues: min over i of val(a_i)/i."""
    cs = _char_poly_jets(B, order)
    best = Fraction(10 ** 9)
    seen = False
    for i, a in enumerate(cs, start=1):
        if a.is_zero():
            continue
        seen = True
        best = min(best, Fraction(a.min_degree(), i))
    return best if seen else None


def _embed_poly_linear(P_block, slots, m, order, backend):
    out = [[Jet.constant(1 if i == j else 0, 1, order, backend)
            for j in range(m)] for i in range(m)]
    for a, ia in enumerate(slots):
        for b, jb in enumerate(slots):
            out[ia][jb] = P_block[a][b]
    return PolyLinear(tuple(tuple(r) for r in out))


def _split_then_diagonalize(Bb, qb, order, backend):
    """Constant split + order-by-order block decoupling for a block whose
    leading matrix has at least two distinct eigenvalues.  Returns
    (P matrix of jets on the block, sub-partition sizes)."""
    B0 = mat_constant(Bb)
    T, Tinv, blocks = leading_split(B0, backend)
    mb = len(Bb)
    if backend == EXACT:
        T_jets = [[Jet.constant(c, 1, order, backend) for c in row] for row in T]
        work = jets_mat_mul([[Jet.constant(c, 1, order, backend) for c in row]
                             for row in Tinv],
                            jets_mat_mul(Bb, T_jets, order=order), order=order)
    else:
        T_jets = [[Jet.constant(complex(c), 1, order, backend) for c in row]
                  for row in T]
        Tinv_j = [[Jet.constant(complex(c), 1, order, backend) for c in row]
                  for row in Tinv]
        work = jets_mat_mul(Tinv_j, jets_mat_mul(Bb, T_jets, order=order),
                            order=order)
    sizes = [mult for _, mult in blocks]
    offs = [0]
    for s_ in sizes:
        offs.append(offs[-1] + s_)
    ranges = [list(range(offs[i], offs[i + 1])) for i in range(len(sizes))]
    # order-by-order decoupling: kill off-block entries degree by degree
    P_total = T_jets
    B0c = mat_constant(work)
    # derivative term x^{q+1} P^{-1} P' only touches degrees > d when P_d is
    # adjusted (q >= 1), so a single upward sweep settles every degree
    for d in range(1, order + 1):
        defect = {}
        for bi, ri in enumerate(ranges):
            for bj, rj in enumerate(ranges):
                if bi == bj:
                    continue
                for a in ri:
                    for b in rj:
                        c = work[a][b].coefficient((d,))
                        nz = (not c.is_zero()) if backend == EXACT else abs(c) > 1e-13
                        if nz:
                            defect[(a, b)] = c
        if not defect:
            continue
        # solve B0 X - X B0 = -defect on the off-blocks (Sylvester, exact)
        X = _solve_offblock_sylvester(B0c, ranges, defect, backend)
        Pd = [[Jet.constant(1 if i == j else 0, 1, order, backend)
               for j in range(mb)] for i in range(mb)]
        for (a, b), val in X.items():
            Pd[a][b] = _mixed_add(
                Pd[a][b], Jet.from_terms({(d,): val}, 1, order, backend))
        sysb = LinearSystem(qb, work)
        sysb = _apply_poly_linear(sysb, PolyLinear(tuple(tuple(r) for r in Pd)))
        work = [list(r) for r in sysb.B]
        P_total = jets_mat_mul(P_total, Pd, order=order)
    return P_total, sizes


def _solve_offblock_sylvester(B0, ranges, defect, backend):
    out = {}
    for bi, ri in enumerate(ranges):
        for bj, rj in enumerate(ranges):
            if bi == bj:
                continue
            keys = [(a, b) for a in ri for b in rj if (a, b) in defect]
            if not keys:
                continue
            ni, nj = len(ri), len(rj)
            unknowns = [(a, b) for a in ri for b in rj]
            index = {k: t for t, k in enumerate(unknowns)}
            rows = []
            rhs = []
            for a in ri:
                for b in rj:
                    row = [as_gaussian(0)] * len(unknowns) if backend == EXACT \
                        else [0j] * len(unknowns)
                    for t, at in enumerate(ri):
                        row[index[(at, b)]] = row[index[(at, b)]] + B0[a][at] \
                            if backend == EXACT else row[index[(at, b)]] + complex(B0[a][at])
                    for t, bt in enumerate(rj):
                        val = B0[bt][b]
                        if backend == EXACT:
                            row[index[(a, bt)]] = row[index[(a, bt)]] - val
                        else:
                            row[index[(a, bt)]] = row[index[(a, bt)]] - complex(val)
                    rows.append(row)
                    d = defect.get((a, b))
                    if d is None:
                        rhs.append(as_gaussian(0) if backend == EXACT else 0j)
                    else:
                        rhs.append(-d if backend == EXACT else -complex(d))
            if backend == EXACT:
                sol = solve(rows, rhs)
                if sol is None:
                    raise PrecisionError("Sylvester system is singular")
            else:
                sol = np.linalg.solve(np.array(rows, dtype=complex),
                                      np.array(rhs, dtype=complex)).tolist()
            for kk, tname in index.items():
                out[kk] = sol[tname]
    return out


def _block_shape_final(Bb, qb, backend):
    """Shape predicate at the block's own scale (qb = candidate p)."""
    mb = len(Bb)
    if all(e.is_zero() for row in Bb for e in row):
        return True
    if qb < 0:
        return False
    if qb == 0:
        return True
    zero = (lambda c: c.is_zero()) if backend == EXACT else (lambda c: abs(c) < 1e-12)
    order = mat_order(Bb)
    if order < qb:
        raise BudgetError("budget below the candidate principal order",
                          required_order=qb + 1)
    const_diag_seen = False
    for i in range(mb):
        for j in range(mb):
            e = Bb[i][j]
            if i == j:
                if not zero(e.constant_term()):
                    const_diag_seen = True
                continue
            if not e.is_zero() and e.min_degree() < qb:
                return False
    if not const_diag_seen:
        return False
    # commutation: off-diagonal x^qb coefficients must join equal diagonals
    for i in range(mb):
        for j in range(mb):
            if i == j:
                continue
            cij = Bb[i][j].coefficient((qb,))
            if not zero(cij):
                di = _poly_below(Bb[i][i], qb)
                dj = _poly_below(Bb[j][j], qb)
                if not di.equal_terms(dj):
                    return False
    return True


def _poly_below(e, p):
    terms = {ex: c for ex, c in e.items() if ex[0] < p}
    return Jet(1, e.order, e.backend, terms, _normalized=True)


def turrittin_reduce(sys: LinearSystem):
    """Full reduction; returns (certificate, normal form, final system).

    The certificate replays: applying its events to the input and adding the
    ledger matrix reproduces the final system exactly (zero discrepancy).
    """
    backend = sys.backend
    cert = ReductionCertificate()
    work, s0 = poincare_rank(sys)
    if s0:
        cert.events.append(Strip(s0))
    m = work.dim
    partition = [list(range(m))]
    steps = 0
    while True:
        steps += 1
        if steps > STEP_CAP:
            raise BudgetError("reduction did not stabilize",
                              required_order=2 * sys.order)
        if work.order < work.q:
            raise BudgetError("truncation budget exhausted",
                              required_order=work.q + 1 + (sys.order - work.order))
        # global strip, capped so ledger exponents stay nonnegative
        max_r = max((r for _, r, _ in cert.ledger), default=0)
        v = mat_valuation(work.B)
        s = max(0, min(v, work.q - max_r, work.q))
        if s:
            cert.events.append(Strip(s))
            work = apply_T(work, Strip(s))
        if work.q == 0:
            break
        # find an unfinished block
        busy = None
        for slots in partition:
            vb = _block_valuation(work.B, slots)
            if vb is math.inf or vb > work.order:
                continue   # zero block: contributes only through the ledger
            vb = min(vb, work.q)
            Bb = _extract_block(work.B, slots, strip=vb)
            qb = work.q - vb
            if not _block_shape_final(Bb, qb, backend):
                busy = (slots, vb, Bb, qb)
                break
        if busy is None:
            break
        slots, vb, Bb, qb = busy
        if qb == 0:
            # block became regular at its own scale but the strip is blocked
            # globally; it is final as-is (p contribution through vb)
            raise BudgetError("inconsistent block scales", required_order=None)
        B0 = mat_constant(Bb)
        order = work.order
        if backend == EXACT:
            nilpotent = _is_nilpotent_exact(B0)
        else:
            arr = np.array([[complex(c) for c in row] for row in B0])
            nilpotent = np.all(np.abs(np.linalg.eigvals(arr)) < 1e-9)
        if not nilpotent:
            eig = exact_eigendata(B0) if backend == EXACT else float_eigendata(B0)
            if len(eig) == 1:
                lam, _ = eig[0]
                # scalar exponential shift: ledger only, not a gauge step
                newB = [list(r) for r in work.B]
                for i in slots:
                    sub = Jet.from_terms({(vb,): lam}, 1, order, backend)
                    newB[i][i] = _mixed_add(newB[i][i], -sub)
                cert.ledger.append((lam, work.q - vb, tuple(slots)))
                work = LinearSystem(work.q, newB)
                continue
            P_block, sizes = _split_then_diagonalize(Bb, qb, order, backend)
            step = _embed_poly_linear(P_block, slots, m, order, backend)
            cert.events.append(step)
            work = apply_T(work, step)
            offs = [0]
            for s_ in sizes:
                offs.append(offs[-1] + s_)
            new_blocks = [[slots[t] for t in range(offs[i], offs[i + 1])]
                          for i in range(len(sizes))]
            partition = [b for b in partition if b != slots] + new_blocks
            partition.sort(key=lambda b: b[0])
            continue
        # nilpotent leading part: shearing search, ramify on fractional slope
        move = _nilpotent_move(Bb, qb, order, backend, m, slots)
        if move is None:
            raise BudgetError("no admissible shearing or ramification found",
                              required_order=2 * sys.order)
        if isinstance(move, Ramify):
            cert.events.append(move)
            work = apply_T(work, move)
            cert.ledger = [(lam * move.alpha
                            if backend == EXACT else lam * move.alpha,
                            r * move.alpha, sl)
                           for lam, r, sl in cert.ledger]
            continue
        cert.events.append(move)
        before_q = work.q
        work = apply_T(work, move)
        if work.q > before_q:
            raise PreconditionError(
                "recorded shearing increased the rank (internal invariant)")
        continue
    nf = _assemble(work, cert, backend)
    return cert, nf, work


def _nilpotent_move(Bb, qb, order, backend, m, slots):
    mb = len(Bb)
    K = max(2 * qb, 2) * max(mb - 1, 1)
    best = None
    for k in itertools.product(range(K + 1), repeat=mb):
        if min(k) != 0 or all(v == 0 for v in k):
            continue
        sysb = LinearSystem(qb, Bb)
        sheared = _apply_shearing(sysb, Shearing(k))
        if sheared.q > qb:
            continue   # sigma absorption would raise the rank
        stripped, _ = poincare_rank(sheared) if not sheared.is_zero() else (sheared, 0)
        B0n = mat_constant(stripped.B)
        if backend == EXACT:
            nil = _is_nilpotent_exact(B0n)
        else:
            arr = np.array([[complex(c) for c in row] for row in B0n])
            nil = np.all(np.abs(np.linalg.eigvals(arr)) < 1e-9)
        improved = stripped.q < qb or (not nil)
        if improved:
            full_k = [0] * m
            for t, sidx in enumerate(slots):
                full_k[sidx] = k[t]
            cand = Shearing(tuple(full_k))
            score = (stripped.q, 0 if not nil else 1, sum(k), k)
            if best is None or score < best[0]:
                best = (score, cand)
    if best is not None:
        return best[1]
    slope = _eigen_slope(Bb, qb, order)
    if slope is not None and slope.denominator > 1:
        return Ramify(slope.denominator)
    if slope is None:
        # nilpotent to budget at every order: ramifying cannot help; this
        # happens for genuinely irregular data beyond the budget
        return Ramify(2)
    return None


def _assemble(work: LinearSystem, cert: ReductionCertificate, backend):
    m = work.dim
    p = work.q
    order = work.order
    if order < p:
        raise BudgetError("budget below the principal order",
                          required_order=p + 1)
    true_B = assembled_true_matrix(work, cert)
    zero = (lambda c: c.is_zero()) if backend == EXACT else (lambda c: abs(c) < 1e-12)
    D = []
    C = []
    R = []
    for i in range(m):
        di_terms = {}
        crow = []
        rrow = []
        for j in range(m):
            e = true_B[i][j]
            cij = e.coefficient((p,))
            crow.append(cij)
            rest_terms = {ex: c for ex, c in e.items() if ex[0] > p}
            low_off = {ex: c for ex, c in e.items() if ex[0] < p}
            if i == j:
                di_terms = low_off
            elif low_off:
                raise NotInFormError(
                    "off-diagonal entry below the principal order")
            rrow.append(Jet(1, e.order, backend, rest_terms, _normalized=True))
        D.append(Jet(1, order, backend, di_terms, _normalized=True))
        C.append(tuple(crow))
        R.append(tuple(rrow))
    nf = SystemNormalForm(p, tuple(D), tuple(C), tuple(R))
    validate_normal_form(nf, backend)
    return nf


def is_normal_linear(sys: LinearSystem) -> bool:
    """Shape predicate for an already-normalized system (used for the
    idempotence guarantee: such inputs yield empty transformation lists)."""
    try:
        stripped, _ = poincare_rank(sys)
    except DegenerateSystemError:
        return False
    return _block_shape_final([list(r) for r in stripped.B], stripped.q,
                              sys.backend)
