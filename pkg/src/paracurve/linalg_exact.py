"""Dense exact linear algebra over Gaussian rationals (small systems only).

Everything here is plain fraction-free-ish Gaussian elimination; matrix
sizes in this package never exceed a handful of rows, so clarity wins.
"""

from __future__ import annotations

from .errors import PreconditionError
from .gaussrat import GaussianRational, as_gaussian


def _as_matrix(rows):
    return [[as_gaussian(x) for x in row] for row in rows]


def mat_mul(a, b):
    n, k, m = len(a), len(b), len(b[0])
    return [[sum((a[i][t] * b[t][j] for t in range(k)), as_gaussian(0))
             for j in range(m)] for i in range(n)]


def mat_vec(a, v):
    return [sum((a[i][j] * v[j] for j in range(len(v))), as_gaussian(0))
            for i in range(len(a))]


def identity(n):
    return [[as_gaussian(1 if i == j else 0) for j in range(n)] for i in range(n)]


def row_reduce(matrix, ncols=None):
    """In-place RREF; returns (rref, pivot column list)."""
    m = [row[:] for row in matrix]
    rows = len(m)
    cols = ncols if ncols is not None else (len(m[0]) if rows else 0)
    pivots = []
    r = 0
    for c in range(cols):
        pivot_row = None
        for i in range(r, rows):
            if not m[i][c].is_zero():
                pivot_row = i
                break
        if pivot_row is None:
            continue
        m[r], m[pivot_row] = m[pivot_row], m[r]
        inv = m[r][c].inverse()
        m[r] = [x * inv for x in m[r]]
        for i in range(rows):
            if i != r and not m[i][c].is_zero():
                f = m[i][c]
                m[i] = [a - f * b for a, b in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return m, pivots


def solve(a, b):
    """Solve a x = b exactly; returns None when inconsistent.

    b may be a vector or a matrix of right-hand columns; under-determined
    systems return one solution (free variables set to zero).
    """
    vector_rhs = not isinstance(b[0], list)
    rhs = [[x] for x in b] if vector_rhs else b
    n = len(a)
    ncols = len(a[0])
    aug = [list(a[i]) + list(rhs[i]) for i in range(n)]
    red, pivots = row_reduce(_as_matrix(aug), ncols=ncols)
    # consistency: no pivot may appear in the RHS block of a zero row
    width = ncols + len(rhs[0])
    for row in red:
        if all(row[j].is_zero() for j in range(ncols)) and \
           any(not row[j].is_zero() for j in range(ncols, width)):
            return None
    nrhs = len(rhs[0])
    xs = [[as_gaussian(0)] * nrhs for _ in range(ncols)]
    for r, c in enumerate(pivots):
        for j in range(nrhs):
            xs[c][j] = red[r][ncols + j]
    if vector_rhs:
        return [row[0] for row in xs]
    return xs


def mat_inverse(a):
    n = len(a)
    sol = solve(_as_matrix(a), identity(n))
    if sol is None:
        raise PreconditionError("matrix is not invertible")
    # verify squareness of the solution (singular square systems return None)
    check = mat_mul(_as_matrix(a), sol)
    for i in range(n):
        for j in range(n):
            expect = as_gaussian(1 if i == j else 0)
            if check[i][j] != expect:
                raise PreconditionError("matrix is not invertible")
    return sol


def determinant(a):
    m = _as_matrix(a)
    n = len(m)
    det = as_gaussian(1)
    for c in range(n):
        pivot = None
        for r in range(c, n):
            if not m[r][c].is_zero():
                pivot = r
                break
        if pivot is None:
            return as_gaussian(0)
        if pivot != c:
            m[c], m[pivot] = m[pivot], m[c]
            det = -det
        det = det * m[c][c]
        inv = m[c][c].inverse()
        for r in range(c + 1, n):
            if not m[r][c].is_zero():
                f = m[r][c] * inv
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return det


def char_poly(a):
    """Coefficients [c_0..c_n] of det(t I - A) = sum c_k t^k (Faddeev–LeVerrier)."""
    n = len(a)
    a = _as_matrix(a)
    coeffs = [as_gaussian(0)] * (n + 1)
    coeffs[n] = as_gaussian(1)
    m = identity(n)
    for k in range(1, n + 1):
        m = mat_mul(a, m)
        trace = sum((m[i][i] for i in range(n)), as_gaussian(0))
        c = trace / GaussianRational(-k)
        coeffs[n - k] = c
        for i in range(n):
            m[i][i] = m[i][i] + c
    return coeffs


def kernel_basis(a):
    """Basis of the nullspace of a (list of column vectors)."""
    red, pivots = row_reduce(_as_matrix(a))
    ncols = len(a[0])
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [as_gaussian(0)] * ncols
        v[f] = as_gaussian(1)
        for r, c in enumerate(pivots):
            v[c] = -red[r][f]
        basis.append(v)
    return basis
