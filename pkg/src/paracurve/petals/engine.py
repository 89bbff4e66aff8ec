"""Discretized contraction operator: sector grids, orbit iteration, the
telescoped operator sweep (compiled kernel or numpy fallback, selected at
import), Picard iteration and the verification reports.

The integrating-factor ratios are always telescoped along consecutive
orbit points; the antiderivative is never evaluated at a single point,
which keeps every exponent's real part nonpositive along orbits inside the
admissible sector (overflow-free by construction).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from ..errors import (ConstructionFailedError, OrbitOrderingError,
                      PreconditionError, SectorExitError, TailError)
from .normalize import NormalizedMapData

try:
    from .. import _fastsum
    HAVE_KERNEL = True
except ImportError:     # pure-python fallback
    _fastsum = None
    HAVE_KERNEL = False


# -- grids -------------------------------------------------------------------------

@dataclass
class SectorGrid:
    """Geometric radial ladder x uniform angular fan inside an open sector.

    Node (i, j) sits at radius r0 * ratio^i and angle th_lo + j * dth;
    values holds one complex vector entry per node per transverse variable
    (shape (levels+1, rays+1) for the scalar case, plus a trailing axis in
    the matrix case).
    """

    tau: float
    eta: float
    delta: float
    ratio: float
    levels: int
    rays: int
    m: int
    transverse: int = 1
    values: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        if self.values is None:
            shape = (self.levels + 1, self.rays + 1) \
                if self.transverse == 1 else \
                (self.levels + 1, self.rays + 1, self.transverse)
            self.values = np.zeros(shape, dtype=complex)

    @property
    def th_lo(self):
        return self.tau - self.eta / 2

    @property
    def dth(self):
        return self.eta / self.rays

    def radii(self):
        return self.delta * self.ratio ** np.arange(self.levels + 1)

    def angles(self):
        return self.th_lo + self.dth * np.arange(self.rays + 1)

    def nodes(self):
        r = self.radii()[:, None]
        th = self.angles()[None, :]
        return r * np.exp(1j * th)

    def nodes_flat(self):
        return self.nodes().ravel()

    def with_values(self, values):
        return SectorGrid(self.tau, self.eta, self.delta, self.ratio,
                          self.levels, self.rays, self.m, self.transverse,
                          np.array(values))

    def copy_zero(self):
        return SectorGrid(self.tau, self.eta, self.delta, self.ratio,
                          self.levels, self.rays, self.m, self.transverse)


def default_grid(nr: NormalizedMapData, tau, eta, delta, tol,
                 levels=None, rays=None) -> SectorGrid:
    """Grid sized so one step of the base dynamics stays within an
    interpolation cell near the outer edge, and the ladder reaches the
    radius where operator contributions fall below the tail tolerance."""
    kp = nr.k + nr.p
    ratio = max(0.80, 1.0 - 4.0 * delta ** kp)
    ratio = min(ratio, 0.93)
    tail_tol = tol / 100.0
    target = (max(tail_tol, 1e-16) * 0.01 * (0.5 * delta) ** nr.m)
    r_min = target ** (1.0 / (nr.m + kp))
    r_min = min(r_min, delta / 50.0)
    if levels is None:
        levels = int(math.ceil(math.log(r_min / delta) / math.log(ratio)))
        levels = max(12, min(levels, 60))
    if rays is None:
        rays = 32
    return SectorGrid(float(tau), float(eta), float(delta), ratio,
                      levels, rays, nr.m, nr.transverse_dim)


# -- numeric problem packing ---------------------------------------------------------

@dataclass
class PackedProblem:
    k: int
    p: int
    m: int
    f_coef: np.ndarray          # dense (deg_x+1, deg_y+1) for the scalar case
    g_coef: np.ndarray
    r_coef: np.ndarray          # (transverse, p) antiderivative coefficients
    C: np.ndarray               # (transverse, transverse)
    scalar: bool
    f_terms: tuple = ()         # sparse fallback for the matrix case
    g_terms: tuple = ()

    @property
    def c_scalar(self):
        return complex(self.C[0, 0]) if self.C.size else 0j


def pack_problem(nr: NormalizedMapData) -> PackedProblem:
    scalar = nr.transverse_dim == 1
    if scalar:
        f_coef = _dense_2d(nr.f_jet)
        g_coef = _dense_2d(nr.g_jets[0])
        f_terms = g_terms = ()
    else:
        f_coef = g_coef = np.zeros((1, 1), dtype=complex)
        f_terms = _sparse_terms(nr.f_jet)
        g_terms = tuple(_sparse_terms(g) for g in nr.g_jets)
    return PackedProblem(nr.k, nr.p, nr.m, f_coef, g_coef,
                         nr.r_coefficients(), nr.C_gen, scalar,
                         f_terms, g_terms)


def _dense_2d(jet):
    dx = max((e[0] for e, _ in jet.items()), default=0)
    dy = max((e[1] for e, _ in jet.items()), default=0)
    out = np.zeros((dx + 1, dy + 1), dtype=complex)
    for e, c in jet.items():
        out[e[0], e[1]] = complex(c)
    return out


def _sparse_terms(jet):
    return tuple((e, complex(c)) for e, c in jet.terms_sorted())


def _poly_eval_2d(coef, x, y):
    acc = np.zeros_like(x)
    for j in range(coef.shape[1] - 1, -1, -1):
        row = np.zeros_like(x)
        for i in range(coef.shape[0] - 1, -1, -1):
            row = row * x + coef[i, j]
        acc = acc * y + row
    return acc


def _sparse_eval(terms, x, ys):
    acc = np.zeros_like(x)
    for e, c in terms:
        term = np.full_like(x, c)
        if e[0]:
            term = term * x ** e[0]
        for t, k in enumerate(e[1:]):
            if k:
                term = term * ys[t] ** k
        acc = acc + term
    return acc


# -- interpolation ---------------------------------------------------------------------

def _wrap_angle(th, tau):
    """Angle offset from the bisecting direction, wrapped into (-pi, pi]."""
    d = (np.asarray(th) - tau) % (2 * math.pi)
    return np.where(d > math.pi, d - 2 * math.pi, d)


def interp_values(grid: SectorGrid, x):
    """Bilinear interpolation of the grid values in (log r, theta); beyond
    the inner rung values are damped by (r / r_floor)^(m-1), consistent
    with the growth bound that defines the solution space."""
    r = np.abs(x)
    dth_off = _wrap_angle(np.angle(x), grid.tau)
    lr0 = math.log(grid.delta)
    lratio = math.log(grid.ratio)
    li = (np.log(np.maximum(r, 1e-300)) - lr0) / lratio
    damp = np.ones_like(r)
    below = li > grid.levels
    if np.any(below):
        r_floor = grid.delta * grid.ratio ** grid.levels
        damp = np.where(below, (r / r_floor) ** (grid.m - 1.0), 1.0)
        li = np.minimum(li, grid.levels)
    li = np.maximum(li, 0.0)
    tj = (dth_off + grid.eta / 2) / grid.dth
    tj = np.clip(tj, 0.0, grid.rays)
    i0 = np.minimum(li.astype(int), grid.levels - 1)
    j0 = np.minimum(tj.astype(int), grid.rays - 1)
    wi = li - i0
    wj = tj - j0
    v = grid.values
    if grid.transverse == 1:
        out = ((1 - wi) * (1 - wj) * v[i0, j0] + wi * (1 - wj) * v[i0 + 1, j0]
               + (1 - wi) * wj * v[i0, j0 + 1] + wi * wj * v[i0 + 1, j0 + 1])
        return out * damp
    out = ((1 - wi)[..., None] * (1 - wj)[..., None] * v[i0, j0]
           + wi[..., None] * (1 - wj)[..., None] * v[i0 + 1, j0]
           + (1 - wi)[..., None] * wj[..., None] * v[i0, j0 + 1]
           + wi[..., None] * wj[..., None] * v[i0 + 1, j0 + 1])
    return out * damp[..., None]


# -- integrating factors -----------------------------------------------------------------

def _r_eval(r_coef, p, x):
    """R_l(x) = sum_nu r_coef[l, nu] x^(nu - p), vectorized over x."""
    if p == 0:
        if np.ndim(x) == 0:
            return np.zeros(r_coef.shape[0], dtype=complex)
        return np.zeros(r_coef.shape[:1] + np.shape(x), dtype=complex)
    xp = x ** (-p)
    acc = None
    for nu in range(p):
        term = np.multiply.outer(r_coef[:, nu], xp)
        acc = term if acc is None else acc + term
        xp = xp * x
    return acc


def E_factors(nr: NormalizedMapData, x_from, x_to):
    """E(x_from) E(x_to)^{-1} with the explicit diagonal antiderivative and
    the principal-branch power of the constant matrix; only differences
    along orbit segments are ever formed.

    Scalar transverse data accepts vectorized inputs and returns an array
    of factors; matrix data takes one point pair and returns the matrix.
    """
    prob = pack_problem(nr) if not isinstance(nr, PackedProblem) else nr
    dR = _r_eval(prob.r_coef, prob.p, np.asarray(x_from)) \
        - _r_eval(prob.r_coef, prob.p, np.asarray(x_to))
    if np.any(np.real(dR) > 50.0):
        raise OrbitOrderingError(
            "integrating factor exponent has large positive real part: "
            "check the orbit ordering and the sector")
    lg = np.log(np.asarray(x_from, dtype=complex) / np.asarray(x_to, dtype=complex))
    mdim = prob.C.shape[0]
    if mdim == 1:
        out = np.exp(dR[0] - prob.c_scalar * lg)
        return complex(out) if np.ndim(x_from) == 0 else out
    if np.ndim(x_from) != 0:
        raise PreconditionError("matrix factors are pointwise")
    power = _matrix_power_series(prob.C, np.asarray(-lg))
    return np.diag(np.exp(dR.reshape(-1))) @ power


def _matrix_power_series(C, t):
    """exp(t C) for small |t| (series, converges fast on orbit steps)."""
    mdim = C.shape[0]
    t = np.asarray(t, dtype=complex)
    out = np.zeros(t.shape + (mdim, mdim), dtype=complex)
    out[...] = np.eye(mdim)
    term = np.array(out)
    for j in range(1, 24):
        term = np.einsum("...ab,bc->...ac", term, C) * (t[..., None, None] / j)
        out = out + term
        if np.max(np.abs(term)) < 1e-18:
            break
    return out


def H_eval(nr: NormalizedMapData, x, y, trust_radius=None):
    """H(x, y) = y - E(x) E(f(x,y))^{-1} (y o F)(x, y) at one point."""
    prob = pack_problem(nr)
    trust = trust_radius if trust_radius is not None else nr.trust_radius
    if abs(x) > trust:
        raise PreconditionError("point outside the trust region")
    ynorm = abs(y) if prob.scalar else float(np.max(np.abs(y)))
    if ynorm > 2.0 * abs(x) ** (nr.m - 1):
        raise PreconditionError("transverse value outside the trust region")
    if prob.scalar:
        fx = complex(_poly_eval_2d(prob.f_coef, np.asarray(x), np.asarray(y)))
        gx = complex(_poly_eval_2d(prob.g_coef, np.asarray(x), np.asarray(y)))
        ratio = complex(np.asarray(E_factors(prob, x, fx)).reshape(-1)[0])
        return y - ratio * gx
    ys = [np.asarray(y[t]) for t in range(prob.C.shape[0])]
    fx = complex(_sparse_eval(prob.f_terms, np.asarray(x), ys))
    gx = np.array([complex(_sparse_eval(g, np.asarray(x), ys))
                   for g in prob.g_terms])
    dR = _r_eval(prob.r_coef, prob.p, np.asarray(x)) \
        - _r_eval(prob.r_coef, prob.p, np.asarray(fx))
    lg = complex(np.log(x / fx))
    power = _matrix_power_series(prob.C, np.asarray(-lg))
    ratio = np.diag(np.exp(dR.reshape(-1))) @ power
    return np.asarray(y) - ratio @ gx


# -- orbits ------------------------------------------------------------------------------

@dataclass
class OrbitTrace:
    points: list
    stop_reason: str       # 'floor' or 'cap' or 'exit'

    def __len__(self):
        return len(self.points)


def orbit(nr: NormalizedMapData, grid: SectorGrid, x0: complex,
          radius_floor=None, cap=200000) -> OrbitTrace:
    """Iterate x -> f(x, u(x)) with grid interpolation of u; verifies the
    sector invariance at every step."""
    prob = pack_problem(nr)
    floor = radius_floor if radius_floor is not None else \
        0.2 * grid.delta * grid.ratio ** grid.levels
    half = grid.eta / 2
    pts = []
    x = complex(x0)
    for _ in range(cap):
        r = abs(x)
        doff = float(_wrap_angle(math.atan2(x.imag, x.real), grid.tau))
        if r > grid.delta * (1 + 1e-12) or abs(doff) > half + 1e-12:
            raise SectorExitError(
                f"orbit left the sector at {x!r} (opening or radius too large)")
        pts.append(x)
        if r < floor:
            return OrbitTrace(pts, "floor")
        y = interp_values(grid, np.asarray(x))
        if prob.scalar:
            x = complex(_poly_eval_2d(prob.f_coef, np.asarray(x), y))
        else:
            ys = [np.asarray(y[..., t]) for t in range(prob.C.shape[0])]
            x = complex(_sparse_eval(prob.f_terms, np.asarray(x), ys))
    return OrbitTrace(pts, "cap")


# -- the operator sweep -------------------------------------------------------------------

@dataclass
class SweepDiagnostics:
    exits: int = 0
    tails: int = 0
    order_faults: int = 0
    max_steps: int = 0
    tail_bound: float = 0.0


def _sweep_numpy(prob: PackedProblem, grid: SectorGrid, tail_tol, step_cap,
                 hits_needed=10, tail_abs=0.0):
    nodes = grid.nodes_flat()
    n = nodes.size
    mdim = prob.C.shape[0]
    X = nodes.copy()
    if prob.scalar:
        S = np.zeros(n, dtype=complex)
        Pi = np.ones(n, dtype=complex)
    else:
        S = np.zeros((n, mdim), dtype=complex)
        Pi = np.tile(np.eye(mdim, dtype=complex), (n, 1, 1))
    hits = np.zeros(n, dtype=int)
    status = np.full(n, 2, dtype=int)      # TAIL until proven otherwise
    active = np.ones(n, dtype=bool)
    half = grid.eta / 2
    steps = 0
    for j in range(step_cap):
        if not active.any():
            break
        steps = j
        idx = np.nonzero(active)[0]
        x = X[idx]
        r = np.abs(x)
        doff = _wrap_angle(np.angle(x), grid.tau)
        out = (r > grid.delta * (1 + 1e-12)) | (np.abs(doff) > half + 1e-12)
        if out.any():
            status[idx[out]] = 1           # EXIT
            active[idx[out]] = False
            keep = ~out
            idx = idx[keep]
            if idx.size == 0:
                continue
            x = x[keep]
        y = interp_values(grid, x)
        if prob.scalar:
            fx = _poly_eval_2d(prob.f_coef, x, y)
            gx = _poly_eval_2d(prob.g_coef, x, y)
            dR = (_r_eval(prob.r_coef, prob.p, x)
                  - _r_eval(prob.r_coef, prob.p, fx))[0] \
                if prob.p else np.zeros_like(x)
            if np.any(np.real(dR) > 50.0):
                bad = np.real(dR) > 50.0
                status[idx[bad]] = 3       # ORDER
                active[idx[bad]] = False
                good = ~bad
                idx, x, y, fx, gx, dR = (idx[good], x[good], y[good],
                                         fx[good], gx[good], dR[good])
                if idx.size == 0:
                    continue
            ratio = np.exp(dR - prob.c_scalar * np.log(x / fx))
            H = y - ratio * gx
            contrib = Pi[idx] * H
            S[idx] += contrib
            rel = np.abs(contrib) <= tail_tol * (np.abs(S[idx]) + 1e-300)
            hits[idx] = np.where(rel, hits[idx] + 1, 0)
            # certified stop: the geometric tail envelope of the remaining
            # sum is 10 |x_j|^m times the bounded factor product
            certified = 10.0 * np.abs(fx) ** prob.m * \
                np.maximum(np.abs(Pi[idx] * ratio), 1.0) <= tail_abs
            done = (hits[idx] >= hits_needed) | certified
            if done.any():
                status[idx[done]] = 0      # OK
                active[idx[done]] = False
            Pi[idx] = Pi[idx] * ratio
            X[idx] = fx
        else:
            ys = [y[:, t] for t in range(mdim)]
            fx = _sparse_eval(prob.f_terms, x, ys)
            gx = np.stack([_sparse_eval(g, x, ys) for g in prob.g_terms],
                          axis=-1)
            dR = _r_eval(prob.r_coef, prob.p, x) \
                - _r_eval(prob.r_coef, prob.p, fx) \
                if prob.p else np.zeros((mdim,) + x.shape, dtype=complex)
            if np.any(np.real(dR) > 50.0):
                raise OrbitOrderingError("matrix sweep exponent overflow")
            lg = np.log(x / fx)
            power = _matrix_power_series(prob.C, -lg)
            diag = np.exp(dR)              # (m, nodes)
            ratio = diag.T[..., None] * power
            H = y - np.einsum("nab,nb->na", ratio, gx)
            contrib = np.einsum("nab,nb->na", Pi[idx], H)
            S[idx] += contrib
            rel = np.max(np.abs(contrib), axis=1) <= \
                tail_tol * (np.max(np.abs(S[idx]), axis=1) + 1e-300)
            hits[idx] = np.where(rel, hits[idx] + 1, 0)
            Pi[idx] = np.einsum("nab,nbc->nac", Pi[idx], ratio)
            pi_norm = np.max(np.abs(Pi[idx]), axis=(1, 2))
            certified = 10.0 * np.abs(fx) ** prob.m * \
                np.maximum(pi_norm, 1.0) <= tail_abs
            done = (hits[idx] >= hits_needed) | certified
            if done.any():
                status[idx[done]] = 0
                active[idx[done]] = False
            X[idx] = fx
    diag = SweepDiagnostics(
        exits=int(np.sum(status == 1)), tails=int(np.sum(status == 2)),
        order_faults=int(np.sum(status == 3)), max_steps=steps)
    return S, status, diag


def _sweep_kernel(prob: PackedProblem, grid: SectorGrid, tail_tol, step_cap,
                  hits_needed=10, tail_abs=0.0):
    nodes = grid.nodes_flat()
    S, status, steps = _fastsum.orbit_sums(
        np.ascontiguousarray(prob.f_coef), np.ascontiguousarray(prob.g_coef),
        np.ascontiguousarray(prob.r_coef[0] if prob.r_coef.size
                             else np.zeros(0, dtype=complex)),
        prob.c_scalar, prob.p,
        np.ascontiguousarray(nodes),
        np.ascontiguousarray(grid.values),
        math.log(grid.delta), math.log(grid.ratio),
        grid.tau, grid.eta / 2, grid.dth, grid.levels, grid.rays,
        float(grid.m), grid.delta * (1 + 1e-12),
        tail_tol, hits_needed, step_cap, tail_abs)
    diag = SweepDiagnostics(
        exits=int(np.sum(status == 1)), tails=int(np.sum(status == 2)),
        order_faults=int(np.sum(status == 3)),
        max_steps=int(np.max(steps)) if steps.size else 0)
    return S, status, diag


def select_engine(prob: PackedProblem, engine="auto"):
    if engine == "numpy":
        return "numpy"
    if engine == "compiled":
        if not (HAVE_KERNEL and prob.scalar):
            raise PreconditionError(
                "compiled kernel unavailable for this problem")
        return "compiled"
    if engine == "auto":
        return "compiled" if (HAVE_KERNEL and prob.scalar) else "numpy"
    raise PreconditionError(f"unknown engine {engine!r}")


def apply_T(nr: NormalizedMapData, grid: SectorGrid, tol=1e-10,
            engine="auto", step_cap=200000):
    """One application of the contraction operator on the grid; returns
    (new grid, diagnostics)."""
    prob = pack_problem(nr)
    chosen = select_engine(prob, engine)
    tail_tol = tol / 100.0
    tail_abs = tol / 100.0
    if chosen == "compiled":
        S, status, diag = _sweep_kernel(prob, grid, tail_tol, step_cap,
                                        tail_abs=tail_abs)
    else:
        S, status, diag = _sweep_numpy(prob, grid, tail_tol, step_cap,
                                       tail_abs=tail_abs)
    if diag.exits:
        raise SectorExitError(f"{diag.exits} orbits left the sector")
    if diag.order_faults:
        raise OrbitOrderingError("integrating factor overflow during sweep")
    if diag.tails:
        raise TailError(f"{diag.tails} orbit sums failed to decay "
                        f"within {step_cap} steps")
    if prob.scalar:
        values = S.reshape(grid.levels + 1, grid.rays + 1)
    else:
        values = S.reshape(grid.levels + 1, grid.rays + 1, prob.C.shape[0])
    # membership in the growth ball is re-checked after every sweep
    nodes = grid.nodes()
    bound = np.abs(nodes) ** (nr.m - 1)
    mag = np.abs(values) if prob.scalar else np.max(np.abs(values), axis=-1)
    if np.any(mag > bound * (1 + 1e-9) + 1e-30):
        worst = float(np.max(mag / np.maximum(bound, 1e-300)))
        raise TailError(f"sweep left the growth ball (factor {worst:.3g}); "
                        "shrink the radius")
    return grid.with_values(values), diag


# -- Picard iteration ----------------------------------------------------------------------

@dataclass
class ParabolicCurveNumeric:
    grid: SectorGrid
    residual_sup: float
    m: int
    delta: float
    eta: float
    tau: float
    iterations: int
    engine: str
    normalized: NormalizedMapData

    def graph_points(self):
        """(x, u(x)) over the grid nodes."""
        return self.grid.nodes(), self.grid.values


def invariance_residual(nr: NormalizedMapData, grid: SectorGrid):
    """sup over the grid nodes of |u(f(x, u(x))) - (y o F)(x, u(x))|."""
    prob = pack_problem(nr)
    x = grid.nodes_flat()
    u = interp_values(grid, x)
    if prob.scalar:
        fx = _poly_eval_2d(prob.f_coef, x, u)
        gx = _poly_eval_2d(prob.g_coef, x, u)
        u_fx = interp_values(grid, fx)
        return float(np.max(np.abs(u_fx - gx)))
    ys = [u[:, t] for t in range(prob.C.shape[0])]
    fx = _sparse_eval(prob.f_terms, x, ys)
    gx = np.stack([_sparse_eval(g, x, ys) for g in prob.g_terms], axis=-1)
    u_fx = interp_values(grid, fx)
    return float(np.max(np.abs(u_fx - gx)))


def construct(nr: NormalizedMapData, tau, eta, delta, tol=1e-10,
              engine="auto", max_iter=80, max_halvings=8,
              levels=None, rays=None) -> ParabolicCurveNumeric:
    """Picard-iterate the operator from the zero seed until the sup-norm
    change drops below tol; the radius is halved (up to ``max_halvings``)
    on sector-exit / tail / growth-ball failures."""
    diagnostics = []
    delta = min(delta, nr.trust_radius)
    for attempt in range(max_halvings + 1):
        grid = default_grid(nr, tau, eta, delta, tol, levels=levels,
                            rays=rays)
        prob = pack_problem(nr)
        chosen = select_engine(prob, engine)
        try:
            u = grid.copy_zero()
            it = 0
            for it in range(1, max_iter + 1):
                new_u, _diag = apply_T(nr, u, tol=tol, engine=engine)
                change = float(np.max(np.abs(new_u.values - u.values)))
                u = new_u
                if change < tol:
                    break
            else:
                raise TailError("Picard iteration did not converge")
            residual = invariance_residual(nr, u)
            return ParabolicCurveNumeric(u, residual, nr.m, delta, eta,
                                         float(tau), it, chosen, nr)
        except (SectorExitError, TailError, OrbitOrderingError) as err:
            diagnostics.append(f"delta={delta:.4g}: {err}")
            delta /= 2
    raise ConstructionFailedError(
        "no radius in the shrinking ladder produced a converged curve",
        diagnostics=diagnostics)


def measure_contraction(nr: NormalizedMapData, grid: SectorGrid, pairs=20,
                        seed=0, engine="auto", tol=1e-10):
    """Measured Lipschitz factor of the operator over random pairs in the
    growth ball, in the weighted sup norm n(u) = sup |u| / |x|^(m-1)."""
    rng = np.random.default_rng(seed)
    nodes = grid.nodes()
    bound = np.abs(nodes) ** (nr.m - 1)
    worst = 0.0
    shape = grid.values.shape
    for _ in range(pairs):
        u = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        v = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
        if grid.transverse == 1:
            u = u * bound * 0.5
            v = v * bound * 0.5
        else:
            u = u * bound[..., None] * 0.5
            v = v * bound[..., None] * 0.5
        gu, _ = apply_T(nr, grid.with_values(u), tol=tol, engine=engine)
        gv, _ = apply_T(nr, grid.with_values(v), tol=tol, engine=engine)
        dout = _weighted_norm(gu.values - gv.values, bound, grid.transverse)
        din = _weighted_norm(u - v, bound, grid.transverse)
        if din > 0:
            worst = max(worst, dout / din)
    return worst


def _weighted_norm(values, bound, transverse):
    mag = np.abs(values) if transverse == 1 else np.max(np.abs(values), axis=-1)
    return float(np.max(mag / np.maximum(bound, 1e-300)))


# -- verification reports ---------------------------------------------------------------

@dataclass
class AsymptoticReport:
    slopes: dict              # N' -> measured slope
    constants: dict           # N' -> estimated c_{N'}
    passed: bool
    failures: tuple


def verify_asymptotic(pc: ParabolicCurveNumeric, N: int) -> AsymptoticReport:
    """Least-squares slopes of log-error against log radius on the inner
    half of the ladder: the difference against the order-N' truncation of
    the curve graph must fall at least like radius^(N' + 1/2)."""
    nr = pc.normalized
    grid = pc.grid
    inner = slice((grid.levels + 1) // 2, grid.levels + 1)
    nodes = grid.nodes()[inner]
    values = grid.values[inner]
    gbar = nr.gammabar
    recenter = nr.recenter
    slopes = {}
    consts = {}
    failures = []
    x = nodes.ravel()
    for nprime in range(0, N + 1):
        err = None
        for t in range(nr.transverse_dim):
            u_t = values.ravel() if nr.transverse_dim == 1 \
                else values[..., t].ravel()
            # un-recentred value vs the order-N' truncation of the graph
            full = u_t + _eval_univariate(recenter[t], x)
            target = _eval_univariate_truncated(
                _add_univariate(recenter[t], gbar[t]), x, nprime)
            e_t = np.abs(full - target)
            err = e_t if err is None else np.maximum(err, e_t)
        good = err > 1e-300
        if not np.any(good):
            slopes[nprime] = float("inf")
            consts[nprime] = 0.0
            continue
        lx = np.log(np.abs(x[good]))
        le = np.log(err[good])
        slope, intercept = np.polyfit(lx, le, 1)
        slopes[nprime] = float(slope)
        consts[nprime] = float(np.exp(intercept))
        if slope < nprime + 0.5:
            failures.append(nprime)
    return AsymptoticReport(slopes, consts, not failures, tuple(failures))


def _add_univariate(a, b):
    n = min(a.order, b.order)
    return a.truncate(n) + b.truncate(n)


def _eval_univariate(jet, x):
    deg = max((e[0] for e, _ in jet.items()), default=0)
    coeffs = np.zeros(deg + 1, dtype=complex)
    for e, c in jet.items():
        coeffs[e[0]] = complex(c)
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = acc * x + c
    return acc


def _eval_univariate_truncated(jet, x, upto):
    deg = max((e[0] for e, _ in jet.items()), default=0)
    coeffs = np.zeros(max(deg, upto) + 1, dtype=complex)
    for e, c in jet.items():
        if e[0] <= upto:
            coeffs[e[0]] = complex(c)
    acc = np.zeros_like(x)
    for c in coeffs[::-1]:
        acc = acc * x + c
    return acc


@dataclass
class StabilityReport:
    seeds: int
    max_graph_deviation: float
    attracted: bool
    passed: bool
    violations: tuple


def verify_stability(pc: ParabolicCurveNumeric, seeds=100, iterations=400,
                     seed=0) -> StabilityReport:
    """Iterate the full map through the constructed graph.

    The graph is invariant but transversally repelling in general (saddle
    separatrix), so deviations are measured per step after re-projecting
    onto the graph: the one-step re-projection error must stay within ten
    residuals, while the base coordinates must converge to the origin.
    """
    nr = pc.normalized
    prob = pack_problem(nr)
    grid = pc.grid
    rng = np.random.default_rng(seed)
    radii = grid.delta * grid.ratio ** rng.uniform(1, grid.levels * 0.5, seeds)
    angs = grid.th_lo + grid.dth * rng.uniform(0.5, grid.rays - 0.5, seeds)
    x = radii * np.exp(1j * angs)
    start_r = np.abs(x)
    worst = 0.0
    violations = []
    for _ in range(iterations):
        y = interp_values(grid, x)         # re-projection onto the graph
        if prob.scalar:
            fx = _poly_eval_2d(prob.f_coef, x, y)
            gy = _poly_eval_2d(prob.g_coef, x, y)
        else:
            ys = [y[:, t] for t in range(prob.C.shape[0])]
            fx = _sparse_eval(prob.f_terms, x, ys)
            gy = np.stack([_sparse_eval(g, x, ys) for g in prob.g_terms],
                          axis=-1)
        u_next = interp_values(grid, fx)
        dev = np.max(np.abs(gy - u_next))
        worst = max(worst, float(dev))
        x = fx
    attracted = bool(np.all(np.abs(x) < start_r))
    tol = 10 * max(pc.residual_sup, 1e-14)
    if worst > tol:
        violations.append(f"graph deviation {worst:.3g} > {tol:.3g}")
    if not attracted:
        violations.append("some orbit failed to move inward")
    return StabilityReport(seeds, worst, attracted, not violations,
                           tuple(violations))


def orbit_law_ratio(nr: NormalizedMapData, grid: SectorGrid, x0, steps):
    """(k+p) * j * x_j^(k+p) after ``steps`` iterations (tends to 1)."""
    prob = pack_problem(nr)
    kp = nr.k + nr.p
    x = complex(x0)
    for j in range(1, steps + 1):
        y = interp_values(grid, np.asarray(x))
        if prob.scalar:
            x = complex(_poly_eval_2d(prob.f_coef, np.asarray(x), y))
        else:
            ys = [np.asarray(y[..., t]) for t in range(prob.C.shape[0])]
            x = complex(_sparse_eval(prob.f_terms, np.asarray(x), ys))
    return kp * steps * x ** kp
