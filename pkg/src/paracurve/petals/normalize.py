"""Coordinate normalization before the numerical construction: rescale so
the leading coefficient is -1, kill the reachable intermediate pure-x
orders, and recenter the transverse block on a truncation of the curve
graph.  Everything here runs on the float backend; the recorded data
(alpha, the killed-order polynomial, the recentering truncation) makes the
normalization replayable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import PreconditionError
from ..jets import FLOAT, Jet, JetTuple
from ..liealg import FormalMap
from ..normal_form import (FieldNormalForm, MapNormalForm, detect_map_form,
                           read_field_form, _lift_univariate)
from ..seriesops import compositional_inverse


@dataclass
class NormalizedMapData:
    """Evaluable data in normalized coordinates (leading coefficient -1,
    transverse block recentered to contact order >= m + p)."""

    k: int
    p: int
    m: int
    alpha: complex
    kill_poly: dict              # exponent -> coefficient of the x-change
    recenter: tuple              # univariate float jets J_{m+p-1}(graph)
    f_jet: Jet                   # x o F, normalized coordinates
    g_jets: tuple                # y_m o F components
    D_gen: tuple                 # generator diagonal polynomial jets
    C_gen: np.ndarray            # generator constant matrix
    D_map: tuple
    C_map: np.ndarray
    gammabar: tuple              # curve graph in normalized coordinates
    trust_radius: float
    x_unkill: Jet = None         # inverse of the intermediate-order change

    @property
    def nvars(self):
        return self.f_jet.nvars

    @property
    def transverse_dim(self):
        return self.nvars - 1

    def normalized_direction(self, tau_original: float) -> float:
        """Direction angle in the normalized chart (x = alpha x~)."""
        return tau_original - math.atan2(self.alpha.imag, self.alpha.real)

    def r_coefficients(self):
        """Antiderivative data: R_l(x) = sum_nu r[l][nu] x^(nu - p), so the
        integrating factor is exp(R(x)) entrywise (diagonal)."""
        p = self.p
        out = []
        for d in self.D_gen:
            row = np.zeros(p, dtype=complex)
            for e, c in d.items():
                nu = e[0]
                if nu < p:
                    row[nu] = -complex(c) / (nu - p)
            out.append(row)
        return np.array(out) if p else np.zeros((len(self.D_gen), 0),
                                                dtype=complex)


def principal_root(value: complex, degree: int) -> complex:
    return value ** (1.0 / degree) if degree > 1 else value


def _scale_x(jet: Jet, alpha: complex) -> Jet:
    terms = {e: complex(c) * alpha ** e[0] for e, c in jet.items()}
    return Jet(jet.nvars, jet.order, FLOAT, terms)


def _map_float(F: FormalMap) -> FormalMap:
    return FormalMap([c.astype(FLOAT) for c in F.components],
                     check_tangent=False)


def _conjugate_by_x_change(F: FormalMap, P_terms: dict) -> FormalMap:
    """Conjugate by h(x) = x + P(x) acting on the distinguished variable."""
    n = F.nvars
    order = F.order
    hx = Jet.variable(0, 1, order, FLOAT)
    for e, c in P_terms.items():
        hx = hx + Jet.from_terms({(e,): c}, 1, order, FLOAT)
    hx_inv = compositional_inverse(hx)
    fwd = [_lift_univariate(hx, n, order, FLOAT)] + [
        Jet.variable(i, n, order, FLOAT) for i in range(1, n)]
    inv = [_lift_univariate(hx_inv, n, order, FLOAT)] + [
        Jet.variable(i, n, order, FLOAT) for i in range(1, n)]
    inner = [c.compose(inv) for c in F.components]
    comps = [f.compose(inner) for f in fwd]
    return FormalMap(comps, check_tangent=False)


def _translate(F: FormalMap, offsets) -> FormalMap:
    """Conjugate by y_j -> y_j - offsets[j-1](x)."""
    n = F.nvars
    order = F.order
    fwd = [Jet.variable(0, n, order, FLOAT)]
    inv = [Jet.variable(0, n, order, FLOAT)]
    for j in range(1, n):
        Q = _lift_univariate(offsets[j - 1], n, order, FLOAT)
        v = Jet.variable(j, n, order, FLOAT)
        fwd.append(v - Q)
        inv.append(v + Q)
    inner = [c.compose(inv) for c in F.components]
    comps = [f.compose(inner) for f in fwd]
    return FormalMap(comps, check_tangent=False)


def compute_m0(C_gen: np.ndarray, p: int) -> int:
    """Least admissible contact parameter: max(p+2, p+2 - min Re spec(C))."""
    if C_gen.size:
        sigma = float(np.min(np.real(np.linalg.eigvals(C_gen))))
    else:
        sigma = 0.0
    return max(p + 2, int(math.ceil(p + 2 - sigma)))


def normalize_rs(mnf: MapNormalForm, fnf: FieldNormalForm, curve, m: int,
                 total_order: int | None = None) -> NormalizedMapData:
    """Normalize a reduced pair for the construction.

    ``curve`` is the reduced curve in graph form (first component equals
    the parameter).  The change records alpha, the intermediate-order
    polynomial, and the recenter truncation.
    """
    k, p = mnf.k, mnf.p
    C_gen = np.array([[complex(c) for c in row] for row in fnf.C]) \
        if fnf.C else np.zeros((0, 0), dtype=complex)
    m0 = compute_m0(C_gen, p)
    if m < m0:
        raise PreconditionError(f"m must be at least m0 = {m0}")
    F = _map_float(mnf.mapping)
    lam = complex(mnf.lam)
    # 1. x -> alpha x so the leading coefficient becomes -1
    alpha = principal_root(-1.0 / lam, k + p) if lam != -1 else 1.0
    if alpha != 1.0:
        comps = [_scale_x(c, alpha) for c in F.components]
        comps[0] = comps[0].scale(1.0 / alpha)
        F = FormalMap(comps, check_tangent=False)
    gbar = [g.astype(FLOAT) for g in curve.gamma[1:]]
    if alpha != 1.0:
        gbar = [_scale_x(g, alpha) for g in gbar]
    # 2. kill the reachable pure-x orders K+2 .. K+p+1 (complete for p = 1;
    #    beyond that the first-order-reachable window is the best a change
    #    of the allowed shape can do)
    K = k + p
    kill = {}
    for t in range(K + 2, K + p + 2):
        r = t - K - 1
        pure = _pure_x_coefficient(F.components[0], t)
        if pure == 0:
            continue
        c = -pure / (K - r)
        kill[r + 1] = kill.get(r + 1, 0) + c
        F = _conjugate_by_x_change(F, {r + 1: c})
        hx = Jet.variable(0, 1, gbar[0].order, FLOAT)
        hmod = hx + Jet.from_terms({(r + 1,): c}, 1, gbar[0].order, FLOAT)
        gbar = [g.compose([compositional_inverse(hmod)]) for g in gbar]
        # graph parameter change: gamma(x) reparametrized on the new x
    # 3. recenter on the truncated curve graph
    upto = m + p - 1
    offsets = []
    for g in gbar:
        terms = {e: c for e, c in g.items() if e[0] <= upto}
        offsets.append(Jet(1, g.order, FLOAT, terms, _normalized=True))
    F_m = _translate(F, offsets)
    gbar_m = []
    for g, off in zip(gbar, offsets):
        n2 = min(g.order, off.order)
        gbar_m.append(g.truncate(n2) - off.truncate(n2))
    # re-read both shapes in the normalized coordinates
    mnf_n = detect_map_form(F_m)
    lam_n = complex(mnf_n.lam)
    if abs(lam_n + 1.0) > 1e-9:
        raise PreconditionError("normalization failed to reach lambda = -1")
    Xt = None
    D_gen, C_gen_n = _transformed_generator_data(fnf, alpha, k, p)
    data = NormalizedMapData(
        k=k, p=p, m=m, alpha=complex(alpha), kill_poly=kill,
        recenter=tuple(offsets),
        f_jet=F_m.components[0],
        g_jets=tuple(F_m.components[1:]),
        D_gen=D_gen, C_gen=C_gen_n,
        D_map=mnf_n.D, C_map=np.array(
            [[complex(c) for c in row] for row in mnf_n.C])
        if mnf_n.C else np.zeros((0, 0), dtype=complex),
        gammabar=tuple(gbar_m),
        trust_radius=0.5)
    return data


def _pure_x_coefficient(jet: Jet, t: int):
    e = (t,) + (0,) * (jet.nvars - 1)
    return complex(jet.coefficient(e))


def _transformed_generator_data(fnf: FieldNormalForm, alpha: complex,
                                k: int, p: int):
    """Generator principal data after x -> alpha x: D(x) -> alpha^k D(alpha x),
    C -> alpha^(k+p) C (the x-change only; the later tame changes preserve
    the principal part)."""
    scale = alpha ** k
    D = []
    for d in fnf.D:
        terms = {}
        for e, c in d.items():
            terms[e] = complex(c) * scale * alpha ** e[0]
        D.append(Jet(1, d.order, FLOAT, terms))
    C = np.array([[complex(c) * alpha ** (k + p) for c in row]
                  for row in fnf.C]) if fnf.C else np.zeros((0, 0), complex)
    return tuple(D), C
