"""Command-line interface: document parsing, command orchestration and
deterministic JSON reports.

Exit codes: 0 success, 2 parse error, 3 precondition error, 4 budget or
precision error, 5 construction failed.  Reports are byte-identical across
repeated runs on the same document; timing goes to stderr only.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .blowups import (BlowUp, Center, CoordChange, Ramification,
                      TransformSequence, is_permissible, transform_curve,
                      transform_field, transform_map)
from .curves import CurveParam, check_invariance_field
from .documents import InputDocument, parse_document
from .errors import (BudgetError, ConstructionFailedError,
                     ExpressionSyntaxError, NotInFormError, ParacurveError,
                     PrecisionError, PreconditionError)
from .exprio import format_coefficient, parse_expression, print_expression
from .gaussrat import GaussianRational
from .jets import EXACT, Jet, JetTuple
from .liealg import FormalField, FormalMap, exp_field, inverse_map, log_map
from .normal_form import (detect_map_form, read_field_form, reduce_diffeo,
                          reduce_field, restricted_dynamics_order)
from .petals import (construct as construct_curve, compute_m0,
                     invariance_residual, normalize_rs, orbit_law_ratio,
                     verify_asymptotic, verify_stability)
from .sectors import (attracting_directions, dim2_classify, interval_I,
                      saddle_domain, well_placed)
from .turrittin import (LinearSystem, PolyLinear, Ramify, Shearing, Strip,
                        assembled_true_matrix, replay, turrittin_reduce,
                        validate_normal_form)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_BUDGET = 4
EXIT_CONSTRUCTION = 5


# -- serialization helpers ---------------------------------------------------------

def _jet_str(jet, variables):
    return print_expression(jet, variables)


def _coeff_str(c, backend):
    return format_coefficient(c, backend)


def _angle_str(angle):
    if isinstance(angle, Fraction):
        return f"{angle}*pi"
    return format(float(angle), ".17g")


def _domain_json(domain):
    if domain.full:
        return {"full_circle": True, "arcs": []}
    return {"full_circle": False,
            "arcs": [[_angle_str(a), _angle_str(b)] for a, b in domain.arcs]}


def _matrix_json(rows, backend):
    return [[_coeff_str(c, backend) for c in row] for row in rows]


def _steps_json(seq, variables, backend):
    out = []
    for s in seq:
        if isinstance(s, CoordChange):
            out.append({
                "kind": "change", "label": s.label,
                "forward": [_jet_str(j, variables) for j in s.forward],
                "inverse": [_jet_str(j, variables) for j in s.inverse]})
        elif isinstance(s, BlowUp):
            out.append({
                "kind": "blowup",
                "center": list(s.center.variables),
                "pivot": s.pivot,
                "shift": [_coeff_str(v, backend) if not isinstance(v, (int, float))
                          else str(v) for v in s.shift]})
        elif isinstance(s, Ramification):
            out.append({"kind": "ramification", "q": s.q,
                        "variable": s.variable})
        else:
            raise PreconditionError(f"unserializable step {s!r}")
    return out


def _steps_from_json(data, variables, order, backend):
    steps = []
    for item in data:
        kind = item["kind"]
        if kind == "change":
            fwd = JetTuple([parse_expression(t, variables, order, backend)
                            for t in item["forward"]])
            inv = JetTuple([parse_expression(t, variables, order, backend)
                            for t in item["inverse"]])
            steps.append(CoordChange(fwd, inv, label=item.get("label", "change")))
        elif kind == "blowup":
            shift = tuple(
                parse_expression(t, ("s",), order, backend).constant_term()
                for t in item["shift"])
            steps.append(BlowUp(Center(tuple(item["center"])),
                                item["pivot"], shift))
        elif kind == "ramification":
            steps.append(Ramification(item["q"], item["variable"]))
        else:
            raise ExpressionSyntaxError(f"unknown certificate step {kind!r}")
    return steps


def _is_plain_number(t):
    try:
        float(t)
        return True
    except ValueError:
        return False


def _parse_plain(t, backend):
    if backend == EXACT:
        return GaussianRational(Fraction(t))
    return complex(float(t))


def _linear_events_json(events, backend):
    out = []
    for e in events:
        if isinstance(e, PolyLinear):
            out.append({"kind": "poly_linear",
                        "matrix": [[_jet_str(x, ("x",)) for x in row]
                                   for row in e.P]})
        elif isinstance(e, Shearing):
            out.append({"kind": "shearing", "exponents": list(e.exponents)})
        elif isinstance(e, Ramify):
            out.append({"kind": "ramification", "alpha": e.alpha})
        elif isinstance(e, Strip):
            out.append({"kind": "strip", "s": e.s})
    return out


def _field_form_json(nf, backend):
    return {
        "k": nf.k, "p": nf.p,
        "u": _jet_str(nf.u, _vars_for(nf.nvars)),
        "drift": [_jet_str(c, ("x",)) for c in nf.c],
        "diagonal": [_jet_str(d, ("x",)) for d in nf.D],
        "constant_matrix": _matrix_json(nf.C, backend),
    }


def _map_form_json(mnf, backend):
    return {
        "k": mnf.k, "p": mnf.p,
        "lambda": _coeff_str(mnf.lam, backend),
        "psi": _jet_str(mnf.psi, _vars_for(mnf.nvars)),
        "drift": [_jet_str(b, ("x",)) for b in mnf.b],
        "diagonal": [_jet_str(d, ("x",)) for d in mnf.D],
        "constant_matrix": _matrix_json(mnf.C, backend),
    }


def _vars_for(n):
    if n == 2:
        return ("x", "y")
    if n == 3:
        return ("x", "y", "z")
    return tuple(["x"] + [f"y{i}" for i in range(2, n + 1)])


def _placement_json(rep, backend):
    return {
        "k": rep.k, "p": rep.p,
        "lambda": _coeff_str(rep.lam, backend),
        "directions": [_angle_str(d.angle) for d in rep.directions],
        "saddle_domain": _domain_json(rep.domain),
        "verdicts": list(rep.verdicts),
        "well_placed": rep.overall,
    }


# -- report plumbing ----------------------------------------------------------------

def _emit(report, args):
    text = json.dumps(report, indent=2, sort_keys=True)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def _load_document(args) -> InputDocument:
    with open(args.document, encoding="utf-8") as fh:
        text = fh.read()
    return parse_document(text, order_override=args.order,
                          backend_override=args.backend)


def _echo(args, command):
    echo = {"command": command, "document": args.document,
            "version": __version__}
    for key in ("order", "backend", "name", "curve", "tol", "m", "eta",
                "delta", "tau", "seed", "side", "engine"):
        val = getattr(args, key, None)
        if val is not None:
            echo[key] = val
    return echo


def _pick_map(doc, args):
    if getattr(args, "name", None):
        return args.name, doc.maps[args.name]
    return doc.first_map()


def _pick_field(doc, args):
    if getattr(args, "name", None):
        return args.name, doc.fields[args.name]
    return doc.first_field()


def _pick_curve(doc, args):
    if getattr(args, "curve", None):
        return args.curve, doc.curves[args.curve]
    return doc.first_curve()


# -- subcommands ----------------------------------------------------------------------

def cmd_log(args):
    doc = _load_document(args)
    name, F = _pick_map(doc, args)
    X = log_map(F)
    report = {
        "echo": _echo(args, "log"),
        "result": {
            "map": name,
            "generator": [_jet_str(c, doc.variables) for c in X.components],
            "multiplicity": _order_str(X.multiplicity()),
            "order_budget": X.order,
        },
    }
    _emit(report, args)
    return EXIT_OK


def _order_str(v):
    return "infinity" if v == math.inf else int(v)


def cmd_exp(args):
    doc = _load_document(args)
    name, X = _pick_field(doc, args)
    F = exp_field(X)
    report = {
        "echo": _echo(args, "exp"),
        "result": {
            "field": name,
            "time_one_map": [_jet_str(c, doc.variables) for c in F.components],
            "order_budget": F.order,
        },
    }
    _emit(report, args)
    return EXIT_OK


def cmd_invert(args):
    doc = _load_document(args)
    name, F = _pick_map(doc, args)
    Finv = inverse_map(F)
    report = {
        "echo": _echo(args, "invert"),
        "result": {
            "map": name,
            "inverse": [_jet_str(c, doc.variables) for c in Finv.components],
            "order_budget": Finv.order,
        },
    }
    _emit(report, args)
    return EXIT_OK


def cmd_invariance(args):
    doc = _load_document(args)
    cname, curve = _pick_curve(doc, args)
    if args.name and args.name in doc.fields:
        oname, X = args.name, doc.fields[args.name]
    elif args.name and args.name in doc.maps:
        oname = args.name
        X = log_map(doc.maps[args.name])
    elif doc.fields:
        oname, X = doc.first_field()
    else:
        oname, F = doc.first_map()
        X = log_map(F)
    res = check_invariance_field(X, curve)
    result = {
        "object": oname, "curve": cname,
        "invariant_to_budget": res.invariant,
        "order_budget": res.budget,
    }
    if res.invariant:
        result["h"] = _jet_str(res.h, ("s",))
    else:
        result["witness_order"] = res.witness_order
        result["witness_component"] = res.witness_component
    _emit({"echo": _echo(args, "invariance"), "result": result}, args)
    return EXIT_OK


def _parse_center(text):
    return Center(tuple(int(v) for v in text.split(",")))


def cmd_blowup(args):
    doc = _load_document(args)
    center = _parse_center(args.center)
    pivot = args.pivot if args.pivot is not None else center.variables[0]
    shift = tuple(
        parse_expression(t, ("s",), doc.order, doc.backend).constant_term()
        for t in (args.shift.split(",") if args.shift else
                  ["0"] * (center.codim - 1)))
    step = BlowUp(center, pivot, shift)
    result = {"center": list(center.variables), "pivot": pivot,
              "shift": [_coeff_str(s, doc.backend) for s in shift]}
    if doc.fields:
        fname, X = doc.first_field()
        if doc.curves:
            _, curve = doc.first_curve()
            perm = is_permissible(X, curve, center)
            result["permissible"] = perm.permissible
            if not perm.permissible:
                result["failed_clause"] = perm.clause
            result["transformed_curve"] = [
                _jet_str(g, ("s",)) for g in transform_curve(curve, step).gamma]
        Xt = transform_field(X, step)
        result["field"] = fname
        result["transformed_field"] = [_jet_str(c, doc.variables)
                                       for c in Xt.components]
        result["order_budget"] = Xt.order
    if doc.maps:
        mname, F = doc.first_map()
        Ft = transform_map(F, step)
        result["map"] = mname
        result["transformed_map"] = [_jet_str(c, doc.variables)
                                     for c in Ft.components]
    _emit({"echo": _echo(args, "blowup"), "result": result}, args)
    return EXIT_OK


def cmd_ramify(args):
    doc = _load_document(args)
    step = Ramification(args.q, args.variable)
    result = {"q": args.q, "variable": args.variable}
    if doc.fields:
        fname, X = doc.first_field()
        Xt = transform_field(X, step)
        result["field"] = fname
        result["transformed_field"] = [_jet_str(c, doc.variables)
                                       for c in Xt.components]
    if doc.curves:
        _, curve = doc.first_curve()
        result["transformed_curve"] = [
            _jet_str(g, ("s",)) for g in transform_curve(curve, step).gamma]
    if doc.maps:
        mname, F = doc.first_map()
        Ft = transform_map(F, step)
        result["map"] = mname
        result["transformed_map"] = [_jet_str(c, doc.variables)
                                     for c in Ft.components]
    _emit({"echo": _echo(args, "ramify"), "result": result}, args)
    return EXIT_OK


def cmd_turrittin(args):
    doc = _load_document(args)
    name, sysm = doc.first_system()
    cert, nf, final = turrittin_reduce(sysm)
    validate_normal_form(nf, doc.backend)
    replayed = replay(sysm, cert.events)
    true_final = assembled_true_matrix(final, cert)
    ok = True
    n = min(replayed.order, final.order)
    for i in range(final.dim):
        for j in range(final.dim):
            a = replayed.B[i][j]
            b = true_final[i][j]
            if not a.truncate(min(a.order, n)).equal_terms(
                    b.truncate(min(b.order, n))):
                ok = False
    result = {
        "system": name,
        "events": _linear_events_json(cert.events, doc.backend),
        "exponential_ledger": [
            {"value": _coeff_str(lam, doc.backend), "rank": r,
             "slots": list(slots)} for lam, r, slots in cert.ledger],
        "normal_form": {
            "p": nf.p,
            "diagonal": [_jet_str(d, ("x",)) for d in nf.D],
            "constant_matrix": _matrix_json(nf.C, doc.backend),
        },
        "replay_exact": ok,
        "order_budget": final.order,
    }
    _emit({"echo": _echo(args, "turrittin"), "result": result}, args)
    return EXIT_OK


def cmd_reduce(args):
    doc = _load_document(args)
    cname, curve = _pick_curve(doc, args)
    result = {"curve": cname}
    if doc.maps:
        name, F = _pick_map(doc, args)
        seq, mnf, curve_t = reduce_diffeo(F, curve)
        result["map"] = name
        result["map_form"] = _map_form_json(mnf, doc.backend)
        result["reduced_map"] = [_jet_str(c, doc.variables)
                                 for c in mnf.mapping.components]
        result["order_budget"] = mnf.mapping.order
    else:
        name, X = _pick_field(doc, args)
        seq, fnf, curve_t = reduce_field(X, curve)
        result["field"] = name
        result["field_form"] = _field_form_json(fnf, doc.backend)
        result["reduced_field"] = [_jet_str(c, doc.variables)
                                   for c in fnf.field.components]
        result["order_budget"] = fnf.field.order
    result["certificate"] = _steps_json(seq, doc.variables, doc.backend)
    result["transformed_curve"] = [_jet_str(g, ("s",)) for g in curve_t.gamma]
    _emit({"echo": _echo(args, "reduce"), "result": result}, args)
    return EXIT_OK


def _analyze_pair(F, curve):
    seq, mnf, curve_t = reduce_diffeo(F, curve)
    Finv = inverse_map(F)
    seq_i, mnf_i, curve_ti = reduce_diffeo(Finv, curve)
    rep = well_placed(mnf)
    rep_i = well_placed(mnf_i)
    return (seq, mnf, curve_t, rep), (seq_i, mnf_i, curve_ti, rep_i)


def cmd_analyze(args):
    doc = _load_document(args)
    cname, curve = _pick_curve(doc, args)
    name, F = _pick_map(doc, args)
    direct, inverse = _analyze_pair(F, curve)
    _, mnf, _, rep = direct
    _, mnf_i, _, rep_i = inverse
    result = {
        "map": name, "curve": cname,
        "direct": _placement_json(rep, doc.backend),
        "inverse": _placement_json(rep_i, doc.backend),
        "dichotomy": rep.overall or rep_i.overall,
    }
    for tag, m_, r_ in (("direct", mnf, rep), ("inverse", mnf_i, rep_i)):
        etas = {}
        for d in r_.placed_directions():
            eta = interval_I(m_.k, m_.p, m_.lam, m_.saddle_entries(), d)
            if eta is not None:
                etas[_angle_str(d.angle)] = format(eta, ".17g")
        result[tag + "_openings"] = etas
    if doc.nvars == 2:
        cl = dim2_classify(mnf, mnf_i)
        result["dim2"] = {
            "case": cl.case,
            "count_direct": cl.count_direct,
            "count_inverse": cl.count_inverse,
            "guaranteed": cl.guaranteed,
            "chosen": cl.chosen,
        }
    _emit({"echo": _echo(args, "analyze"), "result": result}, args)
    return EXIT_OK


def cmd_construct(args):
    doc = _load_document(args)
    cname, curve = _pick_curve(doc, args)
    name, F = _pick_map(doc, args)
    direct, inverse = _analyze_pair(F, curve)
    side = args.side
    if side == "auto":
        side = "direct" if direct[3].overall else "inverse"
    if side == "direct":
        seq, mnf, curve_t, rep = direct
        X = log_map(F)
    else:
        seq, mnf, curve_t, rep = inverse
        X = log_map(F).scale(-1)
    if not rep.overall:
        raise PreconditionError(
            f"the {side} map is not well placed; construction refused")
    seq_f, fnf, _ = reduce_field(X, curve)
    m0 = compute_m0(np.array([[complex(c) for c in row] for row in fnf.C])
                    if fnf.C else np.zeros((0, 0), complex), mnf.p)
    m = args.m if args.m is not None else max(m0 + 2, 4)
    nr = normalize_rs(mnf, fnf, curve_t, m=m)
    if args.tau is not None:
        tau0 = float(args.tau)
    else:
        tau0 = rep.placed_directions()[0].radians
    eta_cap = interval_I(mnf.k, mnf.p, mnf.lam, mnf.saddle_entries(),
                         rep.placed_directions()[0]) \
        if rep.placed_directions() else 2 * math.pi / (mnf.k + mnf.p)
    eta = args.eta if args.eta is not None else \
        min(0.9 * (eta_cap or math.pi), math.pi / 2)
    delta = args.delta if args.delta is not None else 0.05
    tau = nr.normalized_direction(tau0)
    pc = construct_curve(nr, tau=tau, eta=eta, delta=delta, tol=args.tol,
                         engine=args.engine)
    nmax = min(6, doc.order // 2)
    asym = verify_asymptotic(pc, nmax)
    stab = verify_stability(pc, seeds=50, seed=args.seed or 0)
    law = orbit_law_ratio(nr, pc.grid, 2 * pc.delta * np.exp(1j * tau), 10000)
    nodes = pc.grid.nodes()
    mapper = seq.point_map()
    sample = []
    step_i = max(1, (pc.grid.levels + 1) // 8)
    step_j = max(1, (pc.grid.rays + 1) // 8)
    for i in range(0, pc.grid.levels + 1, step_i):
        for j in range(0, pc.grid.rays + 1, step_j):
            xval = nodes[i, j]
            if pc.grid.transverse == 1:
                yvals = [pc.grid.values[i, j]]
            else:
                yvals = list(pc.grid.values[i, j])
            # back through the normalization (recenter + axis scale)
            y_full = []
            for t, yv in enumerate(yvals):
                off = nr.recenter[t]
                y_full.append(yv + off.eval_complex([xval]))
            orig_point = [complex(nr.alpha) * xval] + y_full
            pulled = mapper(orig_point)
            sample.append({
                "chart_x": _c_json(xval),
                "chart_u": [_c_json(v) for v in yvals],
                "original": [_c_json(v) for v in pulled],
            })
    result = {
        "map": name, "curve": cname, "side": side,
        "placement": _placement_json(rep, doc.backend),
        "normalization": {
            "alpha": _c_json(complex(nr.alpha)),
            "m": nr.m, "m0": m0,
            "kill_orders": sorted(nr.kill_poly),
        },
        "parameters": {
            "tau_original": format(tau0, ".17g"),
            "tau_chart": format(tau, ".17g"),
            "eta": format(eta, ".17g"),
            "delta": format(pc.delta, ".17g"),
            "tol": format(args.tol, ".17g"),
            "engine": pc.engine,
        },
        "converged": True,
        "iterations": pc.iterations,
        "residual_sup": format(pc.residual_sup, ".17g"),
        "grid": {"levels": pc.grid.levels, "rays": pc.grid.rays,
                 "ratio": format(pc.grid.ratio, ".17g")},
        "asymptotics": {
            "slopes": {str(k): format(v, ".17g")
                       for k, v in asym.slopes.items()},
            "passed": asym.passed,
            "failures": list(asym.failures),
        },
        "stability": {
            "passed": stab.passed,
            "max_graph_deviation": format(stab.max_graph_deviation, ".17g"),
            "attracted": stab.attracted,
        },
        "orbit_law_error": format(abs(law - 1), ".17g"),
        "certificate": _steps_json(seq, doc.variables, doc.backend),
        "curve_sample": sample,
    }
    _emit({"echo": _echo(args, "construct"), "result": result}, args)
    return EXIT_OK


def _c_json(z):
    z = complex(z)
    return [format(z.real, ".17g"), format(z.imag, ".17g")]


def cmd_verify(args):
    doc = _load_document(args)
    with open(args.report, encoding="utf-8") as fh:
        saved = json.load(fh)
    command = saved["echo"]["command"]
    if command == "reduce":
        return _verify_reduce(doc, saved, args)
    if command == "construct":
        return _verify_construct(doc, saved, args)
    raise PreconditionError(f"cannot verify a {command!r} report")


def _verify_reduce(doc, saved, args):
    steps = _steps_from_json(saved["result"]["certificate"], doc.variables,
                             doc.order, doc.backend)
    seq = TransformSequence(list(steps))
    checks = {}
    if "map" in saved["result"]:
        name = saved["result"]["map"]
        F = doc.maps[name]
        Ft = seq.apply_map(F)
        got = [_jet_str(c, doc.variables) for c in Ft.components]
        want = saved["result"]["reduced_map"]
        checks["certificate_replays_exactly"] = _prefix_match(got, want)
    else:
        name = saved["result"]["field"]
        X = doc.fields[name]
        Xt = seq.apply_field(X)
        got = [_jet_str(c, doc.variables) for c in Xt.components]
        want = saved["result"]["reduced_field"]
        checks["certificate_replays_exactly"] = _prefix_match(got, want)
    ok = all(checks.values())
    _emit({"echo": _echo(args, "verify"),
           "result": {"verified": ok, "checks": checks}}, args)
    return EXIT_OK if ok else EXIT_PRECONDITION


def _prefix_match(got, want):
    return list(got) == list(want)


def _verify_construct(doc, saved, args):
    # rebuild the construction deterministically and compare the residual
    ns = argparse.Namespace(**vars(args))
    res = saved["result"]
    params = res["parameters"]
    ns.name = res["map"]
    ns.curve = res["curve"]
    ns.side = res["side"]
    ns.tau = float(params["tau_original"])
    ns.eta = float(params["eta"])
    ns.delta = float(res["parameters"]["delta"])
    ns.tol = float(params["tol"])
    ns.m = res["normalization"]["m"]
    ns.engine = params["engine"]
    ns.seed = saved["echo"].get("seed", 0)
    ns.out = getattr(args, "scratch_out", None) or "_verify_construct.json"
    cmd_construct(ns)
    with open(ns.out, encoding="utf-8") as fh:
        fresh = json.load(fh)
    same = fresh["result"]["residual_sup"] == res["residual_sup"] and \
        fresh["result"]["curve_sample"] == res["curve_sample"]
    _emit({"echo": _echo(args, "verify"),
           "result": {"verified": bool(same),
                      "checks": {"deterministic_reconstruction": bool(same)}}},
          args)
    return EXIT_OK if same else EXIT_PRECONDITION


# -- entry point -------------------------------------------------------------------------

def _add_common(p):
    p.add_argument("document", help="input document path")
    p.add_argument("--order", type=int, default=None,
                   help="override the document truncation order")
    p.add_argument("--backend", choices=("exact", "float"), default=None)
    p.add_argument("--out", default=None, help="write the report here")
    p.add_argument("--name", default=None, help="object name to use")
    p.add_argument("--curve", default=None, help="curve name to use")
    p.add_argument("--seed", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="paracurve",
        description="parabolic curves of tangent-to-identity maps along "
                    "formal invariant curves")
    sub = parser.add_subparsers(dest="cmd", required=True)

    for nm, fn in (("log", cmd_log), ("exp", cmd_exp), ("invert", cmd_invert),
                   ("invariance", cmd_invariance), ("turrittin", cmd_turrittin),
                   ("reduce", cmd_reduce), ("analyze", cmd_analyze)):
        p = sub.add_parser(nm)
        _add_common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("blowup")
    _add_common(p)
    p.add_argument("--center", required=True,
                   help="comma-separated variable indices")
    p.add_argument("--pivot", type=int, default=None)
    p.add_argument("--shift", default=None,
                   help="comma-separated chart shift values")
    p.set_defaults(func=cmd_blowup)

    p = sub.add_parser("ramify")
    _add_common(p)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--variable", type=int, default=0)
    p.set_defaults(func=cmd_ramify)

    p = sub.add_parser("construct")
    _add_common(p)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--side", choices=("auto", "direct", "inverse"),
                   default="auto")
    p.add_argument("--engine", choices=("auto", "numpy", "compiled"),
                   default="auto")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify")
    _add_common(p)
    p.add_argument("--report", required=True, help="saved report to verify")
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    t0 = time.monotonic()
    try:
        code = args.func(args)
    except ExpressionSyntaxError as err:
        print(f"parse error: {err}", file=sys.stderr)
        return EXIT_PARSE
    except (PreconditionError, NotInFormError) as err:
        print(f"precondition error: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (BudgetError, PrecisionError) as err:
        print(f"budget/precision error: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except ConstructionFailedError as err:
        print(f"construction failed: {err}", file=sys.stderr)
        for d in err.diagnostics:
            print(f"  {d}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except ParacurveError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_PRECONDITION
    finally:
        print(f"[paracurve] {time.monotonic() - t0:.3f}s", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
