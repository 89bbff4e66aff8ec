"""Input documents: UTF-8 text with line-oriented headers followed by named
object blocks (one component expression per line).

    dim 2
    vars x y
    order 12
    backend exact

    diffeo F:
      x + x^3
      y + x*y - x^2

    field X:
      x^3
      x*y - x^2

    curve G:
      s
      s + 2*s^2

    system A: rank 1
      1, 0
      0, 2

Curves are given in the parameter ``s``; system entries in ``x``.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

from .curves import CurveParam
from .errors import ExpressionSyntaxError
from .exprio import parse_expression
from .jets import EXACT, FLOAT, Jet
from .liealg import FormalField, FormalMap
from .turrittin import LinearSystem


@dataclass
class InputDocument:
    nvars: int
    variables: tuple
    order: int
    backend: str
    maps: dict = dc_field(default_factory=dict)
    fields: dict = dc_field(default_factory=dict)
    curves: dict = dc_field(default_factory=dict)
    systems: dict = dc_field(default_factory=dict)
    source: str = ""

    def first_map(self):
        return _first(self.maps, "diffeo")

    def first_field(self):
        return _first(self.fields, "field")

    def first_curve(self):
        return _first(self.curves, "curve")

    def first_system(self):
        return _first(self.systems, "system")


def _first(mapping, kind):
    if not mapping:
        raise ExpressionSyntaxError(f"document has no {kind} block")
    name = next(iter(mapping))
    return name, mapping[name]


def parse_document(text: str, order_override=None,
                   backend_override=None) -> InputDocument:
    lines = text.splitlines()
    headers = {}
    i = 0
    while i < len(lines):
        raw = lines[i]
        line = raw.strip()
        if not line or line.startswith("#"):
            i += 1
            continue
        head = line.split()
        if head[0] in ("dim", "vars", "order", "backend"):
            headers[head[0]] = head[1:]
            i += 1
            continue
        break
    for required in ("dim", "vars", "order"):
        if required not in headers:
            raise ExpressionSyntaxError(f"missing {required!r} header",
                                        line=i, column=1)
    nvars = int(headers["dim"][0])
    variables = tuple(headers["vars"])
    if len(variables) != nvars:
        raise ExpressionSyntaxError("vars count disagrees with dim",
                                    line=1, column=1)
    order = order_override or int(headers["order"][0])
    backend = backend_override or (headers.get("backend", ["exact"])[0])
    if backend not in (EXACT, FLOAT):
        raise ExpressionSyntaxError(f"unknown backend {backend!r}",
                                    line=1, column=1)
    doc = InputDocument(nvars, variables, order, backend, source=text)
    seen = set()
    while i < len(lines):
        line = lines[i].strip()
        if not line or line.startswith("#"):
            i += 1
            continue
        kind, name, extra = _block_header(line, i + 1)
        if name in seen:
            raise ExpressionSyntaxError(f"duplicate object name {name!r}",
                                        line=i + 1, column=1)
        seen.add(name)
        body = []
        i += 1
        while i < len(lines):
            nxt = lines[i].strip()
            if not nxt or nxt.startswith("#"):
                i += 1
                continue
            if _looks_like_header(nxt):
                break
            body.append((nxt, i + 1))
            i += 1
        _add_block(doc, kind, name, extra, body)
    return doc


def _looks_like_header(line):
    head = line.split()[0].rstrip(":")
    return head in ("diffeo", "field", "curve", "system")


def _block_header(line, lineno):
    parts = line.split()
    kind = parts[0].rstrip(":")
    if kind not in ("diffeo", "field", "curve", "system"):
        raise ExpressionSyntaxError(f"unknown block kind {parts[0]!r}",
                                    line=lineno, column=1)
    if len(parts) < 2:
        raise ExpressionSyntaxError("block needs a name", line=lineno,
                                    column=1)
    name = parts[1].rstrip(":")
    extra = {}
    for j, p in enumerate(parts[2:], start=2):
        p = p.rstrip(":")
        if p.startswith("rank"):
            tail = p[4:].strip(" =")
            if tail:
                extra["rank"] = int(tail)
            elif j + 1 < len(parts):
                extra["rank"] = int(parts[j + 1].strip(" =:"))
    if kind == "system" and "rank" not in extra:
        raise ExpressionSyntaxError("system block needs 'rank q'",
                                    line=lineno, column=1)
    return kind, name, extra


def _add_block(doc: InputDocument, kind, name, extra, body):
    if kind == "curve":
        comps = [parse_expression(text, ("s",), doc.order, doc.backend)
                 for text, _ln in body]
        if len(comps) != doc.nvars:
            raise ExpressionSyntaxError(
                f"curve {name!r} needs {doc.nvars} components",
                line=body[0][1] if body else 0, column=1)
        doc.curves[name] = CurveParam(comps)
        return
    if kind == "system":
        rows = []
        for text, ln in body:
            entries = [parse_expression(t, ("x",), doc.order, doc.backend)
                       for t in text.split(",")]
            rows.append(entries)
        m = len(rows)
        for row in rows:
            if len(row) != m:
                raise ExpressionSyntaxError(
                    f"system {name!r} must be square",
                    line=body[0][1], column=1)
        doc.systems[name] = LinearSystem(extra["rank"], rows)
        return
    comps = [parse_expression(text, doc.variables, doc.order, doc.backend)
             for text, _ln in body]
    if len(comps) != doc.nvars:
        raise ExpressionSyntaxError(
            f"{kind} {name!r} needs {doc.nvars} components",
            line=body[0][1] if body else 0, column=1)
    if kind == "diffeo":
        doc.maps[name] = FormalMap(comps)
    else:
        doc.fields[name] = FormalField(comps)
