"""Expression text format: a precedence-climbing parser producing jets and
a canonical printer whose output reparses to the identical jet.

Grammar: complex rational literals (``a/b``, decimals, the imaginary unit
``i``), named variables, ``+ - * ^`` with the usual precedence, ``^``
right-associative with nonnegative integer exponents, parentheses, unary
minus.  Exponents pushing a term past the truncation order truncate
silently (documented); negative exponents are syntax errors.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .errors import ExpressionSyntaxError
from .gaussrat import GaussianRational
from .jets import EXACT, FLOAT, Jet

_TOKEN = re.compile(r"""
    (?P<number>\d+(?:/\d+|\.\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>\*\*|[-+*^()])
  | (?P<ws>\s+)
  | (?P<bad>.)
""", re.VERBOSE)


def _tokenize(text):
    out = []
    line = 1
    col = 1
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        value = m.group()
        if kind == "ws":
            line += value.count("\n")
            if "\n" in value:
                col = len(value.rsplit("\n", 1)[1]) + 1
            else:
                col += len(value)
            continue
        if kind == "bad":
            raise ExpressionSyntaxError(f"unexpected character {value!r}",
                                        line, col)
        out.append((kind, value, line, col))
        col += len(value)
    out.append(("end", "", line, col))
    return out


class _Parser:
    def __init__(self, tokens, variables, nvars, order, backend):
        self.tokens = tokens
        self.pos = 0
        self.variables = {name: i for i, name in enumerate(variables)}
        self.nvars = nvars
        self.order = order
        self.backend = backend

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def error(self, message):
        _, value, line, col = self.peek()
        raise ExpressionSyntaxError(message + (f" near {value!r}" if value
                                               else " at end of input"),
                                    line, col)

    def parse(self):
        node = self.expression(0)
        if self.peek()[0] != "end":
            self.error("trailing input")
        return node

    def expression(self, min_bp):
        node = self.prefix()
        while True:
            kind, value, _l, _c = self.peek()
            if kind != "op" or value not in ("+", "-", "*", "^"):
                break
            bp = {"+": 10, "-": 10, "*": 20, "^": 30}[value]
            if bp < min_bp:
                break
            self.advance()
            if value == "^":
                exponent = self.exponent_literal()
                node = self.pow_node(node, exponent)
            else:
                # right binding power: left-assoc for + - *
                rhs = self.expression(bp + 1)
                if value == "+":
                    node = node + rhs
                elif value == "-":
                    node = node - rhs
                else:
                    node = (node * rhs).truncate(
                        min(node.order, rhs.order, self.order))
        return node

    def prefix(self):
        kind, value, line, col = self.advance()
        if kind == "op" and value == "-":
            inner = self.expression(25)     # binds tighter than * (unary)
            return -inner
        if kind == "op" and value == "+":
            return self.expression(25)
        if kind == "op" and value == "(":
            node = self.expression(0)
            kind2, value2, l2, c2 = self.advance()
            if not (kind2 == "op" and value2 == ")"):
                raise ExpressionSyntaxError("expected ')'", l2, c2)
            return node
        if kind == "number":
            return self.constant(self.number_value(value))
        if kind == "name":
            if value == "i":
                return self.constant(
                    GaussianRational(0, 1) if self.backend == EXACT else 1j)
            if value in self.variables:
                return Jet.variable(self.variables[value], self.nvars,
                                    self.order, self.backend)
            raise ExpressionSyntaxError(f"unknown name {value!r}", line, col)
        raise ExpressionSyntaxError(f"unexpected token {value!r}", line, col)

    def exponent_literal(self):
        kind, value, line, col = self.advance()
        if kind == "op" and value == "-":
            raise ExpressionSyntaxError("negative exponents are rejected",
                                        line, col)
        if kind == "op" and value == "(":
            inner = self.exponent_literal()
            kind2, value2, l2, c2 = self.advance()
            if not (kind2 == "op" and value2 == ")"):
                raise ExpressionSyntaxError("expected ')'", l2, c2)
            return inner
        if kind != "number" or "/" in value or "." in value:
            raise ExpressionSyntaxError(
                "exponents must be nonnegative integers", line, col)
        return int(value)

    def pow_node(self, node, exponent):
        # right-associative chain handled by repeated literal exponents
        while True:
            kind, value, _l, _c = self.peek()
            if kind == "op" and value == "^":
                self.advance()
                exponent = exponent ** self.exponent_literal()
            else:
                break
        return node ** exponent

    def number_value(self, text):
        if self.backend == EXACT:
            if "/" in text:
                num, den = text.split("/")
                return GaussianRational(Fraction(int(num), int(den)))
            return GaussianRational(Fraction(text))
        return complex(Fraction(text))

    def constant(self, value):
        return Jet.constant(value, self.nvars, self.order, self.backend)


def parse_expression(text, variables, order, backend=EXACT) -> Jet:
    """Parse one expression over the named variables into a jet."""
    nvars = len(variables)
    tokens = _tokenize(text)
    return _Parser(tokens, variables, nvars, order, backend).parse()


# -- canonical printing ---------------------------------------------------------

def _rat_str(r: Fraction) -> str:
    if r.denominator == 1:
        return str(r.numerator)
    return f"{r.numerator}/{r.denominator}"


def format_coefficient(c, backend) -> str:
    if backend == EXACT:
        if not c.im:
            return _rat_str(c.re)
        if not c.re:
            return f"({_rat_str(c.im)})*i"
        return f"({_rat_str(c.re)}+({_rat_str(c.im)})*i)"
    re_s = format(c.real, ".17g")
    im_s = format(c.imag, ".17g")
    if c.imag == 0:
        return re_s
    if c.real == 0:
        return f"({im_s})*i"
    return f"({re_s}+({im_s})*i)"


def print_expression(jet: Jet, variables) -> str:
    """Canonical text: graded-lex term order, explicit coefficients."""
    if jet.is_zero():
        return "0"
    parts = []
    for e, c in jet.terms_sorted():
        mono = "*".join(
            f"{variables[i]}^{k}" if k > 1 else variables[i]
            for i, k in enumerate(e) if k)
        cs = format_coefficient(c, jet.backend)
        if mono:
            parts.append(f"{cs}*{mono}")
        else:
            parts.append(cs)
    return " + ".join(parts)
