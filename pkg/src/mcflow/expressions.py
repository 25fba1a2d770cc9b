"""Tiny arithmetic expression language for boundary and initial data.

Grammar (precedence low to high):

    expr    := term (('+' | '-') term)*
    term    := factor (('*' | '/') factor)*
    factor  := ('-' | '+') factor | power
    power   := atom ('^' factor)?
    atom    := NUMBER | VARIABLE | FUNC '(' expr (',' expr)* ')' | '(' expr ')' | '|' expr '|'

Variables are x1 .. x3 (coordinates); functions: min, max, abs, sqrt, exp.
Expressions evaluate vectorized over (N, dim) point arrays.
"""

import re

import numpy as np

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
                    r"|([A-Za-z_][A-Za-z_0-9]*)|(\*\*|[-+*/^(),|]))")

_FUNCS = {
    "min": lambda *a: np.minimum.reduce(a),
    "max": lambda *a: np.maximum.reduce(a),
    "abs": lambda a: np.abs(a),
    "sqrt": lambda a: np.sqrt(a),
    "exp": lambda a: np.exp(a),
}


class ExpressionError(ValueError):
    """Malformed data expression."""


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ExpressionError(f"unexpected character at position {pos}: {text[pos:]!r}")
            break
        num, name, sym = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        else:
            out.append(("sym", "^" if sym == "**" else sym))
        pos = m.end()
    out.append(("end", None))
    return out


class Expression:
    """A parsed, vectorized scalar expression of the coordinates."""

    def __init__(self, text: str):
        self.text = text
        self._tokens = _tokenize(text)
        self._pos = 0
        self._ast = self._parse_expr()
        if self._peek() != ("end", None):
            raise ExpressionError(f"trailing input in expression {text!r}")
        self.variables = sorted(self._collect_vars(self._ast))

    # -- parsing ----------------------------------------------------------
    def _peek(self):
        return self._tokens[self._pos]

    def _next(self):
        tok = self._tokens[self._pos]
        self._pos += 1
        return tok

    def _expect(self, sym):
        kind, val = self._next()
        if kind != "sym" or val != sym:
            raise ExpressionError(f"expected {sym!r} in {self.text!r}")

    def _parse_expr(self):
        node = self._parse_term()
        while self._peek() == ("sym", "+") or self._peek() == ("sym", "-"):
            _, opr = self._next()
            node = (opr, node, self._parse_term())
        return node

    def _parse_term(self):
        node = self._parse_factor()
        while self._peek() == ("sym", "*") or self._peek() == ("sym", "/"):
            _, opr = self._next()
            node = (opr, node, self._parse_factor())
        return node

    def _parse_factor(self):
        if self._peek() == ("sym", "-"):
            self._next()
            return ("neg", self._parse_factor())
        if self._peek() == ("sym", "+"):
            self._next()
            return self._parse_factor()
        return self._parse_power()

    def _parse_power(self):
        base = self._parse_atom()
        if self._peek() == ("sym", "^"):
            self._next()
            return ("^", base, self._parse_factor())
        return base

    def _parse_atom(self):
        kind, val = self._next()
        if kind == "num":
            return ("const", val)
        if kind == "name":
            if self._peek() == ("sym", "("):
                if val not in _FUNCS:
                    raise ExpressionError(f"unknown function {val!r}")
                self._next()
                args = [self._parse_expr()]
                while self._peek() == ("sym", ","):
                    self._next()
                    args.append(self._parse_expr())
                self._expect(")")
                return ("call", val, args)
            m = re.fullmatch(r"x([1-9])", val)
            if not m:
                raise ExpressionError(f"unknown variable {val!r} (coordinates are x1, x2, ...)")
            return ("var", int(m.group(1)) - 1)
        if kind == "sym" and val == "(":
            node = self._parse_expr()
            self._expect(")")
            return node
        if kind == "sym" and val == "|":
            node = self._parse_expr()
            self._expect("|")
            return ("call", "abs", [node])
        raise ExpressionError(f"unexpected token in {self.text!r}")

    def _collect_vars(self, node):
        tag = node[0]
        if tag == "var":
            return {node[1]}
        if tag == "const":
            return set()
        if tag == "call":
            return set().union(*(self._collect_vars(a) for a in node[2])) if node[2] else set()
        if tag == "neg":
            return self._collect_vars(node[1])
        return self._collect_vars(node[1]) | self._collect_vars(node[2])

    # -- evaluation --------------------------------------------------------
    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[None, :]
        if self.variables and max(self.variables) >= pts.shape[1]:
            raise ExpressionError(
                f"expression {self.text!r} uses x{max(self.variables) + 1} "
                f"but points have dimension {pts.shape[1]}")
        return np.broadcast_to(self._eval(self._ast, pts), (len(pts),)).astype(float)

    def _eval(self, node, pts):
        tag = node[0]
        if tag == "const":
            return np.full(len(pts), node[1])
        if tag == "var":
            return pts[:, node[1]]
        if tag == "neg":
            return -self._eval(node[1], pts)
        if tag == "call":
            return _FUNCS[node[1]](*(self._eval(a, pts) for a in node[2]))
        a = self._eval(node[1], pts)
        b = self._eval(node[2], pts)
        if tag == "+":
            return a + b
        if tag == "-":
            return a - b
        if tag == "*":
            return a * b
        if tag == "/":
            return a / b
        if tag == "^":
            return a ** b
        raise ExpressionError(f"bad node {tag!r}")


def parse_expression(text: str) -> Expression:
    return Expression(text)
