"""Tiny closed expression language for obstacles and initial data.

Grammar (no general scripting on purpose: runs must be reproducible):

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := "-" unary | power
    power := atom ("^" unary)?
    atom  := NUMBER | "pi" | VAR | FUNC "(" expr ")" | "(" expr ")"

Variables: x, t, and y for a second spatial axis.  Functions: pos (positive
part), exp, cos.  Evaluation is vectorized over numpy arrays.
"""

from __future__ import annotations

import re

import numpy as np

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)

FUNCTIONS = {
    "pos": lambda u: np.maximum(u, 0.0),
    "exp": np.exp,
    "cos": np.cos,
}
VARIABLES = ("x", "y", "t")
CONSTANTS = {"pi": np.pi}


class ExprError(ValueError):
    def __init__(self, message, pos=None):
        super().__init__(message)
        self.pos = pos


def tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ExprError(f"unexpected character {rest[0]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", float(m.group("num"))))
        elif m.group("name") is not None:
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class Expression:
    """Parsed expression; call with keyword arrays (x=..., y=..., t=...)."""

    def __init__(self, text: str):
        self.text = text.strip()
        self._tokens = tokenize(self.text)
        self._pos = 0
        self._ast = self._expr()
        if self._pos != len(self._tokens):
            raise ExprError(f"trailing tokens near position {self._pos}")
        self.variables = sorted(self._vars(self._ast))

    # parser -----------------------------------------------------------
    def _peek(self):
        return self._tokens[self._pos] if self._pos < len(self._tokens) else (None, None)

    def _take(self):
        tok = self._peek()
        self._pos += 1
        return tok

    def _expr(self):
        node = self._term()
        while self._peek() == ("op", "+") or self._peek() == ("op", "-"):
            _, op = self._take()
            node = (op, node, self._term())
        return node

    def _term(self):
        node = self._unary()
        while self._peek() == ("op", "*") or self._peek() == ("op", "/"):
            _, op = self._take()
            node = (op, node, self._unary())
        return node

    def _unary(self):
        if self._peek() == ("op", "-"):
            self._take()
            return ("neg", self._unary())
        return self._power()

    def _power(self):
        base = self._atom()
        if self._peek() == ("op", "^"):
            self._take()
            return ("^", base, self._unary())
        return base

    def _atom(self):
        kind, val = self._take()
        if kind == "num":
            return ("const", val)
        if kind == "name":
            if val in CONSTANTS:
                return ("const", CONSTANTS[val])
            if val in FUNCTIONS:
                if self._take() != ("op", "("):
                    raise ExprError(f"{val} needs parentheses")
                inner = self._expr()
                if self._take() != ("op", ")"):
                    raise ExprError("missing closing parenthesis")
                return ("call", val, inner)
            if val in VARIABLES:
                return ("var", val)
            raise ExprError(f"unknown name {val!r}")
        if (kind, val) == ("op", "("):
            inner = self._expr()
            if self._take() != ("op", ")"):
                raise ExprError("missing closing parenthesis")
            return inner
        raise ExprError(f"unexpected token {val!r}")

    # evaluation -------------------------------------------------------
    def _vars(self, node):
        tag = node[0]
        if tag == "var":
            return {node[1]}
        if tag in ("const",):
            return set()
        if tag == "call":
            return self._vars(node[2])
        if tag == "neg":
            return self._vars(node[1])
        return self._vars(node[1]) | self._vars(node[2])

    def __call__(self, **env):
        return self._eval(self._ast, env)

    def _eval(self, node, env):
        tag = node[0]
        if tag == "const":
            return node[1]
        if tag == "var":
            if node[1] not in env:
                raise ExprError(f"variable {node[1]!r} not supplied")
            return env[node[1]]
        if tag == "neg":
            return -self._eval(node[1], env)
        if tag == "call":
            return FUNCTIONS[node[1]](self._eval(node[2], env))
        a = self._eval(node[1], env)
        b = self._eval(node[2], env)
        if tag == "+":
            return a + b
        if tag == "-":
            return a - b
        if tag == "*":
            return a * b
        if tag == "/":
            return a / b
        if tag == "^":
            return np.power(a, b)
        raise ExprError(f"bad node {tag}")

    def as_field(self, dim: int):
        """Adapter fn(points, t) -> values for solver/extension plumbing."""

        def fn(points, t=None):
            pts = np.asarray(points, dtype=float)
            env = {"x": pts[..., 0]}
            if dim >= 2:
                env["y"] = pts[..., 1]
            env["t"] = 0.0 if t is None else t
            out = self(**env)
            return np.broadcast_to(out, pts.shape[:-1]).astype(float)

        return fn
