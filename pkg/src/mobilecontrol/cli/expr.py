"""Tiny total arithmetic grammar for coefficient and data expressions.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

Names are the variables x, t, y and the constants pi, e.  No user code is
ever executed; expressions compile to trees of numpy operations.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from ..errors import ConfigError

VARIABLES = ("x", "t", "y")
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|([A-Za-z_]\w*)|(\S))")

# normalizing constant of exp(-1/(1-s^2)) on (-1, 1)
_BUMP_MASS = quad(lambda s: math.exp(-1.0 / (1.0 - s * s)), -1.0, 1.0)[0]


def bump(x, a, b):
    """Unit-mass smooth bump supported in (a, b)."""
    x = np.asarray(x, dtype=float)
    a = float(np.asarray(a).flat[0])
    b = float(np.asarray(b).flat[0])
    if not b > a:
        raise ConfigError(f"bump needs a < b, got ({a}, {b})")
    s = (2.0 * x - a - b) / (b - a)
    inside = np.abs(s) < 1
    out = np.zeros(np.broadcast(x, s).shape)
    si = np.broadcast_to(s, out.shape)[inside]
    out[inside] = np.exp(-1.0 / (1.0 - si * si))
    return out / (_BUMP_MASS * (b - a) / 2.0)


FUNCTIONS = {
    "exp": (np.exp, 1), "sin": (np.sin, 1), "cos": (np.cos, 1), "arctan": (np.arctan, 1),
    "sqrt": (np.sqrt, 1), "abs": (np.abs, 1), "tanh": (np.tanh, 1), "bump": (bump, 3),
}


@dataclass(frozen=True)
class Node:
    op: str
    args: tuple = ()
    value: float = 0.0
    name: str = ""


def tokenize(text: str) -> list:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ConfigError(f"cannot tokenize expression {text!r} at position {pos}")
        num, name, sym = m.groups()
        if num is not None:
            out.append(("num", float(num)))
        elif name is not None:
            out.append(("name", name))
        else:
            if sym not in "+-*/^(),":
                raise ConfigError(f"unexpected character {sym!r} in expression {text!r}")
            out.append(("sym", sym))
        pos = m.end()
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else ("end", None)

    def take(self, sym=None):
        tok = self.peek()
        if sym is not None and tok != ("sym", sym):
            raise ConfigError(f"expected {sym!r} in expression {self.text!r}, found {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self):
        node = self.expr()
        if self.peek()[0] != "end":
            raise ConfigError(f"trailing input {self.peek()[1]!r} in expression {self.text!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() in (("sym", "+"), ("sym", "-")):
            op = self.take()[1]
            node = Node(op, (node, self.term()))
        return node

    def term(self):
        node = self.unary()
        while self.peek() in (("sym", "*"), ("sym", "/")):
            op = self.take()[1]
            node = Node(op, (node, self.unary()))
        return node

    def unary(self):
        if self.peek() == ("sym", "-"):
            self.take()
            return Node("neg", (self.unary(),))
        if self.peek() == ("sym", "+"):
            self.take()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek() == ("sym", "^"):
            self.take()
            return Node("^", (base, self.unary()))
        return base

    def atom(self):
        kind, val = self.take()
        if kind == "num":
            return Node("num", value=val)
        if kind == "name":
            if self.peek() == ("sym", "("):
                if val not in FUNCTIONS:
                    raise ConfigError(f"unknown function {val!r} in expression {self.text!r}")
                self.take("(")
                args = [self.expr()]
                while self.peek() == ("sym", ","):
                    self.take()
                    args.append(self.expr())
                self.take(")")
                if len(args) != FUNCTIONS[val][1]:
                    raise ConfigError(f"{val} takes {FUNCTIONS[val][1]} argument(s)")
                return Node("call", tuple(args), name=val)
            if val in CONSTANTS:
                return Node("num", value=CONSTANTS[val])
            if val in VARIABLES:
                return Node("var", name=val)
            raise ConfigError(f"unknown name {val!r} in expression {self.text!r}")
        if (kind, val) == ("sym", "("):
            node = self.expr()
            self.take(")")
            return node
        raise ConfigError(f"unexpected {val!r} in expression {self.text!r}")


def _eval(node: Node, env: dict):
    op = node.op
    if op == "num":
        return node.value
    if op == "var":
        if node.name not in env:
            raise ConfigError(f"variable {node.name!r} is not available here")
        return env[node.name]
    if op == "neg":
        return -_eval(node.args[0], env)
    if op == "call":
        fn = FUNCTIONS[node.name][0]
        return fn(*[_eval(a, env) for a in node.args])
    a = _eval(node.args[0], env)
    b = _eval(node.args[1], env)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return a / b
    return np.power(a, b)


def _variables(node: Node) -> set:
    if node.op == "var":
        return {node.name}
    out = set()
    for a in node.args:
        out |= _variables(a)
    return out


@dataclass(frozen=True)
class Expression:
    text: str
    tree: Node

    @property
    def variables(self) -> set:
        return _variables(self.tree)

    def __call__(self, **env):
        shape = np.broadcast(*[np.asarray(v) for v in env.values()]).shape if env else ()
        with np.errstate(all="ignore"):
            out = _eval(self.tree, {k: np.asarray(v, dtype=float) for k, v in env.items()})
        return np.broadcast_to(np.asarray(out, dtype=float), shape).copy() if shape else np.asarray(out, float)


def compile_expression(text: str, allowed=VARIABLES) -> Expression:
    """Parse ``text`` and check that it only uses ``allowed`` variables."""
    if not isinstance(text, str):
        raise ConfigError(f"expression must be a string, got {type(text).__name__}")
    expr = Expression(text, _Parser(text).parse())
    extra = expr.variables - set(allowed)
    if extra:
        raise ConfigError(f"expression {text!r} uses {sorted(extra)}; allowed: {list(allowed)}")
    return expr
