"""Arithmetic expressions over the state ``X1, X2, X3`` and named parameters.

Grammar (``^`` binds tightest and is right associative, unary minus sits
between ``^`` and the multiplicative operators)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?
    primary := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Union

from ..errors import EvaluationFailure, ExprSyntaxError, UnknownIdentifier

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
STATE_VARS = ("X1", "X2", "X3")
TINY_DENOMINATOR = 1e-300


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str  # one of X1, X2, X3


@dataclass(frozen=True)
class Param:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


Node = Union[Const, Var, Param, Neg, BinOp, Call]

_TOKEN = re.compile(r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))")


def _tokenize(src: str) -> list:
    toks, pos = [], 0
    while pos < len(src):
        if src[pos:].strip() == "":
            break
        m = _TOKEN.match(src, pos)
        if m is None or m.end() == pos:
            at = pos + (len(src[pos:]) - len(src[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {src[at]!r}", at,
                                  ("number", "identifier", "operator"))
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("end", "", len(src)))
    return toks


class _Parser:
    def __init__(self, src: str, params: Optional[frozenset]):
        self.src = src
        self.toks = _tokenize(src)
        self.i = 0
        self.params = params

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if text != value or kind != "op":
            found = "end of input" if kind == "end" else repr(text)
            raise ExprSyntaxError(f"expected {value!r}, found {found}", pos, (value,))
        self.take()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {text!r}", pos, ("+", "-", "*", "/", "^", "end of input"))
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.take()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> Node:
        kind, text, _ = self.peek()
        if kind == "op" and text == "-":
            self.take()
            return Neg(self.unary())
        if kind == "op" and text == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.primary()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def primary(self) -> Node:
        kind, text, pos = self.take()
        if kind == "num":
            return Const(float(text))
        if kind == "id":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise UnknownIdentifier(f"unknown function {text!r} at position {pos}")
                self.take()
                arg = self.expr()
                self.expect(")")
                return Call(text, arg)
            if text in STATE_VARS:
                return Var(text)
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs an argument", self.peek()[2], ("(",))
            if self.params is not None and text not in self.params:
                raise UnknownIdentifier(f"unbound identifier {text!r} at position {pos}")
            return Param(text)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = "end of input" if kind == "end" else repr(text)
        raise ExprSyntaxError(f"expected an operand, found {found}", pos,
                              ("number", "identifier", "(", "-"))


def parse_expression(src: str, params: Optional[Iterable[str]] = None) -> Node:
    """Parse ``src`` into an expression tree.

    With ``params`` given, identifiers other than state variables, functions
    and the listed names raise :class:`UnknownIdentifier`.
    """
    if not isinstance(src, str):
        raise ExprSyntaxError("expression must be a string", 0, ("string",))
    return _Parser(src, None if params is None else frozenset(params)).parse()


def to_source(node: Node) -> str:
    """Fully parenthesised text that parses back to an identical tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, (Var, Param)):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.operand)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({to_source(node.arg)})"
    raise TypeError(f"not an expression node: {node!r}")


def free_parameters(node: Node) -> set:
    if isinstance(node, Param):
        return {node.name}
    if isinstance(node, Neg):
        return free_parameters(node.operand)
    if isinstance(node, BinOp):
        return free_parameters(node.left) | free_parameters(node.right)
    if isinstance(node, Call):
        return free_parameters(node.arg)
    return set()


def evaluate(node: Node, env: Mapping[str, float]) -> float:
    """Tree-walking evaluation; ``env`` binds ``X1..X3`` and parameters."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, (Var, Param)):
        try:
            return float(env[node.name])
        except KeyError:
            raise UnknownIdentifier(f"unbound identifier {node.name!r}") from None
    if isinstance(node, Neg):
        return -evaluate(node.operand, env)
    if isinstance(node, BinOp):
        a = evaluate(node.left, env)
        b = evaluate(node.right, env)
        op = node.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if abs(b) < TINY_DENOMINATOR:
                raise EvaluationFailure(f"division by {b!r}")
            return a / b
        try:
            r = a ** b
        except (OverflowError, ZeroDivisionError) as exc:
            raise EvaluationFailure(f"{a!r} ^ {b!r}: {exc}") from None
        if isinstance(r, complex):
            raise EvaluationFailure(f"{a!r} ^ {b!r} is not real")
        return float(r)
    if isinstance(node, Call):
        x = evaluate(node.arg, env)
        if node.func == "log" and x <= 0:
            raise EvaluationFailure(f"log of non-positive value {x!r}")
        if node.func == "sqrt" and x < 0:
            raise EvaluationFailure(f"sqrt of negative value {x!r}")
        try:
            return getattr(math, node.func)(x)
        except OverflowError as exc:
            raise EvaluationFailure(f"{node.func}({x!r}): {exc}") from None
    raise TypeError(f"not an expression node: {node!r}")
