"""Arithmetic equations of the form ``x = <expr>`` as immutable binary trees.

Numbers are kept as exact :class:`~decimal.Decimal` literals so that values
such as ``14.6`` round-trip textually; evaluation happens in double precision.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from typing import Iterator, Sequence, Union

OPERATORS = ("+", "-", "*", "/")
PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}
ZERO_TOL = 1e-12


class ExprSyntaxError(ValueError):
    """Malformed equation text."""


class DivisionByZero(ZeroDivisionError):
    """A divisor evaluated to (numerically) zero."""


@dataclass(frozen=True)
class Num:
    value: Decimal

    def __post_init__(self):
        if not self.value.is_finite():
            raise ValueError(f"non-finite number {self.value}")


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "ExprTree"
    right: "ExprTree"

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise ValueError(f"unknown operator {self.op!r}")


ExprTree = Union[Num, BinOp]


def format_number(value: Decimal) -> str:
    """Render a decimal without exponent and without trailing zeros."""
    text = format(value.normalize(), "f")
    if text in ("-0", "-0.0"):
        return "0"
    return text


def render(tree: ExprTree) -> str:
    """Infix rendering with the minimum parentheses needed to re-parse to ``tree``."""
    if isinstance(tree, Num):
        return format_number(tree.value)
    prec = PRECEDENCE[tree.op]
    left = render(tree.left)
    right = render(tree.right)
    if isinstance(tree.left, BinOp) and PRECEDENCE[tree.left.op] < prec:
        left = f"({left})"
    if isinstance(tree.right, BinOp) and PRECEDENCE[tree.right.op] <= prec:
        right = f"({right})"
    return f"{left}{tree.op}{right}"


@dataclass(frozen=True)
class Equation:
    rhs: ExprTree

    @property
    def source_text(self) -> str:
        return "x=" + render(self.rhs)

    def __str__(self) -> str:
        return self.source_text


_TOKEN_RE = re.compile(r"\s*(?:(\d+(?:\.\d*)?|\.\d+)|(.))")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        number, other = m.groups()
        if number is not None:
            tokens.append(number)
        elif other in OPERATORS or other in "()=x":
            tokens.append(other)
        else:
            raise ExprSyntaxError(f"unexpected character {other!r} at offset {m.start(2)}")
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expression(self) -> ExprTree:
        node = self.term()
        while self.peek() in ("+", "-"):
            op = self.take()
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> ExprTree:
        node = self.atom()
        while self.peek() in ("*", "/"):
            op = self.take()
            node = BinOp(op, node, self.atom())
        return node

    def atom(self) -> ExprTree:
        tok = self.take()
        if tok is None:
            raise ExprSyntaxError("unexpected end of input")
        if tok == "(":
            node = self.expression()
            if self.take() != ")":
                raise ExprSyntaxError("unbalanced parentheses")
            return node
        if tok[0].isdigit() or tok[0] == ".":
            try:
                return Num(Decimal(tok))
            except InvalidOperation as exc:
                raise ExprSyntaxError(f"bad number {tok!r}") from exc
        raise ExprSyntaxError(f"unexpected token {tok!r}")


def parse_infix(text: str) -> Equation:
    """Parse ``"x = expr"`` or a bare ``"expr"`` into an :class:`Equation`."""
    tokens = _tokenize(text)
    if tokens[:2] == ["x", "="]:
        tokens = tokens[2:]
    if not tokens:
        raise ExprSyntaxError("empty input")
    if "x" in tokens or "=" in tokens:
        raise ExprSyntaxError("only a single 'x =' prefix is allowed")
    parser = _Parser(tokens)
    tree = parser.expression()
    if parser.peek() is not None:
        tok = parser.peek()
        raise ExprSyntaxError("unbalanced parentheses" if tok == ")" else f"unexpected token {tok!r}")
    return Equation(tree)


def iter_pre_order(tree: ExprTree) -> Iterator[ExprTree]:
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, BinOp):
            stack.append(node.right)
            stack.append(node.left)


def label(node: ExprTree) -> str:
    return format_number(node.value) if isinstance(node, Num) else node.op


def to_pre_order(eq: Equation | ExprTree) -> list[str]:
    tree = eq.rhs if isinstance(eq, Equation) else eq
    return [label(n) for n in iter_pre_order(tree)]


def children_indices(tree: ExprTree) -> list[tuple[int, ...]]:
    """Child index set of every node, indices referring to pre-order positions."""
    result: list[tuple[int, ...]] = []

    def walk(node: ExprTree) -> int:
        idx = len(result)
        result.append(())
        if isinstance(node, BinOp):
            left = walk(node.left)
            right = walk(node.right)
            result[idx] = (left, right)
        return idx

    walk(tree)
    return result


def from_pre_order(labels: Sequence[str]) -> ExprTree:
    """Rebuild a tree from pre-order labels, driven by operator arity."""
    pos = 0

    def build() -> ExprTree:
        nonlocal pos
        if pos >= len(labels):
            raise ExprSyntaxError("pre-order sequence ended early")
        lab = labels[pos]
        pos += 1
        if lab in OPERATORS:
            left = build()
            return BinOp(lab, left, build())
        try:
            return Num(Decimal(lab))
        except InvalidOperation as exc:
            raise ExprSyntaxError(f"bad label {lab!r}") from exc

    tree = build()
    if pos != len(labels):
        raise ExprSyntaxError("trailing labels in pre-order sequence")
    return tree


def evaluate(eq: Equation | ExprTree) -> float:
    tree = eq.rhs if isinstance(eq, Equation) else eq
    if isinstance(tree, Num):
        return float(tree.value)
    a = evaluate(tree.left)
    b = evaluate(tree.right)
    if tree.op == "+":
        return a + b
    if tree.op == "-":
        return a - b
    if tree.op == "*":
        return a * b
    if abs(b) <= ZERO_TOL:
        raise DivisionByZero(f"division by {b!r} in {render(tree)}")
    return a / b


def canonical_key(eq: Equation | ExprTree) -> str:
    return "|".join(to_pre_order(eq))


def count_operators(eq: Equation | ExprTree) -> int:
    tree = eq.rhs if isinstance(eq, Equation) else eq
    return sum(isinstance(n, BinOp) for n in iter_pre_order(tree))


def sub_equations(eq: Equation) -> list[Equation]:
    """Operator-rooted proper subtrees in pre-order, deduplicated by canonical key.

    The root itself is excluded; leaf-only equations have none.
    """
    seen = set()
    out = []
    nodes = iter_pre_order(eq.rhs)
    next(nodes)
    for node in nodes:
        if isinstance(node, BinOp):
            key = canonical_key(node)
            if key not in seen:
                seen.add(key)
                out.append(Equation(node))
    return out


def substitute(tree: ExprTree, index: int, replacement: ExprTree) -> ExprTree:
    """Return ``tree`` with the node at pre-order ``index`` replaced."""
    pos = 0

    def walk(node: ExprTree) -> ExprTree:
        nonlocal pos
        here = pos
        if here == index:
            pos += sum(1 for _ in iter_pre_order(node))
            return replacement
        pos += 1
        if isinstance(node, BinOp):
            left = walk(node.left)
            return BinOp(node.op, left, walk(node.right))
        return node

    return walk(tree)
