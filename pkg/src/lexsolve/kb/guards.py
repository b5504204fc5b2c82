"""Guard expression trees and their three-valued evaluation."""

from __future__ import annotations

import json
import operator
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Union

OPS = ("<", "<=", "=", ">=", ">")
_CMP = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">=": operator.ge,
    ">": operator.gt,
}
SCOPES = ("act", "result")


@dataclass(frozen=True)
class Atom:
    """``predicate op value``; a bare predicate is ``predicate = true``."""

    predicate: str
    op: str = "="
    value: Union[bool, int, str] = True

    @property
    def is_numeric(self) -> bool:
        return self.op != "=" or (isinstance(self.value, int) and not isinstance(self.value, bool))


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class Not:
    child: "GuardExpr"


@dataclass(frozen=True)
class And:
    children: tuple["GuardExpr", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["GuardExpr", ...]


@dataclass(frozen=True)
class Exists:
    """Finite existential over the case's acts or results."""

    scope: str
    body: "GuardExpr"


GuardExpr = Union[Atom, Const, Not, And, Or, Exists]
TRUE = Const(True)
FALSE = Const(False)

Tri = Union[bool, None]


# ---------------------------------------------------------------- printing

_PREC = {Or: 1, And: 2}


_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_RESERVED = {"and", "or", "not", "exists", "true", "false"}


def _value_text(value: Union[bool, int, str]) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int) or (_IDENT.fullmatch(value) and value not in _RESERVED):
        return str(value)
    return json.dumps(value, ensure_ascii=False)


def to_text(expr: GuardExpr, parent: int = 0) -> str:
    if isinstance(expr, Const):
        return "true" if expr.value else "false"
    if isinstance(expr, Atom):
        if expr.op == "=" and expr.value is True:
            return expr.predicate
        return f"{expr.predicate} {expr.op} {_value_text(expr.value)}"
    if isinstance(expr, Not):
        return f"not {to_text(expr.child, 3)}"
    if isinstance(expr, Exists):
        return f"exists {expr.scope} ({to_text(expr.body)})"
    prec = _PREC[type(expr)]
    word = " and " if isinstance(expr, And) else " or "
    text = word.join(to_text(c, prec) for c in expr.children)
    return f"({text})" if parent >= prec else text


# ---------------------------------------------------------------- traversal


def walk(expr: GuardExpr) -> Iterator[GuardExpr]:
    yield expr
    if isinstance(expr, Not):
        yield from walk(expr.child)
    elif isinstance(expr, (And, Or)):
        for c in expr.children:
            yield from walk(c)
    elif isinstance(expr, Exists):
        yield from walk(expr.body)


def decision_atoms(expr: GuardExpr) -> list[Union[Atom, Exists]]:
    """Flat atoms plus whole existential nodes, in first-occurrence order."""
    seen: dict[Union[Atom, Exists], None] = {}

    def visit(e: GuardExpr) -> None:
        if isinstance(e, (Atom, Exists)):
            seen.setdefault(e, None)
        elif isinstance(e, Not):
            visit(e.child)
        elif isinstance(e, (And, Or)):
            for c in e.children:
                visit(c)

    visit(expr)
    return list(seen)


def flat_atoms(expr: GuardExpr) -> list[Atom]:
    return [a for a in decision_atoms(expr) if isinstance(a, Atom)]


def all_predicates(expr: GuardExpr) -> set[str]:
    """Every predicate name mentioned anywhere, existential bodies included."""
    return {e.predicate for e in walk(expr) if isinstance(e, Atom)}


def depth(expr: GuardExpr) -> int:
    if isinstance(expr, Not):
        return 1 + depth(expr.child)
    if isinstance(expr, Exists):
        return 1 + depth(expr.body)
    if isinstance(expr, (And, Or)):
        return 1 + max((depth(c) for c in expr.children), default=0)
    return 1


def literals(expr: GuardExpr, positive: bool = True) -> set[tuple[Union[Atom, Exists], bool]]:
    """(atom, polarity) pairs, polarity flipping under negation."""
    if isinstance(expr, (Atom, Exists)):
        return {(expr, positive)}
    if isinstance(expr, Not):
        return literals(expr.child, not positive)
    if isinstance(expr, (And, Or)):
        out: set = set()
        for c in expr.children:
            out |= literals(c, positive)
        return out
    return set()


def conjoin(*exprs: GuardExpr) -> GuardExpr:
    parts = [e for e in exprs if e != TRUE]
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(tuple(parts))


# ---------------------------------------------------------------- evaluation


def atom_truth(atom: Atom, values: Union[tuple, None]) -> Tri:
    """Truth of ``atom`` given the predicate's known values (``None`` = unknown)."""
    if values is None:
        return None
    target = atom.value
    if isinstance(target, bool):
        return any(isinstance(v, bool) and v == target for v in values)
    if isinstance(target, int):
        cmp = _CMP[atom.op]
        return any(isinstance(v, int) and not isinstance(v, bool) and cmp(v, target) for v in values)
    return any(isinstance(v, str) and v == target for v in values)


def compare(op: str, left: int, right: int) -> bool:
    return _CMP[op](left, right)


def kleene_and(values) -> Tri:
    result: Tri = True
    for v in values:
        if v is False:
            return False
        if v is None:
            result = None
    return result


def kleene_or(values) -> Tri:
    result: Tri = False
    for v in values:
        if v is True:
            return True
        if v is None:
            result = None
    return result


def evaluate(expr: GuardExpr, lookup: Callable[[Union[Atom, Exists]], Tri]) -> Tri:
    """Strong Kleene evaluation; ``lookup`` resolves atoms and existential nodes."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, (Atom, Exists)):
        return lookup(expr)
    if isinstance(expr, Not):
        v = evaluate(expr.child, lookup)
        return None if v is None else not v
    if isinstance(expr, And):
        return kleene_and(evaluate(c, lookup) for c in expr.children)
    return kleene_or(evaluate(c, lookup) for c in expr.children)
