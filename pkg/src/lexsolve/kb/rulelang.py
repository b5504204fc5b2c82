"""Parser and printer for the statute rule language.

Grammar (``#`` starts a comment, statements end with ``;``)::

    document    := item*
    item        := "exclusive" IDENT ":" value ("," value)* ";"
                 | "extralegal" IDENT ("," IDENT)* ";"
                 | "article" INT "{" article_item* "}"
    article_item:= "label" STRING ";"
                 | "guard" ":" expr ";"
                 | "defaults" "{" (IDENT "=" value ";")* "}"
                 | clause
    clause      := "clause" INT "{" clause_item* "}"
    clause_item := "label" STRING ";"
                 | "guard" ":" expr ";"
                 | "penalty" ("[" | "(") INT "," (INT | "Life" | "Death") ("]" | ")") ";"
                 | "aggravate" INT "when" ":" expr ";"
                 | "mitigate" INT "when" ":" expr ";"
                 | "priority" INT ";"
    expr        := conj ("or" conj)*
    conj        := unary ("and" unary)*
    unary       := "not" unary | primary
    primary     := "(" expr ")" | "true" | "false"
                 | "exists" ("act" | "result") "(" expr ")"
                 | IDENT [("<" | "<=" | "=" | ">=" | ">") value]
    value       := INT | IDENT | STRING | "true" | "false"

``<=``/``>=`` may also be written ``≤``/``≥``.  ``P = false`` is read as
``not P``.  Square brackets close an interval endpoint, parentheses open it,
so ``(36, 120]`` admits 37..120 months.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

from lexsolve.case_model import DEATH, LIFE
from lexsolve.errors import DuplicateClauseId, RuleSyntaxError
from lexsolve.kb.guards import TRUE, And, Atom, Const, Exists, GuardExpr, Not, Or, to_text
from lexsolve.kb.model import (
    DEFAULT_EXTRA_LEGAL_NAMES,
    AdjustmentDelta,
    Clause,
    ExclusivityGroup,
    PenaltySpec,
    StatuteArticle,
    StatuteKB,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|≤|≥|<|>|=)
  | (?P<punct>[{}()\[\],;:])
    """,
    re.VERBOSE,
)
_KEYWORDS = {"and", "or", "not", "exists", "true", "false"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise RuleSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            value = m.group()
            if kind == "op":
                value = {"≤": "<=", "≥": ">="}.get(value, value)
            toks.append(_Tok(kind, value, line, col))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    # -- token helpers
    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def error(self, message: str, tok: _Tok | None = None):
        tok = tok or self.cur
        found = tok.text or "end of input"
        return RuleSyntaxError(f"{message} (found {found!r})", tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.cur.text == text and self.cur.kind != "string"

    def take(self, text: str) -> _Tok:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        tok = self.cur
        self.i += 1
        return tok

    def take_kind(self, kind: str, what: str) -> _Tok:
        if self.cur.kind != kind:
            raise self.error(f"expected {what}")
        tok = self.cur
        self.i += 1
        return tok

    def take_ident(self) -> str:
        tok = self.cur
        if tok.kind != "ident" or tok.text in _KEYWORDS:
            raise self.error("expected identifier")
        self.i += 1
        return tok.text

    def take_int(self) -> int:
        return int(self.take_kind("int", "integer").text)

    def take_string(self) -> str:
        return json.loads(self.take_kind("string", "string literal").text)

    # -- document
    def document(self) -> StatuteKB:
        articles: dict[int, StatuteArticle] = {}
        groups: list[ExclusivityGroup] = []
        extra_legal = list(DEFAULT_EXTRA_LEGAL_NAMES)
        while self.cur.kind != "eof":
            if self.at("exclusive"):
                self.i += 1
                pred = self.take_ident()
                self.take(":")
                values = [str(self.value())]
                while self.at(","):
                    self.i += 1
                    values.append(str(self.value()))
                self.take(";")
                groups.append(ExclusivityGroup(pred, tuple(values)))
            elif self.at("extralegal"):
                self.i += 1
                names = [self.take_ident()]
                while self.at(","):
                    self.i += 1
                    names.append(self.take_ident())
                self.take(";")
                extra_legal.extend(n for n in names if n not in extra_legal)
            elif self.at("article"):
                tok = self.cur
                art = self.article()
                if art.article_no in articles:
                    raise DuplicateClauseId(f"article {art.article_no} declared twice (line {tok.line})")
                articles[art.article_no] = art
            else:
                raise self.error("expected 'article', 'exclusive' or 'extralegal'")
        return StatuteKB(articles=articles, exclusivity_axioms=tuple(groups), extra_legal_names=tuple(extra_legal))

    def article(self) -> StatuteArticle:
        self.take("article")
        no = self.take_int()
        self.take("{")
        label, guard = "", TRUE
        defaults: list[tuple[str, Any]] = []
        clauses: list[Clause] = []
        seen: set[tuple[int, int]] = set()
        while not self.at("}"):
            if self.at("label"):
                self.i += 1
                label = self.take_string()
                self.take(";")
            elif self.at("guard"):
                self.i += 1
                self.take(":")
                guard = self.expr()
                self.take(";")
            elif self.at("defaults"):
                self.i += 1
                self.take("{")
                while not self.at("}"):
                    name = self.take_ident()
                    self.take("=")
                    defaults.append((name, self.value()))
                    self.take(";")
                self.take("}")
            elif self.at("clause"):
                tok = self.cur
                clause = self.clause(no)
                if clause.clause_id in seen:
                    raise DuplicateClauseId(
                        f"clause {clause.clause_id[0]}.{clause.clause_id[1]} declared twice (line {tok.line})"
                    )
                seen.add(clause.clause_id)
                clauses.append(clause)
            else:
                raise self.error("expected 'label', 'guard', 'defaults', 'clause' or '}'")
        self.take("}")
        return StatuteArticle(no, guard, tuple(clauses), tuple(defaults), label)

    def clause(self, article_no: int) -> Clause:
        self.take("clause")
        idx = self.take_int()
        self.take("{")
        label, guard, penalty, priority = "", TRUE, None, None
        adjustments: list[AdjustmentDelta] = []
        while not self.at("}"):
            if self.at("label"):
                self.i += 1
                label = self.take_string()
                self.take(";")
            elif self.at("guard"):
                self.i += 1
                self.take(":")
                guard = self.expr()
                self.take(";")
            elif self.at("penalty"):
                self.i += 1
                penalty = self.interval()
                self.take(";")
            elif self.at("priority"):
                self.i += 1
                priority = self.take_int()
                self.take(";")
            elif self.at("aggravate") or self.at("mitigate"):
                direction = "RaiseLower" if self.cur.text == "aggravate" else "LowerUpper"
                self.i += 1
                delta = self.take_int()
                self.take("when")
                self.take(":")
                trigger = self.expr()
                self.take(";")
                kind = "aggravate" if direction == "RaiseLower" else "mitigate"
                name = f"{kind}:{article_no}.{idx}#{len(adjustments)}"
                adjustments.append(AdjustmentDelta(trigger, direction, delta, name))
            else:
                raise self.error("expected 'label', 'guard', 'penalty', 'aggravate', 'mitigate', 'priority' or '}'")
        self.take("}")
        return Clause((article_no, idx), guard, penalty, tuple(adjustments), label, priority)

    def interval(self) -> PenaltySpec:
        if self.at("["):
            lower_strict = False
        elif self.at("("):
            lower_strict = True
        else:
            raise self.error("expected '[' or '('")
        self.i += 1
        lower = self.take_int()
        self.take(",")
        if self.cur.kind == "int":
            upper: int | str = self.take_int()
        elif self.cur.text in (LIFE, DEATH):
            upper = self.cur.text
            self.i += 1
        else:
            raise self.error("expected upper bound (months, Life or Death)")
        if self.at("]"):
            upper_strict = False
        elif self.at(")"):
            upper_strict = True
        else:
            raise self.error("expected ']' or ')'")
        self.i += 1
        return PenaltySpec(lower, upper, lower_strict, upper_strict)

    def value(self) -> Any:
        tok = self.cur
        if tok.kind == "int":
            self.i += 1
            return int(tok.text)
        if tok.kind == "string":
            self.i += 1
            return json.loads(tok.text)
        if tok.kind == "ident":
            self.i += 1
            if tok.text == "true":
                return True
            if tok.text == "false":
                return False
            return tok.text
        raise self.error("expected a value")

    # -- expressions
    def expr(self) -> GuardExpr:
        parts = [self.conj()]
        while self.at("or"):
            self.i += 1
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self) -> GuardExpr:
        parts = [self.unary()]
        while self.at("and"):
            self.i += 1
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> GuardExpr:
        if self.at("not"):
            self.i += 1
            return Not(self.unary())
        return self.primary()

    def primary(self) -> GuardExpr:
        tok = self.cur
        if self.at("("):
            self.i += 1
            inner = self.expr()
            self.take(")")
            return inner
        if self.at("true") or self.at("false"):
            self.i += 1
            return Const(tok.text == "true")
        if self.at("exists"):
            self.i += 1
            scope = self.cur.text
            if scope not in ("act", "result"):
                raise self.error("expected 'act' or 'result' after 'exists'")
            self.i += 1
            self.take("(")
            body = self.expr()
            self.take(")")
            return Exists(scope, body)
        pred = self.take_ident()
        if self.cur.kind != "op":
            return Atom(pred)
        op_tok = self.cur
        op = op_tok.text
        self.i += 1
        value = self.value()
        if op != "=" and (isinstance(value, bool) or not isinstance(value, int)):
            raise RuleSyntaxError(f"comparison {op!r} needs an integer threshold", op_tok.line, op_tok.col)
        if value is False:
            return Not(Atom(pred))
        return Atom(pred, op, value)


def parse_kb(text: str) -> StatuteKB:
    """Parse rule-language text into an unvalidated :class:`StatuteKB`."""
    return _Parser(text).document()


def parse_guard(text: str) -> GuardExpr:
    p = _Parser(text)
    expr = p.expr()
    if p.cur.kind != "eof":
        raise p.error("unexpected trailing input")
    return expr


def _value_out(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", str(value)) and value not in _KEYWORDS:
        return str(value)
    return json.dumps(value, ensure_ascii=False)


def serialize_kb(kb: StatuteKB) -> str:
    lines: list[str] = []
    for g in kb.exclusivity_axioms:
        lines.append(f"exclusive {g.predicate}: {', '.join(_value_out(v) for v in g.values)};")
    extra = [n for n in kb.extra_legal_names if n not in DEFAULT_EXTRA_LEGAL_NAMES]
    if extra:
        lines.append(f"extralegal {', '.join(extra)};")
    for no in sorted(kb.articles):
        art = kb.articles[no]
        if lines:
            lines.append("")
        lines.append(f"article {no} {{")
        if art.label:
            lines.append(f"  label {json.dumps(art.label, ensure_ascii=False)};")
        if art.article_guard != TRUE:
            lines.append(f"  guard: {to_text(art.article_guard)};")
        if art.field_defaults:
            lines.append("  defaults {")
            for name, value in art.field_defaults:
                lines.append(f"    {name} = {_value_out(value)};")
            lines.append("  }")
        for clause in art.clauses:
            lines.append(f"  clause {clause.clause_id[1]} {{")
            if clause.consequence_label:
                lines.append(f"    label {json.dumps(clause.consequence_label, ensure_ascii=False)};")
            if clause.guard != TRUE:
                lines.append(f"    guard: {to_text(clause.guard)};")
            if clause.penalty is not None:
                lines.append(f"    penalty {clause.penalty.to_text()};")
            if clause.priority is not None:
                lines.append(f"    priority {clause.priority};")
            for adj in clause.adjustments:
                kind = "aggravate" if adj.is_aggravator else "mitigate"
                lines.append(f"    {kind} {adj.delta_months} when: {to_text(adj.trigger)};")
            lines.append("  }")
        lines.append("}")
    return "\n".join(lines) + ("\n" if lines else "")
