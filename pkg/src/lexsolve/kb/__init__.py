"""Statute knowledge base: rule language, data model, validation, lookup."""

from lexsolve.kb.guards import And, Atom, Const, Exists, GuardExpr, Not, Or, evaluate, to_text
from lexsolve.kb.model import (
    AdjustmentDelta,
    Clause,
    ConstraintList,
    ExclusivityGroup,
    PenaltySpec,
    StatuteArticle,
    StatuteKB,
    search_constraints,
)
from lexsolve.kb.rulelang import parse_guard, parse_kb, serialize_kb
from lexsolve.kb.validate import Finding, ProbeCase, ValidationReport, validate_kb

__all__ = [
    "AdjustmentDelta",
    "And",
    "Atom",
    "Clause",
    "Const",
    "ConstraintList",
    "ExclusivityGroup",
    "Exists",
    "Finding",
    "GuardExpr",
    "Not",
    "Or",
    "PenaltySpec",
    "ProbeCase",
    "StatuteArticle",
    "StatuteKB",
    "ValidationReport",
    "evaluate",
    "parse_guard",
    "parse_kb",
    "search_constraints",
    "serialize_kb",
    "to_text",
    "validate_kb",
]
