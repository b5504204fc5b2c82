"""Solver-grounded statutory adjudication and legal-relevance perturbation toolkit."""

from lexsolve.adjudicator import AdjudicationConfig, Judgment, adjudicate
from lexsolve.case_model import CaseRecord, FactAtom, parse_case
from lexsolve.kb import StatuteKB, parse_kb, validate_kb

__version__ = "0.1.0"


def load_sample_kb() -> StatuteKB:
    """The bundled illustrative knowledge base (not yet validated)."""
    from importlib.resources import files

    return parse_kb(files("lexsolve").joinpath("data/sample_kb.rules").read_text(encoding="utf-8"))


__all__ = [
    "AdjudicationConfig",
    "CaseRecord",
    "FactAtom",
    "Judgment",
    "StatuteKB",
    "adjudicate",
    "load_sample_kb",
    "parse_case",
    "parse_kb",
    "validate_kb",
]
