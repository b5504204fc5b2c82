"""Rule-based extractor: narrative patterns to grounded facts and statute candidates.

Each rule is a regular expression plus the facts it yields and the articles
it proposes.  Rules are tagged with the roles that use them, so the two
sides see the same narrative through slightly different lenses.  Every fact
carries the span of the match that produced it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterable

from lexsolve.agents.base import DEFENSE, PROSECUTOR, ROLES, ArgumentTuple
from lexsolve.case_model import CaseRecord, FactAtom

BOTH = frozenset(ROLES)

# (element_kind, predicate, value); value may be a callable of the match.
FactTemplate = tuple[str, str, object]


@dataclass(frozen=True)
class ExtractionRule:
    name: str
    pattern: re.Pattern
    facts: tuple[FactTemplate, ...] = ()
    general: frozenset[int] = frozenset()
    specific: frozenset[int] = frozenset()
    roles: frozenset[str] = BOTH


def _amount(group: int = 1) -> Callable[[re.Match], int]:
    def value(m: re.Match) -> int:
        return int(round(float(m.group(group).replace(",", ""))))

    return value


def _rule(name, pattern, facts=(), general=(), specific=(), roles=BOTH) -> ExtractionRule:
    return ExtractionRule(
        name,
        re.compile(pattern, re.IGNORECASE),
        tuple(facts),
        frozenset(general),
        frozenset(specific),
        frozenset(roles),
    )


_INTENT = ("MentalState", "MentalState", "Intentional")
_DRUG = r"(?:methamphetamine|heroin|opium|cocaine|ketamine|meth)"

RULES: tuple[ExtractionRule, ...] = (
    _rule("defendant", r"\bdefendants?\b|被告人", [("Actor", "Actor", "person")]),
    _rule(
        "drug_quantity",
        rf"(\d+(?:\.\d+)?)\s*(?:grams?|g)\s+of\s+{_DRUG}",
        [("Amount", "DrugQuantity", _amount())],
        specific=[347],
    ),
    _rule(
        "drug_sale",
        rf"\b(?:sold|sells|selling|delivered|handed over)\b[^.;]*?\b{_DRUG}\b",
        [("Act", "Action", "selling"), ("MentalState", "MentalState", "Intentional")],
        specific=[347],
    ),
    _rule(
        "drug_transport",
        rf"\b(?:transported|transporting|carried)\b[^.;]*?\b{_DRUG}\b",
        [("Act", "Action", "transporting"), ("MentalState", "MentalState", "Intentional")],
        specific=[347],
    ),
    _rule(
        "drug_ringleader",
        r"\bringleader\b",
        [("Qualifier", "Circumstance", "ringleader")],
        specific=[347],
        roles=[PROSECUTOR],
    ),
    _rule(
        "prior_record",
        r"\b(?:previous|prior)\b[^.;]*?\b(?:detentions?|convictions?|sentences?)\b",
        [("Qualifier", "prior_sentence_served_or_pardoned", True), ("Qualifier", "reoffense_within_5_years", True)],
        general=[65],
        roles=[PROSECUTOR],
    ),
    _rule(
        "surrender",
        r"\b(?:surrendered|surrender|turned (?:himself|herself|themselves) in)\b",
        [("Exception", "voluntary_surrender_with_confession", True)],
        general=[67],
    ),
    _rule(
        "confession",
        r"\bconfess(?:ed|es|ion)?\b",
        [("Exception", "truthful_confession_of_crime", True)],
        general=[67],
    ),
    _rule(
        "payment",
        r"\bRMB\s*[\d,]+",
        [("Qualifier", "illegal_proceeds_obtained", True)],
        general=[64],
        roles=[DEFENSE],
    ),
    _rule(
        "assault",
        r"\b(?:stabbed|beat|punched|assaulted|struck|kicked)\b",
        [("Act", "Act", ("a1", "assault"))],
        specific=[234],
    ),
    _rule(
        "injury",
        r"\b(minor|serious)\s+(?:bodily\s+)?injur(?:y|ies)\b",
        [
            ("Result", "Result", "bodily_harm"),
            ("Causes", "Causes", ("a1", "r1")),
            ("Severity", "Severity", lambda m: m.group(1).capitalize()),
        ],
        specific=[234],
    ),
    _rule("intent", r"\b(?:intentionally|deliberately|knowingly)\b", [("MentalState", "MentalState", "Intentional")]),
    _rule(
        "negligence",
        r"\b(?:negligently|carelessly|by negligence)\b",
        [("MentalState", "MentalState", "Negligent")],
        specific=[235],
    ),
    _rule("weapon", r"\b(?:knife|blade|weapon|club)\b", [("Qualifier", "weapon_used", True)], roles=[PROSECUTOR]),
    _rule(
        "compensation",
        r"\b(?:compensated|paid compensation|compensation was paid)\b",
        [("Qualifier", "compensation_paid", True)],
        roles=[DEFENSE],
    ),
    _rule("theft", r"\bstole\b|\bstealing\b", [("Act", "Action", "stealing"), _INTENT], specific=[264]),
    _rule(
        "fraud",
        r"\b(?:defrauded|swindled|fraudulently obtained)\b",
        [("Act", "Action", "defrauding"), _INTENT],
        specific=[266],
    ),
    _rule("robbery", r"\brobbed\b|\brobbing\b", [("Act", "Action", "robbing"), _INTENT], specific=[263]),
    _rule("extortion", r"\bextorted\b|\bextorting\b", [("Act", "Action", "extorting"), _INTENT], specific=[274]),
    _rule(
        "property_value",
        r"\b(?:worth|valued at|totalling|totaling)\s+RMB\s*([\d,]+)",
        [("Amount", "PropertyValue", _amount())],
    ),
    _rule(
        "bribe_accept",
        r"\baccepted\b[^.;]*?\bbribes?\b",
        [("Act", "Action", "accepting_bribe"), ("MentalState", "MentalState", "Intentional")],
        specific=[385],
    ),
    _rule("official", r"\b(?:state functionary|public official|civil servant)\b", [("Qualifier", "state_functionary", True)]),
    _rule(
        "bribe_amount",
        r"\bbribes?\b[^.;]*?\bRMB\s*([\d,]+)",
        [("Amount", "BribeAmount", _amount())],
    ),
)

# Result and act facts are scoped to these ids; the subject stays the suspect
# only for suspect-level predicates.
_ENTITY_SUBJECT = {"Result": "r1", "Severity": "r1"}


def _facts_for(rule: ExtractionRule, m: re.Match, suspect: str, offset: int = 0) -> list[FactAtom]:
    out = []
    span = (m.start() + offset, m.end() + offset)
    for kind, pred, value in rule.facts:
        v = value(m) if callable(value) else value
        subject = _ENTITY_SUBJECT.get(pred, suspect)
        if pred == "Causes":
            subject = v[0]
        out.append(FactAtom(kind, subject, pred, v, span))
    return out


def run_rules(text: str, role: str, suspect: str, rules: Iterable[ExtractionRule] = RULES):
    """Apply the role's rules; returns (facts, general, specific, fired rule names)."""
    facts: list[FactAtom] = []
    seen = set()
    general: set[int] = set()
    specific: set[int] = set()
    fired: list[str] = []
    for rule in rules:
        if role not in rule.roles:
            continue
        hit = False
        for m in rule.pattern.finditer(text):
            hit = True
            for f in _facts_for(rule, m, suspect):
                key = f.content_key()
                if key not in seen:
                    seen.add(key)
                    facts.append(f)
        if hit:
            fired.append(rule.name)
            general |= rule.general
            specific |= rule.specific
    return facts, general, specific, fired


def deterministic_extract(case: CaseRecord, role: str) -> ArgumentTuple:
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    suspect = case.suspect_ids[0] if case.suspect_ids else "s1"
    facts, general, specific, _ = run_rules(case.narrative, role, suspect)
    return ArgumentTuple(role, tuple(facts), frozenset(general), frozenset(specific))


def ground_fact_lines(lines: Iterable[str], narrative: str, role: str, suspect: str):
    """Map free-text fact lines onto narrative spans.

    A rule match inside a line is grounded when the matched text also occurs
    in the narrative; the fact's span is then the narrative occurrence.  A
    line with no grounded match, or with any match that fails to ground, is
    reported back.  Returns (facts, ungrounded lines).
    """
    facts: list[FactAtom] = []
    seen = set()
    dropped: list[str] = []
    for line in lines:
        grounded = False
        failed = False
        for rule in RULES:
            if role not in rule.roles:
                continue
            for m in rule.pattern.finditer(line):
                where = narrative.find(m.group(0))
                if where < 0:
                    # fall back to the same pattern anywhere in the narrative
                    nm = rule.pattern.search(narrative)
                    if nm is None or nm.group(0).lower() != m.group(0).lower():
                        failed = True
                        continue
                    anchored = nm
                else:
                    anchored = rule.pattern.match(narrative, where)
                    if anchored is None:
                        failed = True
                        continue
                grounded = True
                for f in _facts_for(rule, anchored, suspect):
                    key = f.content_key()
                    if key not in seen:
                        seen.add(key)
                        facts.append(f)
        if (failed or not grounded) and line.strip():
            dropped.append(line)
    return facts, dropped
