"""Knowledge-base validation: well-formedness, rule semantics, probe activations."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from lexsolve.case_model import DEATH, LIFE, CaseRecord, format_clause_id
from lexsolve.kb.guards import OPS, Atom, Not, all_predicates, conjoin, walk
from lexsolve.kb.model import StatuteKB

ERROR = "error"
WARNING = "warning"

BROAD_THRESHOLD = 0.95
MIN_PROBES_FOR_BREADTH = 5
MAX_ADJUSTMENT_COMBINATIONS = 10


@dataclass(frozen=True)
class Finding:
    section: str  # "syntactic" | "semantic" | "case"
    kind: str
    target: str
    message: str
    severity: str = ERROR

    def to_dict(self) -> dict[str, str]:
        return {
            "section": self.section,
            "kind": self.kind,
            "target": self.target,
            "severity": self.severity,
            "message": self.message,
        }


@dataclass(frozen=True)
class ProbeCase:
    case: CaseRecord
    expected: frozenset[str]


@dataclass
class ValidationReport:
    syntactic: list[Finding] = field(default_factory=list)
    semantic: list[Finding] = field(default_factory=list)
    case_level: list[Finding] = field(default_factory=list)
    activation_counts: dict[str, int] = field(default_factory=dict)
    probe_count: int = 0

    @property
    def findings(self) -> list[Finding]:
        return self.syntactic + self.semantic + self.case_level

    @property
    def errors(self) -> list[Finding]:
        return [f for f in self.findings if f.severity == ERROR]

    @property
    def ok(self) -> bool:
        return not self.errors

    def kinds(self) -> list[str]:
        return [f.kind for f in self.errors]

    def to_dict(self) -> dict[str, Any]:
        return {
            "ok": self.ok,
            "probe_count": self.probe_count,
            "syntactic": [f.to_dict() for f in self.syntactic],
            "semantic": [f.to_dict() for f in self.semantic],
            "case_level": [f.to_dict() for f in self.case_level],
            "activation_counts": dict(sorted(self.activation_counts.items())),
        }


# ---------------------------------------------------------------- syntactic


def _syntactic(kb: StatuteKB) -> list[Finding]:
    out: list[Finding] = []
    banned = {n.lower() for n in kb.extra_legal_names}
    kinds: dict[str, set[str]] = {}

    def scan(expr, target: str) -> None:
        for node in walk(expr):
            if not isinstance(node, Atom):
                continue
            if node.op not in OPS:
                out.append(Finding("syntactic", "bad_operator", target, f"operator {node.op!r}"))
            if node.predicate.lower() in banned:
                out.append(
                    Finding("syntactic", "extra_legal_reference", target, f"guard names extra-legal attribute {node.predicate}")
                )
            if node.op != "=" and (isinstance(node.value, bool) or not isinstance(node.value, int)):
                out.append(Finding("syntactic", "bad_comparison", target, f"{node.predicate} {node.op} needs an integer"))
            kind = "bool" if isinstance(node.value, bool) else "int" if isinstance(node.value, int) else "token"
            kinds.setdefault(node.predicate, set()).add(kind)

    for no in sorted(kb.articles):
        art = kb.articles[no]
        target = str(no)
        if no < 1:
            out.append(Finding("syntactic", "bad_article_number", target, "article numbers start at 1"))
        if not art.clauses:
            out.append(Finding("syntactic", "empty_article", target, "article has no clauses"))
        scan(art.article_guard, target)
        for pred, _ in art.field_defaults:
            if pred.lower() in banned:
                out.append(Finding("syntactic", "extra_legal_reference", target, f"default for extra-legal {pred}"))
        for clause in art.clauses:
            ckey = format_clause_id(clause.clause_id)
            if clause.clause_id[0] != no:
                out.append(Finding("syntactic", "misplaced_clause", ckey, f"clause filed under article {no}"))
            scan(clause.guard, ckey)
            p = clause.penalty
            if p is not None:
                if p.lower_months < 0:
                    out.append(Finding("syntactic", "bad_penalty", ckey, "negative lower bound"))
                if isinstance(p.upper_months, str) and p.upper_months not in (LIFE, DEATH):
                    out.append(Finding("syntactic", "bad_penalty", ckey, f"unknown upper token {p.upper_months}"))
                if not isinstance(p.upper_months, str) and p.lower_months > p.upper_months:
                    out.append(Finding("syntactic", "bad_penalty", ckey, f"L={p.lower_months} exceeds U={p.upper_months}"))
                elif p.is_empty:
                    out.append(Finding("syntactic", "bad_penalty", ckey, f"{p.to_text()} admits no month"))
            for adj in clause.adjustments:
                name = adj.name or ckey
                if adj.delta_months <= 0:
                    out.append(Finding("syntactic", "bad_delta", name, "delta must be positive"))
                if adj.direction not in ("RaiseLower", "LowerUpper"):
                    out.append(Finding("syntactic", "bad_delta", name, f"direction {adj.direction}"))
                if p is None:
                    out.append(Finding("syntactic", "bad_delta", name, "adjustment on a clause without penalty"))
                scan(adj.trigger, name)
    for pred in sorted(kinds):
        if len(kinds[pred]) > 1:
            found = ", ".join(sorted(kinds[pred]))
            out.append(Finding("syntactic", "mixed_types", pred, f"predicate used as {found}"))
    for g in kb.exclusivity_axioms:
        if len(set(g.values)) < 2:
            out.append(Finding("syntactic", "bad_exclusivity", g.predicate, "group needs two distinct values"))
    return out


# ---------------------------------------------------------------- semantic


def _semantic(kb: StatuteKB) -> list[Finding]:
    from lexsolve.compiler import EmptyInterval, adjust_interval
    from lexsolve.solver import guard_satisfiable

    out: list[Finding] = []
    excl = kb.exclusivity_axioms
    for art, clause in kb.clauses():
        ckey = clause.key
        guard = conjoin(art.article_guard, clause.guard)
        sat = guard_satisfiable(guard, excl)
        if sat is None:
            out.append(Finding("semantic", "undecided", ckey, "too many atoms to check", WARNING))
            continue
        if not sat:
            out.append(Finding("semantic", "vacuous", ckey, "guard cannot be satisfied"))
            continue
        if guard_satisfiable(Not(guard), excl) is False:
            out.append(Finding("semantic", "overly_broad", ckey, "guard holds in every world"))
        if clause.penalty is None or not clause.adjustments:
            continue
        adjustments = clause.adjustments
        if len(adjustments) > MAX_ADJUSTMENT_COMBINATIONS:
            out.append(Finding("semantic", "undecided", ckey, "too many adjustments to combine", WARNING))
            continue
        for size in range(1, len(adjustments) + 1):
            hit = None
            for combo in itertools.combinations(adjustments, size):
                aggs = [a for a in combo if a.is_aggravator]
                mits = [a for a in combo if not a.is_aggravator]
                result = adjust_interval(clause.penalty, aggs, mits)
                if not isinstance(result, EmptyInterval):
                    continue
                if guard_satisfiable(conjoin(guard, *[a.trigger for a in combo]), excl):
                    hit = combo
                    break
            if hit:
                names = ", ".join(a.name for a in hit)
                out.append(Finding("semantic", "contradictory", ckey, f"{names} empty the penalty interval"))
                break
    return out


# ---------------------------------------------------------------- case-level


def probe_activations(case: CaseRecord, kb: StatuteKB) -> set[str]:
    """Clause keys whose article and clause guards both evaluate true on ``case``."""
    from lexsolve.compiler import encode, refine_facts

    pairs = list(kb.clauses())
    sliced = refine_facts(case.facts, pairs, kb.exclusivity_axioms, strict=False)
    return {p.key for p in encode(sliced, pairs) if p.article_guard_value is True and p.clause_guard_value is True}


def _case_level(
    kb: StatuteKB, probes: Sequence[ProbeCase], threshold: float, min_probes: int, report: ValidationReport
) -> list[Finding]:
    out: list[Finding] = []
    counts = {clause.key: 0 for _, clause in kb.clauses()}
    for probe in probes:
        fired = probe_activations(probe.case, kb)
        for key in fired:
            counts[key] = counts.get(key, 0) + 1
        expected = set(probe.expected)
        if fired != expected:
            missing = sorted(expected - fired)
            extra = sorted(fired - expected)
            out.append(
                Finding(
                    "case",
                    "probe_mismatch",
                    probe.case.case_id,
                    f"expected but silent: {missing}; fired unexpectedly: {extra}",
                )
            )
    report.activation_counts = counts
    if len(probes) >= min_probes:
        for key, n in sorted(counts.items()):
            if n / len(probes) >= threshold:
                out.append(
                    Finding("semantic", "overly_broad", key, f"fires on {n} of {len(probes)} probes")
                )
    return out


def validate_kb(
    kb: StatuteKB,
    probe_cases: Iterable[ProbeCase] = (),
    broad_threshold: float = BROAD_THRESHOLD,
    min_probes: int = MIN_PROBES_FOR_BREADTH,
) -> ValidationReport:
    """Run all checks; sets ``kb.validated`` exactly when no error is found."""
    probes = list(probe_cases)
    report = ValidationReport(probe_count=len(probes))
    report.syntactic = _syntactic(kb)
    report.semantic = _semantic(kb)
    case_findings = _case_level(kb, probes, broad_threshold, min_probes, report)
    tautologies = {f.target for f in report.semantic if f.kind == "overly_broad"}
    for f in case_findings:
        if f.section == "semantic":
            if f.target not in tautologies:
                report.semantic.append(f)
        else:
            report.case_level.append(f)
    kb.validated = report.ok
    return report


def guard_predicates(kb: StatuteKB) -> set[str]:
    preds: set[str] = set()
    for art, clause in kb.clauses():
        preds |= all_predicates(art.article_guard) | all_predicates(clause.guard)
        for adj in clause.adjustments:
            preds |= all_predicates(adj.trigger)
    return preds
