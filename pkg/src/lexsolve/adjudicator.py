"""End-to-end adjudication: search, refine, encode, solve, select, sentence."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

from lexsolve.case_model import CaseRecord, FactAtom, facts_for_suspect, format_clause_id
from lexsolve.compiler import (
    EXISTS,
    GroundProblem,
    RefinedFactSlice,
    encode,
    exists_witness,
    refine_facts,
    slice_lookup,
)
from lexsolve.errors import EmptyUnion, ExtractorUnavailable, KBNotValidated
from lexsolve.kb.guards import And, Atom, Const, Exists, GuardExpr, Not, conjoin, evaluate, to_text
from lexsolve.kb.model import ExclusivityGroup, PenaltySpec, StatuteKB, search_constraints
from lexsolve.solver import (
    DEFAULT_ATOM_CAP,
    Implication,
    SolveResult,
    SolverBackend,
    UnsatCore,
    check_sat,
    implies,
    syntactically_subsumes,
)

log = logging.getLogger(__name__)

NO_APPLICABLE_CLAUSE = "No applicable clause"
POINT_POLICIES = ("Min", "Mid")

# Called with the case and the conflict cores; returns a fresh fact list.
Reextractor = Callable[[CaseRecord, Sequence[UnsatCore]], Sequence[FactAtom]]


@dataclass(frozen=True)
class AdjudicationConfig:
    point_policy: str = "Mid"
    max_repairs: int = 3
    repair: bool = False
    extractor: Reextractor | None = field(default=None, compare=False)
    atom_cap: int = DEFAULT_ATOM_CAP
    use_priority: bool = True
    suspect_id: str | None = None
    backend: SolverBackend | None = field(default=None, compare=False)


@dataclass(frozen=True)
class CheckedAtom:
    atom: str
    value: Any
    origin: str
    spans: tuple[tuple[int, int], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"atom": self.atom, "value": self.value, "origin": self.origin, "spans": [list(s) for s in self.spans]}


@dataclass(frozen=True)
class ExplanationStep:
    clause_id: tuple[int, int]
    checked: tuple[CheckedAtom, ...]
    consequence_label: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "clause_id": format_clause_id(self.clause_id),
            "checked": [c.to_dict() for c in self.checked],
            "consequence": self.consequence_label,
        }


@dataclass(frozen=True)
class Judgment:
    case_id: str
    suspect_id: str | None
    specific_articles: frozenset[int]
    general_articles: frozenset[int]
    chosen_clauses: frozenset[tuple[int, int]]
    penalty_interval: PenaltySpec | None
    penalty_intervals: tuple[PenaltySpec, ...]
    point_sentence_months: int | None
    explanation: tuple[ExplanationStep, ...]
    diagnostics: tuple[UnsatCore, ...]
    valid: bool
    consequence: str = ""
    unknown_articles: tuple[int, ...] = ()
    repairs: int = 0

    @property
    def articles(self) -> frozenset[int]:
        return self.general_articles | self.specific_articles

    def to_dict(self) -> dict[str, Any]:
        return {
            "case_id": self.case_id,
            "suspect_id": self.suspect_id,
            "general_articles": sorted(self.general_articles),
            "specific_articles": sorted(self.specific_articles),
            "chosen_clauses": [format_clause_id(c) for c in sorted(self.chosen_clauses)],
            "consequence": self.consequence,
            "penalty_interval": self.penalty_interval.to_dict() if self.penalty_interval else None,
            "penalty_intervals": [p.to_dict() for p in self.penalty_intervals],
            "point_sentence_months": self.point_sentence_months,
            "valid": self.valid,
            "explanation": [s.to_dict() for s in self.explanation],
            "diagnostics": [d.to_dict() for d in self.diagnostics],
            "unknown_articles": list(self.unknown_articles),
            "repairs": self.repairs,
        }


@dataclass(frozen=True)
class Admissible:
    clause_id: tuple[int, int]
    guard: GuardExpr
    penalty: PenaltySpec | None = None
    priority: int | None = None


# ---------------------------------------------------------------- selection


def _dominates(a: Admissible, b: Admissible, exclusivity, atom_cap: int) -> bool:
    forward = implies(a.guard, b.guard, exclusivity, atom_cap)
    backward = implies(b.guard, a.guard, exclusivity, atom_cap)
    if Implication.UNDECIDED in (forward, backward):
        return syntactically_subsumes(a.guard, b.guard) and not syntactically_subsumes(b.guard, a.guard)
    return forward is Implication.IMPLIES and backward is Implication.NOT_IMPLIES


def select_by_priority(
    admissible: Iterable[Admissible | tuple],
    exclusivity: Iterable[ExclusivityGroup] = (),
    atom_cap: int = DEFAULT_ATOM_CAP,
    use_priority: bool = True,
) -> set[tuple[int, int]]:
    """Non-dominated clauses per article under strict guard implication.

    Clauses are only compared with clauses of the same article.  When
    ``use_priority`` is set and several undominated clauses of one article
    declare a ``priority``, the lowest number wins among them.
    """
    exclusivity = tuple(exclusivity)
    items = [a if isinstance(a, Admissible) else Admissible(*a) for a in admissible]
    by_article: dict[int, list[Admissible]] = {}
    for a in items:
        by_article.setdefault(a.clause_id[0], []).append(a)
    chosen: set[tuple[int, int]] = set()
    for group in by_article.values():
        survivors = [
            a for a in group if not any(b is not a and _dominates(b, a, exclusivity, atom_cap) for b in group)
        ]
        ranked = [a for a in survivors if a.priority is not None]
        if use_priority and len(ranked) > 1:
            best = min(a.priority for a in ranked)
            survivors = [a for a in survivors if a.priority is None or a.priority == best]
        chosen.update(a.clause_id for a in survivors)
    return chosen


def choose_point_sentence(intervals: Sequence[PenaltySpec], policy: str = "Mid") -> int:
    """Min: lowest admissible month of the union.  Mid: floor of the midpoint
    of the lowest interval; an interval topped by Life/Death has no midpoint,
    so its lower bound is used."""
    live = [p for p in intervals if p is not None and not p.is_empty]
    if not live:
        raise EmptyUnion("no admissible penalty interval")
    if policy not in POINT_POLICIES:
        raise ValueError(f"unknown point policy {policy!r}")
    lowest = min(live, key=lambda p: (p.effective_lower, p.effective_upper is None, p.effective_upper or 0))
    lo = lowest.effective_lower
    if policy == "Min":
        return lo
    hi = lowest.effective_upper
    if hi is None:
        return lo
    return (lo + hi) // 2


# ---------------------------------------------------------------- explanation


def _path_atoms(expr: GuardExpr, lookup, want: bool) -> list:
    """Atoms that carry ``expr`` to the value ``want``."""
    if isinstance(expr, Const):
        return []
    if isinstance(expr, (Atom, Exists)):
        return [expr] if lookup(expr) is want else []
    if isinstance(expr, Not):
        return _path_atoms(expr.child, lookup, not want)
    conj = isinstance(expr, And)
    if conj == want:
        out = []
        for c in expr.children:
            out.extend(_path_atoms(c, lookup, want))
        return out
    for c in expr.children:
        if evaluate(c, lookup) is want:
            return _path_atoms(c, lookup, want)
    return []


def explain(problem: GroundProblem, guard_exprs: Sequence[GuardExpr], sliced: RefinedFactSlice) -> ExplanationStep:
    lookup = slice_lookup(sliced, problem.key)
    checked: list[CheckedAtom] = []
    seen = set()
    for expr in guard_exprs:
        for node in _path_atoms(expr, lookup, True):
            if node in seen:
                continue
            seen.add(node)
            value = lookup(node)
            if isinstance(node, Exists):
                spans = exists_witness(node, sliced.inventory, lookup)
                checked.append(CheckedAtom(to_text(node), value, EXISTS, spans))
                continue
            entries = sliced.entries(problem.key, node.predicate)
            origin = entries[0].origin if entries else "Missing"
            spans = tuple(s for e in entries for s in e.spans)
            checked.append(CheckedAtom(to_text(node), value, origin, spans))
    return ExplanationStep(problem.clause_id, tuple(checked), problem.consequence_label)


# ---------------------------------------------------------------- pipeline


def _solve_all(problems, exclusivity, backend) -> list[SolveResult]:
    return [check_sat(p, exclusivity, backend) for p in problems]


def adjudicate(
    case: CaseRecord,
    kb: StatuteKB,
    candidates: Iterable[int] | None = None,
    config: AdjudicationConfig | None = None,
) -> Judgment:
    """Solver-verified judgment for one suspect of ``case``.

    With no candidates every KB article is tried.  Conflicting facts surface
    as cores; when ``config.repair`` is on, the wired extractor is asked for a
    fresh fact list up to ``config.max_repairs`` times.
    """
    config = config or AdjudicationConfig()
    if not kb.validated:
        raise KBNotValidated("knowledge base must pass validate_kb before use")
    wanted = sorted(set(candidates or ())) or sorted(kb.articles)
    constraints = search_constraints(wanted, kb)
    pairs = list(constraints)
    exclusivity = kb.exclusivity_axioms

    suspect = config.suspect_id
    facts = list(facts_for_suspect(case, suspect) if suspect else case.facts)
    repairs = 0
    while True:
        sliced = refine_facts(facts, pairs, exclusivity, strict=False)
        problems = encode(sliced, pairs)
        results = _solve_all(problems, exclusivity, config.backend)
        conflicts = [r.core for r in results if r.core is not None and r.core.kind == "ConflictingFacts"]
        if not conflicts or not config.repair:
            break
        if config.extractor is None:
            raise ExtractorUnavailable("conflicting facts need re-extraction but no extractor is wired")
        if repairs >= config.max_repairs:
            log.warning("case %s: conflicts persist after %d repairs", case.case_id, repairs)
            break
        repairs += 1
        facts = list(config.extractor(case, conflicts))

    articles = {art.article_no: art for art, _ in pairs}
    admissible = []
    sat_problems: dict[tuple[int, int], tuple[GroundProblem, SolveResult, GuardExpr]] = {}
    for (art, clause), problem, result in zip(pairs, problems, results):
        if result.is_sat:
            guard = conjoin(art.article_guard, clause.guard)
            admissible.append(Admissible(clause.clause_id, guard, result.satisfied_interval, clause.priority))
            sat_problems[clause.clause_id] = (problem, result, guard)
    chosen = select_by_priority(admissible, exclusivity, config.atom_cap, config.use_priority)

    specific = frozenset(c[0] for c in chosen if not articles[c[0]].is_general)
    general = frozenset(c[0] for c in chosen if articles[c[0]].is_general)
    intervals = tuple(
        sat_problems[c][1].satisfied_interval for c in sorted(chosen) if sat_problems[c][1].satisfied_interval
    )
    point = None
    interval = None
    if intervals:
        point = choose_point_sentence(intervals, config.point_policy)
        interval = next(p for p in intervals if p.contains(point))
    explanation = tuple(
        explain(sat_problems[c][0], (articles[c[0]].article_guard, kb.clause(c).guard), sliced) for c in sorted(chosen)
    )
    diagnostics = tuple(r.core for r in results if r.core is not None)
    if not chosen:
        consequence = NO_APPLICABLE_CLAUSE
    else:
        consequence = "; ".join(sat_problems[c][0].consequence_label for c in sorted(chosen))
    valid = point is not None and any(p.contains(point) for p in intervals)
    return Judgment(
        case_id=case.case_id,
        suspect_id=suspect,
        specific_articles=specific,
        general_articles=general,
        chosen_clauses=frozenset(chosen),
        penalty_interval=interval,
        penalty_intervals=intervals,
        point_sentence_months=point,
        explanation=explanation,
        diagnostics=diagnostics,
        valid=valid,
        consequence=consequence,
        unknown_articles=constraints.unknown_articles,
        repairs=repairs,
    )
