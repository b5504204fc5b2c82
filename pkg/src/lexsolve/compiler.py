"""Refine case facts against candidate clauses and compile ground problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

from lexsolve.case_model import FactAtom, format_clause_id
from lexsolve.errors import ConflictingFacts
from lexsolve.kb.guards import (
    Atom,
    Exists,
    GuardExpr,
    Tri,
    atom_truth,
    decision_atoms,
    evaluate,
    kleene_or,
    to_text,
)
from lexsolve.kb.model import AdjustmentDelta, Clause, ExclusivityGroup, PenaltySpec, StatuteArticle

FROM_FACT = "FromFact"
FROM_DEFAULT = "FromDefault"
MISSING = "Missing"
EXISTS = "Exists"


@dataclass(frozen=True)
class SliceEntry:
    value: Any
    origin: str
    spans: tuple[tuple[int, int], ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class Inventory:
    """The suspect's acts and results, with facts scoped to each entity."""

    acts: tuple[tuple[str, str], ...] = ()
    results: tuple[str, ...] = ()
    causes: frozenset[tuple[str, str]] = frozenset()
    scoped: tuple[tuple[str, tuple[tuple[str, tuple[Any, ...]], ...]], ...] = ()
    spans: tuple[tuple[str, tuple[tuple[int, int], ...]], ...] = field(default=(), compare=False)

    def scoped_values(self, entity: str) -> dict[str, tuple[Any, ...]]:
        return dict(dict(self.scoped).get(entity, ()))

    def entity_spans(self, entity: str) -> tuple[tuple[int, int], ...]:
        return dict(self.spans).get(entity, ())


@dataclass(frozen=True)
class RefinedFactSlice:
    """Per-clause assignment of every guard predicate, with provenance."""

    values: dict[str, dict[str, tuple[SliceEntry, ...]]]
    inventory: Inventory
    conflicts: tuple[tuple[str, tuple[Any, ...]], ...] = ()

    def entries(self, clause_key: str, predicate: str) -> tuple[SliceEntry, ...]:
        return self.values.get(clause_key, {}).get(predicate, ())

    def provenance(self, clause_key: str) -> dict[str, str]:
        return {p: (e[0].origin if e else MISSING) for p, e in self.values.get(clause_key, {}).items()}

    def lookup_values(self, clause_key: str, predicate: str) -> tuple[Any, ...] | None:
        entries = self.values.get(clause_key, {}).get(predicate)
        if not entries:
            return None
        return tuple(e.value for e in entries)


@dataclass(frozen=True)
class EmptyInterval:
    """Adjusted bounds crossed; carries the constraints responsible on each side."""

    lower_months: int
    upper_months: int
    lower_sources: tuple[str, ...]
    upper_sources: tuple[str, ...]

    @property
    def sources(self) -> tuple[str, ...]:
        return self.lower_sources + self.upper_sources


@dataclass(frozen=True)
class FactConstraint:
    cid: str
    predicate: str
    value: Any
    origin: str
    spans: tuple[tuple[int, int], ...] = field(default=(), compare=False)


@dataclass(frozen=True)
class GuardConstraint:
    cid: str
    role: str  # "article" | "clause"
    expr: GuardExpr


@dataclass(frozen=True)
class BoundConstraint:
    """``penalty_lower``/``penalty_upper`` carry the effective bound in months;
    ``aggravate``/``mitigate`` carry their delta."""

    cid: str
    kind: str
    months: int


@dataclass(frozen=True)
class GroundProblem:
    clause_id: tuple[int, int]
    facts: tuple[FactConstraint, ...]
    article_guard: GuardConstraint
    clause_guard: GuardConstraint
    penalty_constraints: tuple[BoundConstraint, ...]
    adjustment_constraints: tuple[BoundConstraint, ...]
    base_penalty: PenaltySpec | None
    adjusted_penalty: PenaltySpec | EmptyInterval | None
    article_guard_value: Tri
    clause_guard_value: Tri
    consequence_label: str = ""
    priority: int | None = None

    @property
    def key(self) -> str:
        return format_clause_id(self.clause_id)

    @property
    def guards(self) -> tuple[GuardConstraint, ...]:
        return (self.article_guard, self.clause_guard)

    @property
    def bounds(self) -> tuple[BoundConstraint, ...]:
        return self.penalty_constraints + self.adjustment_constraints

    @property
    def constraint_ids(self) -> tuple[str, ...]:
        return (
            tuple(f.cid for f in self.facts)
            + tuple(g.cid for g in self.guards)
            + tuple(b.cid for b in self.bounds)
        )

    @property
    def base_lower(self) -> int:
        return self.base_penalty.effective_lower if self.base_penalty else 0

    @property
    def base_upper(self) -> int | None:
        return self.base_penalty.effective_upper if self.base_penalty else None


# ---------------------------------------------------------------- refine


def _is_functional(value: Any) -> bool:
    return isinstance(value, (bool, int))


def find_conflicts(
    values_by_predicate: dict[str, Sequence[Any]], exclusivity: Iterable[ExclusivityGroup]
) -> list[tuple[str, tuple[Any, ...]]]:
    """Predicates whose values cannot hold together.

    Boolean and integer predicates are single-valued; token predicates
    conflict only inside a declared exclusivity group.
    """
    groups: dict[str, list[ExclusivityGroup]] = {}
    for g in exclusivity:
        groups.setdefault(g.predicate, []).append(g)
    out = []
    for pred in sorted(values_by_predicate):
        distinct = []
        for v in values_by_predicate[pred]:
            if not any(type(v) is type(d) and v == d for d in distinct):
                distinct.append(v)
        if len(distinct) < 2:
            continue
        if any(_is_functional(v) for v in distinct):
            out.append((pred, tuple(distinct)))
            continue
        for g in groups.get(pred, ()):
            clash = tuple(v for v in distinct if v in g.values)
            if len(clash) > 1:
                out.append((pred, clash))
                break
    return out


def build_inventory(facts: Iterable[FactAtom]) -> tuple[Inventory, list[FactAtom]]:
    """Split facts into the act/result inventory and the flat suspect-level facts."""
    facts = list(facts)
    acts: dict[str, str] = {}
    results: list[str] = []
    causes: set[tuple[str, str]] = set()
    for f in facts:
        if f.predicate_name == "Act" and isinstance(f.value, tuple):
            acts.setdefault(f.value[0], f.value[1])
        elif f.predicate_name == "Result" and f.subject_id not in results:
            results.append(f.subject_id)
        elif f.predicate_name == "Causes" and isinstance(f.value, tuple):
            causes.add((f.value[0], f.value[1]))
    entities = set(acts) | set(results)
    scoped: dict[str, dict[str, list[Any]]] = {}
    spans: dict[str, list[tuple[int, int]]] = {}
    flat: list[FactAtom] = []
    for f in facts:
        if f.predicate_name == "Act" and isinstance(f.value, tuple):
            scoped.setdefault(f.value[0], {}).setdefault("Act", []).append(f.value[1])
            if f.span:
                spans.setdefault(f.value[0], []).append(f.span)
            flat.append(FactAtom(f.element_kind, f.subject_id, "Act", f.value[1], f.span))
        elif f.predicate_name == "Causes":
            if f.span:
                spans.setdefault(f.value[1], []).append(f.span)
        elif f.subject_id in entities:
            scoped.setdefault(f.subject_id, {}).setdefault(f.predicate_name, []).append(f.value)
            if f.span:
                spans.setdefault(f.subject_id, []).append(f.span)
        else:
            flat.append(f)
    inv = Inventory(
        acts=tuple(sorted(acts.items())),
        results=tuple(sorted(results)),
        causes=frozenset(causes),
        scoped=tuple(sorted((e, tuple(sorted((p, tuple(v)) for p, v in m.items()))) for e, m in scoped.items())),
        spans=tuple(sorted((e, tuple(s)) for e, s in spans.items())),
    )
    return inv, flat


def _clause_predicates(article: StatuteArticle, clause: Clause) -> list[str]:
    preds: dict[str, None] = {}
    exprs = [article.article_guard, clause.guard] + [a.trigger for a in clause.adjustments]
    for expr in exprs:
        for atom in decision_atoms(expr):
            if isinstance(atom, Atom):
                preds.setdefault(atom.predicate, None)
    return list(preds)


def refine_facts(
    facts: Iterable[FactAtom],
    constraints: Sequence[tuple[StatuteArticle, Clause]],
    exclusivity: Iterable[ExclusivityGroup] = (),
    strict: bool = True,
) -> RefinedFactSlice:
    """Assign each guard predicate of each clause from facts, article defaults, or nothing.

    Facts whose predicate no guard mentions are dropped.  With ``strict``,
    incompatible values for one predicate raise :class:`ConflictingFacts`;
    otherwise they are kept side by side so the solver reports them as a core.
    """
    inventory, flat = build_inventory(facts)
    by_pred: dict[str, list[FactAtom]] = {}
    for f in flat:
        by_pred.setdefault(f.predicate_name, []).append(f)

    values: dict[str, dict[str, tuple[SliceEntry, ...]]] = {}
    used: dict[str, list[Any]] = {}
    for article, clause in constraints:
        defaults = article.defaults()
        per_pred: dict[str, tuple[SliceEntry, ...]] = {}
        for pred in _clause_predicates(article, clause):
            if pred in by_pred:
                merged: list[list] = []
                for f in by_pred[pred]:
                    for item in merged:
                        if type(item[0]) is type(f.value) and item[0] == f.value:
                            if f.span:
                                item[1].append(f.span)
                            break
                    else:
                        merged.append([f.value, [f.span] if f.span else []])
                per_pred[pred] = tuple(SliceEntry(v, FROM_FACT, tuple(s)) for v, s in merged)
                used[pred] = [v for v, _ in merged]
            elif pred in defaults:
                per_pred[pred] = (SliceEntry(defaults[pred], FROM_DEFAULT),)
            else:
                per_pred[pred] = ()
        values[format_clause_id(clause.clause_id)] = per_pred

    conflicts = find_conflicts(used, exclusivity)
    if strict and conflicts:
        pred, vals = conflicts[0]
        raise ConflictingFacts(pred, list(vals))
    return RefinedFactSlice(values, inventory, tuple(conflicts))


# ---------------------------------------------------------------- intervals


def adjust_interval(
    base: PenaltySpec,
    triggered_aggravators: Sequence[AdjustmentDelta] = (),
    triggered_mitigators: Sequence[AdjustmentDelta] = (),
    lower_source: str = "penalty_lower",
    upper_source: str = "penalty_upper",
) -> PenaltySpec | EmptyInterval:
    """Raise the lower bound by the summed aggravator deltas and lower the upper
    bound by the summed mitigator deltas."""
    for a in triggered_aggravators:
        if not a.is_aggravator:
            raise ValueError(f"{a.name or a} is not an aggravator")
    for m in triggered_mitigators:
        if m.is_aggravator:
            raise ValueError(f"{m.name or m} is not a mitigator")
    lower = base.lower_months + sum(a.delta_months for a in triggered_aggravators)
    upper = base.upper_months
    if not isinstance(upper, str):
        upper = upper - sum(m.delta_months for m in triggered_mitigators)
    adjusted = PenaltySpec(lower, upper, base.lower_strict, base.upper_strict)
    if adjusted.is_empty:
        lower_sources = tuple(a.name for a in triggered_aggravators) + (lower_source,)
        upper_sources = tuple(m.name for m in triggered_mitigators) + (upper_source,)
        return EmptyInterval(lower, upper, lower_sources, upper_sources)
    return adjusted


# ---------------------------------------------------------------- encode


def resolve_exists(
    node: Exists,
    inventory: Inventory,
    flat_lookup,
) -> Tri:
    """Evaluate an existential by enumerating the case's acts or results."""
    if node.scope == "act":
        entities = [a for a, _ in inventory.acts]
    else:
        entities = list(inventory.results)
    outcomes = []
    for entity in entities:
        scoped = inventory.scoped_values(entity)

        def lookup(atom, entity=entity, scoped=scoped):
            if isinstance(atom, Exists):
                return resolve_exists(atom, inventory, flat_lookup)
            if atom.predicate == "Causes" and atom.value is True:
                if node.scope == "act":
                    return any(a == entity for a, _ in inventory.causes)
                return any(r == entity for _, r in inventory.causes)
            if atom.predicate in scoped:
                return atom_truth(atom, scoped[atom.predicate])
            return flat_lookup(atom)

        outcomes.append(evaluate(node.body, lookup))
    return kleene_or(outcomes)


def exists_witness(node: Exists, inventory: Inventory, flat_lookup) -> tuple[tuple[int, int], ...]:
    """Source spans of the first act or result satisfying ``node``."""
    ids = [a for a, _ in inventory.acts] if node.scope == "act" else list(inventory.results)
    for entity in ids:
        single = Inventory(
            acts=tuple(a for a in inventory.acts if a[0] == entity),
            results=tuple(r for r in inventory.results if r == entity),
            causes=inventory.causes,
            scoped=inventory.scoped,
            spans=inventory.spans,
        )
        if resolve_exists(node, single, flat_lookup) is True:
            return inventory.entity_spans(entity)
    return ()


def exists_key(node: Exists) -> str:
    return to_text(node)


def _fact_cid(origin: str, pred: str, value: Any) -> str:
    if origin == MISSING:
        return f"missing:{pred}"
    prefix = "fact" if origin == FROM_FACT else "default"
    shown = ("true" if value else "false") if isinstance(value, bool) else value
    return f"{prefix}:{pred}={shown}"


def slice_lookup(slice_: RefinedFactSlice, clause_key: str):
    def flat_lookup(atom: Atom) -> Tri:
        return atom_truth(atom, slice_.lookup_values(clause_key, atom.predicate))

    def lookup(node) -> Tri:
        if isinstance(node, Exists):
            return resolve_exists(node, slice_.inventory, flat_lookup)
        return flat_lookup(node)

    return lookup


def encode(
    slice_: RefinedFactSlice,
    constraints: Sequence[tuple[StatuteArticle, Clause]],
) -> list[GroundProblem]:
    """One ground problem per clause: resolved facts, both guards, and the
    (adjusted) penalty bounds, each tagged with a source id."""
    problems = []
    for article, clause in constraints:
        ckey = format_clause_id(clause.clause_id)
        lookup = slice_lookup(slice_, ckey)

        facts: list[FactConstraint] = []
        guard_preds: dict[str, None] = {}
        exists_nodes: dict[Exists, None] = {}
        # adjustment triggers read facts too, so their predicates join the slice
        triggers = [a.trigger for a in clause.adjustments] if clause.penalty is not None else []
        for expr in (article.article_guard, clause.guard, *triggers):
            for node in decision_atoms(expr):
                if isinstance(node, Exists):
                    exists_nodes.setdefault(node, None)
                else:
                    guard_preds.setdefault(node.predicate, None)
        for pred in guard_preds:
            entries = slice_.entries(ckey, pred)
            if not entries:
                facts.append(FactConstraint(_fact_cid(MISSING, pred, None), pred, None, MISSING))
            for e in entries:
                facts.append(FactConstraint(_fact_cid(e.origin, pred, e.value), pred, e.value, e.origin, e.spans))
        for node in exists_nodes:
            key = exists_key(node)
            facts.append(FactConstraint(f"exists:{key}", key, lookup(node), EXISTS))

        ag_value = evaluate(article.article_guard, lookup)
        cg_value = evaluate(clause.guard, lookup)

        penalty_constraints: list[BoundConstraint] = []
        adjustment_constraints: list[BoundConstraint] = []
        adjusted: PenaltySpec | EmptyInterval | None = None
        if clause.penalty is not None:
            base = clause.penalty
            penalty_constraints.append(BoundConstraint(f"penalty_lower:{ckey}", "penalty_lower", base.effective_lower))
            if base.effective_upper is not None:
                penalty_constraints.append(
                    BoundConstraint(f"penalty_upper:{ckey}", "penalty_upper", base.effective_upper)
                )
            aggs = [a for a in clause.aggravators if evaluate(a.trigger, lookup) is True]
            mits = [m for m in clause.mitigators if evaluate(m.trigger, lookup) is True]
            for a in aggs:
                adjustment_constraints.append(BoundConstraint(a.name, "aggravate", a.delta_months))
            for m in mits:
                if base.effective_upper is not None:
                    adjustment_constraints.append(BoundConstraint(m.name, "mitigate", m.delta_months))
            adjusted = adjust_interval(base, aggs, mits, f"penalty_lower:{ckey}", f"penalty_upper:{ckey}")

        problems.append(
            GroundProblem(
                clause_id=clause.clause_id,
                facts=tuple(facts),
                article_guard=GuardConstraint(f"article_guard:{article.article_no}", "article", article.article_guard),
                clause_guard=GuardConstraint(f"clause_guard:{ckey}", "clause", clause.guard),
                penalty_constraints=tuple(penalty_constraints),
                adjustment_constraints=tuple(adjustment_constraints),
                base_penalty=clause.penalty,
                adjusted_penalty=adjusted,
                article_guard_value=ag_value,
                clause_guard_value=cg_value,
                consequence_label=clause.consequence_label,
                priority=clause.priority,
            )
        )
    return problems
