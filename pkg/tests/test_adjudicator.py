import dataclasses
import json

import pytest

from lexsolve import load_sample_kb
from lexsolve.adjudicator import (
    NO_APPLICABLE_CLAUSE,
    AdjudicationConfig,
    Admissible,
    adjudicate,
    choose_point_sentence,
    select_by_priority,
)
from lexsolve.case_model import CaseRecord, ExtraLegalAttr, FactAtom
from lexsolve.errors import EmptyUnion, ExtractorUnavailable, KBNotValidated
from lexsolve.kb import PenaltySpec, parse_guard, parse_kb
from lexsolve.case_model import dumps_record


class TestDrugSaleTrace:
    def test_verified_articles(self, sample_kb, sample_cases):
        j = adjudicate(sample_cases["g347"], sample_kb, {64, 65, 67, 347})
        assert j.specific_articles == {347}
        assert j.general_articles == {64, 65, 67}
        assert (347, 4) in j.chosen_clauses
        assert j.penalty_interval == PenaltySpec(0, 36)
        assert j.point_sentence_months == 18
        assert j.valid

    def test_rejected_rules_have_cores(self, sample_kb, sample_cases):
        j = adjudicate(sample_cases["g347"], sample_kb, {347})
        rejected = {d.clause_id for d in j.diagnostics}
        assert rejected == {(347, 1), (347, 2), (347, 3)}
        by_clause = {d.clause_id: d for d in j.diagnostics}
        assert by_clause[(347, 1)].kind == "MissingElement"

    def test_explanation_carries_spans(self, sample_kb, sample_cases):
        case = sample_cases["g347"]
        j = adjudicate(case, sample_kb, {347})
        (step,) = j.explanation
        checked = {c.atom: c for c in step.checked}
        assert checked["DrugQuantity < 10"].origin == "FromFact"
        a, b = checked["DrugQuantity < 10"].spans[0]
        assert "2 grams" in case.narrative[a:b + 5]
        assert checked["Age >= 12"].origin == "FromDefault"
        assert checked["Age >= 12"].spans == ()

    def test_exhaustive_mode_matches_gold(self, sample_kb, sample_cases):
        for case in sample_cases.values():
            j = adjudicate(case, sample_kb)
            assert j.chosen_clauses == case.gold_clauses, case.case_id
            assert j.general_articles == case.gold_general_articles
            assert j.specific_articles == case.gold_specific_articles


class TestSeverity:
    def test_minor(self, severity_kb, sample_cases):
        j = adjudicate(sample_cases["inj_minor"], severity_kb, {234})
        assert j.chosen_clauses == {(234, 1)}
        assert j.penalty_interval == PenaltySpec(0, 36)

    def test_serious(self, severity_kb, sample_cases):
        j = adjudicate(sample_cases["inj_serious"], severity_kb, {234})
        assert j.chosen_clauses == {(234, 2)}
        p = j.penalty_interval
        assert (p.effective_lower, p.effective_upper) == (37, 120)

    def test_flip_switches_clause(self, severity_kb, sample_cases):
        case = sample_cases["inj_minor"]
        facts = tuple(dataclasses.replace(f, value="Serious") if f.predicate_name == "Severity" else f for f in case.facts)
        j = adjudicate(dataclasses.replace(case, facts=facts), severity_kb, {234})
        assert j.chosen_clauses == {(234, 2)}

    def test_adjustments(self, severity_kb, sample_cases):
        case = sample_cases["inj_serious"]
        extra = (FactAtom("Qualifier", "s1", "weapon_used", True), FactAtom("Qualifier", "s1", "compensation_paid", True))
        j = adjudicate(dataclasses.replace(case, facts=case.facts + extra), severity_kb, {234})
        p = j.penalty_interval
        assert (p.effective_lower, p.effective_upper) == (49, 96)


class TestNoClause:
    def test_no_applicable_clause(self, sample_kb):
        case = CaseRecord("empty", ("s1",), "Nothing happened.")
        j = adjudicate(case, sample_kb, {347, 264})
        assert j.chosen_clauses == frozenset()
        assert j.consequence == NO_APPLICABLE_CLAUSE
        assert j.point_sentence_months is None
        assert not j.valid

    def test_unknown_candidate_noted(self, sample_kb, sample_cases):
        j = adjudicate(sample_cases["g347"], sample_kb, {347, 9999})
        assert j.unknown_articles == (9999,)

    def test_requires_validated_kb(self, sample_cases):
        with pytest.raises(KBNotValidated):
            adjudicate(sample_cases["g347"], load_sample_kb(), {347})


class TestPriority:
    def test_dominance(self):
        chosen = select_by_priority([((1, 1), parse_guard("A and B")), ((1, 2), parse_guard("A"))])
        assert chosen == {(1, 1)}

    def test_single(self):
        assert select_by_priority([((1, 1), parse_guard("A"))]) == {(1, 1)}

    def test_incomparable(self):
        assert select_by_priority([((1, 1), parse_guard("A")), ((1, 2), parse_guard("B"))]) == {(1, 1), (1, 2)}

    def test_across_articles_not_compared(self):
        chosen = select_by_priority([((1, 1), parse_guard("A and B")), ((2, 1), parse_guard("A"))])
        assert chosen == {(1, 1), (2, 1)}

    def test_declared_priority_breaks_ties(self):
        items = [Admissible((1, 1), parse_guard("A"), None, 2), Admissible((1, 2), parse_guard("B"), None, 1)]
        assert select_by_priority(items) == {(1, 2)}
        assert select_by_priority(items, use_priority=False) == {(1, 1), (1, 2)}

    def test_end_to_end_dominance(self):
        kb = parse_kb(
            "article 300 {\n"
            "  clause 1 { guard: A; penalty [0, 12]; }\n"
            "  clause 2 { guard: A and B; penalty [12, 24]; }\n"
            "}\n"
        )
        kb.validated = True
        facts = (FactAtom("Qualifier", "s1", "A", True), FactAtom("Qualifier", "s1", "B", True))
        j = adjudicate(CaseRecord("c", ("s1",), "x", facts=facts), kb)
        assert j.chosen_clauses == {(300, 2)}


class TestPointSentence:
    def test_min(self):
        assert choose_point_sentence([PenaltySpec(0, 36)], "Min") == 0

    def test_mid(self):
        assert choose_point_sentence([PenaltySpec(0, 36)], "Mid") == 18

    def test_open_lower_mid(self):
        assert choose_point_sentence([PenaltySpec(36, 120, True)], "Mid") == 78

    def test_lowest_interval_used(self):
        assert choose_point_sentence([PenaltySpec(84, 180), PenaltySpec(0, 36)], "Mid") == 18

    def test_life_topped(self):
        assert choose_point_sentence([PenaltySpec(120, "Death")], "Mid") == 120

    def test_empty_union(self):
        with pytest.raises(EmptyUnion):
            choose_point_sentence([], "Mid")

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            choose_point_sentence([PenaltySpec(0, 1)], "Max")

    def test_point_in_interval(self, sample_kb, sample_cases):
        for policy in ("Min", "Mid"):
            for case in sample_cases.values():
                j = adjudicate(case, sample_kb, config=AdjudicationConfig(point_policy=policy))
                if j.point_sentence_months is not None:
                    assert j.penalty_interval.contains(j.point_sentence_months)
                    assert j.valid


class TestInvariance:
    def test_extra_legal(self, sample_kb, sample_cases):
        for case in sample_cases.values():
            other = dataclasses.replace(
                case, extra_legal=(ExtraLegalAttr("gender", "female"), ExtraLegalAttr("court_level", "High"))
            )
            a, b = adjudicate(case, sample_kb), adjudicate(other, sample_kb)
            assert a.chosen_clauses == b.chosen_clauses
            assert a.penalty_intervals == b.penalty_intervals

    def test_deterministic_serialisation(self, sample_kb, sample_cases):
        case = sample_cases["g347"]
        a = dumps_record(adjudicate(case, sample_kb).to_dict())
        b = dumps_record(adjudicate(case, sample_kb).to_dict())
        assert a == b
        json.loads(a)


class TestRepair:
    FACTS = (
        FactAtom("Actor", "s1", "Actor", "person"),
        FactAtom("MentalState", "s1", "MentalState", "Intentional"),
        FactAtom("MentalState", "s1", "MentalState", "Negligent"),
        FactAtom("Act", "s1", "Action", "stealing"),
        FactAtom("Amount", "s1", "PropertyValue", 5000),
    )

    def test_conflict_surfaces_as_core(self, sample_kb):
        j = adjudicate(CaseRecord("c", ("s1",), "x", facts=self.FACTS), sample_kb, {264})
        assert any(d.kind == "ConflictingFacts" for d in j.diagnostics)
        assert not j.chosen_clauses

    def test_repair_needs_extractor(self, sample_kb):
        with pytest.raises(ExtractorUnavailable):
            adjudicate(CaseRecord("c", ("s1",), "x", facts=self.FACTS), sample_kb, {264}, AdjudicationConfig(repair=True))

    def test_repair_reextracts(self, sample_kb):
        calls = []

        def extractor(case, cores):
            calls.append(cores)
            return [f for f in self.FACTS if f.value != "Negligent"]

        cfg = AdjudicationConfig(repair=True, extractor=extractor)
        j = adjudicate(CaseRecord("c", ("s1",), "x", facts=self.FACTS), sample_kb, {264}, cfg)
        assert j.chosen_clauses == {(264, 1)}
        assert j.repairs == 1
        assert len(calls) == 1

    def test_repair_bounded(self, sample_kb):
        cfg = AdjudicationConfig(repair=True, max_repairs=2, extractor=lambda case, cores: list(self.FACTS))
        j = adjudicate(CaseRecord("c", ("s1",), "x", facts=self.FACTS), sample_kb, {264}, cfg)
        assert j.repairs == 2
