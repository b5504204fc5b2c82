import dataclasses
import random
import sys
from pathlib import Path

import pytest

from lexsolve.case_model import FactAtom
from lexsolve.compiler import encode, refine_facts
from lexsolve.errors import NotUnsat, ServiceError
from lexsolve.kb import ExclusivityGroup, PenaltySpec, parse_guard, parse_kb, search_constraints
from lexsolve.kb.guards import conjoin
from lexsolve.solver import (
    BuiltinBackend,
    ConstraintSet,
    Implication,
    SubprocessBackend,
    check_sat,
    implies,
    parse_reply,
    render_request,
    syntactically_subsumes,
    unsat_core,
)

from checks import EXCL, check_sat_agreement, core_minimality, implies_agreement
from gen import random_guard

FAKE_SMT = Path(__file__).parent / "fixtures" / "fake_smt.py"


def problems_for(kb, facts, articles=None):
    pairs = list(search_constraints(articles or kb.articles, kb))
    sliced = refine_facts(facts, pairs, kb.exclusivity_axioms, strict=False)
    return {p.key: p for p in encode(sliced, pairs)}


def small_kb(text):
    kb = parse_kb(text)
    kb.validated = True
    return kb


class TestCheckSat:
    def test_drug_sale_r4(self, sample_kb, sample_cases):
        probs = problems_for(sample_kb, sample_cases["g347"].facts, {347})
        res = check_sat(probs["347.4"], sample_kb.exclusivity_axioms)
        assert res.is_sat
        assert res.model == 0
        assert res.satisfied_interval == PenaltySpec(0, 36)

    def test_drug_sale_r1_missing_element(self, sample_kb, sample_cases):
        probs = problems_for(sample_kb, sample_cases["g347"].facts, {347})
        res = check_sat(probs["347.1"], sample_kb.exclusivity_axioms)
        assert not res.is_sat
        assert res.core.kind == "MissingElement"
        assert "fact:DrugQuantity=2" in res.core.members
        assert "clause_guard:347.1" in res.core.members

    def test_empty_penalty_core(self):
        kb = small_kb("article 300 { clause 1 { guard: q; penalty [0, 40]; aggravate 48 when: q; } }")
        facts = [FactAtom("Qualifier", "s1", "q", True)]
        res = check_sat(problems_for(kb, facts)["300.1"])
        assert not res.is_sat
        assert res.core.members == {"aggravate:300.1#0", "penalty_upper:300.1"}
        assert res.core.kind == "EmptyPenaltyInterval"

    def test_conflicting_facts_core(self):
        kb = small_kb(
            "exclusive MentalState: Intentional, Negligent;\n"
            "article 300 { clause 1 { guard: MentalState = Intentional; penalty [0, 12]; } }"
        )
        facts = [
            FactAtom("MentalState", "s1", "MentalState", "Intentional"),
            FactAtom("MentalState", "s1", "MentalState", "Negligent"),
        ]
        res = check_sat(problems_for(kb, facts)["300.1"], kb.exclusivity_axioms)
        assert res.core.kind == "ConflictingFacts"
        assert res.core.members == {"fact:MentalState=Intentional", "fact:MentalState=Negligent"}

    def test_incompatible_guards(self):
        kb = small_kb(
            "exclusive T: a, b;\n"
            "article 300 { guard: T = a; clause 1 { guard: T = b; penalty [0, 12]; } }"
        )
        problem = problems_for(kb, [])["300.1"]
        # an unknown T blocks the clause guard on its own
        assert check_sat(problem, kb.exclusivity_axioms).core.members == {"missing:T", "clause_guard:300.1"}
        # with T left free, only the two guards clash
        res = check_sat(dataclasses.replace(problem, facts=()), kb.exclusivity_axioms)
        assert res.core.kind == "IncompatibleGuards"
        assert res.core.members == {"article_guard:300", "clause_guard:300.1"}

    def test_unsat_core_on_sat_problem(self, sample_kb, sample_cases):
        probs = problems_for(sample_kb, sample_cases["g347"].facts, {347})
        with pytest.raises(NotUnsat):
            unsat_core(probs["347.4"], sample_kb.exclusivity_axioms)

    def test_random_agreement(self):
        t = check_sat_agreement(250)
        assert t.ok, t.mismatches[:5]


class TestCores:
    def test_minimality(self):
        t = core_minimality(300)
        assert t.ok, t.mismatches[:5]

    def test_bounds_only_core(self):
        kb = small_kb("article 300 { clause 1 { guard: p; penalty [0, 40]; aggravate 48 when: p; } }")
        res = check_sat(problems_for(kb, [FactAtom("Qualifier", "s1", "p", True)])["300.1"])
        assert "clause_guard:300.1" not in res.core.members


class TestImplies:
    def test_conjunction_weakening(self):
        assert implies(parse_guard("A and B"), parse_guard("A")) is Implication.IMPLIES

    def test_not_implies(self):
        assert implies(parse_guard("A"), parse_guard("A and B")) is Implication.NOT_IMPLIES

    def test_severity_clause_implies_article_guard(self, severity_kb):
        art = severity_kb.articles[234]
        serious = conjoin(art.article_guard, art.clauses[1].guard)
        assert implies(serious, art.article_guard, severity_kb.exclusivity_axioms) is Implication.IMPLIES
        assert implies(art.article_guard, serious, severity_kb.exclusivity_axioms) is Implication.NOT_IMPLIES

    def test_exclusivity_respected(self):
        excl = (ExclusivityGroup("T", ("a", "b")),)
        assert implies(parse_guard("T = a"), parse_guard("not T = b"), excl) is Implication.IMPLIES
        assert implies(parse_guard("T = a"), parse_guard("not T = b")) is Implication.NOT_IMPLIES

    def test_thresholds(self):
        assert implies(parse_guard("N >= 50"), parse_guard("N >= 10")) is Implication.IMPLIES
        assert implies(parse_guard("N >= 10"), parse_guard("N >= 50")) is Implication.NOT_IMPLIES

    def test_undecided_over_cap(self):
        g = parse_guard(" and ".join(f"p{i}" for i in range(20)))
        assert implies(g, parse_guard("p0"), atom_cap=16) is Implication.UNDECIDED

    def test_syntactic_fallback(self):
        assert syntactically_subsumes(parse_guard("a and b and not c"), parse_guard("a and not c"))
        assert not syntactically_subsumes(parse_guard("a"), parse_guard("a and b"))

    @pytest.mark.parametrize("seed", range(30))
    def test_reflexive_and_transitive(self, seed):
        rng = random.Random(seed)
        g = random_guard(rng, max_atoms=5)
        h = conjoin(g, random_guard(rng, max_atoms=3))
        k = conjoin(h, random_guard(rng, max_atoms=3))
        assert implies(g, g, EXCL) is Implication.IMPLIES
        assert implies(k, h, EXCL) is Implication.IMPLIES
        assert implies(h, g, EXCL) is Implication.IMPLIES
        assert implies(k, g, EXCL) is Implication.IMPLIES

    def test_random_agreement(self):
        t = implies_agreement(300)
        assert t.ok, t.mismatches[:5]


class TestBackends:
    def _problem(self):
        kb = small_kb("article 300 { clause 1 { guard: q; penalty [0, 40]; aggravate 48 when: q; } }")
        return problems_for(kb, [FactAtom("Qualifier", "s1", "q", True)])["300.1"]

    def test_render_request(self):
        p = self._problem()
        text = render_request(ConstraintSet(p, frozenset(p.constraint_ids)))
        lines = text.splitlines()
        assert lines[0] == "var y int >= 0"
        assert lines[-1] == "check"
        assert "fact fact:q=true q true" in lines
        assert "guard clause_guard:300.1 q" in lines
        assert any(ln.startswith("bound aggravate:300.1#0 aggravate 48") for ln in lines)

    @pytest.mark.parametrize(
        "reply,sat,model,core",
        [("sat 12", True, 12, None), ("sat -", True, None, None), ("unsat a b", False, None, {"a", "b"})],
    )
    def test_parse_reply(self, reply, sat, model, core):
        out = parse_reply(reply)
        assert (out.sat, out.model) == (sat, model)
        assert (set(out.core) if out.core else None) == core

    def test_parse_reply_garbage(self):
        with pytest.raises(ServiceError):
            parse_reply("maybe")
        with pytest.raises(ServiceError):
            parse_reply("")

    def test_subprocess_round_trip(self, tmp_path, monkeypatch):
        log = tmp_path / "req.txt"
        monkeypatch.setenv("FAKE_SMT_LOG", str(log))
        monkeypatch.setenv("FAKE_SMT_REPLY", "unsat aggravate:300.1#0 penalty_upper:300.1")
        backend = SubprocessBackend([sys.executable, str(FAKE_SMT)])
        p = self._problem()
        res = check_sat(p, backend=backend)
        assert not res.is_sat
        assert res.core.members == {"aggravate:300.1#0", "penalty_upper:300.1"}
        assert log.read_text().endswith("check\n")

    def test_subprocess_sat(self, monkeypatch):
        monkeypatch.delenv("FAKE_SMT_REPLY", raising=False)
        res = check_sat(self._problem(), backend=SubprocessBackend([sys.executable, str(FAKE_SMT)]))
        assert res.is_sat and res.model == 7

    def test_subprocess_failure(self, monkeypatch):
        monkeypatch.setenv("FAKE_SMT_EXIT", "3")
        with pytest.raises(ServiceError):
            check_sat(self._problem(), backend=SubprocessBackend([sys.executable, str(FAKE_SMT)]))

    def test_missing_command(self):
        with pytest.raises(ServiceError):
            check_sat(self._problem(), backend=SubprocessBackend(["/nonexistent/solver-binary"]))

    def test_builtin_backend_is_default(self):
        p = self._problem()
        assert BuiltinBackend().submit(ConstraintSet(p, frozenset(p.constraint_ids))).sat is False
