import random

import pytest

from lexsolve import load_sample_kb
from lexsolve.errors import DuplicateClauseId, KBNotValidated, RuleSyntaxError
from lexsolve.kb import (
    And,
    Atom,
    Exists,
    Not,
    Or,
    PenaltySpec,
    parse_guard,
    parse_kb,
    search_constraints,
    serialize_kb,
    to_text,
    validate_kb,
)
from lexsolve.kb.guards import walk
from lexsolve.kb.validate import guard_predicates
from lexsolve.solver import guard_satisfiable

from conftest import SEVERITY_KB
from gen import random_guard, random_kb_text
from oracles import atoms_of, oracle_satisfiable


class TestParse:
    def test_severity_schema(self):
        kb = parse_kb(SEVERITY_KB)
        art = kb.articles[234]
        c1, c2 = art.clauses
        assert c1.clause_id == (234, 1)
        assert c1.penalty == PenaltySpec(0, 36, False, False)
        assert c2.penalty == PenaltySpec(36, 120, True, False)
        assert (c2.penalty.effective_lower, c2.penalty.effective_upper) == (37, 120)
        assert [a.delta_months for a in c2.aggravators] == [12]
        assert [m.delta_months for m in c2.mitigators] == [24]
        assert not kb.validated

    def test_empty_document(self):
        kb = parse_kb("")
        assert kb.articles == {}

    def test_comments_only(self):
        assert parse_kb("# nothing here\n\n").articles == {}

    def test_duplicate_clause(self):
        text = "article 9 { clause 1 { penalty [0, 1]; } clause 1 { penalty [0, 2]; } }"
        with pytest.raises(DuplicateClauseId):
            parse_kb(text)

    def test_syntax_error_position(self):
        with pytest.raises(RuleSyntaxError) as exc:
            parse_kb("article 9 {\n  clause 1 {\n    penalty [0, 36;\n  }\n}\n")
        assert exc.value.line == 3
        assert exc.value.column > 1

    def test_life_and_death_tokens(self):
        kb = parse_kb("article 232 { clause 1 { penalty [120, Death]; } clause 2 { penalty [120, Life]; } }")
        assert kb.articles[232].clauses[0].penalty.upper_months == "Death"
        assert kb.articles[232].clauses[1].penalty.effective_upper is None

    def test_guard_grammar(self):
        g = parse_guard("a and (b or not c) and N >= 10")
        assert isinstance(g, And)
        assert g.children[2] == Atom("N", ">=", 10)
        assert parse_guard("p = false") == Not(Atom("p"))
        assert parse_guard("N ≤ 3") == Atom("N", "<=", 3)
        assert isinstance(parse_guard("exists result (Causes and Severity = Minor)"), Exists)

    def test_precedence(self):
        g = parse_guard("a or b and c")
        assert isinstance(g, Or)
        assert isinstance(g.children[1], And)


class TestRoundTrip:
    def test_sample_kb_fixed_point(self):
        kb = load_sample_kb()
        text = serialize_kb(kb)
        again = parse_kb(text)
        assert again.articles == kb.articles
        assert again.exclusivity_axioms == kb.exclusivity_axioms
        assert serialize_kb(again) == text

    def test_defective_kb_fixed_point(self, fixtures_dir):
        kb = parse_kb((fixtures_dir / "defective_kb.rules").read_text())
        text = serialize_kb(kb)
        assert serialize_kb(parse_kb(text)) == text

    @pytest.mark.parametrize("seed", range(40))
    def test_random_kb_fixed_point(self, seed):
        kb = parse_kb(random_kb_text(random.Random(seed)))
        text = serialize_kb(kb)
        again = parse_kb(text)
        assert again.articles == kb.articles
        assert serialize_kb(again) == text

    @pytest.mark.parametrize("seed", range(100))
    def test_guard_text_round_trip(self, seed):
        g = random_guard(random.Random(seed))
        assert parse_guard(to_text(g)) == g


class TestValidate:
    def test_sample_kb_clean(self, sample_kb):
        assert sample_kb.validated

    def test_no_extra_legal_names_in_guards(self, sample_kb):
        preds = guard_predicates(sample_kb)
        assert not preds & set(sample_kb.extra_legal_names)

    def test_extra_legal_guard_rejected(self):
        kb = parse_kb("article 300 { clause 1 { guard: gender = female; penalty [0, 12]; } }")
        report = validate_kb(kb)
        assert not kb.validated
        assert "extra_legal_reference" in report.kinds()

    def test_declared_extra_legal_names(self):
        kb = parse_kb("extralegal hometown;\narticle 300 { clause 1 { guard: hometown = x; penalty [0, 12]; } }")
        assert "extra_legal_reference" in validate_kb(kb).kinds()

    def test_exclusive_mental_states_vacuous(self):
        kb = parse_kb(
            "exclusive MentalState: Intentional, Negligent;\n"
            "article 300 { clause 1 { guard: MentalState = Intentional and MentalState = Negligent; penalty [0, 12]; } }"
        )
        report = validate_kb(kb)
        assert report.kinds() == ["vacuous"]

    def test_tautology_overly_broad(self):
        kb = parse_kb("article 300 { clause 1 { guard: p or not p; penalty [0, 12]; } }")
        assert validate_kb(kb).kinds() == ["overly_broad"]

    def test_contradictory_adjustment(self):
        kb = parse_kb("article 300 { clause 1 { guard: p; penalty [0, 36]; aggravate 40 when: q; } }")
        assert validate_kb(kb).kinds() == ["contradictory"]

    def test_bad_penalty(self):
        kb = parse_kb("article 300 { clause 1 { penalty [40, 36]; } }")
        assert "bad_penalty" in validate_kb(kb).kinds()

    def test_seeded_defects(self, fixtures_dir):
        from lexsolve.cli import load_probes

        kb = parse_kb((fixtures_dir / "defective_kb.rules").read_text())
        report = validate_kb(kb, load_probes(str(fixtures_dir / "defective_probes.jsonl")))
        got = sorted((f.kind, f.target) for f in report.errors)
        assert got == sorted(
            [
                ("vacuous", "901.1"),
                ("vacuous", "901.2"),
                ("vacuous", "902.1"),
                ("contradictory", "903.1"),
                ("contradictory", "903.2"),
                ("contradictory", "903.3"),
                ("overly_broad", "904.1"),
                ("overly_broad", "905.1"),
                ("probe_mismatch", "d5"),
                ("probe_mismatch", "d6"),
            ]
        )
        assert not kb.validated

    @pytest.mark.parametrize("seed", range(150))
    def test_vacuity_matches_enumeration(self, seed):
        rng = random.Random(seed)
        g = random_guard(rng, max_atoms=12)
        if rng.random() < 0.3:
            # force some unsatisfiable guards
            g = And((g, Not(g)))
        from lexsolve.kb import ExclusivityGroup

        excl = (ExclusivityGroup("T", ("a", "b", "c")),)
        assert guard_satisfiable(g, excl) == oracle_satisfiable(g, excl)


class TestSearch:
    def test_drug_sale_candidates(self, sample_kb):
        pairs = search_constraints({347, 64, 65, 67}, sample_kb)
        assert {a.article_no for a, _ in pairs} == {64, 65, 67, 347}
        assert len(pairs) == sum(len(sample_kb.articles[n].clauses) for n in (64, 65, 67, 347))
        assert pairs.unknown_articles == ()

    def test_empty(self, sample_kb):
        assert search_constraints(set(), sample_kb) == []

    def test_unknown_article_reported(self, sample_kb):
        pairs = search_constraints({9999}, sample_kb)
        assert pairs == []
        assert pairs.unknown_articles == (9999,)

    def test_requires_validation(self):
        with pytest.raises(KBNotValidated):
            search_constraints({347}, load_sample_kb())


def test_guard_walk_covers_atoms():
    g = parse_guard("a and (b or not c)")
    assert {n.predicate for n in walk(g) if isinstance(n, Atom)} == {"a", "b", "c"}
    assert len(atoms_of(g)) == 3
