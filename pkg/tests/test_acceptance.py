"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import dataclasses
import random
import time

import pytest

from lexsolve.adjudicator import adjudicate
from lexsolve.agents import DEFENSE, PROSECUTOR, cluster_debate, deterministic_extract, load_clusters, merge_arguments
from lexsolve.case_model import CaseRecord, ExtraLegalAttr, FactAtom, dumps_record, parse_case, serialize_case
from lexsolve.cli import load_probes, main
from lexsolve.compiler import EmptyInterval, adjust_interval, encode, refine_facts
from lexsolve.kb import AdjustmentDelta, PenaltySpec, parse_guard, parse_kb, search_constraints, serialize_kb, validate_kb
from lexsolve.metrics import Gold, PredictionRecord, change_alignment, evaluate_corpus, statute_correctness
from lexsolve.report import read_records
from lexsolve.perturb import (
    PerturbationSpec,
    apply_perturbation,
    build_pair_corpus,
    default_registry,
    load_specs,
    pair_from_record,
    pair_to_record,
)
from lexsolve.solver import check_sat

import metric_fixture
from checks import check_sat_agreement, core_minimality, implies_agreement
from conftest import FIXTURES, data_path, sample_records
from gen import random_kb_text


@pytest.fixture
def verdict(capsys):
    """Record a criterion outcome: prints the line, then asserts."""

    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return emit


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_01_golden_trace(verdict, sample_kb, sample_cases):
    case = sample_cases["g347"]

    def run():
        p = deterministic_extract(case, PROSECUTOR)
        d = deterministic_extract(case, DEFENSE)
        merged = merge_arguments(p, d, sample_kb.exclusivity_axioms)
        candidates = cluster_debate(merged.candidates, load_clusters())
        return candidates, adjudicate(case, sample_kb, candidates)

    (candidates, j), secs = _timed(run)
    rejected = {d.clause_id for d in j.diagnostics if d.members and d.clause_id[0] == 347}
    checks = {
        "candidates": candidates == {64, 65, 67, 347},
        "rejected": rejected == {(347, 1), (347, 2), (347, 3)},
        "accepted": {c for c in j.chosen_clauses if c[0] == 347} == {(347, 4)},
        "interval": j.penalty_interval == PenaltySpec(0, 36),
        "verified": j.general_articles | j.specific_articles == {64, 65, 67, 347},
        "runtime": secs < 1.0,
    }
    failed = [k for k, v in checks.items() if not v]
    verdict(1, not failed, f"347.4 accepted with [0,36], 347.1-3 rejected, {secs:.3f}s" + (f" failed={failed}" if failed else ""))


def test_criterion_02_severity(verdict, severity_kb, sample_cases):
    minor = adjudicate(sample_cases["inj_minor"], severity_kb, {234})
    serious = adjudicate(sample_cases["inj_serious"], severity_kb, {234})
    s = serious.penalty_interval
    y = serious.point_sentence_months
    ok = (
        minor.chosen_clauses == {(234, 1)}
        and minor.penalty_interval == PenaltySpec(0, 36)
        and serious.chosen_clauses == {(234, 2)}
        and s == PenaltySpec(36, 120, True, False)
        and (s.effective_lower, s.effective_upper) == (37, 120)
        and y is not None
        and 37 <= y <= 120
    )
    verdict(2, ok, f"minor {sorted(minor.chosen_clauses)} {minor.penalty_interval}, serious {sorted(serious.chosen_clauses)} {s} y={y}")


CRIT3_KB = """
article 400 {
  clause 1 {
    guard: harm;
    penalty [36, 120];
    aggravate 90 when: repeat;
    mitigate 24 when: repaid;
  }
}
"""


def test_criterion_03_interval_adjustment(verdict):
    base = PenaltySpec(36, 120)
    agg12 = AdjustmentDelta(parse_guard("a"), "RaiseLower", 12, "aggravate:x#0")
    mit24 = AdjustmentDelta(parse_guard("m"), "LowerUpper", 24, "mitigate:x#0")
    agg90 = AdjustmentDelta(parse_guard("a"), "RaiseLower", 90, "aggravate:x#0")
    narrowed = adjust_interval(base, [agg12], [mit24])
    empty = adjust_interval(base, [agg90], [mit24])

    # the same crossing through the full pipeline must reject the clause with a core naming the aggravator
    kb = parse_kb(CRIT3_KB)
    kb.validated = True
    facts = tuple(FactAtom("Qualifier", "s1", p, True) for p in ("harm", "repeat", "repaid"))
    pairs = list(search_constraints(kb.articles, kb))
    (problem,) = encode(refine_facts(facts, pairs, strict=False), pairs)
    res = check_sat(problem)
    j = adjudicate(CaseRecord("c3", ("s1",), "x", facts=facts), kb)
    ok = (
        narrowed == PenaltySpec(48, 96)
        and isinstance(empty, EmptyInterval)
        and "aggravate:x#0" in empty.sources
        and isinstance(problem.adjusted_penalty, EmptyInterval)
        and not res.is_sat
        and "aggravate:400.1#0" in res.core.members
        and not j.chosen_clauses
        and any("aggravate:400.1#0" in d.members for d in j.diagnostics)
    )
    verdict(3, ok, f"{narrowed}; delta 90 gives {type(empty).__name__}, core {sorted(res.core.members) if res.core else None}")


EXTRA_LEGAL_RULES = [
    name for name, rule in default_registry().rules.items() if rule.op == "set_extra_legal"
]


def _random_extra_legal_edit(case, rng, i):
    rules = tuple(rng.sample(EXTRA_LEGAL_RULES, rng.randint(1, 3)))
    spec = PerturbationSpec(f"inv{i}", "JudicialFairness", rules, False)
    edited = apply_perturbation(case, spec, seed=rng.randrange(1 << 30)).perturbed_case
    if rng.random() < 0.5:
        extra = ExtraLegalAttr("hometown", rng.choice(["north", "south", "coast", "inland"]))
        edited = dataclasses.replace(edited, extra_legal=tuple(a for a in edited.extra_legal if a.name != "hometown") + (extra,))
    return edited


def test_criterion_04_extra_legal_invariance(verdict, sample_kb, sample_cases):
    pairs = list(search_constraints(sample_kb.articles, sample_kb))
    excl = sample_kb.exclusivity_axioms
    ids = sorted(sample_cases)
    rng = random.Random(2024)

    def run():
        ground_same = judged_same = 0
        for i in range(200):
            case = sample_cases[ids[i % len(ids)]]
            edited = _random_extra_legal_edit(case, rng, i)
            # ground-problem level
            a = encode(refine_facts(case.facts, pairs, excl, strict=False), pairs)
            b = encode(refine_facts(edited.facts, pairs, excl, strict=False), pairs)
            ground_same += a == b
            # judgment level, with candidates re-extracted from the edited narrative
            ja = adjudicate(case, sample_kb, _candidates(case, sample_kb))
            jb = adjudicate(edited, sample_kb, _candidates(edited, sample_kb))
            judged_same += ja.chosen_clauses == jb.chosen_clauses and ja.penalty_intervals == jb.penalty_intervals
        return ground_same, judged_same

    (ground_same, judged_same), secs = _timed(run)
    ok = ground_same == 200 and judged_same == 200 and secs < 30
    verdict(4, ok, f"ground {ground_same}/200, judgment {judged_same}/200 identical, {secs:.2f}s")


def _candidates(case, kb):
    p = deterministic_extract(case, PROSECUTOR)
    d = deterministic_extract(case, DEFENSE)
    return cluster_debate(merge_arguments(p, d, kb.exclusivity_axioms).candidates, load_clusters())


def _prediction(case, kb):
    return PredictionRecord.from_dict(adjudicate(case, kb).to_dict())


def test_criterion_05_label_changing(verdict, sample_kb, sample_cases):
    specs = load_specs(data_path("sample_specs.json"))
    pairs = [p for p in build_pair_corpus(list(sample_cases.values()), specs) if p.spec.changed_label]
    changed_gold = all(Gold.of(p.base_case) != Gold.of(p.perturbed_case) for p in pairs)
    decided = [(_prediction(p.base_case, sample_kb), _prediction(p.perturbed_case, sample_kb)) for p in pairs]
    align = change_alignment(decided)
    correct = statute_correctness([(b, Gold.of(p.perturbed_case)) for (_, b), p in zip(decided, pairs)])
    ok = bool(pairs) and changed_gold and align.value == 1.0 and correct.value == 1.0
    verdict(5, ok, f"{len(pairs)} pairs, change_alignment {align.numerator}/{align.denominator}, "
                   f"statute_correctness {correct.numerator}/{correct.denominator}")


def test_criterion_06_solver_oracles(verdict):
    def run():
        return check_sat_agreement(500), implies_agreement(500)

    (sat, imp), secs = _timed(run)
    ok = sat.ok and imp.ok and sat.checked >= 500 and imp.checked >= 500 and secs < 60
    verdict(6, ok, f"500 problems: check_sat {sat.checked - len(sat.mismatches)}/{sat.checked} clause checks, implies "
                   f"{imp.checked - len(imp.mismatches)}/{imp.checked} agree, {secs:.2f}s")


def test_criterion_07_core_minimality(verdict):
    t = core_minimality(500)
    verdict(7, t.ok, f"{t.checked} cores minimal, {len(t.mismatches)} violations")


SEEDED = sorted(
    [("vacuous", "901.1"), ("vacuous", "901.2"), ("vacuous", "902.1"),
     ("contradictory", "903.1"), ("contradictory", "903.2"), ("contradictory", "903.3"),
     ("overly_broad", "904.1"), ("overly_broad", "905.1"),
     ("probe_mismatch", "d5"), ("probe_mismatch", "d6")]
)


def test_criterion_08_validator(verdict):
    from lexsolve import load_sample_kb

    bad = parse_kb((FIXTURES / "defective_kb.rules").read_text())
    found = sorted((f.kind, f.target) for f in validate_kb(bad, load_probes(str(FIXTURES / "defective_probes.jsonl"))).errors)
    clean = validate_kb(load_sample_kb(), load_probes(data_path("probes.jsonl")))
    ok = found == SEEDED and not clean.errors
    verdict(8, ok, f"{len(found)} defects found of {len(SEEDED)} seeded, {len(clean.errors)} false positives on clean KB")


def test_criterion_09_metric_hand_count(verdict):
    pairs, preds = metric_fixture.build()
    report = evaluate_corpus(pairs, preds, metric_fixture.CLUSTERS, metric_fixture.BASELINE)
    bad = metric_fixture.compare(report, tol=1e-9)
    verdict(9, len(pairs) == 20 and not bad, f"{len(metric_fixture.EXPECTED) - len(bad)}/{len(metric_fixture.EXPECTED)} "
                                              f"hand-counted values within 1e-9" + (f" off={bad}" if bad else ""))


def test_criterion_10_determinism(verdict, tmp_path):
    cases = data_path("sample_cases.jsonl")
    specs = data_path("sample_specs.json")
    kb = data_path("sample_kb.rules")
    outputs = {"perturb": [], "adjudicate": []}
    for i, par in enumerate((1, 1, 8, 8)):
        pairs = tmp_path / f"pairs{i}.jsonl"
        judged = tmp_path / f"judged{i}.jsonl"
        main(["perturb", "--in", cases, "--specs", specs, "--out", str(pairs), "--seed", "3", "--parallelism", str(par)])
        mixed = tmp_path / f"mixed{i}.jsonl"
        lines = open(cases, encoding="utf-8").read().splitlines()
        lines += [dumps_record(r["perturbed_case"]) for r in read_records(str(pairs))]
        mixed.write_text("\n".join(lines) + "\n")
        main(["adjudicate", "--kb", kb, "--in", str(mixed), "--out", str(judged), "--parallelism", str(par)])
        outputs["perturb"].append(pairs.read_bytes())
        outputs["adjudicate"].append(judged.read_bytes())
    same = {k: len(set(v)) == 1 and bool(v[0]) for k, v in outputs.items()}
    verdict(10, all(same.values()), f"byte-identical over 2 runs x parallelism {{1,8}}: {same}")


def test_criterion_11_round_trips(verdict):
    failures = []
    # LeCaRDv2
    records = sample_records()
    for rec in records:
        c = parse_case(rec, "LeCaRDv2")
        if parse_case(serialize_case(c, "LeCaRDv2"), "LeCaRDv2") != c:
            failures.append(("LeCaRDv2", c.case_id))
    # LEEC, including a multi-suspect record
    leec = [serialize_case(parse_case(r, "LeCaRDv2"), "LEEC") for r in records]
    leec.append({"pid": 7, "fact": "A and B stole goods.", "charge": "{A: theft; B: theft}",
                 "article": "{A: [264, 25, 67]; B: [264, 25]}"})
    for rec in leec:
        c = parse_case(rec, "LEEC")
        if parse_case(serialize_case(c, "LEEC"), "LEEC") != c:
            failures.append(("LEEC", c.case_id))
    # Perturbation records
    bases = [parse_case(r, "LeCaRDv2") for r in records]
    pairs = build_pair_corpus(bases, load_specs(data_path("sample_specs.json")), seed=5)
    for pair in pairs:
        rec = pair_to_record(pair)
        once = pair_from_record(rec)
        if pair_from_record(pair_to_record(once)) != once or pair_to_record(once) != rec:
            failures.append(("Perturbation", pair.pair_id))
    # rule language
    texts = [open(data_path("sample_kb.rules"), encoding="utf-8").read(), (FIXTURES / "defective_kb.rules").read_text()]
    texts += [random_kb_text(random.Random(s)) for s in range(50)]
    for n, text in enumerate(texts):
        kb = parse_kb(text)
        again = parse_kb(serialize_kb(kb))
        if again.articles != kb.articles or serialize_kb(again) != serialize_kb(kb):
            failures.append(("rules", n))
    verdict(11, not failures, f"LeCaRDv2 {len(records)}, LEEC {len(leec)}, Perturbation {len(pairs)}, rule texts {len(texts)} fixed points"
                              + (f" failures={failures}" if failures else ""))
