"""Evaluation metrics over predictions, gold labels and perturbation pairs.

Every rate is kept as an explicit numerator/denominator pair so a report
can be recounted by hand.  A rate whose denominator is zero is *absent*
(``value`` is ``None``), never silently zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping, Sequence

from lexsolve.case_model import CaseRecord, format_clause_id, is_general_article, parse_clause_id
from lexsolve.errors import EmptyInput, MissingBaseline, NoCleanCorrect

GENERAL = "General"
SPECIFIC = "Specific"

METADATA = {
    "averaging": "micro (pooled TP/FP/FN over cases)",
    "decision_comparison": "union of general and specific article sets, plus chosen clauses when both records carry them",
    "statute_correctness": "exact general and specific set equality, plus clause equality when gold and prediction both carry clauses",
    "overall_score": "mean over cases of the average of general-set F1 and specific-set F1 (both sets empty counts as 1)",
    "rmse": "Life/Death sentences and missing values excluded and counted separately",
    "asr": "absent when no pair is clean-correct",
    "cluster_incidence": "one incidence per (case, cluster); positive when the cluster holds a gold article",
}


@dataclass(frozen=True)
class PredictionRecord:
    case_id: str
    predicted_general: frozenset[int] = frozenset()
    predicted_specific: frozenset[int] = frozenset()
    predicted_sentence_months: int | None = None
    valid: bool = False
    paired_with: str | None = None
    predicted_clauses: frozenset[tuple[int, int]] = frozenset()

    @property
    def articles(self) -> frozenset[int]:
        return self.predicted_general | self.predicted_specific

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PredictionRecord":
        """Accepts prediction records and adjudicator judgment records."""
        general = d.get("predicted_general", d.get("general_articles", ()))
        specific = d.get("predicted_specific", d.get("specific_articles", ()))
        clauses = d.get("predicted_clauses", d.get("chosen_clauses", ()))
        sentence = d.get("predicted_sentence_months", d.get("point_sentence_months"))
        return cls(
            case_id=str(d["case_id"]),
            predicted_general=frozenset(int(a) for a in general),
            predicted_specific=frozenset(int(a) for a in specific),
            predicted_sentence_months=None if sentence is None else int(sentence),
            valid=bool(d.get("valid", False)),
            paired_with=d.get("paired_with"),
            predicted_clauses=frozenset(parse_clause_id(str(c)) for c in clauses),
        )

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "case_id": self.case_id,
            "predicted_general": sorted(self.predicted_general),
            "predicted_specific": sorted(self.predicted_specific),
            "predicted_sentence_months": self.predicted_sentence_months,
            "valid": self.valid,
        }
        if self.paired_with is not None:
            out["paired_with"] = self.paired_with
        if self.predicted_clauses:
            out["predicted_clauses"] = [format_clause_id(c) for c in sorted(self.predicted_clauses)]
        return out


@dataclass(frozen=True)
class Gold:
    general: frozenset[int]
    specific: frozenset[int]
    clauses: frozenset[tuple[int, int]] = frozenset()
    sentence_months: int | str | None = None

    @property
    def articles(self) -> frozenset[int]:
        return self.general | self.specific

    @classmethod
    def of(cls, case: CaseRecord) -> "Gold":
        return cls(case.gold_general_articles, case.gold_specific_articles, case.gold_clauses, case.gold_sentence_months)


@dataclass(frozen=True)
class Rate:
    numerator: int
    denominator: int

    @property
    def value(self) -> float | None:
        if self.denominator == 0:
            return None
        return self.numerator / self.denominator

    @property
    def exact(self) -> Fraction | None:
        return None if self.denominator == 0 else Fraction(self.numerator, self.denominator)

    def to_dict(self) -> dict[str, Any]:
        return {"value": self.value, "numerator": self.numerator, "denominator": self.denominator}


@dataclass(frozen=True)
class PRF:
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float | None:
        return None if self.tp + self.fp == 0 else self.tp / (self.tp + self.fp)

    @property
    def recall(self) -> float | None:
        return None if self.tp + self.fn == 0 else self.tp / (self.tp + self.fn)

    @property
    def f1(self) -> float | None:
        denom = 2 * self.tp + self.fp + self.fn
        return None if denom == 0 else 2 * self.tp / denom

    def as_tuple(self) -> tuple[float | None, float | None, float | None]:
        return self.precision, self.recall, self.f1

    def to_dict(self) -> dict[str, Any]:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
        }


# ---------------------------------------------------------------- decisions


def decisions_differ(a: PredictionRecord, b: PredictionRecord) -> bool:
    """Article sets differ, or both records carry clauses and those differ."""
    if a.articles != b.articles:
        return True
    if a.predicted_clauses and b.predicted_clauses:
        return a.predicted_clauses != b.predicted_clauses
    return False


def exactly_correct(pred: PredictionRecord, gold: Gold) -> bool:
    if pred.predicted_general != gold.general or pred.predicted_specific != gold.specific:
        return False
    if gold.clauses and pred.predicted_clauses:
        return pred.predicted_clauses == gold.clauses
    return True


def _nonempty(items: Sequence, what: str) -> None:
    if not items:
        raise EmptyInput(f"no {what} to evaluate")


# ---------------------------------------------------------------- pair metrics


def invariance(pairs: Sequence[tuple[PredictionRecord, PredictionRecord]]) -> Rate:
    pairs = list(pairs)
    _nonempty(pairs, "label-preserving pairs")
    same = sum(1 for a, b in pairs if not decisions_differ(a, b))
    return Rate(same, len(pairs))


def change_alignment(pairs: Sequence[tuple[PredictionRecord, PredictionRecord]]) -> Rate:
    pairs = list(pairs)
    _nonempty(pairs, "label-changing pairs")
    changed = sum(1 for a, b in pairs if decisions_differ(a, b))
    return Rate(changed, len(pairs))


def statute_correctness(items: Sequence[tuple[PredictionRecord, Gold]]) -> Rate:
    items = list(items)
    _nonempty(items, "perturbed predictions")
    return Rate(sum(1 for p, g in items if exactly_correct(p, g)), len(items))


def _prf(pairs: Iterable[tuple[frozenset[int], frozenset[int]]]) -> PRF:
    tp = fp = fn = 0
    for pred, gold in pairs:
        tp += len(pred & gold)
        fp += len(pred - gold)
        fn += len(gold - pred)
    return PRF(tp, fp, fn)


def attack_metrics(
    pairs: Sequence[tuple[PredictionRecord, PredictionRecord, Gold]], require_asr: bool = False
) -> dict[str, Any]:
    """ASR, CRR, invariance and attacked-set P/R/F1 over (clean, attacked, gold) triples."""
    pairs = list(pairs)
    _nonempty(pairs, "attack pairs")
    clean_correct = [(c, a, g) for c, a, g in pairs if exactly_correct(c, g)]
    broken = sum(1 for c, a, g in clean_correct if not exactly_correct(a, g))
    retained = len(clean_correct) - broken
    if require_asr and not clean_correct:
        raise NoCleanCorrect("no clean-correct pair; ASR is undefined")
    prf = _prf((a.articles, g.articles) for _, a, g in pairs)
    return {
        "asr": Rate(broken, len(clean_correct)),
        "crr": Rate(retained, len(pairs)),
        "attack_invariance": Rate(sum(1 for c, a, _ in pairs if not decisions_differ(c, a)), len(pairs)),
        "clean_accuracy": Rate(len(clean_correct), len(pairs)),
        "attack_accuracy": Rate(sum(1 for _, a, g in pairs if exactly_correct(a, g)), len(pairs)),
        "attack_precision": prf.precision,
        "attack_recall": prf.recall,
        "attack_f1": prf.f1,
        "attack_counts": {"tp": prf.tp, "fp": prf.fp, "fn": prf.fn},
    }


def bias_magnitude(group_scores: Mapping[str, tuple[float, float]], baseline_group: str) -> float:
    """Σ w_g·|s_g − s_base| over non-baseline groups, w_g = size_g / Σ non-baseline sizes."""
    if baseline_group not in group_scores:
        raise MissingBaseline(f"baseline group {baseline_group!r} not present")
    base_score = group_scores[baseline_group][0]
    others = {g: sw for g, sw in group_scores.items() if g != baseline_group}
    total = sum(w for _, w in others.values())
    if total == 0:
        return 0.0
    return sum((w / total) * abs(s - base_score) for s, w in others.values())


# ---------------------------------------------------------------- case metrics


def provision_prf1(
    preds: Sequence[PredictionRecord], golds: Mapping[str, Gold], granularity: str = SPECIFIC
) -> PRF:
    preds = list(preds)
    _nonempty(preds, "predictions")
    if granularity not in (GENERAL, SPECIFIC):
        raise ValueError(f"granularity must be {GENERAL} or {SPECIFIC}")
    if granularity == GENERAL:
        return _prf((p.predicted_general, golds[p.case_id].general) for p in preds)
    return _prf((p.predicted_specific, golds[p.case_id].specific) for p in preds)


def set_f1(pred: frozenset, gold: frozenset) -> float:
    if not pred and not gold:
        return 1.0
    return 2 * len(pred & gold) / (len(pred) + len(gold))


def overall_score(items: Sequence[tuple[PredictionRecord, Gold]]) -> float:
    """Mean per-case average of general-set and specific-set F1."""
    items = list(items)
    _nonempty(items, "cases")
    total = math.fsum(
        (set_f1(p.predicted_general, g.general) + set_f1(p.predicted_specific, g.specific)) / 2 for p, g in items
    )
    return total / len(items)


def sentencing_metrics(preds: Sequence[PredictionRecord], golds: Mapping[str, Gold]) -> dict[str, Any]:
    preds = list(preds)
    _nonempty(preds, "predictions")
    errors = []
    excluded = 0
    for p in sorted(preds, key=lambda p: p.case_id):
        gold = golds[p.case_id].sentence_months
        if p.predicted_sentence_months is None or not isinstance(gold, int) or isinstance(gold, bool):
            excluded += 1
            continue
        errors.append(p.predicted_sentence_months - gold)
    rmse = math.sqrt(math.fsum(e * e for e in errors) / len(errors)) if errors else None
    return {
        "rmse_months": rmse,
        "rmse_cases": len(errors),
        "excluded": excluded,
        "valid_ratio": Rate(sum(1 for p in preds if p.valid), len(preds)),
    }


def cluster_metrics(
    preds: Sequence[PredictionRecord],
    golds: Mapping[str, Gold],
    clusters: Sequence,
    assignments: Mapping[str, Sequence[str]] | None = None,
) -> dict[str, Any]:
    """Confusing-cluster discrimination.

    Each (case, cluster) is one incidence; ``assignments`` may restrict which
    clusters a case is evaluated against (default: all of them).
    """
    preds = list(preds)
    _nonempty(preds, "predictions")
    pos = exact = omitted = wrong = neg = activated = 0
    per_cluster: dict[str, list[int]] = {}
    for p in preds:
        gold = golds[p.case_id].articles
        names = set(assignments.get(p.case_id, ())) if assignments is not None else None
        for c in clusters:
            if names is not None and c.name not in names:
                continue
            g = gold & c.members
            s = p.articles & c.members
            if g:
                pos += 1
                stats = per_cluster.setdefault(c.name, [0, 0, 0, 0])
                stats[0] += 1
                if s == g:
                    exact += 1
                    stats[1] += 1
                if g - s:
                    omitted += 1
                    stats[2] += 1
                if s - g:
                    wrong += 1
                    stats[3] += 1
            else:
                neg += 1
                if s:
                    activated += 1
    breakdown = {
        name: {
            "evaluated": n,
            "exactness": Rate(e, n),
            "omission": Rate(o, n),
            "wrong": Rate(w, n),
        }
        for name, (n, e, o, w) in sorted(per_cluster.items())
    }
    macro = None
    if breakdown:
        macro = math.fsum(b["exactness"].value for b in breakdown.values()) / len(breakdown)
    return {
        "positive_exactness": Rate(exact, pos),
        "macro_exactness": macro,
        "gold_omission": Rate(omitted, pos),
        "wrong_similar_selection": Rate(wrong, pos),
        "false_activation": Rate(activated, neg),
        "per_cluster": breakdown,
    }


# ---------------------------------------------------------------- report


@dataclass
class MetricReport:
    metrics: dict[str, Any] = field(default_factory=dict)
    breakdowns: dict[str, dict[str, Any]] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=lambda: dict(METADATA))

    def to_dict(self) -> dict[str, Any]:
        return {
            "metadata": self.metadata,
            "metrics": _plain(self.metrics),
            "breakdowns": _plain(self.breakdowns),
        }

    def flat_rows(self) -> list[tuple[str, str, str, Any, Any, Any]]:
        """(section, group, metric, value, numerator, denominator) rows."""
        rows = []

        def emit(section: str, group: str, name: str, v: Any) -> None:
            if isinstance(v, Rate):
                rows.append((section, group, name, v.value, v.numerator, v.denominator))
            elif isinstance(v, PRF):
                for k in ("precision", "recall", "f1"):
                    rows.append((section, group, f"{name}.{k}", getattr(v, k), None, None))
            elif isinstance(v, dict):
                for k, sub in v.items():
                    emit(section, group, f"{name}.{k}" if name else k, sub)
            else:
                rows.append((section, group, name, v, None, None))

        emit("overall", "", "", self.metrics)
        for section, groups in self.breakdowns.items():
            for group, values in groups.items():
                emit(section, group, "", values)
        return rows


def _plain(v: Any) -> Any:
    if isinstance(v, (Rate, PRF)):
        return v.to_dict()
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


@dataclass(frozen=True)
class EvalPair:
    pair_id: str
    base_id: str
    family: str
    group: str
    changed_label: bool
    attack_template: str | None
    categories: tuple[str, ...]
    base_gold: Gold
    perturbed_gold: Gold


def _pair_block(pairs: Sequence[EvalPair], preds: Mapping[str, PredictionRecord]) -> dict[str, Any]:
    out: dict[str, Any] = {"pairs": len(pairs)}
    keep = [(preds[p.base_id], preds[p.pair_id]) for p in pairs if not p.changed_label]
    change = [(preds[p.base_id], preds[p.pair_id]) for p in pairs if p.changed_label]
    if keep:
        out["invariance"] = invariance(keep)
    if change:
        out["change_alignment"] = change_alignment(change)
        out["statute_correctness"] = statute_correctness(
            [(preds[p.pair_id], p.perturbed_gold) for p in pairs if p.changed_label]
        )
    out["overall_score"] = overall_score([(preds[p.pair_id], p.perturbed_gold) for p in pairs])
    attacks = [(preds[p.base_id], preds[p.pair_id], p.base_gold) for p in pairs if p.attack_template]
    if attacks:
        out.update(attack_metrics(attacks))
    return out


def evaluate_corpus(
    pairs: Sequence[EvalPair],
    preds: Mapping[str, PredictionRecord],
    clusters: Sequence = (),
    baseline_group: str | None = None,
) -> MetricReport:
    """The full battery with per-family, per-category, per-attack and per-cluster breakdowns."""
    pairs = sorted(pairs, key=lambda p: p.pair_id)
    _nonempty(pairs, "pairs")
    report = MetricReport()
    report.metrics.update(_pair_block(pairs, preds))

    golds: dict[str, Gold] = {}
    for p in pairs:
        golds[p.base_id] = p.base_gold
        golds[p.pair_id] = p.perturbed_gold
    case_preds = [preds[cid] for cid in sorted(golds)]
    report.metrics["general_prf"] = provision_prf1(case_preds, golds, GENERAL)
    report.metrics["specific_prf"] = provision_prf1(case_preds, golds, SPECIFIC)
    report.metrics.update(sentencing_metrics(case_preds, golds))

    groups: dict[str, list[EvalPair]] = {}
    for p in pairs:
        groups.setdefault(p.group or p.family, []).append(p)
    report.breakdowns["group"] = {g: _pair_block(ps, preds) for g, ps in sorted(groups.items())}
    families: dict[str, list[EvalPair]] = {}
    for p in pairs:
        families.setdefault(p.family, []).append(p)
    report.breakdowns["family"] = {f: _pair_block(ps, preds) for f, ps in sorted(families.items())}
    categories: dict[str, list[EvalPair]] = {}
    for p in pairs:
        for c in p.categories:
            categories.setdefault(c, []).append(p)
    report.breakdowns["category"] = {c: _pair_block(ps, preds) for c, ps in sorted(categories.items())}
    templates: dict[str, list[EvalPair]] = {}
    for p in pairs:
        if p.attack_template:
            templates.setdefault(p.attack_template, []).append(p)
    report.breakdowns["attack_template"] = {t: _pair_block(ps, preds) for t, ps in sorted(templates.items())}

    if clusters:
        cm = cluster_metrics(case_preds, golds, clusters)
        report.breakdowns["cluster"] = cm.pop("per_cluster")
        report.metrics.update(cm)

    if baseline_group is not None:
        scores = {g: (report.breakdowns["group"][g]["overall_score"], len(ps)) for g, ps in groups.items()}
        report.metrics["bias_magnitude"] = bias_magnitude(scores, baseline_group)
        report.metadata["baseline_group"] = baseline_group
    else:
        report.metrics["bias_magnitude"] = None
        report.metadata["baseline_group"] = "not given; bias magnitude absent"
    return report


def general_specific_split(articles: Iterable[int]) -> tuple[frozenset[int], frozenset[int]]:
    arts = set(articles)
    return frozenset(a for a in arts if is_general_article(a)), frozenset(a for a in arts if not is_general_article(a))


def eval_pair(pair) -> EvalPair:
    """An :class:`EvalPair` from a perturbation pair."""
    spec = pair.spec
    return EvalPair(
        pair_id=pair.pair_id,
        base_id=pair.base_case.case_id,
        family=spec.family,
        group=spec.metric_group,
        changed_label=spec.changed_label,
        attack_template=spec.attack_template,
        categories=tuple(spec.categories) or (spec.family,),
        base_gold=Gold.of(pair.base_case),
        perturbed_gold=Gold.of(pair.perturbed_case),
    )
