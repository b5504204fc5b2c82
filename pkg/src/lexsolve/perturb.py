"""Paired perturbation corpus: edit operators, attack injection, record format."""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from importlib.resources import files
from typing import Any, Iterable, Mapping, Sequence

from lexsolve.case_model import (
    CaseRecord,
    ExtraLegalAttr,
    FactAtom,
    PERTURBATION_KEYS,
    case_to_dict,
    format_clause_id,
    parse_case,
    parse_clause_id,
    replace_narrative_text,
)
from lexsolve.compiler import build_inventory, resolve_exists
from lexsolve.errors import RuleLabelMismatch, SchemaError, UnknownRule
from lexsolve.kb.guards import Atom, Exists, atom_truth, evaluate
from lexsolve.kb.rulelang import parse_guard

FAMILIES = (
    "JudicialFairness",
    "BenignRobustness",
    "MajorPremise",
    "MinorPremise",
    "ConclusionLevel",
    "StatutoryElement",
    "MentalState",
    "ExceptionCondition",
    "StatuteConfusion",
)
LABEL_PRESERVING_FAMILIES = ("JudicialFairness", "BenignRobustness", "MajorPremise", "MinorPremise", "ConclusionLevel")
LABEL_CHANGING_FAMILIES = ("StatutoryElement", "MentalState", "ExceptionCondition")
ATTACK_TEMPLATES = ("FabricatedAuthority", "VerdictForcing", "RoleHijacking", "FormatMimicking")

# Criminal Law articles stop at 452; citations above it are fabricated by construction.
FABRICATED_ARTICLE_RANGE = (453, 999)

_GOLD_KEYS = ("add_general", "remove_general", "add_specific", "remove_specific", "add_clauses", "remove_clauses")


# ---------------------------------------------------------------- types


@dataclass(frozen=True)
class LabelEffect:
    """Declarative gold edits; post-edit sets are derived per base case."""

    description: str = ""
    add_general: frozenset[int] = frozenset()
    remove_general: frozenset[int] = frozenset()
    add_specific: frozenset[int] = frozenset()
    remove_specific: frozenset[int] = frozenset()
    map_clauses: tuple[tuple[str, str], ...] = ()
    add_clauses: frozenset[str] = frozenset()
    remove_clauses: frozenset[str] = frozenset()

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | None) -> "LabelEffect | None":
        if d is None:
            return None
        edits = d.get("edits", d)
        return cls(
            description=str(d.get("description", "")),
            map_clauses=tuple(sorted((str(k), str(v)) for k, v in (edits.get("map_clauses") or {}).items())),
            **{
                k: frozenset(str(x) if "clauses" in k else int(x) for x in edits.get(k, ()))
                for k in _GOLD_KEYS
            },
        )

    def edits_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        for k in _GOLD_KEYS:
            v = getattr(self, k)
            if v:
                out[k] = sorted(v)
        if self.map_clauses:
            out["map_clauses"] = dict(self.map_clauses)
        return out

    def combine(self, other: "LabelEffect") -> "LabelEffect":
        desc = "; ".join(d for d in (self.description, other.description) if d)
        return LabelEffect(
            desc,
            *(getattr(self, k) | getattr(other, k) for k in ("add_general", "remove_general", "add_specific", "remove_specific")),
            map_clauses=tuple(sorted(dict(self.map_clauses + other.map_clauses).items())),
            add_clauses=self.add_clauses | other.add_clauses,
            remove_clauses=self.remove_clauses | other.remove_clauses,
        )

    @property
    def is_empty(self) -> bool:
        return not self.edits_dict()

    def apply(self, general, specific, clauses) -> tuple[frozenset[int], frozenset[int], frozenset[tuple[int, int]]]:
        mapping = dict(self.map_clauses)
        new_clauses = {parse_clause_id(mapping.get(format_clause_id(c), format_clause_id(c))) for c in clauses}
        new_clauses -= {parse_clause_id(c) for c in self.remove_clauses}
        new_clauses |= {parse_clause_id(c) for c in self.add_clauses}
        return (
            frozenset((set(general) - self.remove_general) | self.add_general),
            frozenset((set(specific) - self.remove_specific) | self.add_specific),
            frozenset(new_clauses),
        )


@dataclass(frozen=True)
class EditRule:
    name: str
    op: str
    material: bool
    params: tuple[tuple[str, Any], ...] = ()
    requires: str = ""
    gold: LabelEffect | None = None

    def param(self, key: str, default: Any = None) -> Any:
        return dict(self.params).get(key, default)


@dataclass(frozen=True)
class PerturbationSpec:
    perturbation_id: str
    family: str
    rules: tuple[str, ...]
    changed_label: bool
    label_effect: LabelEffect | None = None
    attack_template: str | None = None
    categories: tuple[str, ...] = ()
    group: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family in LABEL_PRESERVING_FAMILIES and self.changed_label:
            raise RuleLabelMismatch(f"{self.perturbation_id}: family {self.family} cannot change the label")
        if self.family in LABEL_CHANGING_FAMILIES and not self.changed_label:
            raise RuleLabelMismatch(f"{self.perturbation_id}: family {self.family} must change the label")
        if self.changed_label and self.label_effect is None:
            raise RuleLabelMismatch(f"{self.perturbation_id}: label-changing spec needs a label_effect")
        if self.attack_template is not None and self.attack_template not in ATTACK_TEMPLATES:
            raise ValueError(f"unknown attack template {self.attack_template!r}")

    @property
    def metric_group(self) -> str:
        return self.group or self.family

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "perturbation_id": self.perturbation_id,
            "family": self.family,
            "rules": list(self.rules),
            "changed_label": self.changed_label,
        }
        if self.label_effect is not None:
            out["label_effect"] = {"description": self.label_effect.description, **self.label_effect.edits_dict()}
        if self.attack_template:
            out["attack_template"] = self.attack_template
        if self.categories:
            out["categories"] = list(self.categories)
        if self.group:
            out["group"] = self.group
        return out


@dataclass(frozen=True)
class PerturbationPair:
    base_case: CaseRecord
    perturbed_case: CaseRecord
    spec: PerturbationSpec

    @property
    def pair_id(self) -> str:
        return self.perturbed_case.case_id


@dataclass(frozen=True)
class Registry:
    rules: dict[str, EditRule]
    attack_payloads: dict[str, dict[str, Any]] = field(default_factory=dict)

    def rule(self, name: str) -> EditRule:
        try:
            return self.rules[name]
        except KeyError:
            raise UnknownRule(name) from None


# ---------------------------------------------------------------- loading


def _edit_rule(name: str, d: Mapping[str, Any]) -> EditRule:
    reserved = {"op", "material", "requires", "gold"}
    params = tuple(sorted((k, _freeze(v)) for k, v in d.items() if k not in reserved))
    return EditRule(
        name=name,
        op=d["op"],
        material=bool(d.get("material", False)),
        params=params,
        requires=d.get("requires", ""),
        gold=LabelEffect.from_dict(d.get("gold")),
    )


def _freeze(v: Any) -> Any:
    if isinstance(v, list):
        return tuple(_freeze(x) for x in v)
    if isinstance(v, dict):
        return tuple(sorted((k, _freeze(x)) for k, x in v.items()))
    return v


def load_registry(source: str | Mapping[str, Any] | None = None) -> Registry:
    """Edit-operator registry; ``None`` loads the bundled configuration."""
    if source is None:
        data = json.loads(files("lexsolve").joinpath("data/perturbation_rules.json").read_text(encoding="utf-8"))
    elif isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source
    rules = {name: _edit_rule(name, d) for name, d in data["rules"].items()}
    known_ops = set(_OPERATORS)
    for r in rules.values():
        if r.op not in known_ops:
            raise UnknownRule(f"{r.name}: operator {r.op!r}")
    return Registry(rules, dict(data.get("attack_payloads", {})))


def spec_from_dict(d: Mapping[str, Any]) -> PerturbationSpec:
    return PerturbationSpec(
        perturbation_id=str(d["perturbation_id"]),
        family=d["family"],
        rules=tuple(d["rules"]),
        changed_label=bool(d["changed_label"]),
        label_effect=LabelEffect.from_dict(d.get("label_effect")),
        attack_template=d.get("attack_template"),
        categories=tuple(d.get("categories", ())),
        group=d.get("group", ""),
    )


def load_specs(path: str) -> list[PerturbationSpec]:
    """Specs from a JSON list or one JSON object per line."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("["):
        items = json.loads(text)
    else:
        items = [json.loads(line) for line in text.splitlines() if line.strip()]
    return [spec_from_dict(d) for d in items]


# ---------------------------------------------------------------- helpers


def stable_seed(*parts: Any) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def case_satisfies(case: CaseRecord, requirement: str) -> bool:
    """Evaluate a guard-language condition over the case's own facts."""
    if not requirement:
        return True
    expr = parse_guard(requirement)
    inventory, flat = build_inventory(case.facts)
    values: dict[str, list] = {}
    for f in flat:
        values.setdefault(f.predicate_name, []).append(f.value)

    def flat_lookup(atom: Atom):
        got = values.get(atom.predicate)
        return atom_truth(atom, tuple(got)) if got else False

    def lookup(node):
        if isinstance(node, Exists):
            return resolve_exists(node, inventory, flat_lookup)
        return flat_lookup(node)

    return evaluate(expr, lookup) is True


def _with_extras(case: CaseRecord, **items: Any) -> CaseRecord:
    extras = dict(case.extras)
    extras.update(items)
    return replace(case, extras=tuple(extras.items()))


def _render(text: str, rng: random.Random, slots: Mapping[str, Sequence[str]]) -> str:
    values = {}
    for key, options in slots.items():
        values[key] = rng.choice(list(options))
    lo, hi = FABRICATED_ARTICLE_RANGE
    values.setdefault("fake_article", str(rng.randint(lo, hi)))
    return text.format(**values)


# ---------------------------------------------------------------- operators


def _op_set_extra_legal(case: CaseRecord, rule: EditRule, rng: random.Random) -> CaseRecord:
    attr = rule.param("attr")
    current = case.extra_legal_map().get(attr)
    options = [v for v in rule.param("values", ()) if v != current]
    value = rng.choice(options)
    attrs = [a for a in case.extra_legal if a.name != attr] + [ExtraLegalAttr(attr, value)]
    out = replace(case, extra_legal=tuple(sorted(attrs, key=lambda a: a.name)))
    if current:
        out = replace_narrative_text(out, current, value)
    return out


def _op_narrative_substitute(case: CaseRecord, rule: EditRule, rng: random.Random) -> CaseRecord:
    pairs = [p for p in rule.param("pairs", ()) if p[0] in case.narrative]
    old, new = rng.choice(pairs)
    return replace_narrative_text(case, old, new)


def _append(case: CaseRecord, text: str) -> CaseRecord:
    sep = "" if not case.narrative or case.narrative.endswith((" ", "\n")) else " "
    return replace(case, narrative=case.narrative + sep + text)


def _op_append_text(case: CaseRecord, rule: EditRule, rng: random.Random) -> CaseRecord:
    return _append(case, rng.choice(list(rule.param("texts", ()))))


def _matching_facts(case: CaseRecord, rule: EditRule) -> list[int]:
    pred = rule.param("predicate")
    want = rule.param("from")
    out = []
    for i, f in enumerate(case.facts):
        if f.predicate_name != pred:
            continue
        if want is not None and f.value != want:
            continue
        out.append(i)
    return out


def _op_set_fact(case: CaseRecord, rule: EditRule, rng: random.Random) -> CaseRecord:
    value = rule.param("value")
    facts = list(case.facts)
    olds = []
    for i in _matching_facts(case, rule):
        olds.append(facts[i].value)
        facts[i] = replace(facts[i], value=value)
    out = replace(case, facts=tuple(facts))
    for old_text, new_text in rule.param("narrative", ()):
        for old in olds or [None]:
            out = replace_narrative_text(out, old_text.format(old=old), new_text.format(old=old, new=value))
    return out


def _op_add_fact(case: CaseRecord, rule: EditRule, rng: random.Random) -> CaseRecord:
    suspect = case.suspect_ids[0] if case.suspect_ids else "s1"
    out = case
    start = len(case.narrative)
    text = rule.param("append", "")
    if text:
        out = _append(out, text)
        start = len(out.narrative) - len(text)
    span = (start, len(out.narrative)) if text else None
    added = []
    for item in rule.param("facts", ()):
        item = dict(item)
        added.append(FactAtom(item.get("kind", "Qualifier"), suspect, item["predicate"], item["value"], span))
    return replace(out, facts=out.facts + tuple(added))


def _op_remove_fact(case: CaseRecord, rule: EditRule, rng: random.Random) -> CaseRecord:
    drop = set(_matching_facts(case, rule))
    out = replace(case, facts=tuple(f for i, f in enumerate(case.facts) if i not in drop))
    for old_text, new_text in rule.param("narrative", ()):
        out = replace_narrative_text(out, old_text, new_text)
    return out


def _op_inject_attack(case: CaseRecord, rule: EditRule, rng: random.Random, registry: Registry | None = None):
    return inject_attack(case, rule.param("template"), rng.getrandbits(32), registry)


_OPERATORS = {
    "set_extra_legal": _op_set_extra_legal,
    "narrative_substitute": _op_narrative_substitute,
    "append_text": _op_append_text,
    "set_fact": _op_set_fact,
    "add_fact": _op_add_fact,
    "remove_fact": _op_remove_fact,
    "inject_attack": _op_inject_attack,
}


def rule_applicable(case: CaseRecord, rule: EditRule) -> bool:
    if not case_satisfies(case, rule.requires):
        return False
    if rule.op == "narrative_substitute":
        return any(p[0] in case.narrative for p in rule.param("pairs", ()))
    if rule.op == "set_extra_legal":
        current = case.extra_legal_map().get(rule.param("attr"))
        return any(v != current for v in rule.param("values", ()))
    if rule.op in ("set_fact", "remove_fact"):
        return bool(_matching_facts(case, rule))
    if rule.op == "add_fact":
        preds = {dict(i)["predicate"] for i in rule.param("facts", ())}
        return not any(f.predicate_name in preds for f in case.facts)
    return True


def spec_applicable(case: CaseRecord, spec: PerturbationSpec, registry: Registry) -> bool:
    return all(rule_applicable(case, registry.rule(name)) for name in spec.rules)


# ---------------------------------------------------------------- public operations


def inject_attack(
    base: CaseRecord, template: str, payload_seed: int, registry: Registry | None = None
) -> CaseRecord:
    """Append synthetic adversarial text; facts and gold labels stay untouched."""
    if template not in ATTACK_TEMPLATES:
        raise UnknownRule(f"attack template {template}")
    registry = registry or default_registry()
    payload = registry.attack_payloads[template]
    rng = random.Random(stable_seed("attack", template, payload_seed))
    text = _render(rng.choice(list(payload["templates"])), rng, payload.get("slots", {}))
    out = _append(base, text)
    return _with_extras(out, attack_template=template, attack_synthetic=True)


def effective_label_effect(spec: PerturbationSpec, registry: Registry) -> LabelEffect:
    if spec.label_effect is not None and not spec.label_effect.is_empty:
        return spec.label_effect
    effect = spec.label_effect or LabelEffect()
    for name in spec.rules:
        gold = registry.rule(name).gold
        if gold is not None:
            effect = effect.combine(gold)
    return effect


def apply_perturbation(
    base: CaseRecord,
    spec: PerturbationSpec,
    registry: Registry | None = None,
    seed: int = 0,
) -> PerturbationPair:
    registry = registry or default_registry()
    rules = [registry.rule(name) for name in spec.rules]
    if not spec.changed_label:
        for r in rules:
            if r.material:
                raise RuleLabelMismatch(f"{spec.perturbation_id}: material edit {r.name} under changed_label=false")
    rng = random.Random(stable_seed(seed, base.case_id, spec.perturbation_id))
    case = base
    for r in rules:
        op = _OPERATORS[r.op]
        if r.op == "inject_attack":
            case = op(case, r, rng, registry)
        else:
            case = op(case, r, rng)
    if spec.attack_template and "attack_template" not in dict(case.extras):
        case = inject_attack(case, spec.attack_template, rng.getrandbits(32), registry)
    if spec.changed_label:
        effect = effective_label_effect(spec, registry)
        general, specific, clauses = effect.apply(base.gold_general_articles, base.gold_specific_articles, base.gold_clauses)
        case = replace(case, gold_general_articles=general, gold_specific_articles=specific, gold_clauses=clauses)
        if effect is not spec.label_effect:
            spec = replace(spec, label_effect=effect)
    case = replace(case, case_id=f"{base.case_id}_{spec.perturbation_id}")
    return PerturbationPair(base, case, spec)


def build_pair_corpus(
    bases: Iterable[CaseRecord],
    specs: Iterable[PerturbationSpec],
    seed: int = 0,
    registry: Registry | None = None,
) -> list[PerturbationPair]:
    """Every applicable (base, spec) combination, base-major order."""
    registry = registry or default_registry()
    specs = list(specs)
    for s in specs:
        for name in s.rules:
            registry.rule(name)
    pairs = []
    for base in bases:
        for spec in specs:
            if spec_applicable(base, spec, registry):
                pairs.append(apply_perturbation(base, spec, registry, seed))
    return pairs


# ---------------------------------------------------------------- record format


def _labels(case: CaseRecord) -> dict[str, Any]:
    return {
        "general": sorted(case.gold_general_articles),
        "specific": sorted(case.gold_specific_articles),
        "clauses": [format_clause_id(c) for c in sorted(case.gold_clauses)],
    }


def pair_to_record(pair: PerturbationPair) -> dict[str, Any]:
    spec = pair.spec
    effect = spec.label_effect
    label_effect = {
        "description": effect.description if effect else "label preserved",
        "edits": effect.edits_dict() if effect else {},
        "before": _labels(pair.base_case),
        "after": _labels(pair.perturbed_case),
    }
    record = {
        "perturbation_id": pair.pair_id,
        "original_case_id": pair.base_case.case_id,
        "template_type": pair.base_case.template_type,
        "perturbation_rules": list(spec.rules),
        "perturbation_categories": list(spec.categories) or [spec.family],
        "changed_label": spec.changed_label,
        "label_effect": label_effect,
        "base_case": case_to_dict(pair.base_case),
        "perturbed_case": case_to_dict(pair.perturbed_case),
        "family": spec.family,
        "spec_id": spec.perturbation_id,
    }
    if spec.attack_template:
        record["attack_template"] = spec.attack_template
    if spec.group:
        record["group"] = spec.group
    return record


def pair_from_record(record: Mapping[str, Any]) -> PerturbationPair:
    missing = [k for k in PERTURBATION_KEYS if k not in record]
    if missing:
        raise SchemaError("Perturbation", missing)
    base = parse_case(record["base_case"], "LeCaRDv2")
    perturbed = parse_case(record, "Perturbation")
    le = record.get("label_effect") or {}
    changed = bool(record["changed_label"])
    effect = None
    if changed or le.get("edits"):
        effect = LabelEffect.from_dict({"description": le.get("description", ""), **(le.get("edits") or {})})
    categories = tuple(record.get("perturbation_categories", ()))
    family = record.get("family") or (categories[0] if categories and categories[0] in FAMILIES else None)
    if family is None:
        family = "StatutoryElement" if changed else "BenignRobustness"
    spec_id = record.get("spec_id") or str(record["perturbation_id"]).removeprefix(f"{base.case_id}_")
    if categories == (family,):
        categories = ()
    spec = PerturbationSpec(
        perturbation_id=spec_id,
        family=family,
        rules=tuple(record["perturbation_rules"]),
        changed_label=changed,
        label_effect=effect,
        attack_template=record.get("attack_template"),
        categories=categories,
        group=record.get("group", ""),
    )
    return PerturbationPair(base, perturbed, spec)


def check_pair(pair: PerturbationPair) -> list[str]:
    """Invariant violations for one pair (empty when sound)."""
    from lexsolve.case_model import extra_legal_equivalent

    out = []
    base, pert, spec = pair.base_case, pair.perturbed_case, pair.spec
    same_gold = (
        base.gold_general_articles == pert.gold_general_articles
        and base.gold_specific_articles == pert.gold_specific_articles
    )
    if not spec.changed_label:
        if not same_gold:
            out.append("label-preserving pair changed its gold statutes")
        if not extra_legal_equivalent(base, pert):
            out.append("label-preserving pair changed material facts")
    else:
        effect = spec.label_effect
        expected = effect.apply(base.gold_general_articles, base.gold_specific_articles, base.gold_clauses)
        if expected != (pert.gold_general_articles, pert.gold_specific_articles, pert.gold_clauses):
            out.append("perturbed gold does not match the declared label effect")
    return out


_DEFAULT: Registry | None = None


def default_registry() -> Registry:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_registry()
    return _DEFAULT
