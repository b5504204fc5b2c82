"""Typed, suspect-centric case records and the three dataset record schemas.

A case is a narrative plus a list of :class:`FactAtom` entries.  Facts are
keyed by ``predicate_name``; the ``subject_id`` says which entity the fact is
about (a suspect, an act, a result or a victim).  Acts and results are
declared through pair-valued atoms:

* ``Act``     subject = suspect, value = ``(act_id, act_type)``
* ``Causes``  subject = act id,  value = ``(act_id, result_id)``
* ``Result``  subject = result id, value = result type token

Facts whose subject is an act or result id are scoped to that entity and are
only visible inside ``exists act``/``exists result`` guard nodes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import PurePath
from typing import Any, Iterable, Mapping

from lexsolve.errors import SchemaError

ELEMENT_KINDS = (
    "Actor",
    "Victim",
    "Act",
    "Result",
    "Causes",
    "MentalState",
    "ProtectedInterest",
    "Amount",
    "Severity",
    "Qualifier",
    "Exception",
)
MENTAL_STATES = ("Intentional", "Negligent", "Knowing", "Unknown")
SEVERITIES = ("Minor", "Serious", "EspeciallySerious")
LIFE = "Life"
DEATH = "Death"
SENTENCE_TOKENS = (LIFE, DEATH)

# Articles up to this number belong to the general part of the criminal code.
GENERAL_PART_MAX = 101

SCHEMAS = ("LeCaRDv2", "LEEC", "Perturbation")

FactValue = Any  # bool | int | str | tuple[str, str]


@dataclass(frozen=True)
class FactAtom:
    element_kind: str
    subject_id: str
    predicate_name: str
    value: FactValue
    span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.element_kind not in ELEMENT_KINDS:
            raise ValueError(f"unknown element kind {self.element_kind!r}")
        if isinstance(self.value, list):
            object.__setattr__(self, "value", tuple(self.value))
        if self.span is not None:
            object.__setattr__(self, "span", (int(self.span[0]), int(self.span[1])))

    def content_key(self) -> tuple:
        """Identity of the fact without its source span."""
        return (self.element_kind, self.subject_id, self.predicate_name, _value_key(self.value))

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "kind": self.element_kind,
            "subject": self.subject_id,
            "predicate": self.predicate_name,
            "value": list(self.value) if isinstance(self.value, tuple) else self.value,
        }
        if self.span is not None:
            out["span"] = list(self.span)
        return out

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FactAtom":
        value = d["value"]
        if isinstance(value, list):
            if len(value) != 2:
                raise ValueError(f"pair-valued fact needs exactly two ids, got {value!r}")
            value = (str(value[0]), str(value[1]))
        span = d.get("span")
        return cls(
            element_kind=d["kind"],
            subject_id=str(d["subject"]),
            predicate_name=d.get("predicate", d["kind"]),
            value=value,
            span=tuple(span) if span is not None else None,
        )


def _value_key(value: FactValue) -> tuple:
    # bool is a subclass of int; keep True and 1 apart.
    return (type(value).__name__, value)


@dataclass(frozen=True)
class ExtraLegalAttr:
    name: str
    value: str


@dataclass(frozen=True)
class SuspectLabel:
    suspect_id: str
    general: frozenset[int]
    specific: frozenset[int]
    charge: str = ""
    sentence_months: int | str | None = None


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    suspect_ids: tuple[str, ...]
    narrative: str
    facts: tuple[FactAtom, ...] = ()
    extra_legal: tuple[ExtraLegalAttr, ...] = ()
    gold_general_articles: frozenset[int] = frozenset()
    gold_specific_articles: frozenset[int] = frozenset()
    gold_sentence_months: int | str | None = None
    gold_clauses: frozenset[tuple[int, int]] = frozenset()
    template_type: str = ""
    suspect_labels: tuple[SuspectLabel, ...] = ()
    # passthrough of dataset fields the engine does not interpret
    extras: tuple[tuple[str, Any], ...] = field(default=(), compare=False)

    @property
    def gold_articles(self) -> frozenset[int]:
        return self.gold_general_articles | self.gold_specific_articles

    def extra(self, key: str, default: Any = None) -> Any:
        return dict(self.extras).get(key, default)

    def extra_legal_map(self) -> dict[str, str]:
        return {a.name: a.value for a in self.extra_legal}

    def act_ids(self) -> set[str]:
        return {f.value[0] for f in self.facts if f.predicate_name == "Act" and isinstance(f.value, tuple)}

    def result_ids(self) -> set[str]:
        return {f.subject_id for f in self.facts if f.predicate_name == "Result"}

    def victim_ids(self) -> set[str]:
        return {f.subject_id for f in self.facts if f.element_kind in ("Victim", "ProtectedInterest")}


# ---------------------------------------------------------------- articles


def is_general_article(article: int) -> bool:
    return article <= GENERAL_PART_MAX


def _as_article(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError(f"article number must be an integer, got {value!r}")
    if isinstance(value, int):
        n = value
    elif isinstance(value, str) and value.strip().isdigit():
        n = int(value.strip())
    else:
        raise ValueError(f"article number must be an integer, got {value!r}")
    if n < 1:
        raise ValueError(f"article number must be positive, got {n}")
    return n


def split_articles(articles: Iterable[Any]) -> tuple[frozenset[int], frozenset[int]]:
    """Partition article numbers into (general, specific)."""
    nums = [_as_article(a) for a in articles]
    general = frozenset(n for n in nums if is_general_article(n))
    specific = frozenset(n for n in nums if not is_general_article(n))
    return general, specific


def format_clause_id(clause_id: tuple[int, int]) -> str:
    return f"{clause_id[0]}.{clause_id[1]}"


def parse_clause_id(text: str) -> tuple[int, int]:
    art, _, idx = str(text).partition(".")
    if not idx:
        raise ValueError(f"clause id must look like '<article>.<clause>', got {text!r}")
    return int(art), int(idx)


# ---------------------------------------------------------------- sentences

_CN_DIGITS = {"零": 0, "一": 1, "二": 2, "两": 2, "三": 3, "四": 4, "五": 5, "六": 6, "七": 7, "八": 8, "九": 9}


def _cn_number(text: str) -> int:
    if text.isdigit():
        return int(text)
    if "十" in text:
        tens, _, ones = text.partition("十")
        value = (_CN_DIGITS[tens] if tens else 1) * 10
        return value + (_CN_DIGITS[ones] if ones else 0)
    return _CN_DIGITS[text]


_NUM = r"(\d+|[零一二两三四五六七八九十]+)"
_EN_YEARS = re.compile(r"(\d+)\s*years?(?:\s*(?:and\s*)?(\d+)\s*months?)?", re.I)
_EN_MONTHS = re.compile(r"(\d+)\s*months?", re.I)
_CN_TERM = re.compile(rf"(?:有期徒刑|拘役|管制)(?:{_NUM}年)?(?:{_NUM}个?月)?")


def parse_sentence_text(text: str) -> int | str | None:
    """Extract a sentence in months (or Life/Death) from ruling text."""
    if not text:
        return None
    lowered = text.lower()
    if "死刑" in text or "death penalty" in lowered or "sentenced to death" in lowered:
        return DEATH
    if "无期徒刑" in text or "life imprisonment" in lowered:
        return LIFE
    for m in _CN_TERM.finditer(text):
        years, months = m.group(1), m.group(2)
        if years or months:
            return (_cn_number(years) if years else 0) * 12 + (_cn_number(months) if months else 0)
    m = _EN_YEARS.search(text)
    if m:
        return int(m.group(1)) * 12 + (int(m.group(2)) if m.group(2) else 0)
    m = _EN_MONTHS.search(text)
    if m:
        return int(m.group(1))
    return None


def _as_sentence(value: Any) -> int | str | None:
    if value is None:
        return None
    if isinstance(value, str):
        token = value.strip().capitalize()
        if token in SENTENCE_TOKENS:
            return token
        if value.strip().lstrip("-").isdigit():
            value = int(value)
        else:
            raise ValueError(f"sentence must be months or Life/Death, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ValueError(f"sentence must be an integer number of months, got {value!r}")
    if value < 0:
        raise ValueError(f"sentence must be non-negative, got {value}")
    return int(value)


# ---------------------------------------------------------------- schemas

_CASE_EXTENSION_KEYS = (
    "case_id",
    "suspects",
    "facts",
    "extra_legal",
    "true_clauses",
    "template_type",
)
_LECARD_KEYS = (
    "filename",
    "fact",
    "article",
    "result",
    "true_sentence_months",
    "true_general_articles",
    "true_specific_articles",
) + _CASE_EXTENSION_KEYS
_LEEC_KEYS = ("pid", "qw", "fact", "reason", "result", "charge", "article", "sentence_months") + _CASE_EXTENSION_KEYS
PERTURBATION_KEYS = (
    "perturbation_id",
    "original_case_id",
    "template_type",
    "perturbation_rules",
    "perturbation_categories",
    "changed_label",
    "label_effect",
    "base_case",
    "perturbed_case",
)


def _require(record: Mapping[str, Any], schema: str, keys: Iterable[str]) -> None:
    missing = [k for k in keys if k not in record]
    if missing:
        raise SchemaError(schema, missing)


def _normalise_schema(schema: str) -> str:
    for s in SCHEMAS:
        if s.lower() == str(schema).lower():
            return s
    raise ValueError(f"unknown schema {schema!r}; expected one of {SCHEMAS}")


def _extensions(record: Mapping[str, Any]) -> dict[str, Any]:
    facts = tuple(FactAtom.from_dict(f) for f in record.get("facts", ()))
    extra = record.get("extra_legal", {}) or {}
    if isinstance(extra, Mapping):
        extra_attrs = tuple(ExtraLegalAttr(str(k), str(v)) for k, v in extra.items())
    else:
        extra_attrs = tuple(ExtraLegalAttr(str(e["name"]), str(e["value"])) for e in extra)
    clauses = frozenset(parse_clause_id(c) for c in record.get("true_clauses", ()))
    return {
        "facts": facts,
        "extra_legal": extra_attrs,
        "gold_clauses": clauses,
        "template_type": str(record.get("template_type", "")),
    }


def _parse_case_dict(record: Mapping[str, Any], schema: str = "LeCaRDv2") -> CaseRecord:
    """LeCaRDv2 layout plus the structured extension keys."""
    if "case_id" not in record and "filename" not in record:
        raise SchemaError(schema, ["filename"])
    has_split = "true_general_articles" in record and "true_specific_articles" in record
    _require(record, schema, ["fact"] + ([] if has_split else ["article"]))
    case_id = str(record["case_id"]) if "case_id" in record else PurePath(str(record["filename"])).stem
    if has_split:
        general = frozenset(_as_article(a) for a in record["true_general_articles"])
        specific = frozenset(_as_article(a) for a in record["true_specific_articles"])
        if "article" in record:
            # still reject malformed article lists
            split_articles(record["article"])
    else:
        general, specific = split_articles(record["article"])
    if "true_sentence_months" in record:
        sentence = _as_sentence(record["true_sentence_months"])
    else:
        sentence = parse_sentence_text(str(record.get("result", "")))
    extras = tuple((k, record[k]) for k in ("filename", "result") if k in record)
    extras += tuple((k, v) for k, v in record.items() if k not in _LECARD_KEYS)
    return CaseRecord(
        case_id=case_id,
        suspect_ids=tuple(str(s) for s in record.get("suspects", ("s1",))),
        narrative=str(record["fact"]),
        gold_general_articles=general,
        gold_specific_articles=specific,
        gold_sentence_months=sentence,
        extras=extras,
        **_extensions(record),
    )


_LEEC_ENTRY = re.compile(r"\s*([^:;{}]+?)\s*:\s*(\[[^\]]*\]|[^;{}]+)")


def _parse_leec_map(value: Any) -> dict[str, Any]:
    """LEEC stores per-suspect maps either as objects or as '{A: [..]; B: ..}' strings."""
    if isinstance(value, Mapping):
        return {str(k): v for k, v in value.items()}
    text = str(value).strip()
    if text.startswith("{") and text.endswith("}"):
        text = text[1:-1]
    out: dict[str, Any] = {}
    for m in _LEEC_ENTRY.finditer(text):
        key, raw = m.group(1).strip(), m.group(2).strip()
        if raw.startswith("["):
            out[key] = [a.strip() for a in raw[1:-1].split(",") if a.strip()]
        else:
            out[key] = raw
    return out


def _parse_leec(record: Mapping[str, Any]) -> CaseRecord:
    _require(record, "LEEC", ["pid", "fact", "article"])
    articles = _parse_leec_map(record["article"])
    charges = _parse_leec_map(record.get("charge", {}))
    sentences = _parse_leec_map(record.get("sentence_months", {}))
    labels = []
    for suspect in sorted(articles):
        general, specific = split_articles(articles[suspect])
        labels.append(
            SuspectLabel(
                suspect_id=suspect,
                general=general,
                specific=specific,
                charge=str(charges.get(suspect, "")),
                sentence_months=_as_sentence(sentences.get(suspect)),
            )
        )
    general = frozenset().union(*(l.general for l in labels)) if labels else frozenset()
    specific = frozenset().union(*(l.specific for l in labels)) if labels else frozenset()
    sentence = labels[0].sentence_months if len(labels) == 1 else None
    suspects = tuple(record.get("suspects", [l.suspect_id for l in labels]))
    extras = tuple((k, record[k]) for k in ("qw", "reason", "result") if k in record)
    extras += tuple((k, v) for k, v in record.items() if k not in _LEEC_KEYS)
    return CaseRecord(
        case_id=str(record.get("case_id", f"leec-{record['pid']}")),
        suspect_ids=tuple(str(s) for s in suspects),
        narrative=str(record["fact"]),
        gold_general_articles=general,
        gold_specific_articles=specific,
        gold_sentence_months=sentence,
        suspect_labels=tuple(labels),
        extras=(("pid", record["pid"]),) + extras,
        **_extensions(record),
    )


def parse_case(record: Mapping[str, Any], schema: str) -> CaseRecord:
    """Parse one record of the given dataset schema into a :class:`CaseRecord`.

    For the perturbation schema the *perturbed* case is returned, keyed by
    ``perturbation_id``; use :func:`lexsolve.perturb.pair_from_record` for the
    full pair.
    """
    schema = _normalise_schema(schema)
    if schema == "LeCaRDv2":
        return _parse_case_dict(record)
    if schema == "LEEC":
        return _parse_leec(record)
    _require(record, "Perturbation", PERTURBATION_KEYS)
    perturbed = dict(record["perturbed_case"])
    perturbed.setdefault("case_id", record["perturbation_id"])
    perturbed.setdefault("template_type", record["template_type"])
    return _parse_case_dict(perturbed, "Perturbation")


def _sentence_out(value: int | str | None) -> int | str | None:
    return value


def case_to_dict(case: CaseRecord) -> dict[str, Any]:
    """Serialize in the LeCaRDv2 layout with structured extension keys."""
    out: dict[str, Any] = {"case_id": case.case_id}
    extras = dict(case.extras)
    if "filename" in extras:
        out["filename"] = extras.pop("filename")
    out["fact"] = case.narrative
    out["article"] = sorted(case.gold_articles)
    if "result" in extras:
        out["result"] = extras.pop("result")
    if case.gold_sentence_months is not None:
        out["true_sentence_months"] = _sentence_out(case.gold_sentence_months)
    out["true_general_articles"] = sorted(case.gold_general_articles)
    out["true_specific_articles"] = sorted(case.gold_specific_articles)
    _add_extensions(out, case)
    out.update(extras)
    return out


def _add_extensions(out: dict[str, Any], case: CaseRecord) -> None:
    out["suspects"] = list(case.suspect_ids)
    if case.facts:
        out["facts"] = [f.to_dict() for f in case.facts]
    if case.extra_legal:
        out["extra_legal"] = {a.name: a.value for a in case.extra_legal}
    if case.gold_clauses:
        out["true_clauses"] = [format_clause_id(c) for c in sorted(case.gold_clauses)]
    if case.template_type:
        out["template_type"] = case.template_type


def serialize_case(case: CaseRecord, schema: str = "LeCaRDv2") -> dict[str, Any]:
    schema = _normalise_schema(schema)
    if schema == "LeCaRDv2":
        return case_to_dict(case)
    if schema == "LEEC":
        extras = dict(case.extras)
        out: dict[str, Any] = {"case_id": case.case_id, "pid": extras.pop("pid", case.case_id)}
        for key in ("qw",):
            if key in extras:
                out[key] = extras.pop(key)
        out["fact"] = case.narrative
        for key in ("reason", "result"):
            if key in extras:
                out[key] = extras.pop(key)
        labels = case.suspect_labels
        out["charge"] = {l.suspect_id: l.charge for l in labels}
        out["article"] = {l.suspect_id: sorted(l.general | l.specific) for l in labels}
        sentences = {l.suspect_id: l.sentence_months for l in labels if l.sentence_months is not None}
        if sentences:
            out["sentence_months"] = sentences
        _add_extensions(out, case)
        out.update(extras)
        return out
    raise ValueError("perturbation records are serialized per pair; see lexsolve.perturb.pair_to_record")


def split_suspects(case: CaseRecord) -> list[CaseRecord]:
    """One record per suspect, with that suspect's labels and facts."""
    if len(case.suspect_ids) <= 1:
        return [case]
    labels = {l.suspect_id: l for l in case.suspect_labels}
    out = []
    for suspect in case.suspect_ids:
        label = labels.get(suspect)
        out.append(
            replace(
                case,
                case_id=f"{case.case_id}#{suspect}",
                suspect_ids=(suspect,),
                facts=tuple(facts_for_suspect(case, suspect)),
                gold_general_articles=label.general if label else case.gold_general_articles,
                gold_specific_articles=label.specific if label else case.gold_specific_articles,
                gold_sentence_months=label.sentence_months if label else None,
                suspect_labels=(label,) if label else (),
            )
        )
    return out


def facts_for_suspect(case: CaseRecord, suspect: str) -> list[FactAtom]:
    """Facts about ``suspect``, its acts, the results they cause, and shared entities."""
    others = set(case.suspect_ids) - {suspect}
    own_acts = {
        f.value[0]
        for f in case.facts
        if f.predicate_name == "Act" and f.subject_id == suspect and isinstance(f.value, tuple)
    }
    other_acts = case.act_ids() - own_acts
    own_results = {
        f.value[1] for f in case.facts if f.predicate_name == "Causes" and isinstance(f.value, tuple) and f.value[0] in own_acts
    }
    out = []
    for f in case.facts:
        if f.subject_id in others or f.subject_id in other_acts:
            continue
        if f.predicate_name == "Causes" and isinstance(f.value, tuple) and f.value[0] not in own_acts:
            continue
        if f.subject_id in case.result_ids() and f.subject_id not in own_results and own_acts:
            continue
        out.append(f)
    return out


# ---------------------------------------------------------------- relations


def _material_view(case: CaseRecord) -> tuple:
    return (
        tuple(sorted(f.content_key() for f in case.facts)),
        case.gold_general_articles,
        case.gold_specific_articles,
        case.gold_sentence_months,
        case.gold_clauses,
        case.suspect_ids,
        tuple(sorted((l.suspect_id, l.general, l.specific, l.charge) for l in case.suspect_labels)),
    )


def extra_legal_equivalent(x: CaseRecord, x2: CaseRecord) -> bool:
    """True iff the two cases agree on everything except extra-legal attributes.

    Narrative text and source spans are provenance, not legal content, and are
    not compared.
    """
    return _material_view(x) == _material_view(x2)


def validate_case(x: CaseRecord, extra_legal_names: Iterable[str] = ()) -> list[str]:
    violations: list[str] = []
    for n in sorted(x.gold_general_articles & x.gold_specific_articles):
        violations.append(f"general/specific overlap: {n}")
    for n in sorted(x.gold_general_articles):
        if not is_general_article(n):
            violations.append(f"gold_general_articles: article {n} is not a general provision")
    for n in sorted(x.gold_specific_articles):
        if is_general_article(n):
            violations.append(f"gold_specific_articles: article {n} is not a specific provision")
    if isinstance(x.gold_sentence_months, int) and x.gold_sentence_months < 0:
        violations.append(f"gold_sentence_months: negative sentence {x.gold_sentence_months}")

    acts, results = x.act_ids(), x.result_ids()
    declared = set(x.suspect_ids) | acts | results | x.victim_ids()
    banned = set(extra_legal_names) | {a.name for a in x.extra_legal}
    for i, f in enumerate(x.facts):
        where = f"facts[{i}]"
        if f.predicate_name in banned:
            violations.append(f"{where}: extra-legal attribute used as fact predicate: {f.predicate_name}")
        if f.element_kind == "Amount" and (isinstance(f.value, bool) or not isinstance(f.value, int) or f.value < 0):
            violations.append(f"{where}: Amount must be a non-negative integer, got {f.value!r}")
        if f.element_kind == "Severity" and f.value not in SEVERITIES:
            violations.append(f"{where}: Severity value {f.value!r} not in {SEVERITIES}")
        if f.element_kind == "MentalState" and f.value not in MENTAL_STATES:
            violations.append(f"{where}: MentalState value {f.value!r} not in {MENTAL_STATES}")
        if f.predicate_name in ("Act", "Causes") and not (isinstance(f.value, tuple) and len(f.value) == 2):
            violations.append(f"{where}: {f.predicate_name} needs a pair of identifiers")
            continue
        if f.predicate_name == "Causes":
            act_id, result_id = f.value
            if act_id not in acts or result_id not in results:
                violations.append(f"dangling causation reference: {act_id} -> {result_id} ({where})")
                continue
        if f.subject_id not in declared:
            violations.append(f"{where}: subject {f.subject_id!r} is not a suspect or declared entity")
        if f.span is not None:
            a, b = f.span
            if not (0 <= a <= b <= len(x.narrative)):
                violations.append(f"{where}: span {f.span} outside narrative")
    return violations


# ---------------------------------------------------------------- io helpers


def dumps_record(record: Mapping[str, Any]) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=False, separators=(", ", ": "))


def replace_narrative_text(case: CaseRecord, old: str, new: str) -> CaseRecord:
    """Replace whole-word occurrences of ``old`` in the narrative, shifting fact spans."""
    if not old or old == new:
        return case
    pattern = re.compile(rf"(?<!\w){re.escape(old)}(?!\w)")
    matches = list(pattern.finditer(case.narrative))
    if not matches:
        return case
    delta = len(new) - len(old)

    def shift(pos: int) -> int:
        return pos + delta * sum(1 for m in matches if m.end() <= pos)

    narrative = pattern.sub(new, case.narrative)
    facts = tuple(
        replace(f, span=(shift(f.span[0]), shift(f.span[1]))) if f.span is not None else f for f in case.facts
    )
    return replace(case, narrative=narrative, facts=facts)
