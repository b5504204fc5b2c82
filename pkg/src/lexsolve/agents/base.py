"""Argument tuples, extractor configuration, merging and cluster expansion."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib.resources import files
from typing import Any, Iterable, Mapping

from lexsolve.case_model import FactAtom
from lexsolve.compiler import find_conflicts
from lexsolve.kb.model import ExclusivityGroup

PROSECUTOR = "Prosecutor"
DEFENSE = "Defense"
ROLES = (PROSECUTOR, DEFENSE)

DETERMINISTIC = "Deterministic"
EXTERNAL = "External"


@dataclass(frozen=True)
class ArgumentTuple:
    role: str
    facts: tuple[FactAtom, ...] = ()
    candidate_general: frozenset[int] = frozenset()
    candidate_specific: frozenset[int] = frozenset()

    @property
    def candidates(self) -> frozenset[int]:
        return self.candidate_general | self.candidate_specific

    def to_dict(self) -> dict[str, Any]:
        return {
            "role": self.role,
            "general_articles": sorted(self.candidate_general),
            "specific_articles": sorted(self.candidate_specific),
            "facts": [f.to_dict() for f in self.facts],
        }


@dataclass(frozen=True)
class ExtractorConfig:
    backend: str = DETERMINISTIC
    endpoint_url: str = ""
    model_name: str = ""
    api_key_env_var: str = "LEXSOLVE_API_KEY"
    prompt_template_id: str = "statute_selector"
    timeout_seconds: float = 60.0
    max_retries: int = 2
    max_in_flight: int = 4
    temperature: float = 0.0

    def __post_init__(self):
        if self.backend not in (DETERMINISTIC, EXTERNAL):
            raise ValueError(f"unknown extractor backend {self.backend!r}")
        if self.backend == EXTERNAL and not (self.endpoint_url and self.api_key_env_var):
            raise ValueError("external backend needs endpoint_url and api_key_env_var")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")


@dataclass(frozen=True)
class MergedArguments:
    facts: tuple[FactAtom, ...]
    candidates: frozenset[int]
    conflicts: tuple[tuple[FactAtom, FactAtom], ...] = ()


def merge_arguments(
    p: ArgumentTuple, d: ArgumentTuple, exclusivity: Iterable[ExclusivityGroup] = ()
) -> MergedArguments:
    """Union of both sides' facts and candidates; clashing fact pairs are listed, not resolved."""
    facts: list[FactAtom] = []
    seen = set()
    for f in p.facts + d.facts:
        key = f.content_key()
        if key not in seen:
            seen.add(key)
            facts.append(f)
    groups = tuple(exclusivity)
    conflicts = []
    by_subject: dict[tuple[str, str], list[FactAtom]] = {}
    for f in facts:
        by_subject.setdefault((f.subject_id, f.predicate_name), []).append(f)
    for (_, pred), group in sorted(by_subject.items()):
        if len(group) < 2:
            continue
        clashes = find_conflicts({pred: [f.value for f in group]}, groups)
        if not clashes:
            continue
        bad = set(clashes[0][1])
        members = [f for f in group if f.value in bad]
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                if members[i].value != members[j].value:
                    conflicts.append((members[i], members[j]))
    return MergedArguments(tuple(facts), p.candidates | d.candidates, tuple(conflicts))


@dataclass(frozen=True)
class Cluster:
    name: str
    members: frozenset[int]


def load_clusters(source: str | Mapping[str, Any] | None = None) -> tuple[Cluster, ...]:
    """Read a cluster table; ``None`` loads the bundled one.

    Accepts ``{"clusters": [{"name": ..., "articles": [...]}, ...]}``.
    """
    if source is None:
        data = json.loads(files("lexsolve").joinpath("data/clusters.json").read_text(encoding="utf-8"))
    elif isinstance(source, str):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source
    return tuple(Cluster(c["name"], frozenset(int(a) for a in c["articles"])) for c in data["clusters"])


def cluster_debate(candidates: Iterable[int], clusters: Iterable[Cluster]) -> set[int]:
    """Add every member of each cluster touched by a candidate; never removes."""
    out = set(candidates)
    for c in clusters:
        if out & c.members:
            out |= c.members
    return out
