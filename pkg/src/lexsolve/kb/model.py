"""Knowledge-base data types: articles, clauses, penalty intervals, adjustments."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Union

from lexsolve.case_model import DEATH, LIFE, format_clause_id, is_general_article
from lexsolve.errors import KBNotValidated
from lexsolve.kb.guards import TRUE, GuardExpr

UpperBound = Union[int, str]

# Demographic and procedural attributes that may never appear in a guard.
DEFAULT_EXTRA_LEGAL_NAMES = (
    "gender",
    "ethnicity",
    "wealth",
    "education",
    "household_registration",
    "occupation",
    "religion",
    "nationality",
    "court_level",
    "trial_publicity",
    "procedural_background",
    "defender_attributes",
    "victim_gender",
    "victim_ethnicity",
    "victim_wealth",
    "region",
)

_TOKEN_RANK = {LIFE: 1, DEATH: 2}


def upper_sort_key(upper: UpperBound) -> tuple[int, int]:
    """Finite months sort below Life, which sorts below Death."""
    if isinstance(upper, str):
        return (1, _TOKEN_RANK[upper])
    return (0, upper)


@dataclass(frozen=True)
class PenaltySpec:
    lower_months: int
    upper_months: UpperBound
    lower_strict: bool = False
    upper_strict: bool = False

    @property
    def effective_lower(self) -> int:
        """Smallest admissible whole month."""
        return self.lower_months + (1 if self.lower_strict else 0)

    @property
    def effective_upper(self) -> int | None:
        """Largest admissible whole month; ``None`` when the top is Life/Death."""
        if isinstance(self.upper_months, str):
            return None
        return self.upper_months - (1 if self.upper_strict else 0)

    @property
    def is_empty(self) -> bool:
        hi = self.effective_upper
        return hi is not None and self.effective_lower > hi

    def contains(self, months: int) -> bool:
        hi = self.effective_upper
        return months >= self.effective_lower and (hi is None or months <= hi)

    def to_text(self) -> str:
        left = "(" if self.lower_strict else "["
        right = ")" if self.upper_strict else "]"
        return f"{left}{self.lower_months}, {self.upper_months}{right}"

    def to_dict(self) -> dict[str, Any]:
        return {
            "lower_months": self.lower_months,
            "upper_months": self.upper_months,
            "lower_strict": self.lower_strict,
            "upper_strict": self.upper_strict,
        }


@dataclass(frozen=True)
class AdjustmentDelta:
    trigger: GuardExpr
    direction: str  # "RaiseLower" | "LowerUpper"
    delta_months: int
    name: str = ""

    @property
    def is_aggravator(self) -> bool:
        return self.direction == "RaiseLower"


@dataclass(frozen=True)
class Clause:
    clause_id: tuple[int, int]
    guard: GuardExpr = TRUE
    penalty: PenaltySpec | None = None
    adjustments: tuple[AdjustmentDelta, ...] = ()
    consequence_label: str = ""
    priority: int | None = None

    @property
    def key(self) -> str:
        return format_clause_id(self.clause_id)

    @property
    def aggravators(self) -> tuple[AdjustmentDelta, ...]:
        return tuple(a for a in self.adjustments if a.is_aggravator)

    @property
    def mitigators(self) -> tuple[AdjustmentDelta, ...]:
        return tuple(a for a in self.adjustments if not a.is_aggravator)


@dataclass(frozen=True)
class StatuteArticle:
    article_no: int
    article_guard: GuardExpr = TRUE
    clauses: tuple[Clause, ...] = ()
    field_defaults: tuple[tuple[str, Any], ...] = ()
    label: str = ""

    @property
    def is_general(self) -> bool:
        return is_general_article(self.article_no)

    def defaults(self) -> dict[str, Any]:
        return dict(self.field_defaults)


@dataclass(frozen=True)
class ExclusivityGroup:
    """At most one of ``values`` may hold for ``predicate``."""

    predicate: str
    values: tuple[str, ...]


@dataclass
class StatuteKB:
    articles: dict[int, StatuteArticle] = field(default_factory=dict)
    exclusivity_axioms: tuple[ExclusivityGroup, ...] = ()
    extra_legal_names: tuple[str, ...] = DEFAULT_EXTRA_LEGAL_NAMES
    validated: bool = False

    def clauses(self) -> Iterable[tuple[StatuteArticle, Clause]]:
        for no in sorted(self.articles):
            art = self.articles[no]
            for clause in art.clauses:
                yield art, clause

    def clause(self, clause_id: tuple[int, int]) -> Clause:
        for c in self.articles[clause_id[0]].clauses:
            if c.clause_id == clause_id:
                return c
        raise KeyError(clause_id)


class ConstraintList(list):
    """Search result: (article, clause) pairs plus the candidates the KB lacks."""

    def __init__(self, pairs=(), unknown_articles=()):
        super().__init__(pairs)
        self.unknown_articles = tuple(sorted(unknown_articles))


def search_constraints(candidates: Iterable[int], kb: StatuteKB) -> ConstraintList:
    """All clauses of every candidate article present in ``kb``."""
    if not kb.validated:
        raise KBNotValidated("knowledge base must pass validate_kb before use")
    wanted = sorted({int(c) for c in candidates})
    pairs = []
    unknown = []
    for no in wanted:
        art = kb.articles.get(no)
        if art is None:
            unknown.append(no)
            continue
        pairs.extend((art, clause) for clause in art.clauses)
    return ConstraintList(pairs, unknown)
