"""Ground decision procedure: satisfiability, minimal unsat cores, guard implication.

After encoding, a clause problem is a set of Boolean atoms plus one integer
variable ``y`` (months) with interval bounds.  Every constraint carries a
source id; a subset of ids is satisfiable when some value of each freed
predicate makes the active guards true while the active bounds leave room
for ``y``.  Removing a fact frees its predicate; removing a guard or bound
drops the requirement.
"""

from __future__ import annotations

import enum
import itertools
import json
import logging
import shlex
import subprocess
from dataclasses import dataclass
from typing import Any, Iterable, Protocol, Sequence, Union

from lexsolve.compiler import EXISTS, MISSING, GroundProblem, exists_key, find_conflicts
from lexsolve.errors import NotUnsat, ServiceError
from lexsolve.kb.guards import Atom, Exists, GuardExpr, atom_truth, decision_atoms, evaluate, literals, to_text
from lexsolve.kb.model import ExclusivityGroup, PenaltySpec

log = logging.getLogger(__name__)

SAT = "Sat"
UNSAT = "Unsat"

CORE_KINDS = ("ConflictingFacts", "MissingElement", "IncompatibleGuards", "EmptyPenaltyInterval")
DEFAULT_ATOM_CAP = 16


@dataclass(frozen=True)
class UnsatCore:
    members: frozenset[str]
    kind: str
    clause_id: tuple[int, int] | None = None

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {}
        if self.clause_id is not None:
            out["clause_id"] = f"{self.clause_id[0]}.{self.clause_id[1]}"
        out["kind"] = self.kind
        out["members"] = sorted(self.members)
        return out


@dataclass(frozen=True)
class SolveResult:
    status: str
    model: int | None = None
    satisfied_interval: PenaltySpec | None = None
    core: UnsatCore | None = None

    @property
    def is_sat(self) -> bool:
        return self.status == SAT


class Implication(str, enum.Enum):
    IMPLIES = "Implies"
    NOT_IMPLIES = "NotImplies"
    UNDECIDED = "Undecided"


# ---------------------------------------------------------------- atom-level consistency


def _numeric_feasible(items: Sequence[tuple[Atom, bool]]) -> bool:
    lo, hi = 0, None
    eq: set[int] = set()
    neq: set[int] = set()

    def cap(bound):
        nonlocal hi
        hi = bound if hi is None else min(hi, bound)

    for atom, truth in items:
        theta, op = atom.value, atom.op
        if op == "=":
            (eq if truth else neq).add(theta)
        elif (op, truth) in (("<", True), (">=", False)):
            cap(theta - 1)
        elif (op, truth) in (("<=", True), (">", False)):
            cap(theta)
        elif (op, truth) in ((">", True), ("<=", False)):
            lo = max(lo, theta + 1)
        else:  # (">=", True) or ("<", False)
            lo = max(lo, theta)
    if len(eq) > 1:
        return False
    if eq:
        x = next(iter(eq))
        return x >= lo and (hi is None or x <= hi) and x not in neq
    if hi is None:
        return True
    if hi < lo:
        return False
    blocked = sum(1 for v in neq if lo <= v <= hi)
    return hi - lo + 1 > blocked


def consistent(assignment: dict, exclusivity: Iterable[ExclusivityGroup] = ()) -> bool:
    """Whether a truth assignment to atoms is realisable by some world.

    Boolean atoms of one predicate must agree on its value; integer atoms
    must admit a common non-negative value; token atoms must respect the
    exclusivity groups.  Existential nodes are
    treated as independent Boolean atoms.
    """
    numeric: dict[str, list[tuple[Atom, bool]]] = {}
    tokens_true: dict[str, set[str]] = {}
    flags: dict[str, bool] = {}
    for atom, truth in assignment.items():
        if not isinstance(atom, Atom):
            continue
        if isinstance(atom.value, bool):
            # p = true and p = false are complementary
            held = atom.value if truth else not atom.value
            if flags.setdefault(atom.predicate, held) != held:
                return False
            continue
        if isinstance(atom.value, int):
            numeric.setdefault(atom.predicate, []).append((atom, truth))
        elif truth:
            tokens_true.setdefault(atom.predicate, set()).add(atom.value)
    for items in numeric.values():
        if not _numeric_feasible(items):
            return False
    for group in exclusivity:
        held = tokens_true.get(group.predicate)
        if held and len(held & set(group.values)) > 1:
            return False
    return True


def _assignments(atoms: Sequence, exclusivity):
    for bits in itertools.product((False, True), repeat=len(atoms)):
        assignment = dict(zip(atoms, bits))
        if consistent(assignment, exclusivity):
            yield assignment


def find_counterexample(
    g1: GuardExpr,
    g2: GuardExpr,
    exclusivity: Iterable[ExclusivityGroup] = (),
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> Union[dict, None, str]:
    """An assignment making ``g1`` true and ``g2`` false, ``None`` if there is
    none, or ``"undecided"`` when the atom count exceeds ``atom_cap``."""
    exclusivity = tuple(exclusivity)
    atoms = list(dict.fromkeys(decision_atoms(g1) + decision_atoms(g2)))
    if len(atoms) > atom_cap:
        return "undecided"
    for assignment in _assignments(atoms, exclusivity):
        if evaluate(g1, assignment.get) is True and evaluate(g2, assignment.get) is False:
            return assignment
    return None


def implies(
    g1: GuardExpr,
    g2: GuardExpr,
    exclusivity: Iterable[ExclusivityGroup] = (),
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> Implication:
    found = find_counterexample(g1, g2, exclusivity, atom_cap)
    if found == "undecided":
        return Implication.UNDECIDED
    return Implication.IMPLIES if found is None else Implication.NOT_IMPLIES


def syntactically_subsumes(g1: GuardExpr, g2: GuardExpr) -> bool:
    """``g2``'s literals are a subset of ``g1``'s, polarity included."""
    return literals(g2) <= literals(g1)


def guard_satisfiable(
    expr: GuardExpr, exclusivity: Iterable[ExclusivityGroup] = (), atom_cap: int = 24
) -> bool | None:
    """Some consistent assignment makes ``expr`` true; ``None`` past the cap."""
    exclusivity = tuple(exclusivity)
    atoms = decision_atoms(expr)
    if len(atoms) > atom_cap:
        return None
    return any(evaluate(expr, a.get) is True for a in _assignments(atoms, exclusivity))


# ---------------------------------------------------------------- subset satisfiability


def _bounds_window(problem: GroundProblem, active: frozenset[str]) -> tuple[int, int | None]:
    lower = 0
    upper = None
    agg = [b for b in problem.adjustment_constraints if b.kind == "aggravate" and b.cid in active]
    mit = [b for b in problem.adjustment_constraints if b.kind == "mitigate" and b.cid in active]
    for b in problem.penalty_constraints:
        if b.cid not in active:
            continue
        if b.kind == "penalty_lower":
            lower = max(lower, b.months)
        else:
            upper = b.months if upper is None else min(upper, b.months)
    if agg:
        lower = max(lower, problem.base_lower + sum(b.months for b in agg))
    base_upper = problem.base_upper
    if mit and base_upper is not None:
        bound = base_upper - sum(b.months for b in mit)
        upper = bound if upper is None else min(upper, bound)
    return lower, upper


def subset_satisfiable(
    problem: GroundProblem,
    active: Iterable[str],
    exclusivity: Iterable[ExclusivityGroup] = (),
) -> tuple[bool, int | None]:
    """Satisfiability of the constraints named in ``active``; returns the
    lowest admissible ``y`` as witness (``None`` for label-only clauses)."""
    active = frozenset(active)
    exclusivity = tuple(exclusivity)

    fixed: dict[str, list[Any]] = {}
    unknown: set[str] = set()
    exists_fixed: dict[str, Any] = {}
    mentioned: set[str] = set()
    for f in problem.facts:
        mentioned.add(f.predicate)
        if f.cid not in active:
            continue
        if f.origin == EXISTS:
            exists_fixed[f.predicate] = f.value
        elif f.origin == MISSING:
            unknown.add(f.predicate)
        else:
            fixed.setdefault(f.predicate, []).append(f.value)
    if find_conflicts(fixed, exclusivity):
        return False, None

    guards = [g.expr for g in problem.guards if g.cid in active]

    def is_fixed(node) -> bool:
        if isinstance(node, Exists):
            return exists_key(node) in exists_fixed
        return node.predicate in fixed or node.predicate in unknown

    free = []
    for g in guards:
        for node in decision_atoms(g):
            if not is_fixed(node) and node not in free:
                free.append(node)

    def fixed_value(node):
        if isinstance(node, Exists):
            return exists_fixed[exists_key(node)]
        if node.predicate in unknown and node.predicate not in fixed:
            return None
        return atom_truth(node, tuple(fixed[node.predicate]))

    guard_ok = False
    for assignment in _assignments(free, exclusivity):

        def lookup(node, assignment=assignment):
            if node in assignment:
                return assignment[node]
            return fixed_value(node)

        if all(evaluate(g, lookup) is True for g in guards):
            guard_ok = True
            break
    if not guard_ok:
        return False, None

    lower, upper = _bounds_window(problem, active)
    if upper is not None and lower > upper:
        return False, None
    if problem.base_penalty is None:
        return True, None
    return True, lower


# ---------------------------------------------------------------- backends


@dataclass(frozen=True)
class ConstraintSet:
    problem: GroundProblem
    active: frozenset[str]
    exclusivity: tuple[ExclusivityGroup, ...] = ()


@dataclass(frozen=True)
class Outcome:
    sat: bool
    model: int | None = None
    core: frozenset[str] | None = None


class SolverBackend(Protocol):
    def submit(self, request: ConstraintSet) -> Outcome: ...


class BuiltinBackend:
    """In-process evaluation; the default."""

    def submit(self, request: ConstraintSet) -> Outcome:
        ok, y = subset_satisfiable(request.problem, request.active, request.exclusivity)
        return Outcome(ok, y)


def render_request(request: ConstraintSet) -> str:
    """Line-oriented text form of a constraint set for an external solver.

    One constraint per line; JSON encodes values::

        var y int >= 0
        exclusive <predicate> <json list>
        fact <id> <predicate> <json value>
        missing <id> <predicate>
        exists <id> <json truth or null> <guard text>
        guard <id> <guard text>
        bound <id> <kind> <months> [base_lower] [base_upper or -]
        check

    The process answers ``sat <y|->`` or ``unsat <id> <id> ...``.
    """
    p = request.problem
    lines = ["var y int >= 0"]
    for g in request.exclusivity:
        lines.append(f"exclusive {g.predicate} {json.dumps(list(g.values))}")
    for f in p.facts:
        if f.cid not in request.active:
            continue
        if f.origin == MISSING:
            lines.append(f"missing {f.cid} {f.predicate}")
        elif f.origin == EXISTS:
            lines.append(f"exists {f.cid} {json.dumps(f.value)} {f.predicate}")
        else:
            lines.append(f"fact {f.cid} {f.predicate} {json.dumps(f.value)}")
    for g in p.guards:
        if g.cid in request.active:
            lines.append(f"guard {g.cid} {to_text(g.expr)}")
    base_upper = "-" if p.base_upper is None else str(p.base_upper)
    for b in p.bounds:
        if b.cid in request.active:
            lines.append(f"bound {b.cid} {b.kind} {b.months} {p.base_lower} {base_upper}")
    lines.append("check")
    return "\n".join(lines) + "\n"


def parse_reply(text: str) -> Outcome:
    parts = text.split()
    if not parts:
        raise ServiceError("empty reply from solver process")
    if parts[0] == "sat":
        y = None if len(parts) < 2 or parts[1] == "-" else int(parts[1])
        return Outcome(True, y)
    if parts[0] == "unsat":
        return Outcome(False, None, frozenset(parts[1:]) or None)
    raise ServiceError(f"unrecognised solver reply: {text.strip()[:80]}")


class SubprocessBackend:
    """Runs an external solver command once per request over stdin/stdout."""

    def __init__(self, command: str | Sequence[str], timeout: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout

    def submit(self, request: ConstraintSet) -> Outcome:
        try:
            proc = subprocess.run(
                self.command,
                input=render_request(request),
                capture_output=True,
                text=True,
                timeout=self.timeout,
                check=False,
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ServiceError(f"solver process failed: {exc}") from exc
        if proc.returncode != 0:
            raise ServiceError(f"solver process exited {proc.returncode}: {proc.stderr.strip()[:200]}")
        return parse_reply(proc.stdout)


BUILTIN = BuiltinBackend()


# ---------------------------------------------------------------- public operations


def classify_core(problem: GroundProblem, members: Iterable[str]) -> str:
    members = set(members)
    guard_ids = {g.cid for g in problem.guards}
    fact_ids = {f.cid for f in problem.facts}
    n_guards = len(members & guard_ids)
    if n_guards >= 2:
        return "IncompatibleGuards"
    if n_guards == 1:
        return "MissingElement"
    if members & fact_ids:
        return "ConflictingFacts"
    return "EmptyPenaltyInterval"


def _deletion_order(problem: GroundProblem) -> list[str]:
    # guards first so fact clashes surface as ConflictingFacts, then bounds, then facts
    return [g.cid for g in problem.guards] + [b.cid for b in problem.bounds] + [f.cid for f in problem.facts]


def unsat_core(
    problem: GroundProblem,
    exclusivity: Iterable[ExclusivityGroup] = (),
    backend: SolverBackend | None = None,
) -> UnsatCore:
    """Deletion-based minimal core: drop each constraint in turn, keep drops
    that leave the remainder unsatisfiable."""
    backend = backend or BUILTIN
    exclusivity = tuple(exclusivity)
    current = set(problem.constraint_ids)
    if backend.submit(ConstraintSet(problem, frozenset(current), exclusivity)).sat:
        raise NotUnsat(f"clause {problem.key} is satisfiable")
    for cid in _deletion_order(problem):
        trial = frozenset(current - {cid})
        if not backend.submit(ConstraintSet(problem, trial, exclusivity)).sat:
            current = set(trial)
    members = frozenset(current)
    return UnsatCore(members, classify_core(problem, members), problem.clause_id)


def check_sat(
    problem: GroundProblem,
    exclusivity: Iterable[ExclusivityGroup] = (),
    backend: SolverBackend | None = None,
) -> SolveResult:
    backend = backend or BUILTIN
    exclusivity = tuple(exclusivity)
    outcome = backend.submit(ConstraintSet(problem, frozenset(problem.constraint_ids), exclusivity))
    if outcome.sat:
        interval = problem.adjusted_penalty if isinstance(problem.adjusted_penalty, PenaltySpec) else None
        return SolveResult(SAT, outcome.model, interval)
    return SolveResult(UNSAT, core=unsat_core(problem, exclusivity, backend))
