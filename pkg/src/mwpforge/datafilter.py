"""Answer-equivalence filtering of candidate MWPs against an expert solver.

A candidate passes when its equation's answer equals the answer of one of
the expert's top-k equations. Equations are compared by value, never by form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from .expr import BinOp, DivisionByZero, Equation, Num, canonical_key, evaluate, parse_infix
from .scenario import ScenarioDoc

DEFAULT_K = 5
REL_TOL = 1e-6


def answers_match(a: float, b: float) -> bool:
    return abs(a - b) <= REL_TOL * max(1.0, abs(a), abs(b))


class ExpertSolver(Protocol):
    concurrent_safe: bool

    def solve(self, scenario: str, question: str, k: int) -> list[Equation]:
        """Up to ``k`` equations, best first."""


@dataclass
class FilterDecision:
    accepted: bool
    candidate_answer: float | None
    matched_rank: int | None
    expert_answers: list[float]
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "candidate_answer": self.candidate_answer if self.error is None else "error",
            "matched_rank": self.matched_rank,
            "expert_answers": self.expert_answers,
            "error": self.error,
        }


def filter_one(scenario: str, question: str, eq: Equation, expert: ExpertSolver, k: int = DEFAULT_K) -> FilterDecision:
    if k < 1:
        raise ValueError("k must be at least 1")
    try:
        answer = evaluate(eq)
    except DivisionByZero as exc:
        return FilterDecision(False, None, None, [], error=str(exc))
    expert_answers = []
    for predicted in expert.solve(scenario, question, k)[:k]:
        try:
            expert_answers.append(evaluate(predicted))
        except DivisionByZero:
            continue
    for rank, other in enumerate(expert_answers):
        if answers_match(answer, other):
            return FilterDecision(True, answer, rank, expert_answers)
    return FilterDecision(False, answer, None, expert_answers)


# -- experts ------------------------------------------------------------------


def _trees(leaves: Sequence[Num], ops: int):
    """All binary trees with exactly ``ops`` operators over the leaves in the given order."""
    if ops == 0:
        yield leaves[0]
        return
    for left_ops in range(ops):
        right_ops = ops - 1 - left_ops
        for left in _trees(leaves[: left_ops + 1], left_ops):
            for right in _trees(leaves[left_ops + 1 :], right_ops):
                for op in ("+", "-", "*", "/"):
                    yield BinOp(op, left, right)


def enumerate_expressions(values: Sequence, ops: int):
    """Every expression with exactly ``ops`` operators using each value at most once."""
    leaves = [Num(v) for v in values]
    for chosen in permutations(range(len(leaves)), ops + 1):
        yield from _trees([leaves[i] for i in chosen], ops)


@dataclass
class EnumerativeExpert:
    """Brute-force stand-in for a neural solver.

    Ranks expressions over the scenario's numbers by operator count, then
    canonical key, and returns the first ``k`` with distinct answers.
    The question text is ignored.
    """

    doc: ScenarioDoc
    max_ops: int = 3
    concurrent_safe: bool = True

    def solve(self, scenario: str, question: str, k: int) -> list[Equation]:
        values = [m.value for m in self.doc.mentions]
        found: list[Equation] = []
        answers: list[float] = []
        for ops in range(min(self.max_ops, len(values) - 1) + 1):
            level = {canonical_key(t): t for t in enumerate_expressions(values, ops)}
            for key in sorted(level):
                try:
                    value = evaluate(level[key])
                except DivisionByZero:
                    continue
                if any(answers_match(value, a) for a in answers):
                    continue
                answers.append(value)
                found.append(Equation(level[key]))
                if len(found) >= k:
                    return found
        return found


def enumerative_expert(doc: ScenarioDoc, max_ops: int = 3) -> EnumerativeExpert:
    return EnumerativeExpert(doc, max_ops)


def question_key(question: str) -> str:
    return " ".join(question.split())


@dataclass
class OracleExpert:
    """Scripted answers keyed by question text; unknown questions get nothing."""

    table: dict[str, list[Equation]] = field(default_factory=dict)
    concurrent_safe: bool = True

    def solve(self, scenario: str, question: str, k: int) -> list[Equation]:
        out = []
        for eq in self.table.get(question_key(question), []):
            try:
                evaluate(eq)
            except DivisionByZero:
                continue
            out.append(eq)
            if len(out) >= k:
                break
        return out


def oracle_expert(table: dict) -> OracleExpert:
    parsed = {}
    for question, eqs in table.items():
        parsed[question_key(question)] = [e if isinstance(e, Equation) else parse_infix(e) for e in eqs]
    return OracleExpert(parsed)


def load_oracle(path) -> OracleExpert:
    """JSON object mapping question text to a ranked list of equation strings."""
    return oracle_expert(json.loads(Path(path).read_text(encoding="utf-8")))


# -- k sweep ------------------------------------------------------------------


def sweep_k(corpus: Iterable[tuple[str, str, Equation]], expert, k_range: Iterable[int]) -> dict[int, dict[str, int]]:
    """Accepted/rejected tallies per k.

    ``expert`` is either one solver or a callable mapping a scenario string to
    a solver (as with the enumerative expert, which is bound to a scenario).
    """
    ks = list(k_range)
    if not ks:
        raise ValueError("k_range is empty")
    corpus = list(corpus)
    tallies = {k: {"accepted": 0, "rejected": 0} for k in ks}
    for scenario, question, eq in corpus:
        solver = expert(scenario) if callable(expert) and not hasattr(expert, "solve") else expert
        for k in ks:
            decision = filter_one(scenario, question, eq, solver, k)
            tallies[k]["accepted" if decision.accepted else "rejected"] += 1
    return tallies
