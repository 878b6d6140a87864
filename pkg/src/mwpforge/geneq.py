"""Heuristic generation of diverse candidate equations for one MWP."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

from .expr import BinOp, Equation, Num, canonical_key, sub_equations
from .scenario import NumberMention, ScenarioDoc

SUB_EQUATION = "sub-equation"
SAME_UNIT = "same unit"
DIFFERENT_UNITS = "different units"
STRATEGIES = (SUB_EQUATION, SAME_UNIT, DIFFERENT_UNITS)


@dataclass(frozen=True)
class CandidateEquation:
    eq: Equation
    strategy: str
    provenance: dict = field(default_factory=dict, compare=False)
    # every strategy that produced this equation; filled in by generate_all
    strategies: tuple[str, ...] = ()

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if not self.strategies:
            object.__setattr__(self, "strategies", (self.strategy,))

    @property
    def key(self) -> str:
        return canonical_key(self.eq)


def _pair_provenance(a: NumberMention, b: NumberMention) -> dict:
    return {"mentions": [a.token_index, b.token_index], "units": [a.unit, b.unit]}


def _binop(op: str, a: NumberMention, b: NumberMention) -> Equation:
    return Equation(BinOp(op, Num(a.value), Num(b.value)))


def gen_sub_equations(doc: ScenarioDoc, eq: Equation) -> list[CandidateEquation]:
    return [
        CandidateEquation(sub, SUB_EQUATION, {"subtree": canonical_key(sub)})
        for sub in sub_equations(eq)
    ]


def gen_same_unit(doc: ScenarioDoc) -> list[CandidateEquation]:
    out = []
    for a, b in combinations(doc.mentions, 2):
        if not a.unit or a.unit != b.unit:
            continue
        prov = _pair_provenance(a, b)
        for op, x, y in (("+", a, b), ("-", a, b), ("-", b, a), ("/", a, b), ("/", b, a)):
            out.append(CandidateEquation(_binop(op, x, y), SAME_UNIT, prov))
    return out


def gen_different_units(doc: ScenarioDoc) -> list[CandidateEquation]:
    out = []
    for a, b in combinations(doc.mentions, 2):
        if a.unit and b.unit and a.unit != b.unit:
            out.append(CandidateEquation(_binop("*", a, b), DIFFERENT_UNITS, _pair_provenance(a, b)))
    return out


def generate_all(doc: ScenarioDoc, original: Equation) -> list[CandidateEquation]:
    """Union of the three strategies, deduplicated, without the original equation.

    Order is stable: sub-equations, then same-unit, then different-units.
    A duplicate keeps its first occurrence and records the extra strategy.
    """
    original_key = canonical_key(original)
    merged: dict[str, CandidateEquation] = {}
    produced = gen_sub_equations(doc, original) + gen_same_unit(doc) + gen_different_units(doc)
    for cand in produced:
        key = cand.key
        if key == original_key:
            continue
        first = merged.get(key)
        if first is None:
            merged[key] = cand
        elif cand.strategy not in first.strategies:
            merged[key] = replace(first, strategies=first.strategies + (cand.strategy,))
    return list(merged.values())
