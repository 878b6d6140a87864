"""Scenario tokenization, number mentions, units, and equation alignment."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field, replace
from decimal import Decimal

from .expr import Equation, Num, iter_pre_order

DEFAULT_STOP_WORDS = frozenset({"per", "of", "a", "an", "the", "and"})
UNIT_WINDOW = 2

_TOKEN_RE = re.compile(r"\d+(?:\.\d+)?|[A-Za-z]+(?:'[A-Za-z]+)?|[^\sA-Za-z\d]")
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")


class EmptyScenario(ValueError):
    pass


@dataclass(frozen=True)
class NumberMention:
    value: Decimal
    token_index: int
    char_span: tuple[int, int]
    mention_ordinal: int
    unit: str = ""


@dataclass(frozen=True)
class ScenarioDoc:
    text: str
    tokens: tuple[str, ...]
    mentions: tuple[NumberMention, ...]

    def surface(self, mention: NumberMention) -> str:
        start, end = mention.char_span
        return self.text[start:end]

    def rendered(self) -> str:
        return " ".join(self.tokens)


def is_number_token(token: str) -> bool:
    return _NUMBER_RE.fullmatch(token) is not None


def lex_scenario(text: str) -> ScenarioDoc:
    if not text or not text.strip():
        raise EmptyScenario("scenario text is empty")
    tokens = []
    mentions = []
    ordinals: dict[Decimal, int] = defaultdict(int)
    for m in _TOKEN_RE.finditer(text):
        tok = m.group()
        if is_number_token(tok):
            value = Decimal(tok)
            mentions.append(
                NumberMention(
                    value=value,
                    token_index=len(tokens),
                    char_span=(m.start(), m.end()),
                    mention_ordinal=ordinals[value],
                )
            )
            ordinals[value] += 1
        tokens.append(tok)
    return ScenarioDoc(text=text, tokens=tuple(tokens), mentions=tuple(mentions))


def _is_noun_like(token: str) -> bool:
    return token[0].isalpha()


def assign_units(doc: ScenarioDoc, stop_words=DEFAULT_STOP_WORDS) -> ScenarioDoc:
    """Attach to each mention the first noun-like token within two tokens after it."""
    mentions = []
    for mention in doc.mentions:
        unit = ""
        window = doc.tokens[mention.token_index + 1 : mention.token_index + 1 + UNIT_WINDOW]
        for tok in window:
            low = tok.lower()
            if low in stop_words:
                continue
            if _is_noun_like(tok):
                unit = low
                break
        mentions.append(replace(mention, unit=unit))
    return replace(doc, mentions=tuple(mentions))


def prepare_scenario(text: str, stop_words=DEFAULT_STOP_WORDS) -> ScenarioDoc:
    return assign_units(lex_scenario(text), stop_words)


@dataclass(frozen=True)
class Alignment:
    """Equation number nodes (by pre-order index) mapped to scenario mentions."""

    pairs: dict[int, NumberMention] = field(default_factory=dict)
    unmatched: tuple[tuple[int, Decimal], ...] = ()

    @property
    def unmatched_values(self) -> set[Decimal]:
        return {v for _, v in self.unmatched}

    def mention_index(self, doc: ScenarioDoc, node_index: int) -> int:
        return doc.mentions.index(self.pairs[node_index])


def align_numbers(doc: ScenarioDoc, eq: Equation) -> Alignment:
    by_value: dict[Decimal, list[NumberMention]] = defaultdict(list)
    for mention in doc.mentions:
        by_value[mention.value].append(mention)
    seen: dict[Decimal, int] = defaultdict(int)
    pairs = {}
    unmatched = []
    for idx, node in enumerate(iter_pre_order(eq.rhs)):
        if not isinstance(node, Num):
            continue
        candidates = by_value.get(node.value)
        if not candidates:
            unmatched.append((idx, node.value))
            continue
        # i-th occurrence in the equation takes the i-th mention, saturating
        ordinal = min(seen[node.value], len(candidates) - 1)
        seen[node.value] += 1
        pairs[idx] = candidates[ordinal]
    return Alignment(pairs=pairs, unmatched=tuple(unmatched))
