from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mwp_examples import CANDY, PANTS, UNIFORMS
from mwpforge.expr import parse_infix
from mwpforge.scenario import EmptyScenario, align_numbers, lex_scenario, prepare_scenario


def values(doc):
    return [m.value for m in doc.mentions]


def test_uniform_mentions():
    doc = lex_scenario(UNIFORMS)
    assert values(doc) == [Decimal(40), Decimal(15), Decimal(10)]
    for m in doc.mentions:
        assert Decimal(doc.tokens[m.token_index]) == m.value
        assert doc.surface(m) == doc.tokens[m.token_index]


def test_no_numbers():
    assert lex_scenario("no numbers here").mentions == ()


def test_candy_phrase():
    assert values(lex_scenario("buy 4 boxes of candy and 2 boxes of cookies")) == [4, 2]


def test_empty_scenario():
    with pytest.raises(EmptyScenario):
        lex_scenario("   ")


def test_decimal_surface_kept():
    doc = lex_scenario(CANDY)
    assert values(doc) == [Decimal("14.60"), Decimal("29.80"), 4, 2]
    assert doc.surface(doc.mentions[0]) == "14.60"


def test_mention_ordinals():
    doc = lex_scenario("3 apples and 3 pears and 5 plums and 3 figs")
    assert [m.mention_ordinal for m in doc.mentions] == [0, 1, 0, 2]


def test_units():
    doc = prepare_scenario(UNIFORMS)
    assert [m.unit for m in doc.mentions] == ["students", "dollars", "dollars"]
    assert prepare_scenario("increase by 3").mentions[0].unit == ""
    assert [m.unit for m in prepare_scenario(CANDY).mentions] == ["dollars", "dollars", "boxes", "boxes"]


def test_unit_stop_words_are_configurable():
    doc = prepare_scenario("costs 15 dollars", stop_words={"dollars"})
    assert doc.mentions[0].unit == ""


def test_unit_window_is_two_tokens():
    assert prepare_scenario("3 of the apples").mentions[0].unit == ""
    assert prepare_scenario("3 big apples").mentions[0].unit == "big"


def test_align_simple():
    doc = prepare_scenario(UNIFORMS)
    al = align_numbers(doc, parse_infix("x=15+10"))
    assert {i: m.value for i, m in al.pairs.items()} == {1: 15, 2: 10}
    assert al.unmatched == ()


def test_align_saturates_repeated_values():
    doc = prepare_scenario(PANTS)
    al = align_numbers(doc, parse_infix("x=58+58*4"))
    fifty_eight = [m for m in doc.mentions if m.value == 58]
    assert len(fifty_eight) == 1
    assert al.pairs[1] is fifty_eight[0] and al.pairs[3] is fifty_eight[0]


def test_align_left_to_right():
    doc = prepare_scenario("3 apples and 3 pears")
    al = align_numbers(doc, parse_infix("x=3+3*3"))
    assert [al.pairs[i].token_index for i in (1, 3, 4)] == [0, 3, 3]


def test_align_unmatched():
    al = align_numbers(prepare_scenario(UNIFORMS), parse_infix("x=100*2"))
    assert al.pairs == {}
    assert al.unmatched_values == {Decimal(100), Decimal(2)}


words = st.sampled_from(["apples", "cost", "dollars", "per", "box", "the", ",", ".", "Tom", "of"])
nums = st.one_of(st.integers(0, 500).map(str), st.tuples(st.integers(0, 99), st.integers(0, 99)).map(lambda t: f"{t[0]}.{t[1]}"))


@given(st.lists(st.one_of(words, nums), min_size=1, max_size=25))
def test_lex_idempotent_and_mentions_ordered(toks):
    doc = lex_scenario(" ".join(toks))
    again = lex_scenario(doc.rendered())
    assert again.tokens == doc.tokens
    assert values(again) == values(doc)
    idx = [m.token_index for m in doc.mentions]
    assert idx == sorted(set(idx))
    seen = {}
    for m in doc.mentions:
        assert m.mention_ordinal == seen.get(m.value, 0)
        seen[m.value] = m.mention_ordinal + 1
