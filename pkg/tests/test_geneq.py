from hypothesis import given
from hypothesis import strategies as st

from mwp_examples import CANDY, CANDY_EQ, MONEY, MONEY_EQ, PAGES, PAGES_EQ, PANTS, PANTS_EQ, UNIFORMS, UNIFORMS_EQ
from mwpforge.expr import canonical_key, parse_infix
from mwpforge.geneq import (
    DIFFERENT_UNITS,
    SAME_UNIT,
    SUB_EQUATION,
    gen_different_units,
    gen_same_unit,
    gen_sub_equations,
    generate_all,
)
from mwpforge.scenario import prepare_scenario


def run(text, eq):
    return {c.eq.source_text: c for c in generate_all(prepare_scenario(text), parse_infix(eq))}


def test_uniforms_candidates():
    out = run(UNIFORMS, UNIFORMS_EQ)
    picked = {k for k, c in out.items() if {SUB_EQUATION, DIFFERENT_UNITS} & set(c.strategies)}
    assert picked == {"x=15+10", "x=40*15", "x=40*10"}
    assert set(out) == {"x=15+10", "x=15-10", "x=10-15", "x=15/10", "x=10/15", "x=40*15", "x=40*10"}
    assert out["x=15+10"].strategies == (SUB_EQUATION, SAME_UNIT)


def test_candy_candidates_and_tags():
    out = run(CANDY, CANDY_EQ)
    assert set(out["x=14.6*4"].strategies) == {SUB_EQUATION, DIFFERENT_UNITS}
    assert set(out["x=29.8*2"].strategies) == {SUB_EQUATION, DIFFERENT_UNITS}
    assert out["x=29.8-14.6"].strategies == (SAME_UNIT,)
    assert out["x=14.6/29.8"].strategies == (SAME_UNIT,)


def test_pants_candidates():
    out = run(PANTS, PANTS_EQ)
    assert {"x=58+58*4", "x=58*4"} <= set(out)
    assert out["x=58+58*4"].strategy == SUB_EQUATION


def test_pages_candidates():
    doc = prepare_scenario(PAGES)
    assert gen_sub_equations(doc, parse_infix(PAGES_EQ)) == []
    out = run(PAGES, PAGES_EQ)
    assert {"x=180-150", "x=180/150"} <= set(out)
    assert "x=180+150" not in out


def test_money_candidates():
    out = run(MONEY, MONEY_EQ)
    assert {"x=458-447", "x=447-458", "x=458/447", "x=447/458"} <= set(out)


def test_same_unit_operand_orders():
    doc = prepare_scenario(UNIFORMS)
    got = [c.eq.source_text for c in gen_same_unit(doc)]
    assert got == ["x=15+10", "x=15-10", "x=10-15", "x=15/10", "x=10/15"]


def test_different_units_once_per_pair():
    got = [c.eq.source_text for c in gen_different_units(prepare_scenario(UNIFORMS))]
    assert got == ["x=40*15", "x=40*10"]


def test_single_number_has_no_pairs():
    doc = prepare_scenario("Tom has 5 apples.")
    assert gen_same_unit(doc) == [] and gen_different_units(doc) == []


def test_zero_divisor_still_emitted():
    doc = prepare_scenario("Tom has 0 apples and 4 apples.")
    assert "x=4/0" in [c.eq.source_text for c in gen_same_unit(doc)]


def test_provenance():
    out = run(UNIFORMS, UNIFORMS_EQ)
    # token 5 is "40", token 11 is "15"
    assert out["x=40*15"].provenance == {"mentions": [5, 11], "units": ["students", "dollars"]}
    assert out["x=15+10"].provenance == {"subtree": "+|15|10"}


units = st.sampled_from(["apples", "pears", "dollars"])


@given(st.lists(st.tuples(st.integers(1, 30), units), min_size=1, max_size=6))
def test_generate_all_invariants(mentions):
    text = " and ".join(f"{n} {u}" for n, u in mentions)
    doc = prepare_scenario(text)
    values = [str(n) for n, _ in mentions]
    original = parse_infix("x=" + "+".join(values))
    out = generate_all(doc, original)
    keys = [c.key for c in out]
    assert len(keys) == len(set(keys))
    assert canonical_key(original) not in keys
    by_unit = {}
    for _, u in mentions:
        by_unit[u] = by_unit.get(u, 0) + 1
    assert len(gen_same_unit(doc)) == sum(m * (m - 1) // 2 * 5 for m in by_unit.values())
