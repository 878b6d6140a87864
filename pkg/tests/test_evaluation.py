import json
import random
import sys

import pytest

from mwp_examples import UNIFORMS, UNIFORMS_GROUP
from mwpforge.evaluation import (
    EquationError,
    SchemaError,
    SolverProtocolError,
    accuracy,
    deq_accuracy,
    evaluate_predictions,
    group_accuracy,
    group_from_dict,
    load_dataset,
    load_predictions,
    parse_prediction,
    run_solver,
    save_dataset,
    solver_predictions,
)
from mwpforge.expr import canonical_key


def write_lines(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))
    return path


def uniforms():
    return group_from_dict(UNIFORMS_GROUP)


def preds(mapping):
    return {key: parse_prediction(text) for key, text in mapping.items()}


def test_load_uniforms_group(tmp_path):
    groups = load_dataset(write_lines(tmp_path / "d.jsonl", [UNIFORMS_GROUP]))
    assert [it.answer for it in groups[0].items] == [25, 600, 400]


def test_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dataset(path) == []


def test_malformed_equation_names_item(tmp_path):
    bad = dict(UNIFORMS_GROUP, items=[{"question": "q", "equation": "x=1"}, {"question": "q", "equation": "x=(1+"}])
    with pytest.raises(EquationError, match="item 1"):
        load_dataset(write_lines(tmp_path / "d.jsonl", [bad]))


def test_schema_errors_carry_line_number(tmp_path):
    path = tmp_path / "d.jsonl"
    path.write_text(json.dumps(UNIFORMS_GROUP) + "\n{not json\n")
    with pytest.raises(SchemaError, match=":2"):
        load_dataset(path)
    with pytest.raises(SchemaError, match="items"):
        load_dataset(write_lines(path, [{"group_id": 1, "scenario": "s"}]))


def test_round_trip_keeps_canonical_keys(tmp_path):
    groups = [uniforms(), group_from_dict({"group_id": 2, "scenario": "s", "items": [
        {"question": "q", "equation": "x=(14.6*4)+(29.8*2)"}]})]
    path = tmp_path / "d.jsonl"
    save_dataset(path, groups)
    again = load_dataset(path)
    keys = lambda gs: [[canonical_key(it.equation) for it in g.items] for g in gs]
    assert keys(again) == keys(groups)
    first = path.read_bytes()
    save_dataset(path, again)
    assert path.read_bytes() == first


def test_accuracy_examples():
    g = [uniforms()]
    gold = {("uniforms", i): it.equation for i, it in enumerate(g[0].items)}
    assert accuracy(g, gold) == 1.0 and group_accuracy(g, gold) == 1.0
    swapped = preds({("uniforms", 0): "x=10+15", ("uniforms", 1): "x=15*40", ("uniforms", 2): "x=40*10"})
    assert accuracy(g, swapped) == 1.0
    two = preds({("uniforms", 0): "x=15+10", ("uniforms", 1): "x=40*15", ("uniforms", 2): "x=40+10"})
    assert accuracy(g, two) == pytest.approx(2 / 3)
    assert group_accuracy(g, two) == 0.0


def test_missing_and_unparseable_predictions_are_wrong():
    g = [uniforms()]
    p = preds({("uniforms", 0): "x=15+10", ("uniforms", 1): "garbage"})
    assert accuracy(g, p) == pytest.approx(1 / 3)
    assert accuracy(g, preds({("uniforms", 0): "x=1/0"})) == 0.0


def ten_group_fixture():
    groups, p = [], {}
    correct_per_group = [3, 3, 2, 0, 1, 3, 2, 3, 0, 1]
    for gid, n_right in enumerate(correct_per_group):
        items = [{"question": f"q{i}", "equation": f"x={gid}+{i}"} for i in range(3)]
        groups.append(group_from_dict({"group_id": gid, "scenario": f"s{gid}", "items": items}))
        for i in range(3):
            p[(gid, i)] = parse_prediction(f"x={i}+{gid}" if i < n_right else f"x={gid}*{i}+100")
    return groups, p


def test_ten_group_fixture():
    groups, p = ten_group_fixture()
    assert accuracy(groups, p) == 18 / 30
    assert group_accuracy(groups, p) == 4 / 10
    report = evaluate_predictions(groups, p)
    assert report.per_group[2] == {"group_id": 2, "correct": 2, "total": 3, "all_correct": False}
    assert "Group-Accuracy" in report.table()


def random_groups(rng, size):
    groups, p = [], {}
    for gid in range(rng.randint(1, 6)):
        items = [{"question": "q", "equation": f"x={rng.randint(1, 4)}"} for _ in range(size)]
        groups.append(group_from_dict({"group_id": gid, "scenario": "s", "items": items}))
        for i in range(size):
            if rng.random() < 0.9:
                p[(gid, i)] = parse_prediction(f"x={rng.randint(1, 4)}")
    return groups, p


def test_group_accuracy_never_exceeds_accuracy():
    rng = random.Random(1)
    for _ in range(1000):
        groups, p = random_groups(rng, size=rng.randint(1, 4))
        assert group_accuracy(groups, p) <= accuracy(groups, p)


def test_unequal_group_sizes_can_break_the_inequality():
    # accuracy counts items, so one fully solved single-item group can
    # outweigh it when the other groups are larger
    small = group_from_dict({"group_id": 0, "scenario": "s", "items": [{"question": "q", "equation": "x=1"}]})
    big = group_from_dict({"group_id": 1, "scenario": "s", "items": [{"question": "q", "equation": "x=2"}] * 4})
    p = {(0, 0): parse_prediction("x=1")}
    assert accuracy([small, big], p) == 1 / 5
    assert group_accuracy([small, big], p) == 1 / 2


def test_value_equal_predictions_score_the_same():
    groups, p = ten_group_fixture()
    rewritten = {}
    for key, eq in p.items():
        rewritten[key] = parse_prediction(f"x=({eq.source_text[2:]})*2/2+0")
    assert accuracy(groups, rewritten) == accuracy(groups, p)
    assert group_accuracy(groups, rewritten) == group_accuracy(groups, p)


def test_load_predictions(tmp_path):
    path = write_lines(tmp_path / "p.jsonl", [
        {"group_id": "uniforms", "item_index": 0, "equation": "x=25"},
        {"group_id": "uniforms", "item_index": 1, "equation": "nonsense"},
    ])
    p = load_predictions(path)
    assert p[("uniforms", 1)] is None
    assert accuracy([uniforms()], p) == pytest.approx(1 / 3)


# -- external solvers -----------------------------------------------------------


def script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text("import sys\n" + body)
    return [sys.executable, str(path)]


def test_constant_solver_deq_matches_originals(tmp_path):
    solver = script(tmp_path, "const.py", "for line in sys.stdin:\n    print('x=40*(15+10)')\n")
    group = group_from_dict({"group_id": 1, "scenario": UNIFORMS, "items": [
        {"question": "How much did it cost to make these uniforms?", "equation": "x=40*(15+10)"},
        {"question": "How much did it cost to make a uniform?", "equation": "x=15+10"},
    ]})
    with_q = accuracy([group], solver_predictions([group], solver, items="original"), "original")
    assert deq_accuracy([group], solver, items="original") == with_q == 1.0
    assert deq_accuracy([group], solver) == 0.5


def test_echo_solver_sees_scenario_only(tmp_path):
    solver = script(tmp_path, "echo.py", "for line in sys.stdin:\n    print('x=' + str(len(line.split())))\n")
    group = group_from_dict({"group_id": 1, "scenario": "a b c", "items": [
        {"question": "d e", "equation": "x=5"}, {"question": "f", "equation": "x=3"}]})
    assert accuracy([group], solver_predictions([group], solver)) == 0.5
    assert deq_accuracy([group], solver) == 0.5  # item 2 answer 3 = scenario length


def test_unparseable_solver_scores_zero(tmp_path):
    solver = script(tmp_path, "junk.py", "for line in sys.stdin:\n    print('no idea')\n")
    assert deq_accuracy([uniforms()], solver) == 0.0


def test_solver_protocol_errors(tmp_path):
    short = script(tmp_path, "short.py", "sys.stdin.read()\nprint('x=1')\n")
    with pytest.raises(SolverProtocolError):
        run_solver(short, ["a", "b"])
    failing = script(tmp_path, "fail.py", "sys.exit(3)\n")
    with pytest.raises(SolverProtocolError):
        run_solver(failing, ["a"])
    with pytest.raises(SolverProtocolError):
        run_solver([str(tmp_path / "missing-binary")], ["a"])


def test_parallel_batches_keep_order(tmp_path):
    solver = script(tmp_path, "id.py", "for line in sys.stdin:\n    print('x=' + line.split()[0])\n")
    prompts = [f"{i} apples" for i in range(50)]
    serial = run_solver(solver, prompts)
    assert run_solver(solver, prompts, workers=4, batch_size=7) == serial
    assert serial[17] == "x=17"
