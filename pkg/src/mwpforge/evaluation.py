"""Grouped MWP datasets and solver metrics: accuracy, group accuracy, deq accuracy."""

from __future__ import annotations

import json
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .datafilter import answers_match
from .expr import DivisionByZero, Equation, ExprSyntaxError, evaluate, parse_infix


class SchemaError(ValueError):
    pass


class EquationError(ValueError):
    pass


class SolverProtocolError(RuntimeError):
    pass


@dataclass
class Item:
    question: str
    equation: Equation
    answer: float


@dataclass
class ProblemGroup:
    group_id: object
    scenario: str
    items: list[Item]

    def to_dict(self) -> dict:
        return {
            "group_id": self.group_id,
            "scenario": self.scenario,
            "items": [{"question": it.question, "equation": it.equation.source_text} for it in self.items],
        }


def make_item(question: str, equation: str | Equation, where: str = "") -> Item:
    try:
        eq = equation if isinstance(equation, Equation) else parse_infix(equation)
        return Item(question, eq, evaluate(eq))
    except (ExprSyntaxError, DivisionByZero) as exc:
        raise EquationError(f"{where}: {exc}") from exc


def group_from_dict(record: dict, where: str = "") -> ProblemGroup:
    if not isinstance(record, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    for key in ("group_id", "scenario", "items"):
        if key not in record:
            raise SchemaError(f"{where}: missing field {key!r}")
    if not isinstance(record["items"], list) or not record["items"]:
        raise SchemaError(f"{where}: 'items' must be a non-empty list")
    items = []
    for i, raw in enumerate(record["items"]):
        if not isinstance(raw, dict) or "question" not in raw or "equation" not in raw:
            raise SchemaError(f"{where}: item {i} needs 'question' and 'equation'")
        items.append(make_item(raw["question"], raw["equation"], f"{where} item {i}"))
    return ProblemGroup(record["group_id"], record["scenario"], items)


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: {exc.msg}") from exc
    return out


def write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def load_dataset(path) -> list[ProblemGroup]:
    groups = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{where}: {exc.msg}") from exc
            groups.append(group_from_dict(record, where))
    return groups


def save_dataset(path, groups: Sequence[ProblemGroup]) -> None:
    write_jsonl(path, (g.to_dict() for g in groups))


# -- predictions ------------------------------------------------------------

Predictions = dict  # (group_id, item_index) -> Equation | None


def parse_prediction(text) -> Equation | None:
    if not isinstance(text, str):
        return None
    try:
        return parse_infix(text)
    except ExprSyntaxError:
        return None


def load_predictions(path) -> Predictions:
    preds = {}
    for rec in read_jsonl(path):
        preds[(rec["group_id"], rec["item_index"])] = parse_prediction(rec.get("equation"))
    return preds


def item_correct(item: Item, predicted: Equation | None) -> bool:
    if predicted is None:
        return False
    try:
        return answers_match(evaluate(predicted), item.answer)
    except DivisionByZero:
        return False


def _keys(groups, items: str = "all"):
    for g in groups:
        indices = range(len(g.items)) if items == "all" else range(1)
        for i in indices:
            yield g, i


def accuracy(groups: Sequence[ProblemGroup], preds: Predictions, items: str = "all") -> float:
    """Fraction of items answered correctly; missing predictions are wrong."""
    results = [item_correct(g.items[i], preds.get((g.group_id, i))) for g, i in _keys(groups, items)]
    return sum(results) / len(results) if results else 0.0


def group_accuracy(groups: Sequence[ProblemGroup], preds: Predictions) -> float:
    """Fraction of groups in which every item is answered correctly."""
    if not groups:
        return 0.0
    full = sum(
        all(item_correct(it, preds.get((g.group_id, i))) for i, it in enumerate(g.items)) for g in groups
    )
    return full / len(groups)


# -- external solvers -------------------------------------------------------


def _run_solver(cmd: Sequence[str], prompts: Sequence[str], timeout: float | None) -> list[str]:
    payload = "".join(p.replace("\n", " ") + "\n" for p in prompts)
    try:
        proc = subprocess.run(list(cmd), input=payload, capture_output=True, text=True, timeout=timeout)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise SolverProtocolError(f"solver could not run: {exc}") from exc
    if proc.returncode != 0:
        raise SolverProtocolError(f"solver exited with {proc.returncode}: {proc.stderr.strip()[:200]}")
    lines = proc.stdout.splitlines()
    if len(lines) != len(prompts):
        raise SolverProtocolError(f"solver returned {len(lines)} lines for {len(prompts)} prompts")
    return lines


def run_solver(cmd: Sequence[str], prompts: Sequence[str], workers: int = 1, batch_size: int = 64,
               timeout: float | None = None) -> list[str]:
    """One prompt per line in, one equation per line out.

    With ``workers > 1`` the prompts are split into batches solved by parallel
    processes; answers come back in prompt order.
    """
    prompts = list(prompts)
    if not prompts:
        return []
    if workers <= 1:
        return _run_solver(cmd, prompts, timeout)
    batches = [prompts[i : i + batch_size] for i in range(0, len(prompts), batch_size)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda b: _run_solver(cmd, b, timeout), batches))
    return [line for batch in results for line in batch]


def solver_predictions(groups, cmd, with_question: bool = True, items: str = "all", workers: int = 1) -> Predictions:
    keys = list(_keys(groups, items))
    prompts = []
    for g, i in keys:
        prompts.append(f"{g.scenario} {g.items[i].question}" if with_question else g.scenario)
    lines = run_solver(cmd, prompts, workers=workers)
    return {(g.group_id, i): parse_prediction(line.strip()) for (g, i), line in zip(keys, lines)}


def deq_accuracy(groups: Sequence[ProblemGroup], solver_cmd: Sequence[str], items: str = "all", workers: int = 1) -> float:
    """Accuracy when the solver sees only the scenario (questions deleted); lower is better."""
    preds = solver_predictions(groups, solver_cmd, with_question=False, items=items, workers=workers)
    return accuracy(groups, preds, items)


# -- reports ----------------------------------------------------------------


@dataclass
class EvalReport:
    accuracy: float
    group_accuracy: float
    deq_accuracy: float | None = None
    per_group: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "group_accuracy": self.group_accuracy,
            "deq_accuracy": self.deq_accuracy,
            "per_group": self.per_group,
        }

    def table(self) -> str:
        rows = [("Accuracy", self.accuracy), ("Group-Accuracy", self.group_accuracy)]
        if self.deq_accuracy is not None:
            rows.append(("Deq-Accuracy", self.deq_accuracy))
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {100 * value:6.2f}%" for name, value in rows)


def evaluate_predictions(groups: Sequence[ProblemGroup], preds: Predictions, deq: float | None = None) -> EvalReport:
    per_group = []
    for g in groups:
        flags = [item_correct(it, preds.get((g.group_id, i))) for i, it in enumerate(g.items)]
        per_group.append({"group_id": g.group_id, "correct": sum(flags), "total": len(flags), "all_correct": all(flags)})
    return EvalReport(accuracy(groups, preds), group_accuracy(groups, preds), deq, per_group)
