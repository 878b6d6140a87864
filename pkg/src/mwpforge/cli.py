"""Command-line pipeline: augment -> generate -> filter, plus train-qgen and eval.

Stages talk to each other only through JSONL files. Options come from an INI
config file (section ``[mwpforge]``, ``key = value``) and are overridden by
flags. Failures exit non-zero with a JSON error object on stderr.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import shlex
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import datafilter, evaluation, geneq, qgen
from .expr import ExprSyntaxError, parse_infix
from .microcorpus import micro_corpus
from .scenario import DEFAULT_STOP_WORDS, prepare_scenario

log = logging.getLogger("mwpforge")

CONFIG_SECTION = "mwpforge"


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


@dataclass
class PipelineConfig:
    input: str | None = None
    out: str | None = None
    k: int = datafilter.DEFAULT_K
    expert: str = "enum"
    checkpoint: str | None = None
    seed: int = 0
    stop_words: tuple[str, ...] = tuple(sorted(DEFAULT_STOP_WORDS))
    max_ops: int = 3
    epochs: int = 100
    dim: int = 32
    lr: float = 1e-3
    max_len: int = 30
    micro: int = 0
    rejects: str | None = None
    dataset_out: str | None = None
    log: str | None = None
    predictions: str | None = None
    solver: str | None = None
    deq: bool = False
    deq_items: str = "all"
    workers: int = 1

    def validate(self) -> "PipelineConfig":
        if self.k < 1:
            raise ConfigError("k", "must be at least 1")
        if self.max_ops < 0:
            raise ConfigError("max_ops", "must be non-negative")
        if self.dim < 2 or self.dim % 2:
            raise ConfigError("dim", "must be a positive even number")
        if self.epochs < 0:
            raise ConfigError("epochs", "must be non-negative")
        if self.max_len < 1:
            raise ConfigError("max_len", "must be at least 1")
        if self.deq_items not in ("all", "original"):
            raise ConfigError("deq_items", "must be 'all' or 'original'")
        if self.expert != "enum" and not self.expert.startswith("oracle:"):
            raise ConfigError("expert", "must be 'enum' or 'oracle:<path>'")
        return self


def _coerce(key: str, raw, kind):
    try:
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is tuple:
            if isinstance(raw, (list, tuple)):
                return tuple(raw)
            return tuple(w.strip().lower() for w in str(raw).split(",") if w.strip())
        return kind(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"invalid value {raw!r}") from exc


_KINDS = {
    "k": int, "seed": int, "max_ops": int, "epochs": int, "dim": int, "max_len": int,
    "micro": int, "workers": int, "lr": float, "deq": bool, "stop_words": tuple,
}


def load_config(path: str | None, overrides: dict) -> PipelineConfig:
    values: dict = {}
    known = {f.name for f in fields(PipelineConfig)}
    if path:
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError("config", str(exc)) from exc
        except configparser.Error as exc:
            raise ConfigError("config", f"unparsable: {exc}") from exc
        if parser.has_section(CONFIG_SECTION):
            for key, raw in parser.items(CONFIG_SECTION):
                key = key.replace("-", "_")
                if key not in known:
                    raise ConfigError(key, "unknown configuration key")
                values[key] = raw
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    for key, value in list(values.items()):
        values[key] = _coerce(key, value, _KINDS.get(key, str))
    return PipelineConfig(**values).validate()


def _require(cfg: PipelineConfig, *keys: str) -> None:
    for key in keys:
        if getattr(cfg, key) in (None, ""):
            raise ConfigError(key, "is required for this command")


# -- commands -----------------------------------------------------------------


def cmd_augment(cfg: PipelineConfig) -> int:
    _require(cfg, "input", "out")
    records = []
    for group in evaluation.load_dataset(cfg.input):
        original = group.items[0]
        doc = prepare_scenario(group.scenario, frozenset(cfg.stop_words))
        for cand in geneq.generate_all(doc, original.equation):
            records.append({
                "group_id": group.group_id,
                "scenario": group.scenario,
                "equation": cand.eq.source_text,
                "strategy": cand.strategy,
                "strategies": list(cand.strategies),
                "provenance": cand.provenance,
                "original": {"question": original.question, "equation": original.equation.source_text},
            })
    evaluation.write_jsonl(cfg.out, records)
    log.info("wrote %d candidates to %s", len(records), cfg.out)
    return 0


def cmd_generate(cfg: PipelineConfig) -> int:
    _require(cfg, "input", "out", "checkpoint")
    model = qgen.QGenModel.load(cfg.checkpoint)
    out = []
    for rec in evaluation.read_jsonl(cfg.input):
        gen = qgen.generate_question(model, rec["scenario"], parse_infix(rec["equation"]))
        out.append({**rec, "question": gen.text, "qgen": {"tokens": gen.tokens, "truncated": gen.truncated}})
    evaluation.write_jsonl(cfg.out, out)
    log.info("generated %d questions", len(out))
    return 0


def _expert_factory(cfg: PipelineConfig):
    if cfg.expert == "enum":
        stop = frozenset(cfg.stop_words)
        return lambda scenario: datafilter.enumerative_expert(prepare_scenario(scenario, stop), cfg.max_ops)
    oracle = datafilter.load_oracle(cfg.expert.split(":", 1)[1])
    return lambda scenario: oracle


def cmd_filter(cfg: PipelineConfig) -> int:
    _require(cfg, "input", "out")
    expert_for = _expert_factory(cfg)
    accepted, rejected = [], []
    for rec in evaluation.read_jsonl(cfg.input):
        question = rec.get("question", "")
        decision = datafilter.filter_one(
            rec["scenario"], question, parse_infix(rec["equation"]), expert_for(rec["scenario"]), cfg.k
        )
        (accepted if decision.accepted else rejected).append({**rec, "filter": {**decision.to_dict(), "k": cfg.k}})
    rejects_path = cfg.rejects or str(Path(cfg.out).with_suffix("")) + ".rejects.jsonl"
    evaluation.write_jsonl(cfg.out, accepted)
    evaluation.write_jsonl(rejects_path, rejected)
    if cfg.dataset_out:
        evaluation.write_jsonl(cfg.dataset_out, emit_groups(accepted))
    log.info("accepted %d, rejected %d", len(accepted), len(rejected))
    return 0


def emit_groups(accepted: list[dict]) -> list[dict]:
    """Fold accepted candidates back into groups: original item first, then new ones."""
    groups: dict = {}
    for rec in accepted:
        gid = rec.get("group_id")
        if gid not in groups:
            items = []
            if "original" in rec:
                items.append(dict(rec["original"]))
            groups[gid] = {"group_id": gid, "scenario": rec["scenario"], "items": items}
        groups[gid]["items"].append({"question": rec.get("question", ""), "equation": rec["equation"]})
    return list(groups.values())


def _training_triples(cfg: PipelineConfig) -> list[tuple[str, str, str]]:
    if cfg.micro:
        return [(r["scenario"], r["question"], r["equation"]) for r in micro_corpus(cfg.micro, cfg.seed)]
    _require(cfg, "input")
    triples = []
    for rec in evaluation.read_jsonl(cfg.input):
        if "items" in rec:
            triples.extend((rec["scenario"], it["question"], it["equation"]) for it in rec["items"])
        else:
            triples.append((rec["scenario"], rec["question"], rec["equation"]))
    return triples


def cmd_train_qgen(cfg: PipelineConfig) -> int:
    out = cfg.checkpoint or cfg.out
    if not out:
        raise ConfigError("checkpoint", "is required for this command")
    stop = frozenset(cfg.stop_words)
    corpus = []
    for scenario, question, equation in _training_triples(cfg):
        corpus.append((prepare_scenario(scenario, stop), question, parse_infix(equation)))
    vocab = qgen.build_vocab(corpus)
    samples = [qgen.Sample.build(doc, eq, q) for doc, q, eq in corpus]
    model = qgen.QGenModel(vocab, cfg.dim, cfg.max_len, cfg.lr, seed=cfg.seed)
    history = qgen.train(model, samples, cfg.epochs, seed=cfg.seed)
    model.save(out)
    log_path = cfg.log or out + ".log.csv"
    with open(log_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["epoch", "mean_loss"])
        for epoch, loss in enumerate(history, 1):
            writer.writerow([epoch, repr(loss)])
    log.info("trained %d epochs on %d samples; checkpoint %s", len(history), len(samples), out)
    return 0


def cmd_eval(cfg: PipelineConfig) -> int:
    _require(cfg, "input")
    groups = evaluation.load_dataset(cfg.input)
    solver = shlex.split(cfg.solver) if cfg.solver else None
    if cfg.predictions:
        preds = evaluation.load_predictions(cfg.predictions)
    elif solver:
        preds = evaluation.solver_predictions(groups, solver, with_question=True, workers=cfg.workers)
    else:
        raise ConfigError("predictions", "eval needs --predictions or --solver")
    deq = None
    if cfg.deq:
        if not solver:
            raise ConfigError("solver", "deq accuracy needs --solver")
        deq = evaluation.deq_accuracy(groups, solver, items=cfg.deq_items, workers=cfg.workers)
    report = evaluation.evaluate_predictions(groups, preds, deq)
    if cfg.out:
        Path(cfg.out).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(report.table())
    return 0


COMMANDS = {
    "augment": cmd_augment,
    "generate": cmd_generate,
    "filter": cmd_filter,
    "train-qgen": cmd_train_qgen,
    "eval": cmd_eval,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [mwpforge] section")
    common.add_argument("--seed", type=int)
    common.add_argument("--k", type=int, help="expert beam size for the filter (default 5)")
    common.add_argument("--expert", help="'enum' or 'oracle:<path>'")
    common.add_argument("--checkpoint", help="question-generator checkpoint")
    common.add_argument("--out", help="output path")
    common.add_argument("--input", "-i", help="input path")

    parser = argparse.ArgumentParser(prog="mwpforge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("augment", parents=[common], help="generate candidate equations")
    sub.add_parser("generate", parents=[common], help="generate questions for candidates")

    p = sub.add_parser("filter", parents=[common], help="keep candidates the expert agrees with")
    p.add_argument("--rejects")
    p.add_argument("--dataset-out", dest="dataset_out")
    p.add_argument("--max-ops", dest="max_ops", type=int)

    p = sub.add_parser("train-qgen", parents=[common], help="train the question generator")
    p.add_argument("--epochs", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-len", dest="max_len", type=int)
    p.add_argument("--micro", type=int, help="train on N templated examples instead of --input")
    p.add_argument("--log", help="CSV training log (default <checkpoint>.log.csv)")

    p = sub.add_parser("eval", parents=[common], help="score a solver on a grouped dataset")
    p.add_argument("--predictions")
    p.add_argument("--solver", help="command reading prompts on stdin, one equation per line out")
    p.add_argument("--deq", action="store_true", default=None)
    p.add_argument("--deq-items", dest="deq_items", choices=["all", "original"])
    p.add_argument("--workers", type=int)
    return parser


def _fail(kind: str, message: str, key: str | None = None, code: int = 1) -> int:
    err = {"error": kind, "message": message}
    if key is not None:
        err["key"] = key
    print(json.dumps(err, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("MWPFORGE_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    try:
        cfg = load_config(config_path, args)
        return COMMANDS[command](cfg)
    except ConfigError as exc:
        return _fail("ConfigError", str(exc), exc.key, code=2)
    except (evaluation.SchemaError, evaluation.EquationError, ExprSyntaxError,
            evaluation.SolverProtocolError, qgen.TooManyNumbers, qgen.EmptyQuestion,
            ValueError, KeyError, OSError) as exc:
        return _fail(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
