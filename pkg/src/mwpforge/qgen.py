"""Toy-scale equation-aware question generator.

Two encoders feed one attentional decoder:

* a bidirectional GRU over scenario tokens gives one row per token (``Hs``);
* a child-sum TreeLSTM over the equation tree gives one row per pre-order
  node (``He``);
* numbers shared by scenario and equation act as a bridge: an aligned
  equation leaf takes its scenario row as input, and after tree encoding the
  leaf's state is written back over that scenario row;
* the decoder attends over ``[Hs'; He]`` and emits the question greedily.

Numbers are replaced by ``NUMk`` placeholders, ``k`` being the mention's
position in the scenario, so the same slot names are shared by scenario,
equation and question.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

import numpy as np

from . import nn
from .expr import OPERATORS, BinOp, Equation, children_indices, format_number, iter_pre_order
from .scenario import Alignment, ScenarioDoc, align_numbers, is_number_token, lex_scenario
from .textmetrics import corpus_scores, score_generation

log = logging.getLogger(__name__)

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
NUM_SLOTS = 10
SPECIALS = (PAD, BOS, EOS, UNK) + tuple(f"NUM{k}" for k in range(NUM_SLOTS))
EMBED_SCALE = 0.5  # larger than the other weights so token identity survives the residual path
CHECKPOINT_KIND = "mwpforge-qgen"

_WORD_RE = re.compile(r"\d+(?:\.\d+)?|[A-Za-z]+(?:'[A-Za-z]+)?|[^\sA-Za-z\d]")


class TooManyNumbers(ValueError):
    pass


class EmptyQuestion(ValueError):
    pass


class Vocab:
    def __init__(self, tokens: Sequence[str]):
        tokens = list(tokens)
        if tuple(tokens[: len(SPECIALS)]) != SPECIALS:
            raise ValueError("vocabulary must start with the special tokens")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate vocabulary entries")
        self.tokens = tokens
        self.index = {tok: i for i, tok in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, tok: str) -> bool:
        return tok in self.index

    def id(self, tok: str) -> int:
        return self.index.get(tok, self.index[UNK])

    def ids(self, toks: Iterable[str]) -> list[int]:
        return [self.id(t) for t in toks]

    def token(self, i: int) -> str:
        return self.tokens[i]


# -- token layer ------------------------------------------------------------


def _slot(k: int) -> str:
    if k >= NUM_SLOTS:
        raise TooManyNumbers(f"scenario has more than {NUM_SLOTS} numbers")
    return f"NUM{k}"


def scenario_tokens(doc: ScenarioDoc) -> list[str]:
    toks = [t.lower() for t in doc.tokens]
    for k, mention in enumerate(doc.mentions):
        toks[mention.token_index] = _slot(k)
    return toks


def equation_tokens(doc: ScenarioDoc, eq: Equation, alignment: Alignment) -> list[str]:
    out = []
    for idx, node in enumerate(iter_pre_order(eq.rhs)):
        if isinstance(node, BinOp):
            out.append(node.op)
        elif idx in alignment.pairs:
            out.append(_slot(alignment.mention_index(doc, idx)))
        else:
            out.append(format_number(node.value))
    return out


def question_tokens(doc: ScenarioDoc, question: str) -> list[str]:
    if not question or not question.strip():
        raise EmptyQuestion("question text is empty")
    first_slot = {}
    for k, mention in enumerate(doc.mentions):
        first_slot.setdefault(mention.value, k)
    out = []
    for tok in _WORD_RE.findall(question):
        if is_number_token(tok):
            k = first_slot.get(Decimal(tok))
            out.append(_slot(k) if k is not None else tok)
        else:
            out.append(tok.lower())
    return out


def detokenize(tokens: Sequence[str]) -> str:
    text = " ".join(tokens)
    return re.sub(r" ([?.,!;:])", r"\1", text)


@dataclass
class Sample:
    """One (scenario, question, equation) triple in token form."""

    doc: ScenarioDoc
    eq: Equation
    alignment: Alignment
    scenario: list[str]
    equation: list[str]
    question: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, doc: ScenarioDoc, eq: Equation, question: str | None = None) -> "Sample":
        alignment = align_numbers(doc, eq)
        q = question_tokens(doc, question) if question is not None else []
        return cls(doc, eq, alignment, scenario_tokens(doc), equation_tokens(doc, eq, alignment), q)

    def bridge(self) -> list[tuple[int, int]]:
        """(equation node, scenario token) pairs, first equation node per token."""
        pairs = []
        used = set()
        for node_idx in sorted(self.alignment.pairs):
            tok_idx = self.alignment.pairs[node_idx].token_index
            if tok_idx not in used:
                used.add(tok_idx)
                pairs.append((node_idx, tok_idx))
        return pairs


def build_vocab(corpus: Iterable[tuple[ScenarioDoc, str, Equation]]) -> Vocab:
    extra = set()
    count = 0
    for doc, question, eq in corpus:
        sample = Sample.build(doc, eq, question)
        extra.update(sample.scenario, sample.equation, sample.question)
        count += 1
    if count == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    rest = sorted(extra - set(SPECIALS) - set(OPERATORS))
    return Vocab(list(SPECIALS) + list(OPERATORS) + rest)


# -- model ------------------------------------------------------------------


class QGenModel:
    def __init__(self, vocab: Vocab, dim: int = 32, max_len: int = 30, lr: float = 1e-3,
                 seed: int = 0, interaction: bool = True):
        if dim % 2 or dim < 2:
            raise ValueError("dim must be a positive even number")
        self.vocab = vocab
        self.dim = dim
        self.max_len = max_len
        self.lr = lr
        self.interaction = interaction
        rng = np.random.default_rng(seed)
        d, h, v = dim, dim // 2, len(vocab)
        shapes = [
            ("embed", v, d),
            ("enc_f.wx", d, 3 * h), ("enc_f.wh", h, 3 * h), ("enc_f.bx", 1, 3 * h), ("enc_f.bh", 1, 3 * h),
            ("enc_b.wx", d, 3 * h), ("enc_b.wh", h, 3 * h), ("enc_b.bx", 1, 3 * h), ("enc_b.bh", 1, 3 * h),
            ("tree.w_iou", d, 3 * d), ("tree.u_iou", d, 3 * d), ("tree.b_iou", 1, 3 * d),
            ("tree.w_f", d, d), ("tree.u_f", d, d), ("tree.b_f", 1, d),
            ("dec.init_w", 2 * d, d), ("dec.init_b", 1, d),
            ("dec.wx", 2 * d, 3 * d), ("dec.wh", d, 3 * d), ("dec.bx", 1, 3 * d), ("dec.bh", 1, 3 * d),
            ("dec.attn_w", 2 * d, d), ("dec.attn_b", 1, d),
            ("out.w", d, v), ("out.b", 1, v),
        ]
        self.params = {
            name: nn.init_param(rng, name, r, c, EMBED_SCALE if name == "embed" else nn.INIT_SCALE)
            for name, r, c in shapes
        }

    def __getitem__(self, name: str) -> nn.Param:
        return self.params[name]

    def parameters(self) -> list[nn.Param]:
        return list(self.params.values())

    def meta(self) -> dict:
        return {
            "kind": CHECKPOINT_KIND,
            "vocab": self.vocab.tokens,
            "dim": self.dim,
            "max_len": self.max_len,
            "lr": self.lr,
            "interaction": self.interaction,
        }

    def save(self, path) -> None:
        nn.save_checkpoint(path, self.parameters(), self.meta())

    @classmethod
    def load(cls, path) -> "QGenModel":
        arrays, meta = nn.load_checkpoint(path)
        if meta.get("kind") != CHECKPOINT_KIND:
            raise ValueError(f"{path}: not a question-generator checkpoint")
        model = cls(Vocab(meta["vocab"]), meta["dim"], meta["max_len"], meta["lr"],
                    interaction=meta.get("interaction", True))
        for name, p in model.params.items():
            if arrays[name].shape != p.shape:
                raise nn.ShapeMismatch(f"{name}: checkpoint {arrays[name].shape} vs model {p.shape}")
            p.value = arrays[name]
        return model


# -- encoders ---------------------------------------------------------------


def encode_scenario(model: QGenModel, tokens: Sequence[str], tape: nn.Tape) -> nn.Tensor:
    """Contextual embedding of every scenario token, ``T x d``.

    Row ``t`` is the forward and backward GRU states at ``t`` side by side,
    plus the token's own embedding (a residual path).
    """
    p = model.params
    emb = tape.embedding_lookup(model["embed"], model.vocab.ids(tokens))
    h0 = nn.constant(np.zeros((1, model.dim // 2)))
    fwd = tape.gru_sequence(emb, h0, p["enc_f.wx"], p["enc_f.wh"], p["enc_f.bx"], p["enc_f.bh"])
    bwd = tape.gru_sequence(emb, h0, p["enc_b.wx"], p["enc_b.wh"], p["enc_b.bx"], p["enc_b.bh"], reverse=True)
    return tape.add(tape.concat([fwd, bwd]), emb)


def tree_lstm_node(model: QGenModel, tape: nn.Tape, x: nn.Tensor,
                   children: Sequence[tuple[nn.Tensor, nn.Tensor]]) -> tuple[nn.Tensor, nn.Tensor]:
    """Child-sum TreeLSTM cell; returns ``(h, c)``. No children means zero child state."""
    p, d = model.params, model.dim
    iou = tape.matmul(x, p["tree.w_iou"])
    if children:
        h_sum = children[0][0]
        for h_k, _ in children[1:]:
            h_sum = tape.add(h_sum, h_k)
        iou = tape.add(iou, tape.matmul(h_sum, p["tree.u_iou"]))
    iou = tape.add(iou, p["tree.b_iou"])
    i = tape.sigmoid(tape.slice_cols(iou, 0, d))
    o = tape.sigmoid(tape.slice_cols(iou, d, 2 * d))
    u = tape.tanh(tape.slice_cols(iou, 2 * d, 3 * d))
    c = tape.mul(i, u)
    if children:
        xf = tape.add(tape.matmul(x, p["tree.w_f"]), p["tree.b_f"])
        for h_k, c_k in children:
            f_k = tape.sigmoid(tape.add(xf, tape.matmul(h_k, p["tree.u_f"])))
            c = tape.add(c, tape.mul(f_k, c_k))
    h = tape.mul(o, tape.tanh(c))
    return h, c


def encode_equation(model: QGenModel, sample: Sample, hs: nn.Tensor | None, tape: nn.Tape) -> nn.Tensor:
    """TreeLSTM state of every equation node in pre-order, ``n x d``.

    Aligned number leaves read their input from ``hs`` instead of the
    embedding table when ``hs`` is given and interaction is enabled.
    """
    emb = tape.embedding_lookup(model["embed"], model.vocab.ids(sample.equation))
    kids = children_indices(sample.eq.rhs)
    aligned = {}
    if hs is not None and model.interaction:
        aligned = {node: mention.token_index for node, mention in sample.alignment.pairs.items()}
    states: list = [None] * len(kids)
    for i in reversed(range(len(kids))):
        x = tape.row(hs, aligned[i]) if i in aligned else tape.row(emb, i)
        states[i] = tree_lstm_node(model, tape, x, [states[k] for k in kids[i]])
    return tape.stack_rows([h for h, _ in states])


def interact_back(hs: nn.Tensor, he: nn.Tensor, bridge: Sequence[tuple[int, int]], tape: nn.Tape) -> nn.Tensor:
    """Overwrite scenario rows of aligned numbers with their equation-node states."""
    if not bridge:
        return hs
    nodes = [n for n, _ in bridge]
    rows = [t for _, t in bridge]
    src = tape.stack_rows([tape.row(he, n) for n in nodes])
    return tape.replace_rows(hs, rows, src)


@dataclass
class Encoding:
    hs: nn.Tensor
    he: nn.Tensor
    hs_back: nn.Tensor
    memory: nn.Tensor


def encode(model: QGenModel, sample: Sample, tape: nn.Tape, hs: nn.Tensor | None = None) -> Encoding:
    if hs is None:
        hs = encode_scenario(model, sample.scenario, tape)
    he = encode_equation(model, sample, hs, tape)
    hs_back = interact_back(hs, he, sample.bridge(), tape) if model.interaction else hs
    return Encoding(hs, he, hs_back, tape.stack_rows([hs_back, he]))


# -- decoder ----------------------------------------------------------------


class _Decoder:
    """Initial state reads the mean scenario row and the equation root state.

    ``mask`` (one flag per memory row) hides rows from the decoder entirely:
    they get zero attention and are left out of the scenario mean.
    """

    def __init__(self, model: QGenModel, enc: "Encoding", tape: nn.Tape, mask=None):
        p = model.params
        self.model, self.tape, self.mask = model, tape, mask
        self.memory = enc.memory
        self.memory_t = tape.transpose(enc.memory)
        scenario = enc.hs_back
        if mask is not None:
            visible = [i for i in range(scenario.rows) if mask[i]]
            if not visible:
                raise ValueError("mask hides every scenario row")
            if len(visible) < scenario.rows:
                scenario = tape.stack_rows([tape.row(scenario, i) for i in visible])
        summary = tape.concat([tape.mean_rows(scenario), tape.row(enc.he, 0)])
        self.state = tape.tanh(tape.add(tape.matmul(summary, p["dec.init_w"]), p["dec.init_b"]))
        self.feed = nn.constant(np.zeros((1, model.dim)))

    def step(self, x: nn.Tensor) -> nn.Tensor:
        p, tape = self.model.params, self.tape
        inp = tape.concat([x, self.feed])
        self.state = tape.gru_cell(inp, self.state, p["dec.wx"], p["dec.wh"], p["dec.bx"], p["dec.bh"])
        weights = tape.softmax(tape.matmul(self.state, self.memory_t), self.mask)
        context = tape.matmul(weights, self.memory)
        self.feed = tape.tanh(tape.add(tape.matmul(tape.concat([self.state, context]), p["dec.attn_w"]), p["dec.attn_b"]))
        return self.feed

    def logits(self, outputs: nn.Tensor) -> nn.Tensor:
        p = self.model.params
        return self.tape.add(self.tape.matmul(outputs, p["out.w"]), p["out.b"])


def decoder_logits(model: QGenModel, enc: Encoding, inputs: Sequence[int], tape: nn.Tape, mask=None) -> nn.Tensor:
    """Teacher-forced logits, one row per input token."""
    dec = _Decoder(model, enc, tape, mask)
    emb = tape.embedding_lookup(model["embed"], inputs)
    outs = [dec.step(tape.row(emb, t)) for t in range(len(inputs))]
    return dec.logits(tape.stack_rows(outs))


def sample_loss(model: QGenModel, sample: Sample, tape: nn.Tape) -> nn.Tensor:
    enc = encode(model, sample, tape)
    targets = model.vocab.ids(sample.question) + [model.vocab.id(EOS)]
    inputs = [model.vocab.id(BOS)] + targets[:-1]
    return tape.cross_entropy(decoder_logits(model, enc, inputs, tape), targets)


@dataclass
class Generation:
    tokens: list[str]
    text: str
    truncated: bool


def greedy_ids(model: QGenModel, sample: Sample, max_len: int | None = None) -> tuple[list[int], bool]:
    max_len = model.max_len if max_len is None else max_len
    tape = nn.Tape(record=False)
    enc = encode(model, sample, tape)
    dec = _Decoder(model, enc, tape)
    eos = model.vocab.id(EOS)
    prev = model.vocab.id(BOS)
    out = []
    for _ in range(max_len):
        o = dec.step(tape.embedding_lookup(model["embed"], [prev]))
        prev = int(np.argmax(dec.logits(o).value[0]))
        if prev == eos:
            return out, False
        out.append(prev)
    return out, True


def restore_numbers(doc: ScenarioDoc, tokens: Sequence[str]) -> list[str]:
    out = []
    for tok in tokens:
        if tok.startswith("NUM") and tok[3:].isdigit() and int(tok[3:]) < len(doc.mentions):
            out.append(doc.surface(doc.mentions[int(tok[3:])]))
        else:
            out.append(tok)
    return out


def decode(model: QGenModel, sample: Sample, max_len: int | None = None) -> Generation:
    ids, truncated = greedy_ids(model, sample, max_len)
    tokens = [model.vocab.token(i) for i in ids]
    return Generation(tokens, detokenize(restore_numbers(sample.doc, tokens)), truncated)


def generate_question(model: QGenModel, scenario: str, eq: Equation) -> Generation:
    return decode(model, Sample.build(lex_scenario(scenario), eq))


# -- training and evaluation ------------------------------------------------


def train(model: QGenModel, samples: Sequence[Sample], epochs: int, seed: int = 0,
          lr: float | None = None, on_epoch=None) -> list[float]:
    """Teacher-forced training with Adam, one sample per update.

    Returns the mean per-token loss of every epoch. ``on_epoch(epoch, loss)``
    may return True to stop early.
    """
    if not samples:
        raise ValueError("training corpus is empty")
    params = model.parameters()
    opt = nn.Adam(params, lr=model.lr if lr is None else lr, betas=(0.9, 0.999))
    rng = np.random.default_rng(seed)
    history = []
    step = 0
    for epoch in range(epochs):
        total = 0.0
        for i in rng.permutation(len(samples)):
            nn.zero_grads(params)
            tape = nn.Tape()
            try:
                loss = sample_loss(model, samples[i], tape)
                tape.backward(loss)
                opt.step()
            except nn.NonFiniteValue as exc:
                raise nn.NonFiniteValue(f"training step {step}: {exc}") from exc
            total += loss.item()
            step += 1
        history.append(total / len(samples))
        log.info("epoch %d mean loss %.6f", epoch + 1, history[-1])
        if on_epoch is not None and on_epoch(epoch + 1, history[-1]):
            break
    return history


def token_accuracy(model: QGenModel, samples: Sequence[Sample]) -> float:
    """Teacher-forced next-token argmax accuracy, EOS included."""
    hits = total = 0
    for sample in samples:
        tape = nn.Tape(record=False)
        enc = encode(model, sample, tape)
        targets = model.vocab.ids(sample.question) + [model.vocab.id(EOS)]
        inputs = [model.vocab.id(BOS)] + targets[:-1]
        pred = decoder_logits(model, enc, inputs, tape).value.argmax(axis=1)
        hits += int((pred == np.asarray(targets)).sum())
        total += len(targets)
    return hits / total if total else 0.0


def exact_match(model: QGenModel, samples: Sequence[Sample]) -> float:
    if not samples:
        return 0.0
    hits = 0
    for sample in samples:
        ids, truncated = greedy_ids(model, sample)
        hits += (not truncated) and ids == model.vocab.ids(sample.question)
    return hits / len(samples)


def generation_scores(model: QGenModel, samples: Sequence[Sample]) -> dict[str, float]:
    pairs = []
    for sample in samples:
        ids, _ = greedy_ids(model, sample)
        pairs.append(([model.vocab.token(i) for i in ids], sample.question))
    return corpus_scores(pairs)


__all__ = [
    "Vocab", "QGenModel", "Sample", "Generation", "TooManyNumbers", "EmptyQuestion",
    "build_vocab", "encode_scenario", "encode_equation", "interact_back", "encode",
    "decoder_logits", "sample_loss", "decode", "generate_question", "train",
    "token_accuracy", "exact_match", "generation_scores", "score_generation",
]
