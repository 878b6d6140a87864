"""A small reverse-mode autodiff kernel over 2-D double-precision arrays.

Every value is a :class:`Tensor` holding a ``rows x cols`` float64 array.
Operations are methods of a :class:`Tape`, which records a backward closure
per operation; :meth:`Tape.backward` replays them in reverse and accumulates
gradients into every tensor that requires them, including :class:`Param`
leaves whose ``grad`` persists until :func:`zero_grads`.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

INIT_SCALE = 0.08


class ShapeMismatch(ValueError):
    pass


class NonFiniteValue(FloatingPointError):
    pass


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_backward")

    def __init__(self, value, requires_grad: bool = False):
        value = np.asarray(value, dtype=np.float64)
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        elif value.ndim != 2:
            raise ShapeMismatch(f"expected a 2-D array, got {value.ndim}-D")
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad
        self._backward = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape

    @property
    def rows(self) -> int:
        return self.value.shape[0]

    @property
    def cols(self) -> int:
        return self.value.shape[1]

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeMismatch(f"item() on a {self.shape} tensor")
        return float(self.value[0, 0])

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape})"


class Param(Tensor):
    __slots__ = ("name",)

    def __init__(self, value, name: str):
        super().__init__(value, requires_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.value)

    def __repr__(self) -> str:
        return f"Param({self.name!r}, shape={self.shape})"


def constant(value) -> Tensor:
    return Tensor(value)


def zero_grads(params: Iterable[Param]) -> None:
    for p in params:
        p.grad = np.zeros_like(p.value)


def init_param(rng: np.random.Generator, name: str, rows: int, cols: int, scale: float = INIT_SCALE) -> Param:
    return Param(rng.uniform(-scale, scale, size=(rows, cols)), name)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


def _check_same(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ShapeMismatch(f"{what}: {a.shape} vs {b.shape}")


def _check_broadcast(a: Tensor, b: Tensor, what: str) -> bool:
    """True when ``b`` is a single row broadcast over ``a``'s rows."""
    if a.shape == b.shape:
        return False
    if b.rows == 1 and b.cols == a.cols:
        return True
    raise ShapeMismatch(f"{what}: {a.shape} vs {b.shape}")


class Tape:
    """Records operations for one forward pass.

    With ``record=False`` no backward closures are kept (inference mode).
    """

    def __init__(self, record: bool = True):
        self.record = record
        self.nodes: list[Tensor] = []

    def _out(self, value: np.ndarray, parents: Sequence[Tensor], backward: Callable) -> Tensor:
        if not np.isfinite(value).all():
            raise NonFiniteValue(f"non-finite value produced at tape step {len(self.nodes)}")
        needs = self.record and any(p.requires_grad for p in parents)
        out = Tensor.__new__(Tensor)
        out.value = value
        out.grad = None
        out.requires_grad = needs
        out._backward = None
        if needs:
            out._backward = backward
            self.nodes.append(out)
        return out

    def backward(self, loss: Tensor) -> None:
        if loss.value.size != 1:
            raise ShapeMismatch(f"backward needs a scalar loss, got {loss.shape}")
        if not loss.requires_grad:
            return
        loss.grad = np.ones_like(loss.value)
        for node in reversed(self.nodes):
            if node.grad is not None:
                node._backward(node.grad)
        self.nodes.clear()

    # -- linear algebra ---------------------------------------------------

    def matmul(self, a: Tensor, b: Tensor) -> Tensor:
        if a.cols != b.rows:
            raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")

        def backward(g):
            _accumulate(a, g @ b.value.T)
            _accumulate(b, a.value.T @ g)

        return self._out(a.value @ b.value, (a, b), backward)

    def transpose(self, a: Tensor) -> Tensor:
        def backward(g):
            _accumulate(a, g.T)

        return self._out(a.value.T.copy(), (a,), backward)

    def add(self, a: Tensor, b: Tensor) -> Tensor:
        bcast = _check_broadcast(a, b, "add")

        def backward(g):
            _accumulate(a, g)
            _accumulate(b, g.sum(axis=0, keepdims=True) if bcast else g)

        return self._out(a.value + b.value, (a, b), backward)

    def sub(self, a: Tensor, b: Tensor) -> Tensor:
        _check_same(a, b, "sub")

        def backward(g):
            _accumulate(a, g)
            _accumulate(b, -g)

        return self._out(a.value - b.value, (a, b), backward)

    def mul(self, a: Tensor, b: Tensor) -> Tensor:
        """Elementwise product."""
        _check_same(a, b, "mul")

        def backward(g):
            _accumulate(a, g * b.value)
            _accumulate(b, g * a.value)

        return self._out(a.value * b.value, (a, b), backward)

    def scale(self, a: Tensor, factor: float) -> Tensor:
        def backward(g):
            _accumulate(a, g * factor)

        return self._out(a.value * factor, (a,), backward)

    def sigmoid(self, a: Tensor) -> Tensor:
        y = _sigmoid(a.value)

        def backward(g):
            _accumulate(a, g * y * (1.0 - y))

        return self._out(y, (a,), backward)

    def tanh(self, a: Tensor) -> Tensor:
        y = np.tanh(a.value)

        def backward(g):
            _accumulate(a, g * (1.0 - y * y))

        return self._out(y, (a,), backward)

    def softmax(self, a: Tensor, mask: np.ndarray | None = None) -> Tensor:
        """Row-wise softmax; entries where ``mask`` is False get weight exactly 0."""
        x = a.value
        if mask is not None:
            mask = np.broadcast_to(np.asarray(mask, dtype=bool).reshape(1, -1), x.shape)
            if not mask.any(axis=1).all():
                raise ValueError("softmax mask leaves a row with no entries")
            x = np.where(mask, x, -np.inf)
        e = np.exp(x - x.max(axis=1, keepdims=True))
        y = e / e.sum(axis=1, keepdims=True)

        def backward(g):
            _accumulate(a, y * (g - (g * y).sum(axis=1, keepdims=True)))

        return self._out(y, (a,), backward)

    # -- structural -------------------------------------------------------

    def concat(self, parts: Sequence[Tensor]) -> Tensor:
        """Concatenate along columns; all parts must have the same row count."""
        rows = {p.rows for p in parts}
        if len(rows) != 1:
            raise ShapeMismatch(f"concat: row counts {sorted(rows)}")
        bounds = np.cumsum([0] + [p.cols for p in parts])

        def backward(g):
            for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
                _accumulate(p, g[:, lo:hi])

        return self._out(np.concatenate([p.value for p in parts], axis=1), parts, backward)

    def stack_rows(self, parts: Sequence[Tensor]) -> Tensor:
        cols = {p.cols for p in parts}
        if len(cols) != 1:
            raise ShapeMismatch(f"stack_rows: column counts {sorted(cols)}")
        bounds = np.cumsum([0] + [p.rows for p in parts])

        def backward(g):
            for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
                _accumulate(p, g[lo:hi])

        return self._out(np.concatenate([p.value for p in parts], axis=0), parts, backward)

    def slice_cols(self, a: Tensor, start: int, stop: int) -> Tensor:
        if not 0 <= start < stop <= a.cols:
            raise ShapeMismatch(f"slice_cols [{start}:{stop}] of {a.shape}")

        def backward(g):
            full = np.zeros_like(a.value)
            full[:, start:stop] = g
            _accumulate(a, full)

        return self._out(a.value[:, start:stop], (a,), backward)

    def row(self, a: Tensor, i: int) -> Tensor:
        if not 0 <= i < a.rows:
            raise ShapeMismatch(f"row {i} of {a.shape}")

        def backward(g):
            full = np.zeros_like(a.value)
            full[i] = g[0]
            _accumulate(a, full)

        return self._out(a.value[i : i + 1], (a,), backward)

    def replace_rows(self, a: Tensor, index: Sequence[int], src: Tensor) -> Tensor:
        """Copy of ``a`` whose rows ``index[j]`` are taken from row ``j`` of ``src``."""
        index = list(index)
        if len(set(index)) != len(index):
            raise ValueError("replace_rows: duplicate target rows")
        if src.rows != len(index) or src.cols != a.cols:
            raise ShapeMismatch(f"replace_rows: {len(index)} rows into {a.shape} from {src.shape}")
        value = a.value.copy()
        value[index] = src.value

        def backward(g):
            ga = g.copy()
            ga[index] = 0.0
            _accumulate(a, ga)
            _accumulate(src, g[index])

        return self._out(value, (a, src), backward)

    def sum_rows(self, a: Tensor) -> Tensor:
        def backward(g):
            _accumulate(a, np.broadcast_to(g, a.shape).copy())

        return self._out(a.value.sum(axis=0, keepdims=True), (a,), backward)

    def mean_rows(self, a: Tensor) -> Tensor:
        n = a.rows

        def backward(g):
            _accumulate(a, np.broadcast_to(g / n, a.shape).copy())

        return self._out(a.value.mean(axis=0, keepdims=True), (a,), backward)

    def embedding_lookup(self, table: Tensor, ids: Sequence[int]) -> Tensor:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 1 or len(ids) == 0:
            raise ShapeMismatch("embedding_lookup needs a non-empty id list")
        if ids.min() < 0 or ids.max() >= table.rows:
            raise IndexError(f"embedding id out of range for table of {table.rows} rows")

        def backward(g):
            full = np.zeros_like(table.value)
            np.add.at(full, ids, g)
            _accumulate(table, full)

        return self._out(table.value[ids], (table,), backward)

    # -- losses -----------------------------------------------------------

    def cross_entropy(self, logits: Tensor, targets: Sequence[int]) -> Tensor:
        """Mean negative log-likelihood of ``targets`` (one per row) under softmax(logits)."""
        targets = np.asarray(targets, dtype=np.int64)
        if targets.shape != (logits.rows,):
            raise ShapeMismatch(f"cross_entropy: {len(targets)} targets for {logits.rows} rows")
        x = logits.value
        shifted = x - x.max(axis=1, keepdims=True)
        logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        logp = shifted - logsum
        rows = np.arange(len(targets))
        loss = -logp[rows, targets].mean()

        def backward(g):
            grad = np.exp(logp)
            grad[rows, targets] -= 1.0
            _accumulate(logits, grad * (g[0, 0] / len(targets)))

        return self._out(np.array([[loss]]), (logits,), backward)

    # -- fused cells ------------------------------------------------------

    def gru_cell(self, x: Tensor, h: Tensor, w_x: Tensor, w_h: Tensor, b_x: Tensor, b_h: Tensor) -> Tensor:
        """One gated recurrent step; gate blocks ordered (reset, update, candidate).

        r = sig(x Wx_r + bx_r + h Wh_r + bh_r)
        z = sig(x Wx_z + bx_z + h Wh_z + bh_z)
        n = tanh(x Wx_n + bx_n + r * (h Wh_n + bh_n))
        h' = (1 - z) * n + z * h
        """
        hid = h.cols
        if w_x.shape != (x.cols, 3 * hid) or w_h.shape != (hid, 3 * hid):
            raise ShapeMismatch(f"gru_cell weights {w_x.shape}, {w_h.shape} for x {x.shape}, h {h.shape}")
        if b_x.shape != (1, 3 * hid) or b_h.shape != (1, 3 * hid) or x.rows != h.rows:
            raise ShapeMismatch("gru_cell bias or row mismatch")
        gx = x.value @ w_x.value + b_x.value
        gh = h.value @ w_h.value + b_h.value
        rz = _sigmoid(gx[:, : 2 * hid] + gh[:, : 2 * hid])
        r, z = rz[:, :hid], rz[:, hid:]
        gh_n = gh[:, 2 * hid :]
        n = np.tanh(gx[:, 2 * hid :] + r * gh_n)
        out = (1.0 - z) * n + z * h.value

        def backward(g):
            dn = g * (1.0 - z)
            dz = g * (h.value - n)
            da_n = dn * (1.0 - n * n)
            dr = da_n * gh_n
            da_rz = np.concatenate([dr * r * (1.0 - r), dz * z * (1.0 - z)], axis=1)
            dgx = np.concatenate([da_rz, da_n], axis=1)
            dgh = np.concatenate([da_rz, da_n * r], axis=1)
            _accumulate(x, dgx @ w_x.value.T)
            _accumulate(h, dgh @ w_h.value.T + g * z)
            _accumulate(w_x, x.value.T @ dgx)
            _accumulate(w_h, h.value.T @ dgh)
            _accumulate(b_x, dgx.sum(axis=0, keepdims=True))
            _accumulate(b_h, dgh.sum(axis=0, keepdims=True))

        return self._out(out, (x, h, w_x, w_h, b_x, b_h), backward)


    def gru_sequence(self, xs: Tensor, h0: Tensor, w_x: Tensor, w_h: Tensor, b_x: Tensor, b_h: Tensor,
                     reverse: bool = False) -> Tensor:
        """Run :meth:`gru_cell` over the rows of ``xs``; returns every state, ``T x hid``.

        Row ``t`` of the result is the state after consuming row ``t``, so with
        ``reverse=True`` the scan starts at the last row but results stay aligned.
        """
        hid = h0.cols
        if w_x.shape != (xs.cols, 3 * hid) or w_h.shape != (hid, 3 * hid) or h0.rows != 1:
            raise ShapeMismatch(f"gru_sequence weights {w_x.shape}, {w_h.shape} for xs {xs.shape}, h0 {h0.shape}")
        if b_x.shape != (1, 3 * hid) or b_h.shape != (1, 3 * hid):
            raise ShapeMismatch("gru_sequence bias mismatch")
        steps = range(xs.rows - 1, -1, -1) if reverse else range(xs.rows)
        gx = xs.value @ w_x.value + b_x.value
        wh, bh = w_h.value, b_h.value
        n_rows = xs.rows
        prev = np.zeros((n_rows, hid))
        out = np.zeros((n_rows, hid))
        rz_all = np.zeros((n_rows, 2 * hid))
        n_all = np.zeros((n_rows, hid))
        ghn_all = np.zeros((n_rows, hid))
        h = h0.value[0]
        for t in steps:
            gh = h @ wh + bh[0]
            rz = _sigmoid(gx[t, : 2 * hid] + gh[: 2 * hid])
            n = np.tanh(gx[t, 2 * hid :] + rz[:hid] * gh[2 * hid :])
            z = rz[hid:]
            prev[t] = h
            h = (1.0 - z) * n + z * h
            out[t], rz_all[t], n_all[t], ghn_all[t] = h, rz, n, gh[2 * hid :]

        def backward(g):
            r_all, z_all = rz_all[:, :hid], rz_all[:, hid:]
            dgx = np.zeros((n_rows, 3 * hid))
            dgh = np.zeros((n_rows, 3 * hid))
            carry = np.zeros(hid)
            for t in reversed(steps):
                r, z, n = r_all[t], z_all[t], n_all[t]
                dh = g[t] + carry
                da_n = dh * (1.0 - z) * (1.0 - n * n)
                da_r = da_n * ghn_all[t] * r * (1.0 - r)
                da_z = dh * (prev[t] - n) * z * (1.0 - z)
                dgx[t, :hid], dgx[t, hid : 2 * hid], dgx[t, 2 * hid :] = da_r, da_z, da_n
                dgh[t, :hid], dgh[t, hid : 2 * hid], dgh[t, 2 * hid :] = da_r, da_z, da_n * r
                carry = dgh[t] @ wh.T + dh * z
            _accumulate(xs, dgx @ w_x.value.T)
            _accumulate(h0, carry.reshape(1, -1))
            _accumulate(w_x, xs.value.T @ dgx)
            _accumulate(w_h, prev.T @ dgh)
            _accumulate(b_x, dgx.sum(axis=0, keepdims=True))
            _accumulate(b_h, dgh.sum(axis=0, keepdims=True))

        return self._out(out, (xs, h0, w_x, w_h, b_x, b_h), backward)


# -- optimizers -----------------------------------------------------------


class SGD:
    def __init__(self, params: Sequence[Param], lr: float = 0.1):
        self.params = list(params)
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            p.value = p.value - self.lr * p.grad


class Adam:
    def __init__(self, params: Sequence[Param], lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for i, p in enumerate(self.params):
            g = p.grad
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            update = self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
            p.value = p.value - update
            if not np.isfinite(p.value).all():
                raise NonFiniteValue(f"parameter {p.name} became non-finite at optimizer step {self.t}")


# -- gradient checking ----------------------------------------------------


def grad_check(
    model_fn: Callable[[Tape], Tensor],
    params: Sequence[Param],
    epsilon: float = 1e-5,
    n_samples: int = 50,
    seed: int = 0,
    floor: float = 1e-6,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``model_fn`` builds a scalar on the tape it is given. At least
    ``n_samples`` coordinates (or all of them, if fewer exist) are probed;
    the relative error is ``|a - n| / max(|a|, |n|, floor)``.
    """
    params = list(params)
    zero_grads(params)
    tape = Tape()
    tape.backward(model_fn(tape))
    analytic = [p.grad.copy() for p in params]

    coords = [(pi, idx) for pi, p in enumerate(params) for idx in np.ndindex(p.shape)]
    if len(coords) > n_samples:
        rng = np.random.default_rng(seed)
        picks = rng.choice(len(coords), size=n_samples, replace=False)
        coords = [coords[i] for i in sorted(picks)]

    worst = 0.0
    for pi, idx in coords:
        p = params[pi]
        orig = p.value[idx]
        p.value[idx] = orig + epsilon
        plus = model_fn(Tape(record=False)).item()
        p.value[idx] = orig - epsilon
        minus = model_fn(Tape(record=False)).item()
        p.value[idx] = orig
        numeric = (plus - minus) / (2.0 * epsilon)
        a = analytic[pi][idx]
        err = abs(a - numeric) / max(abs(a), abs(numeric), floor)
        worst = max(worst, err)
    return worst


# -- checkpoints ----------------------------------------------------------

MAGIC = b"MWPFCKPT"
VERSION = 1


def save_checkpoint(path, params: Sequence[Param], meta: dict | None = None) -> None:
    """Write ``MAGIC | u32 version | u32 meta_len | meta json | u32 count | params``.

    Each parameter is ``u16 name_len | name | u32 rows | u32 cols | <f8 data``.
    """
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<II", VERSION, len(meta_bytes)), meta_bytes, struct.pack("<I", len(params))]
    for p in params:
        name = p.name.encode("utf-8")
        chunks.append(struct.pack("<H", len(name)) + name + struct.pack("<II", *p.shape))
        chunks.append(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a checkpoint file")
    pos = len(MAGIC)
    version, meta_len = struct.unpack_from("<II", data, pos)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos += 8
    meta = json.loads(data[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    arrays = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", data, pos)
        pos += 2
        name = data[pos : pos + name_len].decode("utf-8")
        pos += name_len
        rows, cols = struct.unpack_from("<II", data, pos)
        pos += 8
        size = rows * cols * 8
        arrays[name] = np.frombuffer(data[pos : pos + size], dtype="<f8").reshape(rows, cols).astype(np.float64)
        pos += size
    if pos != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return arrays, meta
