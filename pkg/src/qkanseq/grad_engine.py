"""Tape-based reverse-mode differentiation over numpy arrays.

Model code is written once against the functions in this module
(:func:`linear`, :func:`sigmoid`, :func:`qkan`, ...).  Called on plain
arrays they evaluate directly; called with :class:`Node` operands they also
record onto the operand's tape so :func:`backward` can replay the
vector-Jacobian products in reverse.

DARUAN layers and VQC circuits are recorded as single fused nodes.  The
DARUAN node's VJP is the analytic circuit gradient; the VQC node's VJP
uses the two-term parameter-shift rule, for encoding angles too.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import kan, kernels
from .errors import TapeError


class Node:
    __slots__ = ("tape", "index", "value")
    __array_priority__ = 1000.0

    def __init__(self, tape, index, value):
        self.tape = tape
        self.index = index
        self.value = value

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        prim = self.tape._prims[self.index]
        return f"Node(#{self.index} {prim}, shape={self.value.shape})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)


_VJP: dict[str, Callable] = {}


def register_vjp(prim: str):
    def deco(fn):
        _VJP[prim] = fn
        return fn

    return deco


class Tape:
    """Append-only record of primitive applications.

    Every node stores its primitive id, operands (nodes or constant arrays),
    forward value and keyword attributes.  Leaves carry the primitive
    ``"leaf"``.
    """

    def __init__(self):
        self._prims: list[str] = []
        self._inputs: list[tuple] = []
        self._values: list[np.ndarray] = []
        self._attrs: list[dict] = []
        self._consumed = False

    def __len__(self):
        return len(self._values)

    def _append(self, prim, inputs, value, attrs):
        if self._consumed:
            raise TapeError("tape was already consumed by a backward pass")
        node = Node(self, len(self._values), value)
        self._prims.append(prim)
        self._inputs.append(inputs)
        self._values.append(value)
        self._attrs.append(attrs)
        return node

    def leaf(self, value) -> Node:
        return self._append("leaf", (), np.array(value, dtype=np.float64), {})

    def record(self, prim: str, inputs, output, **attrs) -> Node:
        if prim not in _VJP:
            raise TapeError(f"no VJP registered for primitive {prim!r}")
        checked = []
        for x in inputs:
            if isinstance(x, Node):
                if x.tape is not self or x.index >= len(self._values):
                    raise TapeError(f"operand {x!r} does not belong to this tape")
            elif x is not None and not isinstance(x, (np.ndarray, float, int)):
                raise TapeError(f"operand of type {type(x).__name__} is neither a node nor a constant")
            checked.append(x)
        return self._append(prim, tuple(checked), np.asarray(output, dtype=np.float64), attrs)

    def backward(self, loss: Node) -> "Gradients":
        if not isinstance(loss, Node) or loss.tape is not self:
            raise TapeError("loss must be a node recorded on this tape")
        if loss.value.size != 1:
            raise TapeError(f"loss must be scalar, got shape {loss.value.shape}")
        if self._consumed:
            raise TapeError("tape was already consumed by a backward pass")
        self._consumed = True
        cot: list = [None] * len(self._values)
        cot[loss.index] = np.ones_like(loss.value)
        for k in range(loss.index, -1, -1):
            g = cot[k]
            if g is None or self._prims[k] == "leaf":
                continue
            ins = self._inputs[k]
            vals = [x.value if type(x) is Node else x for x in ins]
            grads = _VJP[self._prims[k]](g, vals, self._values[k], **self._attrs[k])
            for x, gx in zip(ins, grads):
                if gx is not None and type(x) is Node:
                    if gx.shape != x.value.shape:
                        gx = _unbroadcast(gx, x.value.shape)
                    j = x.index
                    cot[j] = gx if cot[j] is None else cot[j] + gx
        out = {}
        for k, prim in enumerate(self._prims):
            if prim == "leaf":
                out[k] = cot[k] if cot[k] is not None else np.zeros_like(self._values[k])
        return Gradients(self, out)


class Gradients:
    """Leaf cotangents, looked up by leaf node."""

    def __init__(self, tape, by_index):
        self._tape = tape
        self._by_index = by_index

    def __getitem__(self, node: Node) -> np.ndarray:
        if node.tape is not self._tape or node.index not in self._by_index:
            raise TapeError(f"{node!r} is not a leaf of this tape")
        return self._by_index[node.index]

    def __len__(self):
        return len(self._by_index)


def record(tape: Tape, prim: str, inputs, output, **attrs) -> Node:
    return tape.record(prim, inputs, output, **attrs)


def backward(tape: Tape, loss: Node) -> Gradients:
    return tape.backward(loss)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


def _tape_of(*xs):
    tape = None
    for x in xs:
        if isinstance(x, Node):
            if tape is None:
                tape = x.tape
            elif x.tape is not tape:
                raise TapeError("operands come from different tapes")
    return tape


def _val(x):
    return x.value if isinstance(x, Node) else x


def value(x) -> np.ndarray:
    """Forward value of a node or constant."""
    return np.asarray(_val(x))


def _apply(prim, fn, *xs, **attrs):
    out = fn(*[_val(x) for x in xs])
    tape = _tape_of(*xs)
    if tape is None:
        return out
    # operands were vetted by _tape_of; skip the public record() checks
    return tape._append(prim, xs, np.asarray(out, dtype=np.float64), attrs)


# ---------------------------------------------------------------------------
# elementwise / linear primitives


def add(a, b):
    return _apply("add", np.add, a, b)


@register_vjp("add")
def _(g, vals, out):
    return g, g


def sub(a, b):
    return _apply("sub", np.subtract, a, b)


@register_vjp("sub")
def _(g, vals, out):
    return g, -g


def mul(a, b):
    return _apply("mul", np.multiply, a, b)


@register_vjp("mul")
def _(g, vals, out):
    a, b = vals
    return g * b, g * a


def neg(a):
    return _apply("neg", np.negative, a)


@register_vjp("neg")
def _(g, vals, out):
    return (-g,)


def square(a):
    return _apply("square", np.square, a)


@register_vjp("square")
def _(g, vals, out):
    return (2.0 * g * vals[0],)


def matmul(a, b):
    return _apply("matmul", np.matmul, a, b)


@register_vjp("matmul")
def _(g, vals, out):
    a, b = (np.asarray(v) for v in vals)
    if a.ndim == 1 and b.ndim == 1:
        return g * b, g * a
    if a.ndim == 1:
        return b @ g, np.outer(a, g)
    if b.ndim == 1:
        return np.outer(g, b), a.T @ g
    return g @ b.T, a.T @ g


def linear(x, W, b=None):
    """``x @ W.T + b`` over the last axis of ``x``."""
    if b is None:
        return _apply("linear", lambda x_, W_: x_ @ W_.T, x, W)
    return _apply("linear", lambda x_, W_, b_: x_ @ W_.T + b_, x, W, b)


@register_vjp("linear")
def _(g, vals, out):
    x, W = np.asarray(vals[0]), np.asarray(vals[1])
    gx = g @ W
    g2 = g.reshape(-1, g.shape[-1])
    x2 = x.reshape(-1, x.shape[-1])
    gW = g2.T @ x2
    if len(vals) == 3:
        return gx, gW, g2.sum(axis=0)
    return gx, gW


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(x):
    return _apply("sigmoid", _sigmoid, x)


@register_vjp("sigmoid")
def _(g, vals, out):
    return (g * out * (1.0 - out),)


def tanh(x):
    return _apply("tanh", np.tanh, x)


@register_vjp("tanh")
def _(g, vals, out):
    return (g * (1.0 - out * out),)


def _lstm_update(pre, c_prev):
    m = pre.shape[-1] // 4
    sf, si = _sigmoid(pre[..., :m]), _sigmoid(pre[..., m:2 * m])
    tc, so = np.tanh(pre[..., 2 * m:3 * m]), _sigmoid(pre[..., 3 * m:])
    c = sf * c_prev + si * tc
    return np.concatenate([so * np.tanh(c), c], axis=-1)


def lstm_update(pre, c_prev):
    """Fused LSTM gating from stacked pre-activations ``[f, i, C, o]``.

    ``c = σ(f)c_prev + σ(i)tanh(C)`` and ``h = σ(o)tanh(c)``; returns
    ``[h, c]`` joined on the last axis.
    """
    return _apply("lstm_update", _lstm_update, pre, c_prev)


@register_vjp("lstm_update")
def _(g, vals, out):
    pre, c_prev = vals
    m = out.shape[-1] // 2
    c = out[..., m:]
    sf, si = _sigmoid(pre[..., :m]), _sigmoid(pre[..., m:2 * m])
    tc, so = np.tanh(pre[..., 2 * m:3 * m]), _sigmoid(pre[..., 3 * m:])
    th = np.tanh(c)
    gh = g[..., :m]
    gc = g[..., m:] + gh * so * (1.0 - th * th)
    gpre = np.concatenate(
        [gc * c_prev * sf * (1.0 - sf), gc * tc * si * (1.0 - si), gc * si * (1.0 - tc * tc),
         gh * th * so * (1.0 - so)],
        axis=-1,
    )
    return gpre, gc * sf


def concat(xs, axis=-1):
    xs = list(xs)
    return _apply("concat", lambda *vs: np.concatenate(vs, axis=axis), *xs, axis=axis)


@register_vjp("concat")
def _(g, vals, out, axis):
    ax = axis % g.ndim
    out_, lo = [], 0
    for v in vals:
        hi = lo + np.shape(v)[ax]
        out_.append(g[(slice(None),) * ax + (slice(lo, hi),)])
        lo = hi
    return tuple(out_)


def getitem(x, idx):
    return _apply("getitem", lambda v: v[idx], x, idx=idx)


@register_vjp("getitem")
def _(g, vals, out, idx):
    full = np.zeros(np.shape(vals[0]))
    if _basic_index(idx):
        full[idx] = g
    else:
        np.add.at(full, idx, g)
    return (full,)


def _basic_index(idx):
    parts = idx if isinstance(idx, tuple) else (idx,)
    return all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in parts)


def reduce_sum(x):
    return _apply("sum", lambda v: np.sum(v), x)


@register_vjp("sum")
def _(g, vals, out):
    return (np.broadcast_to(g, np.shape(vals[0])).copy(),)


def mean(x):
    return _apply("mean", lambda v: np.mean(v), x)


@register_vjp("mean")
def _(g, vals, out):
    shape = np.shape(vals[0])
    return (np.full(shape, float(g) / max(1, int(np.prod(shape)))),)


def mse_loss(pred, target):
    return mean(square(sub(pred, target)))


# ---------------------------------------------------------------------------
# fused quantum primitives


def _qkan_eval(v, w, b, theta):
    return kernels.qkan_forward(
        np.ascontiguousarray(v, dtype=np.float64),
        np.ascontiguousarray(w, dtype=np.float64),
        np.ascontiguousarray(b, dtype=np.float64),
        np.ascontiguousarray(theta, dtype=np.float64),
    )


def qkan(v, w, b, theta):
    """QKAN layer on a batch ``v`` of shape ``(B, d)``; ``b`` may be a constant."""
    return _apply("qkan", _qkan_eval, v, w, b, theta)


@register_vjp("qkan")
def _(g, vals, out):
    v, w, b, theta = (np.ascontiguousarray(x, dtype=np.float64) for x in vals)
    dv, dw, db, dth = kan.qkan_layer_vjp(v, w, b, theta, g)
    return dv, dw, db, dth


def _qkan_multi_eval(v, *flat):
    w, b, theta = (np.concatenate(flat[k::3], axis=1) for k in range(3))
    return _qkan_eval(v, w, b, theta)


def qkan_multi(v, layers):
    """Several QKAN layers on the same input, outputs joined on the last axis.

    ``layers`` is a sequence of ``(w, b, theta)``; one kernel call covers all.
    """
    flat = [x for layer in layers for x in layer]
    return _apply("qkan_multi", _qkan_multi_eval, v, *flat)


@register_vjp("qkan_multi")
def _(g, vals, out):
    v = np.ascontiguousarray(vals[0], dtype=np.float64)
    flat = vals[1:]
    w, b, theta = (np.ascontiguousarray(np.concatenate(flat[k::3], axis=1), dtype=np.float64) for k in range(3))
    dv, dw, db, dth = kan.qkan_layer_vjp(v, w, b, theta, g)
    grads = [dv]
    lo = 0
    for x in flat[0::3]:
        hi = lo + x.shape[1]
        grads.extend((dw[:, lo:hi], db[:, lo:hi], dth[:, lo:hi]))
        lo = hi
    return tuple(grads)


def _vqc_eval(v, angles):
    return kernels.vqc_expect(
        np.ascontiguousarray(v, dtype=np.float64), np.ascontiguousarray(angles, dtype=np.float64)
    )


def vqc(v, angles):
    """Per-wire <Z> of the RealAmplitudes circuit for a batch ``v`` ``(B, nq)``."""
    return _apply("vqc", _vqc_eval, v, angles)


@register_vjp("vqc")
def _(g, vals, out):
    v, angles = (np.ascontiguousarray(x, dtype=np.float64) for x in vals)
    return kernels.vqc_vjp(v, angles, np.ascontiguousarray(g))


# ---------------------------------------------------------------------------
# gradient helpers


def engine_grad(fn, params: dict):
    """Evaluate ``fn(params)`` on a fresh tape; return (loss, grads by name)."""
    tape = Tape()
    leaves = {k: tape.leaf(v) for k, v in params.items()}
    loss = fn(leaves)
    grads = tape.backward(loss)
    return float(loss.value), {k: grads[n] for k, n in leaves.items()}


def _as_dict(params):
    if isinstance(params, dict):
        return {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}, False
    return {"x": np.asarray(params, dtype=np.float64)}, True


def numeric_grad(fn, params, step=1e-5):
    """Central differences of a scalar function of a parameter dict."""
    params, _ = _as_dict(params)
    out = {}
    for name, arr in params.items():
        g = np.zeros_like(arr)
        for i in range(arr.size):
            plus = {k: v.copy() for k, v in params.items()}
            minus = {k: v.copy() for k, v in params.items()}
            plus[name].flat[i] += step
            minus[name].flat[i] -= step
            g.flat[i] = (float(value(fn(plus))) - float(value(fn(minus)))) / (2 * step)
        out[name] = g
    return out


def finite_diff_check(fn, params, step=1e-5, analytic=None) -> float:
    """Max relative error between engine and central-difference gradients.

    ``fn`` maps a dict of parameters to a scalar and must be written with the
    functions of this module.  A bare array is accepted and wrapped as
    ``{"x": array}``.  ``analytic`` overrides the engine gradient.
    Relative error uses ``max(|analytic|, |numeric|, 1e-8)`` as denominator.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    params, bare = _as_dict(params)
    f = (lambda p: fn(p["x"])) if bare else fn
    if analytic is None:
        _, analytic = engine_grad(f, params)
    elif bare:
        analytic = {"x": np.asarray(analytic, dtype=np.float64)}
    numeric = numeric_grad(f, params, step)
    worst = 0.0
    for k in params:
        a, n = analytic[k], numeric[k]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
        if a.size:
            worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst
