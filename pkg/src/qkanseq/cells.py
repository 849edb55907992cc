"""Recurrent cells (LSTM, QLSTM, QKAN-LSTM, HQKAN-LSTM) and the sequence runner.

Every gate reads ``v_t = [h_{t-1}; x_t]``.  The step functions accept
single vectors or batches along a leading axis, and are written against
:mod:`qkanseq.grad_engine` so the same code runs plain or on a tape.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import grad_engine as ge
from .errors import ConfigError, ShapeError
from .kan import HqkanBlock, QkanLayer

GATES = ("f", "i", "C", "o")
KINDS = ("lstm", "qlstm", "qkan", "hqkan")


@dataclass
class VqcDescription:
    n_qubits: int
    depth: int = 1
    n_vqcs: int = 4

    def __post_init__(self):
        if self.depth >= 1 and self.n_qubits < 2:
            raise ConfigError("CNOT entanglers need at least two qubits", ["n_qubits"])
        if self.n_vqcs not in (4, 5, 6):
            raise ConfigError("n_vqcs must be 4 (gates), 5 (+hidden map) or 6 (+readout)", ["n_vqcs"])

    @property
    def angles_per_vqc(self):
        return self.n_qubits * (self.depth + 1)


@dataclass
class CellParams:
    """Trainable parameters of one cell plus the linear output head.

    ``params`` maps dotted names to arrays (or tape nodes once bound).
    Names ending in ``.theta`` are rotation angles; everything else is
    classical.
    """

    kind: str
    n: int
    m: int
    params: dict
    out_dim: int = 1
    L: int = 1
    latent_dim: int = 2
    latent_out: int = 1
    hqkan_shared: bool = True
    use_offsets: bool = False
    vqc: VqcDescription = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown cell kind {self.kind!r}", ["kind"])
        if self.kind == "qlstm":
            if self.vqc is None:
                raise ConfigError("qlstm cells need a VqcDescription", ["vqc"])
            if self.d > self.vqc.n_qubits:
                raise ConfigError(
                    f"qlstm gate input has {self.d} components but only {self.vqc.n_qubits} qubits",
                    ["n_qubits"],
                )

    @property
    def d(self):
        return self.n + self.m

    def names(self):
        return list(self.params)

    def bind(self, tape):
        """Copy with every parameter replaced by a leaf on ``tape``."""
        leaves = {k: tape.leaf(v) for k, v in self.params.items()}
        return dataclasses.replace(self, params=leaves), leaves

    def with_params(self, params):
        return dataclasses.replace(self, params=dict(params))

    def copy(self):
        return self.with_params({k: np.array(v, copy=True) for k, v in self.params.items()})

    def qkan_layer(self, gate) -> QkanLayer:
        p = self.params
        return QkanLayer(
            w=p[f"{gate}.w"], theta=p[f"{gate}.theta"], b=p.get(f"{gate}.b"), use_offsets=self.use_offsets
        )

    def hqkan_block(self, prefix) -> HqkanBlock:
        p = self.params
        return HqkanBlock(p[f"{prefix}.enc_W"], p[f"{prefix}.enc_b"], self.qkan_layer(prefix),
                          p[f"{prefix}.dec_W"], p[f"{prefix}.dec_b"])


# ---------------------------------------------------------------------------
# construction


def _uniform(rng, lim, shape):
    return rng.uniform(-lim, lim, size=shape)


def _qkan_arrays(prefix, d, m, L, rng, use_offsets, zero):
    if zero:
        layer = QkanLayer.zeros(d, m, L)
    else:
        layer = QkanLayer.init(d, m, L, rng, use_offsets)
    out = {f"{prefix}.w": layer.w, f"{prefix}.theta": layer.theta}
    if use_offsets:
        out[f"{prefix}.b"] = layer.b
    return out


def _hqkan_arrays(prefix, d, out, latent_dim, latent_out, L, rng, use_offsets, zero):
    if zero:
        enc_W = np.zeros((latent_dim, d))
        dec_W = np.zeros((out, latent_out))
    else:
        enc_W = _uniform(rng, 1.0 / np.sqrt(d), (latent_dim, d))
        dec_W = _uniform(rng, 1.0 / np.sqrt(latent_out), (out, latent_out))
    arrs = {f"{prefix}.enc_W": enc_W, f"{prefix}.enc_b": np.zeros(latent_dim)}
    arrs.update(_qkan_arrays(prefix, latent_dim, latent_out, L, rng, use_offsets, zero))
    arrs[f"{prefix}.dec_W"] = dec_W
    arrs[f"{prefix}.dec_b"] = np.zeros(out)
    return arrs


def init_cell(kind, n=1, m=1, seed=None, *, zero=False, out_dim=1, L=1, latent_dim=2,
              latent_out=1, hqkan_shared=True, use_offsets=False, n_qubits=None, depth=1,
              n_vqcs=4) -> CellParams:
    """Build a cell with freshly initialised (or all-zero) parameters.

    Affine weights are uniform on +-1/sqrt(fan_in) with zero biases; DARUAN
    angles are uniform on (-pi, pi] with encoding weights 1, 2, 4, ...
    ``zero=True`` zeroes every gate parameter (the head is still random
    unless it is zeroed by the caller).
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown cell kind {kind!r}", ["kind"])
    for name, val in (("n", n), ("m", m), ("L", L), ("out_dim", out_dim)):
        if int(val) < 1:
            raise ConfigError(f"{name} must be >= 1, got {val}", [name])
    rng = np.random.default_rng(seed)
    d = n + m
    params = {}
    vqc = None
    if kind == "lstm":
        lim = 1.0 / np.sqrt(m)
        for g in GATES:
            params[f"{g}.W"] = np.zeros((m, d)) if zero else _uniform(rng, lim, (m, d))
            params[f"{g}.b"] = np.zeros(m) if zero else _uniform(rng, lim, m)
    elif kind == "qkan":
        for g in GATES:
            params.update(_qkan_arrays(g, d, m, L, rng, use_offsets, zero))
    elif kind == "hqkan":
        if hqkan_shared:
            params.update(_hqkan_arrays("gates", d, 4 * m, latent_dim, latent_out, L, rng, use_offsets, zero))
        else:
            for g in GATES:
                params.update(_hqkan_arrays(g, d, m, latent_dim, latent_out, L, rng, use_offsets, zero))
    else:
        vqc = VqcDescription(n_qubits=n_qubits if n_qubits is not None else d, depth=depth, n_vqcs=n_vqcs)
        for k in range(vqc.n_vqcs):
            shape = (vqc.depth + 1, vqc.n_qubits)
            params[f"vqc{k}.theta"] = np.zeros(shape) if zero else rng.uniform(-1.0, 1.0, shape)
    lim = 1.0 / np.sqrt(m)
    params["head.W"] = _uniform(rng, lim, (out_dim, m))
    params["head.b"] = np.zeros(out_dim)
    return CellParams(kind=kind, n=n, m=m, params=params, out_dim=out_dim, L=L, latent_dim=latent_dim,
                      latent_out=latent_out, hqkan_shared=hqkan_shared, use_offsets=use_offsets, vqc=vqc)


# ---------------------------------------------------------------------------
# steps


def _offsets(p, prefix):
    key = f"{prefix}.b"
    if key in p.params:
        return p.params[key]
    w = ge.value(p.params[f"{prefix}.w"])
    return np.zeros(w.shape)


def _qkan_map(v, p, prefix):
    return ge.qkan(v, p.params[f"{prefix}.w"], _offsets(p, prefix), p.params[f"{prefix}.theta"])


def _hqkan_map(v, p, prefix):
    P = p.params
    z = ge.linear(v, P[f"{prefix}.enc_W"], P[f"{prefix}.enc_b"])
    q = _qkan_map(z, p, prefix)
    return ge.linear(q, P[f"{prefix}.dec_W"], P[f"{prefix}.dec_b"])


def _pad(v, width):
    extra = width - v.shape[-1]
    if extra == 0:
        return v
    return ge.concat([v, np.zeros(v.shape[:-1] + (extra,))])


def _vqc_map(v, p, k, m):
    return ge.vqc(_pad(v, p.vqc.n_qubits), p.params[f"vqc{k}.theta"])[:, :m]


def _check_dims(x_t, h_prev, c_prev, p):
    if x_t.shape[-1] != p.n or h_prev.shape[-1] != p.m or c_prev.shape[-1] != p.m:
        raise ShapeError(
            f"expected x (..., {p.n}), h/c (..., {p.m}); got {x_t.shape}, {h_prev.shape}, {c_prev.shape}"
        )


def _promote(x):
    if isinstance(x, ge.Node):
        return x, x.value.ndim == 1
    x = np.asarray(x, dtype=np.float64)
    return (x.reshape(1, -1), True) if x.ndim == 1 else (x, False)


def _gated_update(pre, c_prev):
    hc = ge.lstm_update(pre, c_prev)
    m = ge.value(hc).shape[-1] // 2
    return hc[..., :m], hc[..., m:]


def _gate_values(pre, c_prev):
    pre = ge.value(pre)
    m = pre.shape[-1] // 4
    f, i, o = (ge.sigmoid(pre[..., k * m:(k + 1) * m]) for k in (0, 1, 3))
    cand = np.tanh(pre[..., 2 * m:3 * m])
    return f, i, cand, o


def _stacked_preactivations(v, p: CellParams):
    P = p.params
    if p.kind == "lstm":
        return ge.concat([ge.linear(v, P[f"{g}.W"], P[f"{g}.b"]) for g in GATES])
    if p.kind == "qkan":
        return ge.qkan_multi(v, [(P[f"{g}.w"], _offsets(p, g), P[f"{g}.theta"]) for g in GATES])
    if p.kind == "hqkan":
        if p.hqkan_shared:
            return _hqkan_map(v, p, "gates")
        return ge.concat([_hqkan_map(v, p, g) for g in GATES])
    return ge.concat([_vqc_map(v, p, k, p.m) for k in range(len(GATES))])


def gate_preactivations(v, p: CellParams):
    """Pre-activation of every gate for concatenated inputs ``v``."""
    pre = _stacked_preactivations(v, p)
    return {g: pre[..., k * p.m:(k + 1) * p.m] for k, g in enumerate(GATES)}


def cell_step(x_t, h_prev, c_prev, p: CellParams, return_gates=False):
    """One recurrence step for any cell kind; returns ``(h, c)``."""
    _check_dims(ge.value(x_t), ge.value(h_prev), ge.value(c_prev), p)
    x2, single = _promote(x_t)
    h2, _ = _promote(h_prev)
    c2, _ = _promote(c_prev)
    v = ge.concat([h2, x2])
    pre = _stacked_preactivations(v, p)
    h, c = _gated_update(pre, c2)
    gates = _gate_values(pre, ge.value(c2)) if return_gates else None
    if p.kind == "qlstm" and p.vqc.n_vqcs >= 5:
        h = _vqc_map(h, p, 4, p.m)
    if single and not isinstance(h, ge.Node):
        h, c = h[0], c[0]
        if gates is not None:
            gates = tuple(g[0] for g in gates)
    if return_gates:
        return h, c, gates
    return h, c


def _require(p, kind):
    if p.kind != kind:
        raise ConfigError(f"expected a {kind} cell, got {p.kind}", ["kind"])


def lstm_step(x_t, h_prev, c_prev, p):
    _require(p, "lstm")
    return cell_step(x_t, h_prev, c_prev, p)


def qkan_lstm_step(x_t, h_prev, c_prev, p):
    _require(p, "qkan")
    return cell_step(x_t, h_prev, c_prev, p)


def hqkan_lstm_step(x_t, h_prev, c_prev, p):
    _require(p, "hqkan")
    return cell_step(x_t, h_prev, c_prev, p)


def qlstm_step(x_t, h_prev, c_prev, p):
    _require(p, "qlstm")
    return cell_step(x_t, h_prev, c_prev, p)


def readout(h, p: CellParams):
    if p.kind == "qlstm" and p.vqc.n_vqcs == 6:
        h = _vqc_map(h, p, 5, p.m)
    return ge.linear(h, p.params["head.W"], p.params["head.b"])


def run_sequence(p: CellParams, X, return_states=False):
    """Run the cell over ``X`` (``(T, n)`` or ``(B, T, n)``) from zero state.

    Returns ``head(h_T)``: ``(out_dim,)`` or ``(B, out_dim)``.
    """
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != p.n:
        raise ShapeError(f"expected sequences of shape (T, {p.n}) or (B, T, {p.n}), got {X.shape}")
    if X.shape[1] < 1:
        raise ValueError("cannot run an empty sequence")
    B, T, _ = X.shape
    h = np.zeros((B, p.m))
    c = np.zeros((B, p.m))
    states = []
    for t in range(T):
        h, c = cell_step(X[:, t, :], h, c, p)
        if return_states:
            states.append((ge.value(h).copy(), ge.value(c).copy()))
    y = readout(h, p)
    if single and not isinstance(y, ge.Node):
        y = y[0]
    if return_states:
        return y, states
    return y
