"""Losses, metrics, optimizers, the training loop, parameter counting and
checkpoints."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import grad_engine as ge
from .cells import CellParams, VqcDescription, run_sequence
from .errors import CheckpointError, ConfigError, DivergenceError, ShapeError, UndefinedMetricError

CHECKPOINT_FORMAT = "qkanseq-checkpoint"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# metrics


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    yhat = np.asarray(yhat, dtype=np.float64).reshape(-1)
    if y.shape != yhat.shape:
        raise ShapeError(f"length mismatch: {y.shape[0]} targets vs {yhat.shape[0]} predictions")
    if y.size == 0:
        raise ShapeError("metrics need at least one sample")
    return y, yhat


def mse(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean((y - yhat) ** 2))


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


def r2(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise UndefinedMetricError("R^2 is undefined for a constant target")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


@dataclass
class Metrics:
    mse: float
    mae: float
    r2: float

    @classmethod
    def of(cls, y, yhat):
        try:
            score = r2(y, yhat)
        except UndefinedMetricError:
            score = float("nan")
        return cls(mse(y, yhat), mae(y, yhat), score)


# ---------------------------------------------------------------------------
# optimizers; state and params are dicts of arrays keyed by parameter name


def _check_shapes(params, grads):
    for k, p in params.items():
        if k not in grads or np.shape(grads[k]) != np.shape(p):
            raise ShapeError(f"gradient for {k!r} missing or mis-shaped")


def _wrap(params, grads):
    if isinstance(params, dict):
        return params, grads, False
    return {"x": params}, {"x": grads}, True


def adam_step(state, params, grads, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One Adam update with bias correction; returns ``(state, params)``."""
    params, grads, bare = _wrap(params, grads)
    _check_shapes(params, grads)
    if state is None:
        state = {"kind": "adam", "t": 0, "m": {}, "v": {}}
    t = state["t"] + 1
    new_m, new_v, new_p = {}, {}, {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        m = beta1 * state["m"].get(k, 0.0) + (1 - beta1) * g
        v = beta2 * state["v"].get(k, 0.0) + (1 - beta2) * g * g
        mhat = m / (1 - beta1 ** t)
        vhat = v / (1 - beta2 ** t)
        new_m[k], new_v[k] = m, v
        new_p[k] = p - lr * mhat / (np.sqrt(vhat) + eps)
    state = {"kind": "adam", "t": t, "m": new_m, "v": new_v}
    return state, (new_p["x"] if bare else new_p)


def rmsprop_step(state, params, grads, lr, decay=0.99, eps=1e-8):
    """RMSprop: ``p -= lr * g / sqrt(v + eps)`` with running mean square ``v``."""
    params, grads, bare = _wrap(params, grads)
    _check_shapes(params, grads)
    if state is None:
        state = {"kind": "rmsprop", "t": 0, "v": {}}
    new_v, new_p = {}, {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=np.float64)
        v = decay * state["v"].get(k, 0.0) + (1 - decay) * g * g
        new_v[k] = v
        new_p[k] = p - lr * g / np.sqrt(v + eps)
    state = {"kind": "rmsprop", "t": state["t"] + 1, "v": new_v}
    return state, (new_p["x"] if bare else new_p)


OPTIMIZERS = {"adam": adam_step, "rmsprop": rmsprop_step}


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    epochs: int = 30
    optimizer: str = "adam"
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        bad = []
        if not (self.learning_rate >= 0 and math.isfinite(self.learning_rate)):
            bad.append("learning_rate")
        if int(self.epochs) < 1:
            bad.append("epochs")
        if int(self.batch_size) < 1:
            bad.append("batch_size")
        if str(self.optimizer).lower() not in OPTIMIZERS:
            bad.append("optimizer")
        if bad:
            raise ConfigError(f"invalid training settings: {', '.join(bad)}", bad)
        self.optimizer = str(self.optimizer).lower()
        self.epochs = int(self.epochs)
        self.batch_size = int(self.batch_size)
        self.seed = int(self.seed)


HISTORY_COLUMNS = ("epoch", "train_loss", "test_loss", "mae", "r2")


@dataclass
class History:
    rows: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)

    def last(self):
        return self.rows[-1]

    def column(self, name):
        return [r[name] for r in self.rows]


def predict(model: CellParams, X, batch=512) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ShapeError("cannot predict on an empty split")
    out = [np.asarray(run_sequence(model, X[s:s + batch]))[:, 0] for s in range(0, X.shape[0], batch)]
    return np.concatenate(out)


def evaluate(model: CellParams, X, y):
    yhat = predict(model, X)
    return Metrics.of(y, yhat), yhat


def batch_loss_and_grads(model: CellParams, Xb, yb):
    tape = ge.Tape()
    bound, leaves = model.bind(tape)
    pred = run_sequence(bound, Xb)
    loss = ge.mse_loss(pred[:, 0], yb)
    grads = tape.backward(loss)
    return float(loss.value), {k: grads[n] for k, n in leaves.items()}


def train(model: CellParams, data, cfg: TrainConfig, log=None):
    """Mini-batch training; returns ``(History, trained model, optimizer state)``.

    Each epoch shuffles the training windows with a generator seeded from
    ``cfg.seed``.  ``train_loss`` is the sample-weighted mean of the batch
    losses seen during the epoch; test metrics are computed after it.
    """
    Xtr, ytr = data.part("train")
    Xte, yte = data.part("test")
    Xva, yva = data.part("val")
    if len(ytr) == 0 or len(yte) == 0:
        raise ShapeError("training and test partitions must be non-empty")
    step = OPTIMIZERS[cfg.optimizer]
    rng = np.random.default_rng(cfg.seed)
    model = model.copy()
    params = model.params
    state = None
    hist = History()
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(ytr))
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = batch_loss_and_grads(model.with_params(params), Xtr[idx], ytr[idx])
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise DivergenceError(f"non-finite loss or gradient at epoch {epoch}, batch starting {s}")
            total += loss * len(idx)
            state, params = step(state, params, grads, cfg.learning_rate)
        model = model.with_params(params)
        m, _ = evaluate(model, Xte, yte)
        if len(yva):
            hist.val_loss.append(evaluate(model, Xva, yva)[0].mse)
        hist.rows.append(
            {"epoch": epoch, "train_loss": total / len(ytr), "test_loss": m.mse, "mae": m.mae, "r2": m.r2}
        )
        if log is not None:
            log(hist.rows[-1])
    return hist, model, state


# ---------------------------------------------------------------------------
# parameter counting


@dataclass
class ParamReport:
    classical: int
    quantum: int

    @property
    def total(self):
        return self.classical + self.quantum


def count_params(model: CellParams) -> ParamReport:
    """Rotation angles count as quantum; every other trainable value is classical."""
    q = c = 0
    for name, arr in model.params.items():
        size = int(np.size(ge.value(arr)))
        if name.endswith(".theta"):
            q += size
        else:
            c += size
    return ParamReport(classical=c, quantum=q)


# ---------------------------------------------------------------------------
# CSV outputs


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def write_history(path, hist: History):
    write_csv(path, HISTORY_COLUMNS, [[r[c] for c in HISTORY_COLUMNS] for r in hist.rows])


def write_predictions(path, y, yhat):
    write_csv(path, ("index", "target", "prediction"), [[k, a, b] for k, (a, b) in enumerate(zip(y, yhat))])


def write_params(path, reports):
    write_csv(path, ("model", "classical", "quantum", "total"),
              [[name, r.classical, r.quantum, r.total] for name, r in reports])


# ---------------------------------------------------------------------------
# checkpoints


def _enc_array(a):
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": " ".join(f"{x:.17g}" for x in a.reshape(-1))}


def _dec_array(d):
    shape = tuple(int(s) for s in d["shape"])
    text = d["data"].split()
    arr = np.array([float(x) for x in text], dtype=np.float64)
    if arr.size != int(np.prod(shape)):
        raise CheckpointError(f"array payload has {arr.size} values, expected shape {shape}")
    return arr.reshape(shape)


def _model_meta(model):
    meta = {
        "kind": model.kind, "n": model.n, "m": model.m, "out_dim": model.out_dim, "L": model.L,
        "latent_dim": model.latent_dim, "latent_out": model.latent_out,
        "hqkan_shared": model.hqkan_shared, "use_offsets": model.use_offsets, "vqc": None,
    }
    if model.vqc is not None:
        meta["vqc"] = {"n_qubits": model.vqc.n_qubits, "depth": model.vqc.depth, "n_vqcs": model.vqc.n_vqcs}
    return meta


def save_checkpoint(model: CellParams, opt_state, path):
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": _model_meta(model),
        "params": {k: _enc_array(ge.value(v)) for k, v in model.params.items()},
        "optimizer": None,
    }
    if opt_state is not None:
        opt = {"kind": opt_state["kind"], "t": int(opt_state["t"])}
        for slot in ("m", "v"):
            if slot in opt_state:
                opt[slot] = {k: _enc_array(v) for k, v in opt_state[slot].items()}
        doc["optimizer"] = opt
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, indent=1))
        fh.write("\n")


def load_checkpoint(path, with_optimizer=False):
    """Read a checkpoint; returns the model (and optimizer state if asked)."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path}: not a qkanseq checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    try:
        meta = dict(doc["model"])
        vqc = meta.pop("vqc")
        params = {k: _dec_array(v) for k, v in doc["params"].items()}
        model = CellParams(params=params, vqc=VqcDescription(**vqc) if vqc else None, **meta)
        opt = doc.get("optimizer")
        state = None
        if opt is not None:
            state = {"kind": opt["kind"], "t": int(opt["t"])}
            for slot in ("m", "v"):
                if slot in opt:
                    state[slot] = {k: _dec_array(v) for k, v in opt[slot].items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from exc
    if with_optimizer:
        return model, state
    return model
