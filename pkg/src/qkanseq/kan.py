"""Kolmogorov-Arnold layers whose edges are DARUANs, and the encoder ->
latent QKAN -> decoder block (HQKAN)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .daruan import DaruanParams
from .errors import ShapeError


@dataclass
class QkanLayer:
    """A ``d x m`` grid of DARUAN edges; output node ``j`` sums column ``j``.

    Edge parameters are stored stacked: ``w`` and ``b`` are ``(d, m, L)``,
    ``theta`` is ``(d, m, L+1, 2)``.
    """

    w: np.ndarray
    theta: np.ndarray
    b: np.ndarray = None
    use_offsets: bool = False

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)
        if self.w.ndim != 3:
            raise ShapeError(f"w must be (d, m, L), got shape {self.w.shape}")
        d, m, L = self.w.shape
        self.theta = np.asarray(self.theta, dtype=np.float64)
        if self.theta.shape != (d, m, L + 1, 2):
            raise ShapeError(f"theta must be {(d, m, L + 1, 2)}, got {self.theta.shape}")
        if self.b is None:
            self.b = np.zeros_like(self.w)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.b.shape != self.w.shape:
            raise ShapeError(f"b must match w shape {self.w.shape}, got {self.b.shape}")

    @classmethod
    def init(cls, in_dim, out_dim, L=1, rng=None, use_offsets=False):
        rng = np.random.default_rng(rng)
        theta = np.pi - rng.uniform(0.0, 2 * np.pi, size=(in_dim, out_dim, L + 1, 2))
        w = np.broadcast_to(2.0 ** np.arange(L), (in_dim, out_dim, L)).copy()
        return cls(w=w, theta=theta, use_offsets=use_offsets)

    @classmethod
    def zeros(cls, in_dim, out_dim, L=1):
        return cls(w=np.zeros((in_dim, out_dim, L)), theta=np.zeros((in_dim, out_dim, L + 1, 2)))

    @property
    def in_dim(self):
        return self.w.shape[0]

    @property
    def out_dim(self):
        return self.w.shape[1]

    @property
    def L(self):
        return self.w.shape[2]

    def edge(self, i, j) -> DaruanParams:
        return DaruanParams(
            w=self.w[i, j].copy(),
            theta=self.theta[i, j].copy(),
            b=self.b[i, j].copy(),
            use_offsets=self.use_offsets or bool(np.any(self.b[i, j])),
        )


@dataclass
class HqkanBlock:
    """``out = dec_W @ qkan(enc_W @ v + enc_b) + dec_b``."""

    enc_W: np.ndarray
    enc_b: np.ndarray
    latent: QkanLayer
    dec_W: np.ndarray
    dec_b: np.ndarray

    def __post_init__(self):
        self.enc_W = np.asarray(self.enc_W, dtype=np.float64)
        self.enc_b = np.asarray(self.enc_b, dtype=np.float64)
        self.dec_W = np.asarray(self.dec_W, dtype=np.float64)
        self.dec_b = np.asarray(self.dec_b, dtype=np.float64)
        if self.enc_W.shape[0] != self.latent.in_dim or self.enc_b.shape != (self.latent.in_dim,):
            raise ShapeError("encoder output does not match the latent layer input")
        if self.dec_W.shape[1] != self.latent.out_dim or self.dec_b.shape != (self.dec_W.shape[0],):
            raise ShapeError("decoder input does not match the latent layer output")

    @classmethod
    def init(cls, in_dim, out_dim, latent_dim=2, latent_out=1, L=1, rng=None, use_offsets=False):
        rng = np.random.default_rng(rng)
        lim_e = 1.0 / np.sqrt(in_dim)
        enc_W = rng.uniform(-lim_e, lim_e, size=(latent_dim, in_dim))
        latent = QkanLayer.init(latent_dim, latent_out, L, rng, use_offsets)
        lim_d = 1.0 / np.sqrt(latent_out)
        dec_W = rng.uniform(-lim_d, lim_d, size=(out_dim, latent_out))
        return cls(enc_W, np.zeros(latent_dim), latent, dec_W, np.zeros(out_dim))

    @property
    def in_dim(self):
        return self.enc_W.shape[1]

    @property
    def out_dim(self):
        return self.dec_W.shape[0]


def _as_batch(v, d):
    v = np.asarray(v, dtype=np.float64)
    single = v.ndim == 1
    v2 = v.reshape(1, -1) if single else v
    if v2.ndim != 2 or v2.shape[1] != d:
        raise ShapeError(f"expected input of length {d}, got shape {v.shape}")
    return v2, single


def qkan_forward(v, layer: QkanLayer) -> np.ndarray:
    """Node sums for one input vector ``(d,)`` or a batch ``(B, d)``."""
    v2, single = _as_batch(v, layer.in_dim)
    out = kernels.qkan_forward(np.ascontiguousarray(v2), layer.w, layer.b, layer.theta)
    return out[0] if single else out


def hqkan_forward(v, block: HqkanBlock) -> np.ndarray:
    v2, single = _as_batch(v, block.in_dim)
    z = v2 @ block.enc_W.T + block.enc_b
    q = kernels.qkan_forward(z, block.latent.w, block.latent.b, block.latent.theta)
    out = q @ block.dec_W.T + block.dec_b
    return out[0] if single else out


def qkan_layer_vjp(v, w, b, theta, upstream):
    """Raw VJP on stacked arrays; thin wrapper shared with the tape primitive."""
    return kernels.qkan_vjp(
        np.ascontiguousarray(v, dtype=np.float64),
        w,
        b,
        theta,
        np.ascontiguousarray(upstream, dtype=np.float64),
    )


def kan_grad(v, obj, upstream):
    """Vector-Jacobian product of :func:`qkan_forward` or :func:`hqkan_forward`.

    Returns ``(d_input, grads)`` where ``grads`` maps parameter names
    (``w``, ``b``, ``theta`` and, for blocks, ``enc_W``, ``enc_b``,
    ``dec_W``, ``dec_b``) to arrays shaped like the parameters.
    """
    if isinstance(obj, QkanLayer):
        v2, single = _as_batch(v, obj.in_dim)
        g2, _ = _as_batch(upstream, obj.out_dim)
        dv, dw, db, dth = qkan_layer_vjp(v2, obj.w, obj.b, obj.theta, g2)
        return (dv[0] if single else dv), {"w": dw, "b": db, "theta": dth}
    if isinstance(obj, HqkanBlock):
        v2, single = _as_batch(v, obj.in_dim)
        g2, _ = _as_batch(upstream, obj.out_dim)
        lat = obj.latent
        z = v2 @ obj.enc_W.T + obj.enc_b
        q = kernels.qkan_forward(z, lat.w, lat.b, lat.theta)
        gq = g2 @ obj.dec_W
        dz, dw, db, dth = qkan_layer_vjp(z, lat.w, lat.b, lat.theta, gq)
        grads = {
            "enc_W": dz.T @ v2,
            "enc_b": dz.sum(axis=0),
            "w": dw,
            "b": db,
            "theta": dth,
            "dec_W": g2.T @ q,
            "dec_b": g2.sum(axis=0),
        }
        dv = dz @ obj.enc_W
        return (dv[0] if single else dv), grads
    raise TypeError(f"kan_grad expects a QkanLayer or HqkanBlock, got {type(obj).__name__}")
