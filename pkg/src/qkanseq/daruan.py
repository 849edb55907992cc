"""DARUAN: a trainable scalar activation built from a single-qubit
data re-uploading circuit.

Circuit for input ``u``::

    |0> -- H -- [RZ(w_1 u + b_1) -- W_1] -- ... -- [RZ(w_L u + b_L) -- W_L] -- W_{L+1} -- <Z>

with ``W_l = RY(theta_y) RZ(theta_z)`` (RZ acts first).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels


@dataclass
class DaruanParams:
    """Parameters of one DARUAN edge.

    ``theta`` has shape ``(L+1, 2)``; column 0 holds the RY angles and
    column 1 the RZ angles of each variational block.
    """

    w: np.ndarray
    theta: np.ndarray
    b: np.ndarray = None
    use_offsets: bool = False
    L: int = field(init=False)

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        self.L = self.w.shape[0]
        if self.L < 1:
            raise ValueError("a DARUAN needs at least one re-uploading layer")
        self.theta = np.asarray(self.theta, dtype=np.float64).reshape(self.L + 1, 2)
        if self.b is None:
            self.b = np.zeros(self.L)
        self.b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if self.b.shape != (self.L,):
            raise ValueError(f"expected {self.L} offsets, got {self.b.shape[0]}")
        if not self.use_offsets and np.any(self.b != 0.0):
            raise ValueError("offsets must be zero when use_offsets is False")

    @property
    def n_angles(self) -> int:
        """Number of shiftable angles: variational entries plus encoding angles."""
        return 2 * (self.L + 1) + self.L

    def _arrays(self):
        return (
            self.w.reshape(1, 1, self.L),
            self.b.reshape(1, 1, self.L),
            self.theta.reshape(1, 1, self.L + 1, 2),
        )


class DaruanGrad(NamedTuple):
    du: float
    dtheta: np.ndarray
    dw: np.ndarray
    db: np.ndarray


def init_daruan(L: int = 1, rng=None, use_offsets: bool = False) -> DaruanParams:
    """Angles uniform on (-pi, pi]; encoding weights 1, 2, 4, ..."""
    rng = np.random.default_rng(rng)
    theta = np.pi - rng.uniform(0.0, 2 * np.pi, size=(L + 1, 2))
    w = 2.0 ** np.arange(L)
    return DaruanParams(w=w, theta=theta, use_offsets=use_offsets)


def _check_input(u) -> float:
    u = float(u)
    if not math.isfinite(u):
        raise ValueError(f"DARUAN input must be finite, got {u}")
    return u


def daruan_forward(u: float, p: DaruanParams) -> float:
    u = _check_input(u)
    w, b, theta = p._arrays()
    return float(kernels.qkan_forward(np.array([[u]]), w, b, theta)[0, 0])


def daruan_grad(u: float, p: DaruanParams) -> DaruanGrad:
    u = _check_input(u)
    w, b, theta = p._arrays()
    du, dw, db, dtheta = kernels.qkan_vjp(np.array([[u]]), w, b, theta, np.ones((1, 1)))
    return DaruanGrad(
        du=float(du[0, 0]),
        dtheta=dtheta.reshape(p.L + 1, 2),
        dw=dw.reshape(p.L),
        db=db.reshape(p.L),
    )


def _shifted(p: DaruanParams, k: int, delta: float) -> DaruanParams:
    n_theta = 2 * (p.L + 1)
    theta = p.theta.copy()
    b = p.b.copy()
    if k < n_theta:
        theta.flat[k] += delta
    else:
        # shifting the offset shifts the whole encoding angle w*u + b
        b[k - n_theta] += delta
    return DaruanParams(w=p.w, theta=theta, b=b, use_offsets=True)


def daruan_param_shift(u: float, p: DaruanParams, k: int) -> float:
    """Two-term shift derivative with respect to angle ``k``.

    ``k < 2(L+1)`` addresses ``theta.flat[k]``; the next ``L`` indices address
    the encoding angles ``w_l u + b_l`` of each layer.
    """
    if not 0 <= k < p.n_angles:
        raise IndexError(f"angle index {k} out of range [0, {p.n_angles})")
    plus = daruan_forward(u, _shifted(p, k, math.pi / 2))
    minus = daruan_forward(u, _shifted(p, k, -math.pi / 2))
    return 0.5 * (plus - minus)


def daruan_spectrum(p: DaruanParams, n_samples: int, domain=(0.0, 2 * math.pi)) -> np.ndarray:
    """One-sided amplitude spectrum of the activation over ``domain``.

    Returns an ``(n_samples//2 + 1, 2)`` array of (frequency, magnitude).
    Frequencies are in cycles per 2*pi of input, so a term ``cos(k u)``
    shows up at frequency ``k`` with magnitude equal to its amplitude.
    """
    lo, hi = float(domain[0]), float(domain[1])
    if not lo < hi:
        raise ValueError(f"degenerate domain [{lo}, {hi}]")
    n_samples = int(n_samples)
    if n_samples < 64 or n_samples & (n_samples - 1):
        raise ValueError(f"n_samples must be a power of two >= 64, got {n_samples}")
    u = lo + (hi - lo) * np.arange(n_samples) / n_samples
    w, b, theta = p._arrays()
    vals = kernels.qkan_forward(u[:, None], w, b, theta)[:, 0]
    spec = np.abs(np.fft.rfft(vals)) / n_samples
    spec[1:] *= 2.0
    if n_samples % 2 == 0:
        spec[-1] /= 2.0
    freqs = np.arange(spec.shape[0]) * (2 * math.pi / (hi - lo))
    return np.column_stack([freqs, spec])
