"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is picked at import time from ``QKANSEQ_BACKEND`` (``numba`` or
``numpy``).  When unset, numba is used if it imports cleanly.  Both backends
expose the same four functions with identical signatures:

``qkan_forward(u, w, b, theta)``
    ``u`` is ``(B, d)``, ``w``/``b`` are ``(d, m, L)``, ``theta`` is
    ``(d, m, L+1, 2)`` holding ``(theta_y, theta_z)`` pairs.  Returns the node
    sums ``(B, m)``.
``qkan_vjp(u, w, b, theta, g)``
    Vector-Jacobian product with cotangent ``g`` of shape ``(B, m)``.  Returns
    ``(du, dw, db, dtheta)``; parameter cotangents are summed over the batch.
``vqc_expect(v, angles)``
    Real-amplitude RealAmplitudes circuit: RY(v_k) encoding, an RY layer,
    then ``depth`` times [CNOT chain, RY layer].  ``v`` is ``(B, nq)``,
    ``angles`` is ``(depth+1, nq)``.  Returns per-wire <Z>, ``(B, nq)``.
``vqc_vjp(v, angles, g)``
    Parameter-shift VJP of ``vqc_expect``; returns ``(dv, dangles)``.
"""
from __future__ import annotations

import contextlib
import os

from . import _numpy

__all__ = [
    "BACKENDS",
    "backend",
    "set_backend",
    "use_backend",
    "qkan_forward",
    "qkan_vjp",
    "vqc_expect",
    "vqc_vjp",
]


def _load_numba():
    try:
        from . import _numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        return None
    return _numba


_NUMBA = _load_numba()
BACKENDS = ("numba", "numpy") if _NUMBA is not None else ("numpy",)

_active = None


def _module(name):
    if name == "numba":
        if _NUMBA is None:
            raise RuntimeError("numba backend requested but numba is not importable")
        return _NUMBA
    if name == "numpy":
        return _numpy
    raise ValueError(f"unknown kernel backend {name!r}; expected one of {BACKENDS}")


def set_backend(name: str) -> None:
    global _active, qkan_forward, qkan_vjp, vqc_expect, vqc_vjp
    mod = _module(name)
    _active = name
    qkan_forward = mod.qkan_forward
    qkan_vjp = mod.qkan_vjp
    vqc_expect = mod.vqc_expect
    vqc_vjp = mod.vqc_vjp


def backend() -> str:
    return _active


@contextlib.contextmanager
def use_backend(name: str):
    """Temporarily switch backends (used by the kernel benchmark and tests)."""
    prev = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)


def _default_backend() -> str:
    env = os.environ.get("QKANSEQ_BACKEND", "").strip().lower()
    if env:
        return env
    return "numba" if _NUMBA is not None else "numpy"


qkan_forward = qkan_vjp = vqc_expect = vqc_vjp = None
set_backend(_default_backend())
