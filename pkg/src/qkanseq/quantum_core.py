"""Exact complex statevector simulation for small registers.

Qubit 0 is the least significant bit of the basis index.  Global phase is
kept as-is; only phase-invariant expectation values leave this module.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 12

PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
IDENTITY = np.eye(2, dtype=np.complex128)


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n_qubits: int

    def __post_init__(self):
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {self.n_qubits}")
        amps = np.asarray(self.amplitudes, dtype=np.complex128)
        if amps.shape != (2 ** self.n_qubits,):
            raise ValueError(f"expected {2 ** self.n_qubits} amplitudes, got shape {amps.shape}")
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int = 1) -> "StateVector":
        amps = np.zeros(2 ** n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps, n_qubits)

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)


def _check_angle(theta):
    theta = float(theta)
    if not math.isfinite(theta):
        raise ValueError(f"rotation angle must be finite, got {theta}")
    return theta


def ry(theta: float) -> np.ndarray:
    """exp(-i theta/2 Y)."""
    theta = _check_angle(theta)
    c, s = math.cos(theta / 2), math.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(theta: float) -> np.ndarray:
    """exp(-i theta/2 Z)."""
    theta = _check_angle(theta)
    return np.array(
        [[np.exp(-0.5j * theta), 0], [0, np.exp(0.5j * theta)]], dtype=np.complex128
    )


def hadamard() -> np.ndarray:
    return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2.0)


def _check_qubit(state: StateVector, q: int, what: str = "qubit"):
    if not 0 <= q < state.n_qubits:
        raise IndexError(f"{what} index {q} out of range for {state.n_qubits} qubits")


def apply_single(state: StateVector, gate: np.ndarray, target: int) -> StateVector:
    _check_qubit(state, target, "target")
    gate = np.asarray(gate, dtype=np.complex128)
    if gate.shape != (2, 2):
        raise ValueError(f"single-qubit gate must be 2x2, got {gate.shape}")
    n = state.n_qubits
    view = state.amplitudes.reshape(2 ** (n - target - 1), 2, 2 ** target)
    out = np.einsum("ab,ibj->iaj", gate, view)
    return StateVector(out.reshape(-1), n)


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    if control == target:
        raise ValueError("CNOT control and target must differ")
    _check_qubit(state, control, "control")
    _check_qubit(state, target, "target")
    idx = np.arange(2 ** state.n_qubits)
    src = np.where((idx >> control) & 1, idx ^ (1 << target), idx)
    return StateVector(state.amplitudes[src], state.n_qubits)


def expect_z(state: StateVector, qubit: int) -> float:
    _check_qubit(state, qubit)
    idx = np.arange(2 ** state.n_qubits)
    signs = 1.0 - 2.0 * ((idx >> qubit) & 1)
    return float(np.sum(signs * np.abs(state.amplitudes) ** 2))


def unitarity_residual(gate: np.ndarray) -> float:
    """max |G^dagger G - I| entry."""
    gate = np.asarray(gate)
    return float(np.abs(gate.conj().T @ gate - np.eye(gate.shape[0])).max())
