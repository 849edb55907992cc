import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qkanseq import quantum_core as qc
from qkanseq.quantum_core import StateVector

angles = st.floats(-20.0, 20.0, allow_nan=False)
r2 = 1 / math.sqrt(2)


def test_ry_values():
    assert np.allclose(qc.ry(0.0), np.eye(2), atol=1e-15)
    assert np.allclose(qc.ry(math.pi), [[0, -1], [1, 0]], atol=1e-15)
    assert np.allclose(qc.ry(math.pi / 2), r2 * np.array([[1, -1], [1, 1]]), atol=1e-15)


def test_rz_values():
    assert np.allclose(qc.rz(0.0), np.eye(2), atol=1e-15)
    assert np.allclose(qc.rz(2 * math.pi), -np.eye(2), atol=1e-15)
    assert np.allclose(qc.rz(math.pi), np.diag([-1j, 1j]), atol=1e-15)


@pytest.mark.parametrize("gate", [qc.ry, qc.rz])
@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_non_finite_angles_rejected(gate, bad):
    with pytest.raises(ValueError):
        gate(bad)


def test_hadamard():
    plus = qc.apply_single(StateVector.zero(1), qc.hadamard(), 0)
    assert np.allclose(plus.amplitudes, [r2, r2], atol=1e-15)
    assert np.allclose(qc.hadamard() @ qc.hadamard(), np.eye(2), atol=1e-15)
    assert qc.unitarity_residual(qc.hadamard()) < 1e-15


def test_apply_single_examples():
    rng = np.random.default_rng(0)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    s = StateVector(amps / np.linalg.norm(amps), 3)
    for t in range(3):
        assert np.array_equal(qc.apply_single(s, qc.IDENTITY, t).amplitudes, s.amplitudes)
    out = qc.apply_single(StateVector.zero(1), qc.ry(math.pi / 2), 0)
    assert np.allclose(out.amplitudes, [r2, r2], atol=1e-15)
    u = 0.7
    plus = StateVector(np.array([r2, r2]), 1)
    out = qc.apply_single(plus, qc.rz(u), 0)
    assert np.allclose(out.amplitudes, np.array([np.exp(-0.5j * u), np.exp(0.5j * u)]) * r2, atol=1e-15)


def test_apply_single_wire_ordering():
    # qubit 0 is the least significant bit of the basis index
    s = qc.apply_single(StateVector.zero(2), qc.PAULI_X, 0)
    assert np.allclose(s.amplitudes, [0, 1, 0, 0])
    s = qc.apply_single(StateVector.zero(2), qc.PAULI_X, 1)
    assert np.allclose(s.amplitudes, [0, 0, 1, 0])


@pytest.mark.parametrize("target", [-1, 2, 5])
def test_apply_single_bad_target(target):
    with pytest.raises(IndexError):
        qc.apply_single(StateVector.zero(2), qc.hadamard(), target)


def _basis(bits, n):
    # bits[k] is the value of qubit k
    amps = np.zeros(2 ** n, dtype=complex)
    amps[sum(b << k for k, b in enumerate(bits))] = 1
    return StateVector(amps, n)


def test_cnot_examples():
    s00 = _basis([0, 0], 2)
    assert np.array_equal(qc.apply_cnot(s00, 0, 1).amplitudes, s00.amplitudes)
    s10 = _basis([1, 0], 2)  # control (qubit 0) set
    assert np.array_equal(qc.apply_cnot(s10, 0, 1).amplitudes, _basis([1, 1], 2).amplitudes)
    rng = np.random.default_rng(1)
    amps = rng.normal(size=16) + 1j * rng.normal(size=16)
    s = StateVector(amps / np.linalg.norm(amps), 4)
    twice = qc.apply_cnot(qc.apply_cnot(s, 2, 0), 2, 0)
    assert np.array_equal(twice.amplitudes, s.amplitudes)


def test_cnot_errors():
    with pytest.raises(ValueError):
        qc.apply_cnot(StateVector.zero(2), 1, 1)
    with pytest.raises(IndexError):
        qc.apply_cnot(StateVector.zero(2), 0, 2)


def test_expect_z_examples():
    assert qc.expect_z(StateVector.zero(1), 0) == 1.0
    plus = qc.apply_single(StateVector.zero(1), qc.hadamard(), 0)
    assert abs(qc.expect_z(plus, 0)) < 1e-15
    for x in np.linspace(-4, 4, 17):
        s = qc.apply_single(StateVector.zero(1), qc.ry(x), 0)
        assert math.isclose(qc.expect_z(s, 0), math.cos(x), abs_tol=1e-14)
    with pytest.raises(IndexError):
        qc.expect_z(StateVector.zero(2), 2)


def test_state_validation():
    with pytest.raises(ValueError):
        StateVector(np.ones(3), 2)
    with pytest.raises(ValueError):
        StateVector.zero(qc.MAX_QUBITS + 1)
    assert StateVector.zero(qc.MAX_QUBITS).amplitudes.shape == (4096,)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 8), st.lists(st.tuples(st.integers(0, 2), angles, st.integers(0, 7), st.integers(0, 7)),
                                   max_size=100))
def test_norm_preserved(n, ops):
    s = StateVector.zero(n)
    for kind, a, q1, q2 in ops:
        q1 %= n
        if kind == 0:
            s = qc.apply_single(s, qc.ry(a), q1)
        elif kind == 1:
            s = qc.apply_single(s, qc.rz(a), q1)
        elif n > 1:
            q2 = (q1 + 1 + q2 % (n - 1)) % n
            s = qc.apply_cnot(s, q1, q2)
    assert abs(s.norm_sq() - 1.0) < 1e-10
    for q in range(n):
        assert abs(qc.expect_z(s, q)) <= 1.0 + 1e-12


@given(angles)
def test_gates_unitary(a):
    assert qc.unitarity_residual(qc.ry(a)) < 1e-12
    assert qc.unitarity_residual(qc.rz(a)) < 1e-12


@given(angles, angles)
def test_rz_composition(a, b):
    assert np.abs(qc.rz(a) @ qc.rz(b) - qc.rz(a + b)).max() < 1e-12
