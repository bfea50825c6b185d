"""Dense state-vector simulation of RY/CZ generator circuits.

Conventions, fixed across the package:

* Qubits are numbered 1..n and qubit 1 is the most significant bit of a
  basis index, so for n=2 the basis order is |00>, |01>, |10>, |11>.
* RY(t) = [[cos(t/2), -sin(t/2)], [sin(t/2), cos(t/2)]].
* The entangling block is a fixed layer of CZ gates: a ring
  (1,2), (2,3), ..., (n-1,n), (n,1), or an open chain without the
  wrap-around pair.  For n <= 2 the ring degenerates to the chain.

All public operations are pure: they return new values and never mutate
their inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MAX_QUBITS = 12  # dense amplitudes stay desk-scale

ENTANGLERS = ("ring", "chain")


@dataclass
class StateVector:
    """Amplitudes of an n-qubit pure state, length 2**n, complex."""

    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} "
                f"qubits, got shape {self.amplitudes.shape}"
            )


@dataclass
class GeneratorParams:
    """Rotation angles of the generator circuit.

    ``angles`` has shape (depth+1, n_qubits); row 0 prepares the input
    state from |0...0> and rows 1..depth are the trainable layers that
    each follow one entangling block.
    """

    n_qubits: int
    angles: np.ndarray
    entangler: str = "ring"

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        if self.angles.ndim != 2 or self.angles.shape[1] != self.n_qubits:
            raise ValueError(
                f"angles must have shape (depth+1, {self.n_qubits}), "
                f"got {self.angles.shape}"
            )
        if self.angles.shape[0] < 1:
            raise ValueError("angles needs at least the input-preparation row")
        if not np.all(np.isfinite(self.angles)):
            raise ValueError("angles must be finite")
        if not 1 <= self.n_qubits <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}")
        if self.entangler not in ENTANGLERS:
            raise ValueError(f"entangler must be one of {ENTANGLERS}")

    @property
    def depth(self) -> int:
        return self.angles.shape[0] - 1

    @property
    def n_params(self) -> int:
        return self.angles.size


def new_zero_state(n_qubits: int) -> StateVector:
    """|0...0> on ``n_qubits`` qubits."""
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def _check_qubit(n_qubits: int, qubit: int) -> None:
    if not 1 <= qubit <= n_qubits:
        raise ValueError(f"qubit index {qubit} out of range 1..{n_qubits}")


def _ry_inplace(amps: np.ndarray, qubit: int, angle: float) -> None:
    # View the target qubit as the middle axis; qubits 1..qubit-1 are the
    # more significant leading axis.
    c = math.cos(angle / 2.0)
    s = math.sin(angle / 2.0)
    view = amps.reshape(2 ** (qubit - 1), 2, -1)
    lo = view[:, 0, :].copy()
    hi = view[:, 1, :].copy()
    view[:, 0, :] = c * lo - s * hi
    view[:, 1, :] = s * lo + c * hi


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    """Rotate ``qubit`` (1-based) about Y by ``angle`` radians."""
    _check_qubit(state.n_qubits, qubit)
    amps = state.amplitudes.copy()
    _ry_inplace(amps, qubit, angle)
    return StateVector(state.n_qubits, amps)


def _cz_mask(n_qubits: int, qubit_a: int, qubit_b: int) -> np.ndarray:
    bit_a = 1 << (n_qubits - qubit_a)
    bit_b = 1 << (n_qubits - qubit_b)
    idx = np.arange(2**n_qubits)
    return (idx & bit_a != 0) & (idx & bit_b != 0)


def apply_cz(state: StateVector, qubit_a: int, qubit_b: int) -> StateVector:
    """Controlled-Z between two distinct qubits; symmetric in its arguments."""
    _check_qubit(state.n_qubits, qubit_a)
    _check_qubit(state.n_qubits, qubit_b)
    if qubit_a == qubit_b:
        raise ValueError("CZ needs two distinct qubits")
    amps = state.amplitudes.copy()
    amps[_cz_mask(state.n_qubits, qubit_a, qubit_b)] *= -1.0
    return StateVector(state.n_qubits, amps)


def entangler_pairs(n_qubits: int, topology: str = "ring") -> list[tuple[int, int]]:
    """Qubit pairs of one entangling block.

    The wrap-around pair (n, 1) is dropped for n <= 2: CZ is symmetric, so
    on two qubits the ring would apply the same gate twice and cancel.
    """
    if topology not in ENTANGLERS:
        raise ValueError(f"entangler must be one of {ENTANGLERS}")
    pairs = [(i, i + 1) for i in range(1, n_qubits)]
    if topology == "ring" and n_qubits > 2:
        pairs.append((n_qubits, 1))
    return pairs


def _entangler_masks(n_qubits: int, topology: str) -> list[np.ndarray]:
    return [_cz_mask(n_qubits, a, b) for a, b in entangler_pairs(n_qubits, topology)]


def _run_raw(n_qubits: int, angles: np.ndarray, cz_masks: list[np.ndarray]) -> np.ndarray:
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    for qubit in range(1, n_qubits + 1):
        _ry_inplace(amps, qubit, angles[0, qubit - 1])
    for layer in range(1, angles.shape[0]):
        for mask in cz_masks:
            amps[mask] *= -1.0
        for qubit in range(1, n_qubits + 1):
            _ry_inplace(amps, qubit, angles[layer, qubit - 1])
    return amps


def run_generator_circuit(params: GeneratorParams) -> StateVector:
    """Output state of the full circuit.

    Layer 0 rotates |0...0> into the input state; each remaining layer
    applies the entangling block and then its RY rotations.
    """
    masks = _entangler_masks(params.n_qubits, params.entangler)
    return StateVector(params.n_qubits, _run_raw(params.n_qubits, params.angles, masks))


def probabilities(state: StateVector) -> np.ndarray:
    """Born probabilities |amplitude_j|**2 as a real vector."""
    return np.abs(state.amplitudes) ** 2


def sample(state: StateVector, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Histogram of ``shots`` measurements over the 2**n basis outcomes."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = probabilities(state)
    return rng.multinomial(shots, p / p.sum())


def prob_jacobian(params: GeneratorParams) -> np.ndarray:
    """Jacobian d p_j / d theta of the output probabilities, via the
    parameter-shift rule [p(t + pi/2) - p(t - pi/2)] / 2 (exact for RY).

    Shape (2**n, (depth+1)*n); columns are layer-major, i.e. column
    layer*n + (qubit-1).
    """
    masks = _entangler_masks(params.n_qubits, params.entangler)
    jac = np.empty((2**params.n_qubits, params.angles.size))
    for col, (layer, qubit) in enumerate(np.ndindex(params.angles.shape)):
        shifted = params.angles.copy()
        shifted[layer, qubit] += np.pi / 2
        p_plus = np.abs(_run_raw(params.n_qubits, shifted, masks)) ** 2
        shifted[layer, qubit] -= np.pi
        p_minus = np.abs(_run_raw(params.n_qubits, shifted, masks)) ** 2
        jac[:, col] = (p_plus - p_minus) / 2.0
    return jac
