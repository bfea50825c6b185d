"""Build and inspect the RY/CZ generator circuit.

Walks through the simulator primitives: preparing states, applying gates,
running the layered circuit, measuring, and taking exact gradients with
the parameter-shift rule.
"""

import numpy as np

from qbde.qsim import (
    GeneratorParams,
    apply_cz,
    apply_ry,
    entangler_pairs,
    new_zero_state,
    prob_jacobian,
    probabilities,
    run_generator_circuit,
    sample,
)

# ---------------------------------------------------------------------
# States and single gates.  Qubit 1 is the most significant bit, so for
# two qubits the basis order is |00>, |01>, |10>, |11>.
# ---------------------------------------------------------------------
state = new_zero_state(2)
print("|00> amplitudes:", state.amplitudes.real)

state = apply_ry(state, 1, np.pi / 2)          # equal superposition on qubit 1
print("after RY(pi/2) on qubit 1:", state.amplitudes.real)

state = apply_ry(state, 2, np.pi)              # flip qubit 2
state = apply_cz(state, 1, 2)                  # phase flip on the |11> part
print("after RY(pi) on qubit 2 and CZ:", state.amplitudes.real)
print("probabilities:", probabilities(state))

# ---------------------------------------------------------------------
# The layered circuit: one input-preparation RY row, then alternating
# CZ entangling blocks and RY rows.  All angles at pi/2 in row 0 with no
# further layers gives the uniform distribution.
# ---------------------------------------------------------------------
uniform = GeneratorParams(4, np.concatenate([
    np.full((1, 4), np.pi / 2), np.zeros((2, 4))]))
print("\nentangling block (ring):", entangler_pairs(4))
print("uniform circuit probabilities:",
      np.round(probabilities(run_generator_circuit(uniform)), 4))

rng = np.random.default_rng(7)
params = GeneratorParams(3, rng.uniform(-np.pi, np.pi, size=(4, 3)))
p = probabilities(run_generator_circuit(params))
print("\nrandom 3-qubit, depth-3 circuit:")
print("  probabilities:", np.round(p, 4), " sum =", round(float(p.sum()), 12))

# ---------------------------------------------------------------------
# Measurement: seeded sampling returns a reproducible histogram.
# ---------------------------------------------------------------------
counts = sample(run_generator_circuit(params), 10_000, np.random.default_rng(0))
print("  10k-shot histogram:", counts)
print("  empirical vs exact max gap:",
      round(float(np.max(np.abs(counts / 10_000 - p))), 4))

# ---------------------------------------------------------------------
# Exact gradients: the parameter-shift rule evaluates the circuit at
# angle +- pi/2 and differences the probabilities.  Compare against a
# central finite difference.
# ---------------------------------------------------------------------
jac = prob_jacobian(params)
h = 1e-6
shifted = params.angles.copy()
shifted[1, 0] += h
up = probabilities(run_generator_circuit(GeneratorParams(3, shifted)))
shifted[1, 0] -= 2 * h
down = probabilities(run_generator_circuit(GeneratorParams(3, shifted)))
fd = (up - down) / (2 * h)
col = 1 * 3 + 0  # layer-major column for (layer 1, qubit 1)
print("\nparameter-shift column for (layer 1, qubit 1):", np.round(jac[:, col], 6))
print("finite-difference check:                        ", np.round(fd, 6))
print("max deviation:", float(np.max(np.abs(jac[:, col] - fd))))
