"""Gate-level and circuit-level checks against independent oracles."""

import numpy as np
import pytest

from qbde.qsim import (
    GeneratorParams,
    StateVector,
    apply_cz,
    apply_ry,
    entangler_pairs,
    new_zero_state,
    prob_jacobian,
    probabilities,
    run_generator_circuit,
    sample,
)


# --------------------------------------------------------------------------
# Oracles: dense matrix algebra, independent of the simulator's update rules
# --------------------------------------------------------------------------

def ry_matrix(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]])


def layer_matrix(n, angles_row):
    u = np.eye(1)
    for i in range(n):  # qubit 1 is the leftmost kron factor (MSB)
        u = np.kron(u, ry_matrix(angles_row[i]))
    return u


def cz_matrix(n, a, b):
    bit_a, bit_b = 1 << (n - a), 1 << (n - b)
    diag = np.ones(2**n)
    for j in range(2**n):
        if j & bit_a and j & bit_b:
            diag[j] = -1.0
    return np.diag(diag)


def circuit_unitary(params):
    n = params.n_qubits
    ue = np.eye(2**n)
    for a, b in entangler_pairs(n, params.entangler):
        ue = cz_matrix(n, a, b) @ ue
    u = layer_matrix(n, params.angles[0])
    for layer in range(1, params.depth + 1):
        u = layer_matrix(n, params.angles[layer]) @ ue @ u
    return u


def random_params(rng, n, depth, entangler="ring"):
    return GeneratorParams(n, rng.uniform(-np.pi, np.pi, size=(depth + 1, n)),
                           entangler)


# --------------------------------------------------------------------------
# State preparation and single gates
# --------------------------------------------------------------------------

def test_zero_state_n4():
    state = new_zero_state(4)
    assert state.amplitudes[0] == 1.0
    assert np.all(state.amplitudes[1:] == 0.0)


def test_zero_state_n1():
    np.testing.assert_array_equal(new_zero_state(1).amplitudes, [1.0, 0.0])


def test_zero_state_probabilities():
    np.testing.assert_array_equal(probabilities(new_zero_state(2)), [1, 0, 0, 0])


@pytest.mark.parametrize("n", [0, -3, 13])
def test_zero_state_rejects_bad_qubit_count(n):
    with pytest.raises(ValueError):
        new_zero_state(n)


def test_ry_zero_angle_is_identity():
    rng = np.random.default_rng(1)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    amps /= np.linalg.norm(amps)
    state = StateVector(3, amps)
    out = apply_ry(state, 2, 0.0)
    np.testing.assert_allclose(out.amplitudes, amps, atol=1e-15)


def test_ry_pi_flips_zero_to_one():
    out = apply_ry(new_zero_state(1), 1, np.pi)
    np.testing.assert_allclose(out.amplitudes, [0.0, 1.0], atol=1e-15)


def test_ry_half_pi_makes_equal_superposition():
    out = apply_ry(new_zero_state(1), 1, np.pi / 2)
    np.testing.assert_allclose(out.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2)],
                               atol=1e-15)


def test_ry_qubit_out_of_range():
    with pytest.raises(ValueError):
        apply_ry(new_zero_state(2), 3, 0.1)


def test_ry_matches_dense_oracle_on_each_qubit():
    rng = np.random.default_rng(7)
    for n in (1, 2, 3):
        amps = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        amps /= np.linalg.norm(amps)
        for q in range(1, n + 1):
            theta = rng.uniform(-np.pi, np.pi)
            got = apply_ry(StateVector(n, amps), q, theta).amplitudes
            full = np.eye(1)
            for i in range(1, n + 1):
                full = np.kron(full, ry_matrix(theta) if i == q else np.eye(2))
            np.testing.assert_allclose(got, full @ amps, atol=1e-12)


def test_cz_negates_only_the_11_component():
    state = apply_ry(apply_ry(new_zero_state(2), 1, np.pi), 2, np.pi)  # |11>
    out = apply_cz(state, 1, 2)
    np.testing.assert_allclose(out.amplitudes, [0, 0, 0, -1], atol=1e-12)


def test_cz_leaves_01_alone():
    state = apply_ry(new_zero_state(2), 2, np.pi)  # |01>
    out = apply_cz(state, 1, 2)
    np.testing.assert_allclose(out.amplitudes, state.amplitudes, atol=1e-15)


def test_cz_is_an_involution_and_symmetric():
    rng = np.random.default_rng(3)
    amps = rng.normal(size=8) + 1j * rng.normal(size=8)
    amps /= np.linalg.norm(amps)
    state = StateVector(3, amps)
    twice = apply_cz(apply_cz(state, 1, 3), 1, 3)
    np.testing.assert_allclose(twice.amplitudes, amps, atol=1e-15)
    np.testing.assert_allclose(apply_cz(state, 3, 1).amplitudes,
                               apply_cz(state, 1, 3).amplitudes, atol=1e-15)


def test_cz_rejects_equal_or_bad_indices():
    state = new_zero_state(2)
    with pytest.raises(ValueError):
        apply_cz(state, 1, 1)
    with pytest.raises(ValueError):
        apply_cz(state, 1, 5)


def test_gates_preserve_norm_and_invert():
    rng = np.random.default_rng(11)
    state = new_zero_state(3)
    applied = []
    for _ in range(30):
        if rng.random() < 0.7:
            q, theta = int(rng.integers(1, 4)), float(rng.uniform(-np.pi, np.pi))
            state = apply_ry(state, q, theta)
            applied.append(("ry", q, theta))
        else:
            a, b = rng.choice([1, 2, 3], size=2, replace=False)
            state = apply_cz(state, int(a), int(b))
            applied.append(("cz", int(a), int(b)))
        assert abs(np.sum(np.abs(state.amplitudes) ** 2) - 1.0) < 1e-10
    for op in reversed(applied):  # undo everything: RY(-t), CZ is self-inverse
        if op[0] == "ry":
            state = apply_ry(state, op[1], -op[2])
        else:
            state = apply_cz(state, op[1], op[2])
    expect = new_zero_state(3).amplitudes
    np.testing.assert_allclose(state.amplitudes, expect, atol=1e-12)


# --------------------------------------------------------------------------
# Full circuit
# --------------------------------------------------------------------------

def test_all_zero_angles_keep_the_zero_state():
    params = GeneratorParams(3, np.zeros((4, 3)))
    out = run_generator_circuit(params)
    np.testing.assert_allclose(out.amplitudes, new_zero_state(3).amplitudes,
                               atol=1e-15)


def test_half_pi_input_layer_is_uniform():
    angles = np.full((1, 4), np.pi / 2)
    out = run_generator_circuit(GeneratorParams(4, angles))
    np.testing.assert_allclose(probabilities(out), np.full(16, 1 / 16), atol=1e-12)


@pytest.mark.parametrize("entangler", ["ring", "chain"])
@pytest.mark.parametrize("n,depth", [(1, 2), (2, 3), (3, 2), (3, 4)])
def test_circuit_matches_dense_unitary_product(n, depth, entangler):
    rng = np.random.default_rng(100 * n + depth)
    for _ in range(5):
        params = random_params(rng, n, depth, entangler)
        got = run_generator_circuit(params).amplitudes
        want = circuit_unitary(params) @ new_zero_state(n).amplitudes
        np.testing.assert_allclose(got, want, atol=1e-10)


def test_entangler_pairs_topologies():
    assert entangler_pairs(1) == []
    assert entangler_pairs(2) == [(1, 2)]  # ring degenerates, no double CZ
    assert entangler_pairs(4) == [(1, 2), (2, 3), (3, 4), (4, 1)]
    assert entangler_pairs(4, "chain") == [(1, 2), (2, 3), (3, 4)]


def test_params_validation():
    with pytest.raises(ValueError):
        GeneratorParams(2, np.zeros((3, 4)))
    with pytest.raises(ValueError):
        GeneratorParams(2, np.array([[0.0, np.inf], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        GeneratorParams(2, np.zeros((2, 2)), entangler="star")


def test_probabilities_sum_to_one():
    rng = np.random.default_rng(5)
    params = random_params(rng, 3, 3)
    p = probabilities(run_generator_circuit(params))
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-9


def test_circuit_is_deterministic():
    rng = np.random.default_rng(9)
    params = random_params(rng, 3, 2)
    p1 = probabilities(run_generator_circuit(params))
    p2 = probabilities(run_generator_circuit(params))
    np.testing.assert_array_equal(p1, p2)


# --------------------------------------------------------------------------
# Sampling
# --------------------------------------------------------------------------

def test_sample_point_mass():
    counts = sample(new_zero_state(4), 100, np.random.default_rng(0))
    assert counts[0] == 100
    assert counts.sum() == 100


def test_sample_is_seed_deterministic():
    state = run_generator_circuit(random_params(np.random.default_rng(2), 3, 2))
    c1 = sample(state, 5000, np.random.default_rng(123))
    c2 = sample(state, 5000, np.random.default_rng(123))
    np.testing.assert_array_equal(c1, c2)


def test_sample_rejects_zero_shots():
    with pytest.raises(ValueError):
        sample(new_zero_state(2), 0, np.random.default_rng(0))


def test_sample_uniform_chi_square():
    scipy_stats = pytest.importorskip("scipy.stats")
    angles = np.full((1, 4), np.pi / 2)
    state = run_generator_circuit(GeneratorParams(4, angles))
    counts = sample(state, 100_000, np.random.default_rng(42))
    _, p_value = scipy_stats.chisquare(counts)
    assert p_value > 0.01


# --------------------------------------------------------------------------
# Parameter-shift jacobian
# --------------------------------------------------------------------------

def fd_jacobian(params, h=1e-5):
    jac = np.empty((2**params.n_qubits, params.angles.size))
    for col, (layer, qubit) in enumerate(np.ndindex(params.angles.shape)):
        up = params.angles.copy()
        up[layer, qubit] += h
        down = params.angles.copy()
        down[layer, qubit] -= h
        p_up = probabilities(run_generator_circuit(
            GeneratorParams(params.n_qubits, up, params.entangler)))
        p_down = probabilities(run_generator_circuit(
            GeneratorParams(params.n_qubits, down, params.entangler)))
        jac[:, col] = (p_up - p_down) / (2 * h)
    return jac


def test_jacobian_single_qubit_analytic():
    # p_1 = sin^2(t/2), so dp_1/dt = sin(t)/2
    for theta, want in [(0.0, 0.0), (np.pi / 2, 0.5)]:
        params = GeneratorParams(1, np.array([[theta]]))
        jac = prob_jacobian(params)
        assert jac.shape == (2, 1)
        np.testing.assert_allclose(jac[1, 0], want, atol=1e-12)
        np.testing.assert_allclose(jac[0, 0], -want, atol=1e-12)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(17)
    for n, depth in [(1, 1), (2, 2), (3, 2), (3, 4)]:
        params = random_params(rng, n, depth)
        np.testing.assert_allclose(prob_jacobian(params), fd_jacobian(params),
                                   atol=1e-6)


def test_jacobian_columns_sum_to_zero():
    # Probabilities sum to 1 for every parameter value.
    params = random_params(np.random.default_rng(23), 3, 3)
    np.testing.assert_allclose(prob_jacobian(params).sum(axis=0),
                               np.zeros(params.n_params), atol=1e-12)
