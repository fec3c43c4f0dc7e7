import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from oracles import central_diff
from qspirl.quantum import (
    CircuitSpec, QuantumLayer, adjoint_grad, apply_gate, parameter_shift_grad, pauli_z, run_circuit,
    sample_z, sampled_expectation, simulate, zero_state,
)

ORACLE_MATS = {"H": lambda: oracles.H, "RX": oracles.rx, "RY": oracles.ry, "RZ": oracles.rz,
               "Rot": oracles.rot}
CTRL_MATS = {"CNOT": lambda: np.array([[0, 1], [1, 0]], dtype=complex), "CRX": oracles.rx,
             "CRY": oracles.ry, "CRZ": oracles.rz, "CRot": oracles.rot}
N_PARAMS = {"H": 0, "RX": 1, "RY": 1, "RZ": 1, "Rot": 3, "CNOT": 0, "CRX": 1, "CRY": 1, "CRZ": 1,
            "CRot": 3}


def random_theta(spec, seed):
    return np.random.default_rng(seed).uniform(-math.pi, math.pi, spec.n_params)


def test_hadamard_on_zero():
    psi = apply_gate(zero_state(1), "H", (0,))[0]
    assert np.allclose(psi, [1 / math.sqrt(2), 1 / math.sqrt(2)], atol=1e-15)


def test_ry_pi_flips():
    psi = apply_gate(zero_state(1), "RY", (0,), (math.pi,))[0]
    assert np.allclose(psi, [0, 1], atol=1e-15)


def test_qubit_zero_is_most_significant():
    psi = apply_gate(zero_state(3), "RY", (0,), (math.pi,))[0]
    assert abs(psi[4]) == pytest.approx(1.0)


def test_random_gate_sequence_matches_dense_oracle():
    rng = np.random.default_rng(0)
    q = 3
    psi = zero_state(q)
    ref = np.zeros(8, dtype=complex)
    ref[0] = 1
    names = list(N_PARAMS)
    for _ in range(20):
        g = names[rng.integers(len(names))]
        params = tuple(rng.uniform(-math.pi, math.pi, N_PARAMS[g]))
        if g in CTRL_MATS:
            c, t = rng.choice(q, 2, replace=False)
            psi = apply_gate(psi, g, (c, t), params)
            ref = oracles.full_controlled(CTRL_MATS[g](*params), c, t, q) @ ref
        else:
            t = int(rng.integers(q))
            psi = apply_gate(psi, g, (t,), params)
            ref = oracles.full_single(ORACLE_MATS[g](*params), t, q) @ ref
    assert np.max(np.abs(psi[0] - ref)) <= 1e-12


@pytest.mark.parametrize("q,L", [(2, 1), (3, 2), (4, 1), (4, 3)])
def test_circuit_matches_dense_oracle(q, L):
    spec = CircuitSpec(q, L)
    rng = np.random.default_rng(q * 10 + L)
    x = rng.random(q)
    theta = random_theta(spec, q + L)
    psi = simulate(x, theta, spec)[0]
    assert np.max(np.abs(psi - oracles.dense_circuit_state(x, theta, q, L))) <= 1e-12
    z = oracles.z_expectations(oracles.dense_circuit_state(x, theta, q, L), q)
    assert np.allclose(run_circuit(x, theta, spec), z, atol=1e-12)


def test_default_circuit_size():
    assert CircuitSpec().n_params == 144
    assert QuantumLayer().theta.size == 144


def test_zero_parameters_zero_inputs():
    # H|0> lies on the equator of every qubit
    z = run_circuit(np.zeros(8), np.zeros(144))
    assert np.allclose(z, 0.0, atol=1e-12)


def test_norm_drift_over_many_gates():
    rng = np.random.default_rng(1)
    psi = zero_state(4)
    for _ in range(1000):
        if rng.random() < 0.5:
            psi = apply_gate(psi, "Rot", (int(rng.integers(4)),), tuple(rng.uniform(-3, 3, 3)))
        else:
            c, t = rng.choice(4, 2, replace=False)
            psi = apply_gate(psi, "CRot", (c, t), tuple(rng.uniform(-3, 3, 3)))
    assert abs(np.linalg.norm(psi) - 1) <= 1e-10


@given(st.floats(-2 * math.pi, 2 * math.pi))
def test_single_rotation_expectation(theta):
    psi = apply_gate(zero_state(1), "RY", (0,), (theta,))
    assert pauli_z(psi)[0, 0] == pytest.approx(math.cos(theta), abs=1e-12)


def test_single_rotation_gradient_is_minus_sine():
    spec = CircuitSpec(2, 1)
    for t in np.linspace(-3, 3, 7):
        theta = np.zeros(spec.n_params)
        theta[1] = t

        def z0(v):
            th = theta.copy()
            th[1] = v[0]
            return run_circuit(np.array([0.5, 0.5]), th, spec)[0]

        num = central_diff(z0, np.array([t]), 1e-6)[0]
        g, _ = parameter_shift_grad(np.array([0.5, 0.5]), theta, [1.0, 0.0], spec)
        assert g[1] == pytest.approx(num, abs=1e-7)


@pytest.mark.parametrize("q,L", [(2, 1), (3, 2), (4, 1)])
def test_parameter_shift_matches_finite_differences(q, L):
    spec = CircuitSpec(q, L)
    rng = np.random.default_rng(3 + q)
    x = rng.uniform(0.1, 0.9, q)
    theta = random_theta(spec, 7)
    w = rng.normal(size=q)

    def f_theta(t):
        return float(run_circuit(x, t, spec) @ w)

    def f_x(v):
        return float(run_circuit(v, theta, spec) @ w)

    d_theta, d_x = parameter_shift_grad(x, theta, w, spec)
    assert np.max(np.abs(d_theta - central_diff(f_theta, theta, 1e-6))) <= 1e-7
    assert np.max(np.abs(d_x - central_diff(f_x, x, 1e-6))) <= 1e-7


@pytest.mark.parametrize("q,L,batch", [(2, 1, 1), (4, 2, 3), (8, 3, 2)])
def test_adjoint_equals_parameter_shift(q, L, batch):
    spec = CircuitSpec(q, L)
    rng = np.random.default_rng(q + L)
    x = rng.random((batch, q))
    theta = random_theta(spec, 2)
    g = rng.normal(size=(batch, q))
    ps_t, ps_x = parameter_shift_grad(x, theta, g, spec)
    ad_t, ad_x = adjoint_grad(x, theta, g, spec)
    assert np.allclose(ad_t, ps_t, atol=1e-10)
    assert np.allclose(ad_x, ps_x, atol=1e-10)


def test_global_phase_invariance():
    psi = simulate(np.full(3, 0.3), random_theta(CircuitSpec(3, 1), 0), CircuitSpec(3, 1))
    assert np.allclose(pauli_z(psi), pauli_z(psi * np.exp(0.7j)), atol=1e-15)


def test_shots_on_basis_state():
    z = sample_z(zero_state(3), 17, np.random.default_rng(0))
    assert np.array_equal(z, np.ones((1, 3)))


def test_shot_deviation_bound():
    spec = CircuitSpec(4, 2)
    rng = np.random.default_rng(5)
    x, theta = rng.random(4), random_theta(spec, 5)
    exact = run_circuit(x, theta, spec)
    est = sampled_expectation(x, theta, 1024, rng, spec)
    # Hoeffding at 1e-6 per qubit: 2 * sqrt(ln(2e6) / (2 * 1024))
    assert np.max(np.abs(est - exact)) <= 2 * math.sqrt(math.log(2e6) / 2048)
    big = sampled_expectation(x, theta, 10**6, rng, spec)
    assert np.max(np.abs(big - exact)) <= 0.01


def test_shot_sampling_reproducible():
    spec = CircuitSpec(3, 1)
    x, theta = np.full(3, 0.4), random_theta(spec, 1)
    a = sampled_expectation(x, theta, 64, np.random.default_rng(9), spec)
    b = sampled_expectation(x, theta, 64, np.random.default_rng(9), spec)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("gate,targets", [("RY", (3,)), ("CNOT", (0, 0)), ("CRY", (0,)), ("H", (0, 1)),
                                          ("XYZ", (0,))])
def test_invalid_gates_raise(gate, targets):
    with pytest.raises(ValueError):
        apply_gate(zero_state(2), gate, targets, (0.1,) * N_PARAMS.get(gate, 0))


def test_wrong_parameter_count_raises():
    with pytest.raises(ValueError):
        run_circuit(np.zeros(8), np.zeros(10))


def test_out_of_range_inputs_are_clamped_with_warning():
    with pytest.warns(RuntimeWarning):
        z = run_circuit(np.full(8, 1.5), np.zeros(144))
    assert np.allclose(z, run_circuit(np.ones(8), np.zeros(144)))


@settings(max_examples=20)
@given(st.integers(0, 2**31))
def test_expectations_bounded(seed):
    spec = CircuitSpec(3, 2)
    rng = np.random.default_rng(seed)
    z = run_circuit(rng.random(3), random_theta(spec, seed), spec)
    assert np.all(np.abs(z) <= 1 + 1e-12)


def test_layer_round_trip_and_gradient_methods():
    layer = QuantumLayer(3, 1, np.random.default_rng(0), grad_method="parameter-shift")
    clone = QuantumLayer.from_dict(layer.to_dict())
    assert np.array_equal(clone.theta, layer.theta)
    with pytest.raises(ValueError):
        QuantumLayer(grad_method="bogus")
