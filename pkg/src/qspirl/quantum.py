"""Batched statevector simulator for the hybrid models' variational circuit.

Circuit on q qubits with L layers::

    H on every qubit
    RY(pi * x_i) on qubit i
    repeat L times:
        Rot(phi, theta, omega) on every qubit
        CRot(phi, theta, omega) on the ring i -> (i + 1) mod q

with ``Rot(phi, theta, omega) = RZ(omega) RY(theta) RZ(phi)``. The H + RY
encoding yields a product state that is built in closed form. Qubit 0 is the
most significant bit of the basis index.

States are arrays of shape (B, 2**q); every routine is vectorised over B.
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

SQRT2 = math.sqrt(2.0)
# four-term shift rule for controlled rotations
C_PLUS = (SQRT2 + 1) / (4 * SQRT2)
C_MINUS = (SQRT2 - 1) / (4 * SQRT2)


# --- gate matrices ----------------------------------------------------------

def _batch(angle):
    return np.asarray(angle, dtype=float)


def mat_h(_=None):
    return np.array([[1, 1], [1, -1]], dtype=complex) / SQRT2


def mat_rx(a):
    a = _batch(a)
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.stack([np.stack([c + 0j, -1j * s], -1), np.stack([-1j * s, c + 0j], -1)], -2)


def mat_ry(a):
    a = _batch(a)
    c, s = np.cos(a / 2), np.sin(a / 2)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)


def mat_rz(a):
    a = _batch(a)
    e = np.exp(-0.5j * a)
    z = np.zeros_like(e)
    return np.stack([np.stack([e, z], -1), np.stack([z, np.conj(e)], -1)], -2)


def mat_rot(phi, theta, omega):
    if np.ndim(phi) == 0 and np.ndim(theta) == 0 and np.ndim(omega) == 0:
        c, s = math.cos(theta / 2), math.sin(theta / 2)
        plus, minus = cmath.exp(-0.5j * (phi + omega)), cmath.exp(0.5j * (phi - omega))
        return np.array([[plus * c, -minus * s], [minus.conjugate() * s, plus.conjugate() * c]])
    return mat_rz(omega) @ mat_ry(theta) @ mat_rz(phi)


def dmat_ry(a):
    a = _batch(a)
    c, s = np.cos(a / 2), np.sin(a / 2)
    return 0.5 * np.stack([np.stack([-s, -c], -1), np.stack([c, -s], -1)], -2).astype(complex)


def dmat_rz(a):
    a = _batch(a)
    e = np.exp(-0.5j * a)
    z = np.zeros_like(e)
    return np.stack([np.stack([-0.5j * e, z], -1), np.stack([z, 0.5j * np.conj(e)], -1)], -2)


CNOT_X = np.array([[0, 1], [1, 0]], dtype=complex)

GATES = {
    "H": (0, mat_h),
    "RX": (1, mat_rx),
    "RY": (1, mat_ry),
    "RZ": (1, mat_rz),
    "Rot": (3, mat_rot),
}
CONTROLLED = {"CNOT": (0, lambda: CNOT_X), "CRX": (1, mat_rx), "CRY": (1, mat_ry),
              "CRZ": (1, mat_rz), "CRot": (3, mat_rot)}


# --- state manipulation -----------------------------------------------------

def zero_state(q: int, batch: int = 1) -> np.ndarray:
    psi = np.zeros((batch, 2**q), dtype=complex)
    psi[:, 0] = 1.0
    return psi


def n_qubits(state: np.ndarray) -> int:
    return int(round(math.log2(state.shape[-1])))


@lru_cache(maxsize=None)
def z_signs(q: int) -> np.ndarray:
    """(2**q, q) matrix of Pauli-Z eigenvalues per basis state and qubit."""
    idx = np.arange(2**q)[:, None]
    bits = (idx >> (q - 1 - np.arange(q))[None, :]) & 1
    return 1.0 - 2.0 * bits


def _views(state, target: int, control: int | None):
    """Strided views of the amplitudes with target bit 0 and 1 (control bit 1)."""
    q = n_qubits(state)
    t = state.reshape((state.shape[0],) + (2,) * q)
    idx = [slice(None)] * (q + 1)
    if control is not None:
        idx[1 + control] = 1
    idx[1 + target] = 0
    v0 = t[tuple(idx)]
    idx[1 + target] = 1
    return v0, t[tuple(idx)]


def _entries(m, ndim: int):
    m = np.asarray(m)
    if m.ndim == 2:
        return m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    shape = (m.shape[0],) + (1,) * (ndim - 1)
    return tuple(m[:, r, c].reshape(shape) for r, c in ((0, 0), (0, 1), (1, 0), (1, 1)))


def _apply_inplace(state, matrix, target: int, control: int | None = None) -> None:
    a0, a1 = _views(state, target, control)
    m00, m01, m10, m11 = _entries(matrix, a0.ndim)
    n0 = m00 * a0 + m01 * a1
    a1 *= m11
    a1 += m10 * a0
    a0[...] = n0


def apply_matrix(state, matrix, target: int, control: int | None = None):
    """Apply a 2x2 matrix (shared (2, 2) or per-sample (B, 2, 2)) to ``target``,
    optionally only on the subspace where ``control`` is 1."""
    new = np.array(state, dtype=complex, copy=True)
    _apply_inplace(new, matrix, target, control)
    return new


def _reduced(lam, psi, target: int, control: int | None):
    """Per-sample 2x2 matrix M[r, c] = sum over the other qubits of
    conj(lam_r) * psi_c, restricted to control = 1."""
    l0, l1 = _views(lam, target, control)
    p0, p1 = _views(psi, target, control)
    l0, l1 = np.conj(l0), np.conj(l1)
    out = np.empty((psi.shape[0], 2, 2), dtype=complex)
    for r, lr in enumerate((l0, l1)):
        for c, pc in enumerate((p0, p1)):
            out[:, r, c] = (lr * pc).reshape(psi.shape[0], -1).sum(axis=1)
    return out


def apply_gate(state, gate: str, targets, params=()):
    """Apply a named gate. ``targets`` is (qubit,) or (control, target)."""
    state = np.atleast_2d(np.asarray(state, dtype=complex))
    q = n_qubits(state)
    targets = tuple(int(t) for t in np.atleast_1d(targets))
    if any(not 0 <= t < q for t in targets) or len(set(targets)) != len(targets):
        raise ValueError(f"invalid targets {targets} for {q} qubits")
    if gate in GATES:
        n_par, fn = GATES[gate]
        if len(targets) != 1:
            raise ValueError(f"{gate} acts on one qubit")
        return apply_matrix(state, fn(*params) if n_par else fn(), targets[0])
    if gate in CONTROLLED:
        n_par, fn = CONTROLLED[gate]
        if len(targets) != 2:
            raise ValueError(f"{gate} needs (control, target)")
        return apply_matrix(state, fn(*params), targets[1], control=targets[0])
    raise ValueError(f"unknown gate {gate!r}")


def pauli_z(state) -> np.ndarray:
    """Per-qubit <Z>, shape (B, q)."""
    probs = np.abs(state) ** 2
    return probs @ z_signs(n_qubits(state))


def sample_z(state, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Empirical per-qubit <Z> from ``shots`` computational-basis samples."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    probs = np.abs(state) ** 2
    probs /= probs.sum(axis=1, keepdims=True)
    counts = np.stack([rng.multinomial(shots, p) for p in probs])
    return counts @ z_signs(n_qubits(state)) / shots


# --- the variational circuit ------------------------------------------------

class Op(NamedTuple):
    gate: str              # "Rot" or "CRot"
    target: int
    control: int | None
    param: int             # first of three consecutive entries of theta


@dataclass(frozen=True)
class CircuitSpec:
    q: int = 8
    L: int = 3

    def __post_init__(self):
        if self.q < 2 or self.L < 1:
            raise ValueError("circuit needs q >= 2 and L >= 1")

    @property
    def n_params(self) -> int:
        return self.L * 6 * self.q

    def ops(self) -> tuple[Op, ...]:
        return _circuit_ops(self.q, self.L)


@lru_cache(maxsize=None)
def _circuit_ops(q: int, L: int) -> tuple[Op, ...]:
    ops = []
    for layer in range(L):
        base = layer * 6 * q
        ops += [Op("Rot", i, None, base + 3 * i) for i in range(q)]
        ops += [Op("CRot", (i + 1) % q, i, base + 3 * q + 3 * i) for i in range(q)]
    return tuple(ops)


def encoded_state(angles) -> np.ndarray:
    """Product state prod_i RY(angle_i) H |0>, angles of shape (B, q)."""
    c, s = np.cos(angles / 2), np.sin(angles / 2)
    amp0 = (c - s) / SQRT2
    amp1 = (s + c) / SQRT2
    psi = np.stack([amp0[:, 0], amp1[:, 0]], axis=1).astype(complex)
    for i in range(1, angles.shape[1]):
        qubit = np.stack([amp0[:, i], amp1[:, i]], axis=1)
        psi = (psi[:, :, None] * qubit[:, None, :]).reshape(psi.shape[0], -1)
    return psi


def _check(spec: CircuitSpec, x, theta):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    theta = np.asarray(theta, dtype=float)
    if x.shape[1] != spec.q:
        raise ValueError(f"expected {spec.q} features, got {x.shape[1]}")
    if theta.shape != (spec.n_params,):
        raise ValueError(f"expected {spec.n_params} circuit parameters, got {theta.shape}")
    return x, theta


def simulate(x, theta, spec: CircuitSpec = CircuitSpec(), input_shift=None) -> np.ndarray:
    """Final statevector(s) for inputs ``x`` (B, q) and parameters ``theta``.

    ``input_shift`` = (i, delta) offsets the encoding angle of feature i.
    """
    x, theta = _check(spec, x, theta)
    angles = math.pi * x
    if input_shift is not None:
        angles = angles.copy()
        angles[:, input_shift[0]] += input_shift[1]
    psi = encoded_state(angles)
    for op in spec.ops():
        k = op.param
        _apply_inplace(psi, mat_rot(theta[k], theta[k + 1], theta[k + 2]), op.target, op.control)
    return psi


def _clamp(x):
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)):
        warnings.warn("circuit inputs outside [0, 1] were clamped", RuntimeWarning, stacklevel=3)
        return np.clip(x, 0.0, 1.0)
    return x


def run_circuit(x, theta, spec: CircuitSpec = CircuitSpec()) -> np.ndarray:
    """Pauli-Z features. ``x`` of shape (q,) gives (q,), (B, q) gives (B, q)."""
    single = np.ndim(x) == 1
    z = pauli_z(simulate(_clamp(x), theta, spec))
    return z[0] if single else z


def sampled_expectation(x, theta, shots: int, rng: np.random.Generator,
                        spec: CircuitSpec = CircuitSpec()) -> np.ndarray:
    single = np.ndim(x) == 1
    z = sample_z(simulate(_clamp(x), theta, spec), shots, rng)
    return z[0] if single else z


def parameter_shift_grad(x, theta, upstream, spec: CircuitSpec = CircuitSpec()):
    """Gradients of sum_i upstream_i <Z_i> by the parameter-shift rule.

    Rot angles use the two-term rule, CRot angles the four-term rule for
    controlled rotations, encoding angles the two-term rule times pi.
    Returns (d/dtheta summed over the batch, d/dx per sample); a (q,) input
    gives a (q,) input gradient.
    """
    single = np.ndim(x) == 1
    x, theta = _check(spec, x, theta)
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    d_theta = np.zeros(spec.n_params)
    d_x = np.zeros_like(x)
    if not np.any(g):
        return d_theta, (d_x[0] if single else d_x)

    ops = spec.ops()
    # state entering each op, so a shifted run only replays the suffix
    prefix = []
    psi = encoded_state(math.pi * x)
    for op in ops:
        prefix.append(psi.copy())
        k = op.param
        _apply_inplace(psi, mat_rot(*theta[k:k + 3]), op.target, op.control)

    def f(j, k, s):
        shifted = theta.copy()
        shifted[k] += s
        state = prefix[j].copy()
        for op in ops[j:]:
            m = op.param
            _apply_inplace(state, mat_rot(*shifted[m:m + 3]), op.target, op.control)
        return float(np.sum(pauli_z(state) * g))

    half = math.pi / 2
    for j, op in enumerate(ops):
        for k in range(op.param, op.param + 3):
            if op.control is None:
                d_theta[k] = 0.5 * (f(j, k, half) - f(j, k, -half))
            else:
                d_theta[k] = (C_PLUS * (f(j, k, half) - f(j, k, -half))
                              - C_MINUS * (f(j, k, 3 * half) - f(j, k, -3 * half)))
    for i in range(spec.q):
        fp = np.sum(pauli_z(simulate(x, theta, spec, (i, half))) * g, axis=1)
        fm = np.sum(pauli_z(simulate(x, theta, spec, (i, -half))) * g, axis=1)
        d_x[:, i] = math.pi * 0.5 * (fp - fm)
    return d_theta, (d_x[0] if single else d_x)


# d(RY(a))/da = (-i/2) Y RY(a)
_GEN_Y = np.array([[0.0, -0.5], [0.5, 0.0]], dtype=complex)


def _rot_generators(phi, theta, omega):
    """Matrices K_p = (dRot/dp) Rot^dagger for p in (phi, theta, omega)."""
    rz_phi, ry, rz_om = mat_rz(phi), mat_ry(theta), mat_rz(omega)
    u_dag = (rz_om @ ry @ rz_phi).conj().T
    return (
        rz_om @ ry @ dmat_rz(phi) @ u_dag,
        rz_om @ dmat_ry(theta) @ rz_phi @ u_dag,
        dmat_rz(omega) @ ry @ rz_phi @ u_dag,
    )


def adjoint_grad(x, theta, upstream, spec: CircuitSpec = CircuitSpec()):
    """Same contract as :func:`parameter_shift_grad`, computed by one forward
    pass and one reverse sweep over the statevector."""
    single = np.ndim(x) == 1
    x, theta = _check(spec, x, theta)
    g = np.atleast_2d(np.asarray(upstream, dtype=float))
    psi = simulate(x, theta, spec)
    lam = psi * (g @ z_signs(spec.q).T)
    d_theta = np.zeros(spec.n_params)
    for op in reversed(spec.ops()):
        k = op.param
        M = _reduced(lam, psi, op.target, op.control).sum(axis=0)
        for p, K in enumerate(_rot_generators(theta[k], theta[k + 1], theta[k + 2])):
            d_theta[k + p] += 2.0 * np.sum(K * M).real
        u_dag = mat_rot(theta[k], theta[k + 1], theta[k + 2]).conj().T
        _apply_inplace(psi, u_dag, op.target, op.control)
        _apply_inplace(lam, u_dag, op.target, op.control)
    d_x = np.empty_like(x)
    for i in range(spec.q):
        M = _reduced(lam, psi, i, None)
        d_x[:, i] = math.pi * 2.0 * np.einsum("rc,brc->b", _GEN_Y, M).real
    return d_theta, (d_x[0] if single else d_x)


GRADIENT_METHODS = {"parameter-shift": parameter_shift_grad, "adjoint": adjoint_grad}


class QuantumLayer:
    """Circuit block for the hybrid networks: (B, q) rates in [0, 1] to (B, q)
    Pauli-Z features."""

    kind = "quantum"

    def __init__(self, q: int = 8, L: int = 3, rng=None, grad_method: str = "adjoint"):
        self.spec = CircuitSpec(q, L)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.theta = rng.uniform(-math.pi, math.pi, size=self.spec.n_params)
        if grad_method not in GRADIENT_METHODS:
            raise ValueError(f"unknown gradient method {grad_method!r}")
        self.grad_method = grad_method
        self.shots: int | None = None
        self.shot_rng: np.random.Generator | None = None

    @property
    def params(self):
        return [self.theta]

    def forward(self, x):
        inside = (x >= 0) & (x <= 1)
        xc = _clamp(x)
        psi = simulate(xc, self.theta, self.spec)
        if self.shots:
            rng = self.shot_rng if self.shot_rng is not None else np.random.default_rng(0)
            z = sample_z(psi, self.shots, rng)
        else:
            z = pauli_z(psi)
        return z, (xc, inside)

    def backward(self, cache, gz):
        xc, inside = cache
        d_theta, d_x = GRADIENT_METHODS[self.grad_method](xc, self.theta, gz, self.spec)
        return d_x * inside, [d_theta]

    def to_dict(self) -> dict:
        return {"type": self.kind, "q": self.spec.q, "L": self.spec.L,
                "params": self.theta.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> QuantumLayer:
        layer = cls(d["q"], d["L"])
        layer.theta[...] = np.asarray(d["params"], dtype=float)
        return layer
