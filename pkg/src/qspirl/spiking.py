"""Leaky integrate-and-fire layers trained with a fast-sigmoid surrogate.

Discretisation per timestep (current first, then voltage, soft reset)::

    i <- beta_i * i + input
    u <- beta_v * v + (1 - beta_v) * i
    s  = [u >= v_th]
    v <- u - v_th * s

The reset term is treated as a constant in the backward pass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .neural import Dense, TrainingError

SURROGATE_SLOPE = 25.0


@dataclass(frozen=True)
class LIFParams:
    tau_mem: float = 0.02
    tau_syn: float = 0.01
    dt: float = 0.2
    v_th: float = 1.0
    v_reset: float = 0.0

    def __post_init__(self):
        if min(self.tau_mem, self.tau_syn, self.dt) <= 0:
            raise ValueError("time constants and dt must be positive")

    @property
    def beta_v(self) -> float:
        return math.exp(-self.dt / self.tau_mem)

    @property
    def beta_i(self) -> float:
        return math.exp(-self.dt / self.tau_syn)

    def to_dict(self) -> dict:
        return {"tau_mem": self.tau_mem, "tau_syn": self.tau_syn, "dt": self.dt,
                "v_th": self.v_th, "v_reset": self.v_reset}


@dataclass
class LIFState:
    v: np.ndarray
    i: np.ndarray

    @classmethod
    def zeros(cls, shape) -> LIFState:
        return cls(np.zeros(shape), np.zeros(shape))


def lif_step(state: LIFState, weighted_input, params: LIFParams):
    """Advance one timestep; returns (spikes, new_state)."""
    i = params.beta_i * state.i + weighted_input
    u = params.beta_v * state.v + (1.0 - params.beta_v) * i
    spikes = (u >= params.v_th).astype(float)
    return spikes, LIFState(u - params.v_th * spikes, i)


def surrogate_grad(u, v_th: float = 1.0, k: float = SURROGATE_SLOPE):
    return 1.0 / (1.0 + k * np.abs(u - v_th)) ** 2


def lif_forward(currents: np.ndarray, params: LIFParams):
    """Run LIF dynamics over time axis -2 of ``currents`` (..., T, n).

    Returns spikes of the same shape and the membrane tape for ``lif_backward``.
    """
    T = currents.shape[-2]
    state = LIFState.zeros(currents.shape[:-2] + currents.shape[-1:])
    spikes = np.empty_like(currents)
    membrane = np.empty_like(currents)
    for t in range(T):
        s, state = lif_step(state, currents[..., t, :], params)
        spikes[..., t, :] = s
        # pre-reset membrane, needed by the surrogate
        membrane[..., t, :] = state.v + params.v_th * s
    if not np.all(np.isfinite(membrane)):
        raise TrainingError("LIF state diverged")
    return spikes, membrane


def lif_backward(membrane: np.ndarray, grad_spikes: np.ndarray, params: LIFParams,
                 k: float = SURROGATE_SLOPE) -> np.ndarray:
    """Backpropagation through time; returns the gradient w.r.t. input currents."""
    bv, bi = params.beta_v, params.beta_i
    T = membrane.shape[-2]
    grad_in = np.empty_like(grad_spikes)
    g_v = np.zeros(membrane.shape[:-2] + membrane.shape[-1:])
    g_i = np.zeros_like(g_v)
    for t in range(T - 1, -1, -1):
        u = membrane[..., t, :]
        g_u = g_v + surrogate_grad(u, params.v_th, k) * grad_spikes[..., t, :]
        g_i = (1.0 - bv) * g_u + bi * g_i
        grad_in[..., t, :] = g_i
        g_v = bv * g_u
    return grad_in


class SpikingDense:
    """Linear projection applied per timestep followed by a LIF population."""

    kind = "spiking_dense"

    def __init__(self, n_in: int, n_out: int, lif: LIFParams, rng=None):
        self.linear = Dense(n_in, n_out, "identity", rng)
        self.lif = lif

    @property
    def params(self):
        return self.linear.params

    def forward(self, x):
        currents, lin_cache = self.linear.forward(x)
        spikes, membrane = lif_forward(currents, self.lif)
        return spikes, (lin_cache, membrane)

    def backward(self, cache, g_spikes):
        lin_cache, membrane = cache
        g_cur = lif_backward(membrane, g_spikes, self.lif)
        return self.linear.backward(lin_cache, g_cur)

    def to_dict(self) -> dict:
        d = self.linear.to_dict()
        d["type"] = self.kind
        d["lif"] = self.lif.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SpikingDense:
        n_out, n_in = d["shape"]
        layer = cls(n_in, n_out, LIFParams(**d["lif"]))
        layer.linear = Dense.from_dict({**d, "activation": "identity"})
        return layer


def mean_pool(outputs: np.ndarray) -> np.ndarray:
    return outputs.mean(axis=-2)


class MeanPool:
    """Average over the time axis: (..., T, n) -> (..., n)."""

    kind = "mean_pool"

    @property
    def params(self):
        return []

    def forward(self, x):
        if x.shape[-2] < 1:
            raise ValueError("mean pooling needs T >= 1")
        return mean_pool(x), x.shape[-2]

    def backward(self, T, gy):
        g = np.repeat(gy[..., None, :] / T, T, axis=-2)
        return g, []

    def to_dict(self) -> dict:
        return {"type": self.kind}
