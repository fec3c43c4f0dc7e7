"""Small reverse-mode engine for feed-forward networks.

Every block implements ``forward(x) -> (y, cache)`` and
``backward(cache, grad_y) -> (grad_x, param_grads)`` and exposes ``params``
as a list of arrays that optimisers update in place. Inputs may carry any
number of leading batch axes.
"""
from __future__ import annotations

import numpy as np


class TrainingError(RuntimeError):
    """Non-finite loss, gradient or state during training."""


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


ACTIVATIONS = {
    "identity": (lambda z: z, lambda z, y: np.ones_like(z)),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, y: (z > 0).astype(z.dtype)),
    "tanh": (np.tanh, lambda z, y: 1.0 - y * y),
    "sigmoid": (_sigmoid, lambda z, y: y * (1.0 - y)),
}


def activation_name(name: str) -> str:
    key = name.lower()
    if key not in ACTIVATIONS:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}")
    return key


def xavier_uniform(n_in: int, n_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


class Dense:
    """Affine map followed by an element-wise activation."""

    kind = "dense"

    def __init__(self, n_in: int, n_out: int, activation: str = "identity", rng=None):
        self.activation = activation_name(activation)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = xavier_uniform(n_in, n_out, rng)
        self.bias = np.zeros(n_out)

    @property
    def params(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    @property
    def shape(self) -> tuple[int, int]:
        return self.weight.shape

    def forward(self, x):
        if x.shape[-1] != self.weight.shape[1]:
            raise ValueError(f"expected input width {self.weight.shape[1]}, got {x.shape[-1]}")
        z = x @ self.weight.T + self.bias
        y = ACTIVATIONS[self.activation][0](z)
        return y, (x, z, y)

    def backward(self, cache, gy):
        x, z, y = cache
        gz = gy * ACTIVATIONS[self.activation][1](z, y)
        x2 = x.reshape(-1, x.shape[-1])
        gz2 = gz.reshape(-1, gz.shape[-1])
        g_w = gz2.T @ x2
        g_b = gz2.sum(axis=0)
        return gz @ self.weight, [g_w, g_b]

    def to_dict(self) -> dict:
        return {
            "type": self.kind,
            "shape": list(self.weight.shape),
            "activation": self.activation,
            "weight": self.weight.ravel().tolist(),
            "bias": self.bias.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> Dense:
        n_out, n_in = d["shape"]
        layer = cls(n_in, n_out, d["activation"])
        layer.weight[...] = np.asarray(d["weight"], dtype=float).reshape(n_out, n_in)
        layer.bias[...] = np.asarray(d["bias"], dtype=float)
        return layer


class Sequential:
    def __init__(self, blocks):
        self.blocks = list(blocks)

    @property
    def params(self) -> list[np.ndarray]:
        return [p for b in self.blocks for p in b.params]

    def n_params(self) -> int:
        return int(sum(p.size for p in self.params))

    def forward(self, x):
        tape = []
        for block in self.blocks:
            x, cache = block.forward(x)
            tape.append(cache)
        return x, tape

    def backward(self, tape, gy):
        """Return (input gradient, parameter gradients aligned with ``params``)."""
        grads: list[list[np.ndarray]] = []
        for block, cache in zip(reversed(self.blocks), reversed(tape)):
            gy, g = block.backward(cache, gy)
            grads.append(g)
        return gy, [g for group in reversed(grads) for g in group]


def forward(layers: Sequential, x):
    return layers.forward(np.asarray(x, dtype=float))


def backward(layers: Sequential, tape, output_gradient):
    return layers.backward(tape, np.asarray(output_gradient, dtype=float))


def global_norm(grads) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_gradients(grads, max_norm: float = 1.0):
    """Scale all gradients jointly so their global L2 norm is at most ``max_norm``."""
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise TrainingError("non-finite gradient")
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads], norm
    return list(grads), norm


class Adam:
    def __init__(self, params, lr=0.005, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=1.0):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.clip_norm = clip_norm
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads) -> float:
        """Clip, then apply one bias-corrected Adam update in place. Returns the
        pre-clip gradient norm."""
        if self.clip_norm is not None:
            grads, norm = clip_gradients(grads, self.clip_norm)
        else:
            norm = global_norm(grads)
            if not np.isfinite(norm):
                raise TrainingError("non-finite gradient")
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return norm


def adam_step(params, grads, state: Adam) -> float:
    return state.step(params, grads)
