"""One-hot and Poisson spike encodings of the discrete observation."""
from __future__ import annotations

import itertools

import numpy as np

from .gridworld import ObsState

N_INPUT = 29
# block offsets for R_o (8), D_o (5), R_T (8), A (8)
_OFFSETS = (0, 8, 13, 21)
_RANGES = ((1, 8), (0, 4), (1, 8), (1, 8))
_BASES = (1, 0, 1, 1)


def check_obs(obs) -> None:
    for value, (lo, hi), name in zip(obs, _RANGES, ("R_o", "D_o", "R_T", "A")):
        if not lo <= value <= hi:
            raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


def one_hot(obs: ObsState) -> np.ndarray:
    check_obs(obs)
    x = np.zeros(N_INPUT)
    for value, offset, base in zip(obs, _OFFSETS, _BASES):
        x[offset + value - base] = 1.0
    return x


def all_states() -> list[ObsState]:
    """Every observation in canonical (mixed-radix) order."""
    return [
        ObsState(r_o, d_o, r_t, a)
        for r_o, d_o, r_t, a in itertools.product(range(1, 9), range(5), range(1, 9), range(1, 9))
    ]


def spike_probability(rate, dt: float) -> np.ndarray:
    return -np.expm1(-np.asarray(rate, dtype=float) * dt)


def poisson_encode(
    x: np.ndarray, f_max: float, T: int, dt: float, rng: np.random.Generator
) -> np.ndarray:
    """Bernoulli spike trains with per-step probability 1 - exp(-f_max * x * dt).

    ``x`` may be a single vector (n,) giving (T, n) spikes or a batch (B, n)
    giving (B, T, n).
    """
    if T < 1 or dt <= 0 or f_max <= 0:
        raise ValueError("need T >= 1, dt > 0 and f_max > 0")
    x = np.asarray(x, dtype=float)
    p = spike_probability(f_max * x, dt)
    shape = (T,) + x.shape if x.ndim == 1 else (x.shape[0], T) + x.shape[1:]
    p = p if x.ndim == 1 else p[:, None, :]
    return (rng.random(shape) < p).astype(float)
