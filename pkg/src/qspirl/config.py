"""Training configuration with the fixed and grid-searched hyperparameters."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .gridworld import RewardParams


@dataclass(frozen=True)
class TrainConfig:
    # training / DQN
    episodes: int = 800
    gamma: float = 0.9
    buffer_capacity: int = 100_000
    batch_size: int = 128
    target_update: int = 500
    learning_start: int = 1000
    # optimisation
    lr: float = 0.005
    clip_norm: float = 1.0
    # exploration
    epsilon: float = 0.01
    temp_init: float = 1.0
    temp_decay: float = 0.999
    temp_min: float = 0.05
    # architecture
    hidden_classical: int = 30
    hidden_quantum: int = 35
    qubits: int = 8
    layers: int = 3
    activation: str = "relu"
    quantum_input_activation: str = "sigmoid"
    grad_method: str = "adjoint"
    # spiking (classical 20x20 selection)
    f_max: float = 100.0
    timesteps: int = 10
    dt: float = 0.2
    tau_mem: float = 0.02
    tau_syn: float = 0.01
    # tabular baseline
    alpha_tab: float = 0.1
    eps_tab: float = 0.1
    reward: RewardParams = field(default_factory=RewardParams)

    def __post_init__(self):
        positive = ("episodes", "buffer_capacity", "batch_size", "target_update", "lr",
                    "clip_norm", "temp_init", "temp_min", "hidden_classical", "hidden_quantum",
                    "qubits", "layers", "f_max", "timesteps", "dt", "tau_mem", "tau_syn")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.temp_decay < 1:
            raise ValueError("temp_decay must lie in (0, 1)")
        if not 0 <= self.gamma <= 1 or not 0 <= self.epsilon <= 1 or not 0 <= self.eps_tab <= 1:
            raise ValueError("gamma, epsilon and eps_tab must lie in [0, 1]")
        if self.learning_start < 0 or self.alpha_tab < 0:
            raise ValueError("learning_start and alpha_tab must be >= 0")
        if isinstance(self.reward, dict):
            object.__setattr__(self, "reward", RewardParams(**self.reward))

    def replace(self, **changes) -> TrainConfig:
        reward = changes.pop("reward", None)
        cfg = dataclasses.replace(self, **changes)
        if reward is not None:
            base = dataclasses.asdict(cfg.reward)
            base.update(reward if isinstance(reward, dict) else dataclasses.asdict(reward))
            cfg = dataclasses.replace(cfg, reward=RewardParams(**base))
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        reward = d.get("reward", {})
        unknown = set(reward) - {f.name for f in dataclasses.fields(RewardParams)}
        if unknown:
            raise ValueError(f"unknown reward keys: {sorted(unknown)}")
        return cls(**{**d, "reward": RewardParams(**reward)})

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# grid-search selections (f_max, T, dt, tau_mem, tau_syn) per family and grid size
SELECTED_SPIKING = {
    "classical": {20: (100, 10, 0.20, 0.02, 0.01), 30: (100, 5, 0.05, 0.01, 0.005),
                  40: (100, 20, 0.20, 0.04, 0.02)},
    "quantum": {20: (100, 10, 0.10, 0.04, 0.01), 30: (100, 20, 0.05, 0.02, 0.005),
                40: (200, 5, 0.01, 0.01, 0.005)},
}

SEARCH_SPACE = {
    "f_max": [20, 100, 200],
    "timesteps": [5, 10, 15, 20, 30],
    "dt": [0.01, 0.05, 0.1, 0.2],
    "tau_mem": [0.01, 0.02, 0.04],
    "tau_syn": [0.005, 0.01, 0.02],
    "activation": ["relu", "tanh", "sigmoid"],
}
SPIKING_KEYS = ("f_max", "timesteps", "dt", "tau_mem", "tau_syn")


def selected_config(kind: str, size: int, base: TrainConfig | None = None) -> TrainConfig:
    """Config carrying the selected spiking hyperparameters for ``kind`` at
    grid ``size`` (unchanged for sizes without a published selection)."""
    base = base or TrainConfig()
    family = "quantum" if kind in ("qmlp", "qsnn") else "classical"
    values = SELECTED_SPIKING[family].get(size)
    if values is None or kind not in ("snn", "qsnn"):
        return base
    return base.replace(**dict(zip(SPIKING_KEYS, values)), activation="relu")


def search_space(kind: str) -> dict:
    if kind in ("snn", "qsnn"):
        return {k: SEARCH_SPACE[k] for k in SPIKING_KEYS}
    if kind in ("mlp", "qmlp"):
        return {"activation": SEARCH_SPACE["activation"]}
    raise ValueError(f"no search space for {kind!r}")
