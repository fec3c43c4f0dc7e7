"""The five agent families behind one action-value interface.

Every agent maps an :class:`ObsState` to five action values. Neural agents
also expose batched ``forward``/``backward`` over one-hot inputs for DQN.
"""
from __future__ import annotations

import copy
import json

import numpy as np

from .config import TrainConfig
from .encoding import N_INPUT, one_hot, poisson_encode
from .gridworld import N_ACTIONS, ObsState
from .neural import Dense, Sequential
from .quantum import QuantumLayer
from .spiking import LIFParams, MeanPool, SpikingDense

N_STATES = 2560
KINDS = ("qtable", "mlp", "snn", "qmlp", "qsnn")
ALIASES = {"tabular": "qtable", "q-table": "qtable"}
REFERENCE_PARAM_COUNTS = {"mlp": 1985, "snn": 1985, "qmlp": 1977, "qsnn": 1977}


def canonical_kind(kind: str) -> str:
    k = ALIASES.get(kind.lower(), kind.lower())
    if k not in KINDS:
        raise ValueError(f"unknown agent kind {kind!r}; choose from {KINDS}")
    return k


def state_index(obs: ObsState) -> int:
    """Mixed-radix index ((R_o-1)*5 + D_o)*64 + (R_T-1)*8 + (A-1)."""
    r_o, d_o, r_t, a = obs
    if not (1 <= r_o <= 8 and 0 <= d_o <= 4 and 1 <= r_t <= 8 and 1 <= a <= 8):
        raise ValueError(f"observation {tuple(obs)} out of range")
    return ((r_o - 1) * 5 + d_o) * 64 + (r_t - 1) * 8 + (a - 1)


def index_state(index: int) -> ObsState:
    if not 0 <= index < N_STATES:
        raise ValueError(f"state index {index} out of range")
    hi, lo = divmod(index, 64)
    r_o, d_o = divmod(hi, 5)
    r_t, a = divmod(lo, 8)
    return ObsState(r_o + 1, d_o, r_t + 1, a + 1)


class TabularAgent:
    kind = "qtable"

    def __init__(self, alpha: float = 0.1, epsilon: float = 0.1, gamma: float = 0.9):
        self.table = np.zeros((N_STATES, N_ACTIONS))
        self.alpha = alpha
        self.epsilon = epsilon
        self.gamma = gamma

    def q_values(self, obs: ObsState, rng=None) -> np.ndarray:
        return self.table[state_index(obs)].copy()

    def update(self, s: int, a: int, r: float, s_next: int, terminal: bool) -> None:
        bootstrap = 0.0 if terminal else self.gamma * self.table[s_next].max()
        self.table[s, a] += self.alpha * (r + bootstrap - self.table[s, a])

    def n_params(self) -> int:
        return self.table.size


def tabular_update(agent: TabularAgent, s, a, r, s_next, terminal) -> None:
    agent.update(s, a, r, s_next, terminal)


class NeuralAgent:
    """A network over one-hot observations, optionally preceded by a Poisson
    spike encoder."""

    def __init__(self, kind: str, net: Sequential, encoder: dict | None = None):
        self.kind = kind
        self.net = net
        self.encoder = encoder

    @property
    def spiking(self) -> bool:
        return self.encoder is not None

    @property
    def params(self) -> list[np.ndarray]:
        return self.net.params

    def n_params(self) -> int:
        return self.net.n_params()

    def encode(self, x, rng=None):
        if not self.spiking:
            return x
        rng = rng if rng is not None else np.random.default_rng(0)
        e = self.encoder
        return poisson_encode(x, e["f_max"], e["timesteps"], e["dt"], rng)

    def forward(self, x, rng=None):
        """Action values for a batch of one-hot inputs (B, 29) -> (B, 5)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.net.forward(self.encode(x, rng))

    def backward(self, tape, grad_q):
        return self.net.backward(tape, grad_q)[1]

    def predict(self, x, rng=None) -> np.ndarray:
        return self.forward(x, rng)[0]

    def q_values(self, obs: ObsState, rng=None) -> np.ndarray:
        return self.predict(one_hot(obs)[None, :], rng)[0]

    def copy(self) -> NeuralAgent:
        return copy.deepcopy(self)

    def load_params_from(self, other: NeuralAgent) -> None:
        for dst, src in zip(self.params, other.params):
            dst[...] = src

    @property
    def quantum_layer(self) -> QuantumLayer | None:
        for block in self.net.blocks:
            if isinstance(block, QuantumLayer):
                return block
        return None

    def set_shots(self, shots: int | None, rng: np.random.Generator | None = None) -> None:
        """Switch the circuit to shot-sampled expectations (evaluation only)."""
        layer = self.quantum_layer
        if layer is None:
            raise ValueError(f"{self.kind} has no quantum layer")
        layer.shots = shots
        layer.shot_rng = rng

    def layers_to_dict(self) -> list[dict]:
        return [b.to_dict() for b in self.net.blocks]


BLOCK_TYPES = {"dense": Dense, "spiking_dense": SpikingDense, "quantum": QuantumLayer}


def blocks_from_dicts(items: list[dict]) -> Sequential:
    blocks = []
    for d in items:
        if d["type"] == "mean_pool":
            blocks.append(MeanPool())
        elif d["type"] in BLOCK_TYPES:
            blocks.append(BLOCK_TYPES[d["type"]].from_dict(d))
        else:
            raise ValueError(f"unknown layer type {d['type']!r}")
    return Sequential(blocks)


def _encoder(config: TrainConfig) -> dict:
    return {"f_max": config.f_max, "timesteps": config.timesteps, "dt": config.dt}


def build_agent(kind: str, config: TrainConfig | None = None, rng=None):
    """Construct an untrained agent with seeded initialisation."""
    kind = canonical_kind(kind)
    config = config or TrainConfig()
    rng = rng if rng is not None else np.random.default_rng(0)
    if kind == "qtable":
        return TabularAgent(config.alpha_tab, config.eps_tab, config.gamma)

    act = config.activation
    hc, hq, q = config.hidden_classical, config.hidden_quantum, config.qubits
    lif = LIFParams(config.tau_mem, config.tau_syn, config.dt)
    if kind == "mlp":
        blocks = [Dense(N_INPUT, hc, act, rng), Dense(hc, hc, act, rng), Dense(hc, N_ACTIONS, "identity", rng)]
        agent = NeuralAgent(kind, Sequential(blocks))
    elif kind == "snn":
        blocks = [SpikingDense(N_INPUT, hc, lif, rng), SpikingDense(hc, hc, lif, rng), MeanPool(),
                  Dense(hc, N_ACTIONS, "identity", rng)]
        agent = NeuralAgent(kind, Sequential(blocks), _encoder(config))
    elif kind == "qmlp":
        blocks = [Dense(N_INPUT, hq, act, rng), Dense(hq, q, config.quantum_input_activation, rng),
                  QuantumLayer(q, config.layers, rng, config.grad_method),
                  Dense(q, hq, act, rng), Dense(hq, N_ACTIONS, "identity", rng)]
        agent = NeuralAgent(kind, Sequential(blocks))
    else:
        blocks = [SpikingDense(N_INPUT, hq, lif, rng), SpikingDense(hq, q, lif, rng), MeanPool(),
                  QuantumLayer(q, config.layers, rng, config.grad_method),
                  Dense(q, hq, act, rng), Dense(hq, N_ACTIONS, "identity", rng)]
        agent = NeuralAgent(kind, Sequential(blocks), _encoder(config))

    default = TrainConfig()
    default_dims = (hc, hq, q, config.layers) == (default.hidden_classical, default.hidden_quantum,
                                                 default.qubits, default.layers)
    if default_dims and agent.n_params() != REFERENCE_PARAM_COUNTS[kind]:
        raise AssertionError(f"{kind} has {agent.n_params()} parameters, expected {REFERENCE_PARAM_COUNTS[kind]}")
    return agent


def q_values(agent, obs: ObsState, rng=None) -> np.ndarray:
    return agent.q_values(obs, rng)


# --- model files --------------------------------------------------------------

MODEL_FORMAT = "qspirl-model v1"


class ModelFormatError(ValueError):
    pass


def model_to_dict(agent: NeuralAgent, spec=None, config: TrainConfig | None = None) -> dict:
    return {
        "format": MODEL_FORMAT,
        "kind": agent.kind,
        "environment": spec.to_dict() if spec is not None else None,
        "config": config.to_dict() if config is not None else None,
        "encoder": agent.encoder,
        "layers": agent.layers_to_dict(),
    }


def model_from_dict(d: dict):
    """Returns (agent, environment dict or None, TrainConfig or None)."""
    fmt = d.get("format")
    if fmt != MODEL_FORMAT:
        raise ModelFormatError(f"unsupported model format {fmt!r} (expected {MODEL_FORMAT!r})")
    kind = canonical_kind(d["kind"])
    agent = NeuralAgent(kind, blocks_from_dicts(d["layers"]), d.get("encoder"))
    config = TrainConfig.from_dict(d["config"]) if d.get("config") else None
    return agent, d.get("environment"), config


def save_model(agent: NeuralAgent, path, spec=None, config: TrainConfig | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(agent, spec, config), fh, indent=1)
        fh.write("\n")


def load_model(path):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"line {exc.lineno}: {exc.msg}") from None
    return model_from_dict(d)
