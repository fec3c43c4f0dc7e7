"""DQN and tabular Q-learning loops plus the hyperparameter grid search."""
from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .agents import NeuralAgent, TabularAgent, build_agent, canonical_kind, state_index
from .config import TrainConfig
from .encoding import all_states, one_hot
from .gridworld import N_ACTIONS, GridSpec, GridWorld
from .neural import Adam, TrainingError

log = logging.getLogger(__name__)

ONE_HOT = np.stack([one_hot(s) for s in all_states()])


def temperature(episode: int, config: TrainConfig) -> float:
    """Boltzmann temperature, decayed once per episode and floored at temp_min."""
    return max(config.temp_min, config.temp_init * config.temp_decay**episode)


def softmax(values, temp: float) -> np.ndarray:
    z = np.asarray(values, dtype=float) / temp
    z = z - z.max()
    p = np.exp(z)
    return p / p.sum()


def select_action(agent, obs, episode: int, rng: np.random.Generator,
                  config: TrainConfig) -> int:
    """Uniform random action with probability epsilon, otherwise a sample from
    softmax(Q / T_episode)."""
    if rng.random() < config.epsilon:
        return int(rng.integers(N_ACTIONS))
    q = agent.q_values(obs, rng)
    return int(rng.choice(N_ACTIONS, p=softmax(q, temperature(episode, config))))


class ReplayBuffer:
    """FIFO ring of transitions; states are stored by canonical index and
    expanded to one-hot vectors when sampled."""

    def __init__(self, capacity: int):
        self.capacity = int(capacity)
        self.s = np.zeros(self.capacity, dtype=np.int32)
        self.a = np.zeros(self.capacity, dtype=np.int32)
        self.r = np.zeros(self.capacity)
        self.s2 = np.zeros(self.capacity, dtype=np.int32)
        self.done = np.zeros(self.capacity)
        self.head = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, s: int, a: int, r: float, s2: int, done: bool) -> None:
        i = self.head
        self.s[i], self.a[i], self.r[i], self.s2[i], self.done[i] = s, a, r, s2, float(done)
        self.head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch: int, rng: np.random.Generator):
        idx = rng.integers(self.size, size=batch)
        return ONE_HOT[self.s[idx]], self.a[idx], self.r[idx], ONE_HOT[self.s2[idx]], self.done[idx]

    def transitions(self) -> list[tuple]:
        """Stored transitions, oldest first."""
        order = [(self.head - self.size + k) % self.capacity for k in range(self.size)]
        return [(int(self.s[i]), int(self.a[i]), float(self.r[i]), int(self.s2[i]), bool(self.done[i]))
                for i in order]


@dataclass
class EpisodeLog:
    episode: int
    ret: float
    steps: int
    outcome: str


def write_episode_log(path, logs: list[EpisodeLog]) -> None:
    with open(path, "w") as fh:
        fh.write("episode,return,steps,outcome\n")
        for e in logs:
            fh.write(f"{e.episode},{e.ret!r},{e.steps},{e.outcome}\n")


def _episode_seeds(seed: int, n: int) -> list[int]:
    rng = np.random.default_rng(int(seed) % 2**64)
    return [int(s) for s in rng.integers(2**62, size=n)]


def dqn_update(agent: NeuralAgent, target: NeuralAgent, batch, opt: Adam, gamma: float,
               rng: np.random.Generator) -> float:
    """One gradient step on the mean squared TD error. Returns the loss."""
    x, a, r, x2, done = batch
    q_next = target.predict(x2, rng).max(axis=1)
    y = r + gamma * (1.0 - done) * q_next
    q, tape = agent.forward(x, rng)
    rows = np.arange(len(a))
    err = q[rows, a] - y
    loss = float(np.mean(err**2))
    if not math.isfinite(loss):
        raise TrainingError(f"non-finite loss {loss}")
    grad_q = np.zeros_like(q)
    grad_q[rows, a] = 2.0 * err / len(a)
    opt.step(agent.params, agent.backward(tape, grad_q))
    return loss


def train_dqn(agent: NeuralAgent, spec: GridSpec, config: TrainConfig, seed: int,
              progress=None):
    """Train a neural agent in place. Returns (agent, per-episode logs)."""
    if not isinstance(agent, NeuralAgent):
        raise TypeError("train_dqn needs a neural agent")
    rng = np.random.default_rng(int(seed) % 2**64)
    env = GridWorld(spec, config.reward)
    target = agent.copy()
    opt = Adam(agent.params, lr=config.lr, clip_norm=config.clip_norm)
    buffer = ReplayBuffer(config.buffer_capacity)
    logs: list[EpisodeLog] = []
    total = 0
    for episode, env_seed in enumerate(_episode_seeds(seed, config.episodes)):
        obs = env.reset(env_seed)
        ret = 0.0
        while True:
            action = select_action(agent, obs, episode, rng, config)
            out = env.step(action)
            buffer.push(state_index(obs), action, out.reward, state_index(out.obs), out.done)
            total += 1
            ret += out.reward
            if total >= config.learning_start and len(buffer) >= config.batch_size:
                dqn_update(agent, target, buffer.sample(config.batch_size, rng), opt,
                           config.gamma, rng)
            if total % config.target_update == 0:
                target.load_params_from(agent)
            obs = out.obs
            if out.done:
                break
        logs.append(EpisodeLog(episode, ret, env.steps, out.terminal))
        if progress is not None:
            progress(logs[-1])
    return agent, logs


def greedy_action(values) -> int:
    return int(np.argmax(values))


def train_tabular(agent: TabularAgent, spec: GridSpec, config: TrainConfig, seed: int,
                  progress=None):
    """Epsilon-greedy Q-learning with one TD update per step."""
    rng = np.random.default_rng(int(seed) % 2**64)
    env = GridWorld(spec, config.reward)
    logs: list[EpisodeLog] = []
    for episode, env_seed in enumerate(_episode_seeds(seed, config.episodes)):
        obs = env.reset(env_seed)
        s = state_index(obs)
        ret = 0.0
        while True:
            if rng.random() < agent.epsilon:
                action = int(rng.integers(N_ACTIONS))
            else:
                action = greedy_action(agent.table[s])
            out = env.step(action)
            s2 = state_index(out.obs)
            agent.update(s, action, out.reward, s2, out.done)
            ret += out.reward
            s = s2
            if out.done:
                break
        logs.append(EpisodeLog(episode, ret, env.steps, out.terminal))
        if progress is not None:
            progress(logs[-1])
    return agent, logs


def train(kind: str, spec: GridSpec, config: TrainConfig, seed: int, progress=None):
    """Build and train an agent of ``kind``; the initialisation is seeded by ``seed``."""
    kind = canonical_kind(kind)
    agent = build_agent(kind, config, np.random.default_rng([int(seed) % 2**64, 1]))
    if kind == "qtable":
        return train_tabular(agent, spec, config, seed, progress)
    return train_dqn(agent, spec, config, seed, progress)


# --- grid search -------------------------------------------------------------

SR_THRESHOLD = 0.95


def expand_space(space: dict) -> list[dict]:
    keys = sorted(space)
    if not keys or any(len(space[k]) == 0 for k in keys):
        raise ValueError("empty search space")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(space[k] for k in keys))]


def select_best(rows: list[dict]) -> tuple[dict, list[dict]]:
    """Rank rows: SR >= 0.95 first, ordered by mean successful path length;
    with no survivors, rank everything by SR then path length.

    Returns (winner, ordered leaderboard); the winner carries
    ``below_threshold=True`` when nothing passed the SR filter.
    """
    def pl(row):
        return math.inf if row["pl"] is None else row["pl"]

    passed = [r for r in rows if r["sr"] >= SR_THRESHOLD]
    failed = [r for r in rows if r["sr"] < SR_THRESHOLD]
    passed.sort(key=lambda r: (pl(r), r["index"]))
    failed.sort(key=lambda r: (-r["sr"], pl(r), r["index"]))
    board = passed + failed
    for rank, row in enumerate(board):
        row["rank"] = rank
        row["passed"] = row["sr"] >= SR_THRESHOLD
    winner = dict(board[0])
    winner["below_threshold"] = not passed
    return winner, board


def _run_config(job):
    from .evaluation import TEST_SEEDS, run_protocol
    from .qtable import build_qtable

    index, kind, overrides, train_spec, eval_spec, config, seeds, test_seeds = job
    cfg = config.replace(**overrides)
    reports = []
    for seed in seeds:
        agent, _ = train(kind, train_spec, cfg, seed)
        table = build_qtable(agent, conversion_seed=seed)
        reports.append(run_protocol(table, eval_spec, test_seeds or TEST_SEEDS, cfg.reward))

    def mean(values):
        values = [v for v in values if v is not None]
        return float(np.mean(values)) if values else None

    return {
        "index": index,
        "config": overrides,
        "sr": mean(r.sr for r in reports),
        "spl": mean(r.spl for r in reports),
        "pl": mean(r.pl_mean for r in reports),
        "tr": mean(r.tr_mean for r in reports),
    }


def grid_search(kind: str, spec: GridSpec, space: dict, seeds=(0,), config: TrainConfig | None = None,
                workers: int = 1, max_configs: int | None = None, eval_spec: GridSpec | None = None,
                test_seeds=None):
    """Train, convert and evaluate every configuration of ``space``.

    ``spec`` is the training environment; evaluation uses ``eval_spec`` or
    ``spec`` without the training-only diagonal. Returns (winner, leaderboard).
    """
    kind = canonical_kind(kind)
    config = config or TrainConfig()
    combos = expand_space(space)
    if max_configs is not None:
        combos = combos[:max_configs]
    eval_spec = eval_spec or spec.with_diagonal(False)
    jobs = [(i, kind, c, spec, eval_spec, config, tuple(seeds), test_seeds) for i, c in enumerate(combos)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_run_config, jobs))
    else:
        rows = [_run_config(j) for j in jobs]
    return select_best(rows)
