"""Explicit Q-tables: conversion from any agent, greedy lookup, file format.

File layout (``qspirl-qtable v1``)::

    qspirl-qtable v1 2560 5 <kind> <conversion-seed>
    <5 space-separated float32 values>   x 2560, canonical state order

Values are written as the shortest decimal that round-trips the float32.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agents import KINDS, N_STATES, NeuralAgent, TabularAgent, index_state, state_index
from .encoding import all_states, one_hot
from .gridworld import N_ACTIONS, ObsState

MAGIC = "qspirl-qtable"
VERSION = "v1"
CHUNK = 512

__all__ = ["QTable", "ConversionError", "ParseError", "build_qtable", "greedy", "state_index",
           "index_state", "read_qtable", "write_qtable", "format_qtable", "parse_qtable"]


class ConversionError(RuntimeError):
    pass


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class QTable:
    values: np.ndarray  # (2560, 5) float32
    kind: str
    conversion_seed: int = 0
    config_digest: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float32)
        if v.shape != (N_STATES, N_ACTIONS):
            raise ValueError(f"table shape {v.shape}, expected {(N_STATES, N_ACTIONS)}")
        if not np.all(np.isfinite(v)):
            raise ValueError("table contains non-finite values")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def row(self, obs: ObsState) -> np.ndarray:
        return self.values[state_index(obs)]


def greedy(table: QTable, obs: ObsState) -> int:
    """Argmax of the row; ties go to the lowest action index."""
    return int(np.argmax(table.row(obs)))


def _state_spikes(agent: NeuralAgent, seed: int) -> np.ndarray:
    # one spike train per state, each from its own stream seeded by seed + index
    e = agent.encoder
    x = np.stack([one_hot(s) for s in all_states()])
    out = np.empty((N_STATES, e["timesteps"], x.shape[1]))
    for k in range(N_STATES):
        out[k] = agent.encode(x[k:k + 1], np.random.default_rng(seed + k))[0]
    return out


def build_qtable(agent, conversion_seed: int = 0, shots: int | None = None,
                 config_digest: str = "") -> QTable:
    """Enumerate all 2560 states through ``agent``.

    Spiking agents receive one Poisson realisation per state. ``shots``
    switches the circuit of quantum agents to sampled expectations for the
    duration of the conversion.
    """
    seed = int(conversion_seed)
    if isinstance(agent, TabularAgent):
        return QTable(agent.table, "qtable", seed, config_digest)
    if not isinstance(agent, NeuralAgent):
        raise TypeError(f"cannot convert {type(agent).__name__}")
    layer = agent.quantum_layer
    if shots is not None:
        if layer is None:
            raise ValueError("shot mode needs a quantum agent")
        saved = (layer.shots, layer.shot_rng)
        agent.set_shots(shots, np.random.default_rng([seed, 2]))
    try:
        if agent.spiking:
            inputs = _state_spikes(agent, seed)
        else:
            inputs = np.stack([one_hot(s) for s in all_states()])
        rows = [agent.net.forward(inputs[k:k + CHUNK])[0] for k in range(0, N_STATES, CHUNK)]
    finally:
        if shots is not None:
            layer.shots, layer.shot_rng = saved
    values = np.concatenate(rows)
    bad = np.flatnonzero(~np.all(np.isfinite(values), axis=1))
    if bad.size:
        k = int(bad[0])
        raise ConversionError(f"non-finite action values at state {k} {tuple(index_state(k))}")
    return QTable(values.astype(np.float32), agent.kind, seed, config_digest)


def _fmt(v: np.float32) -> str:
    return str(np.float32(v))


def format_qtable(table: QTable) -> str:
    lines = [f"{MAGIC} {VERSION} {N_STATES} {N_ACTIONS} {table.kind} {table.conversion_seed}"]
    lines += [" ".join(_fmt(v) for v in row) for row in table.values]
    return "\n".join(lines) + "\n"


def parse_qtable(text: str) -> QTable:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("line 1: empty file")
    head = lines[0].split(" ")
    if len(head) != 6 or head[0] != MAGIC:
        raise ParseError(f"line 1: malformed header {lines[0]!r}")
    if head[1] != VERSION:
        raise ParseError(f"line 1: unsupported version {head[1]!r} (expected {VERSION})")
    try:
        n_rows, n_cols, seed = int(head[2]), int(head[3]), int(head[5])
    except ValueError:
        raise ParseError(f"line 1: malformed header {lines[0]!r}") from None
    if (n_rows, n_cols) != (N_STATES, N_ACTIONS):
        raise ParseError(f"line 1: table is {n_rows}x{n_cols}, expected {N_STATES}x{N_ACTIONS}")
    if head[4] not in KINDS:
        raise ParseError(f"line 1: unknown model kind {head[4]!r}")
    if len(lines) != N_STATES + 1:
        raise ParseError(f"line {len(lines) + 1}: expected {N_STATES} rows, found {len(lines) - 1}")
    values = np.empty((N_STATES, N_ACTIONS), dtype=np.float32)
    for k, line in enumerate(lines[1:]):
        parts = line.split(" ")
        try:
            if len(parts) != N_ACTIONS:
                raise ValueError
            values[k] = [np.float32(p) for p in parts]
        except ValueError:
            raise ParseError(f"line {k + 2}: expected {N_ACTIONS} numbers, got {line!r}") from None
        if not np.all(np.isfinite(values[k])):
            raise ParseError(f"line {k + 2}: non-finite value")
    return QTable(values, head[4], seed)


def write_qtable(table: QTable, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(format_qtable(table))


def read_qtable(path) -> QTable:
    with open(path) as fh:
        return parse_qtable(fh.read())


def is_qtable_file(path) -> bool:
    with open(path) as fh:
        return fh.readline().startswith(MAGIC + " ")
