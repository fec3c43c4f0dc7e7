"""Greedy test protocol over held-out seeds and the navigation metrics.

SR is the success fraction, SPL weights each success by L* / max(L, L*),
and PL and TR (fraction of non-forward actions) are averaged over
successful episodes only, each with its standard error.
"""
from __future__ import annotations

import heapq
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .gridworld import FORWARD, GOAL, GridSpec, GridWorld, RewardParams
from .qtable import QTable, greedy

TEST_SEEDS = tuple(range(2000, 2100))
SQRT2 = math.sqrt(2.0)

Cell = tuple[int, int]


@dataclass
class EpisodeRecord:
    seed: int
    cells: list[Cell]
    actions: list[int]
    headings: list[int]
    outcome: str
    path_length: float
    l_star: float = math.nan
    dynamic_trace: list[list[Cell]] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.outcome == GOAL

    @property
    def steps(self) -> int:
        return len(self.actions)

    @property
    def turns(self) -> int:
        return sum(a != FORWARD for a in self.actions)


def step_cost(a: Cell, b: Cell, cell_size: float = 1.0) -> float:
    dx, dy = abs(b[0] - a[0]), abs(b[1] - a[1])
    if max(dx, dy) != 1:
        raise ValueError(f"cells {a} and {b} are not neighbours")
    return cell_size * (SQRT2 if dx and dy else 1.0)


def path_length(cells, cell_size: float = 1.0) -> float:
    return float(sum(step_cost(a, b, cell_size) for a, b in zip(cells, cells[1:])))


NEIGHBOURS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy]


def shortest_path(spec: GridSpec, blocked, start: Cell | None = None, goal: Cell | None = None) -> float:
    """Dijkstra over 8-connected free cells. Returns inf when the goal is
    unreachable. Heading constraints and dynamic obstacles are ignored, so
    the result lower-bounds any executed path."""
    start = spec.start if start is None else start
    goal = spec.goal if goal is None else goal
    blocked = set(blocked)
    if start in blocked or goal in blocked:
        raise ValueError("start and goal must be free")
    dist = {start: 0.0}
    heap = [(0.0, start)]
    while heap:
        d, cell = heapq.heappop(heap)
        if cell == goal:
            return d
        if d > dist[cell]:
            continue
        for dx, dy in NEIGHBOURS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if not spec.inside(nxt) or nxt in blocked:
                continue
            nd = d + spec.cell_size * (SQRT2 if dx and dy else 1.0)
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))
    return math.inf


def compute_spl(records, l_stars=None) -> float:
    if not records:
        return 0.0
    l_stars = [r.l_star for r in records] if l_stars is None else l_stars
    total = 0.0
    for r, ls in zip(records, l_stars):
        if r.success and math.isfinite(ls):
            total += ls / max(r.path_length, ls) if max(r.path_length, ls) > 0 else 1.0
    return total / len(records)


def compute_turn_rate(record) -> float:
    actions = record.actions if hasattr(record, "actions") else list(record)
    if not actions:
        raise ValueError("turn rate needs at least one action")
    return sum(a != FORWARD for a in actions) / len(actions)


def mean_se(values) -> tuple[float | None, float | None]:
    """Mean and standard error (sample std / sqrt n); absent for empty input."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return None, None
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def run_episode(table: QTable, spec: GridSpec, seed: int, reward: RewardParams | None = None,
                trace: bool = False) -> EpisodeRecord:
    env = GridWorld(spec, reward)
    obs = env.reset(seed)
    cells, actions, headings = [env.cell], [], [env.heading_index]
    dyn = [list(env.dynamic_cells)] if trace else []
    while True:
        a = greedy(table, obs)
        out = env.step(a)
        actions.append(a)
        cells.append(env.cell)
        headings.append(env.heading_index)
        if trace:
            dyn.append(list(env.dynamic_cells))
        obs = out.obs
        if out.done:
            break
    # the terminal cell may lie outside the grid or inside an obstacle; it is still one step
    return EpisodeRecord(seed, cells, actions, headings, out.terminal,
                         path_length(cells, spec.cell_size), dynamic_trace=dyn)


@dataclass
class MetricsReport:
    sr: float
    spl: float
    pl_mean: float | None
    pl_se: float | None
    tr_mean: float | None
    tr_se: float | None
    n: int
    episodes: list[dict]
    sr_se: float = 0.0
    unreachable: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"sr": self.sr, "sr_se": self.sr_se, "spl": self.spl, "pl_mean": self.pl_mean,
                "pl_se": self.pl_se, "tr_mean": self.tr_mean, "tr_se": self.tr_se, "n": self.n,
                "unreachable": self.unreachable, "episodes": self.episodes}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> MetricsReport:
        return cls(**d)


def summarize(records: list[EpisodeRecord]) -> MetricsReport:
    n = len(records)
    wins = [r for r in records if r.success]
    sr = len(wins) / n if n else 0.0
    _, sr_se = mean_se([float(r.success) for r in records])
    pl_mean, pl_se = mean_se([r.path_length for r in wins])
    tr_mean, tr_se = mean_se([compute_turn_rate(r) for r in wins])
    rows = [{"seed": r.seed, "outcome": r.outcome, "steps": r.steps, "L": r.path_length,
             "L_star": r.l_star if math.isfinite(r.l_star) else None, "turns": r.turns}
            for r in records]
    return MetricsReport(sr, compute_spl(records), pl_mean, pl_se, tr_mean, tr_se, n, rows,
                         sr_se or 0.0, [r.seed for r in records if not math.isfinite(r.l_star)])


def _scored_episode(job) -> EpisodeRecord:
    table, spec, seed, reward, trace = job
    rec = run_episode(table, spec, seed, reward, trace)
    env = GridWorld(spec, reward)
    env.reset(seed)
    rec.l_star = shortest_path(spec, env.static_cells)
    return rec


def run_protocol(table: QTable, spec: GridSpec, seeds=TEST_SEEDS, reward: RewardParams | None = None,
                 trace: bool = False, return_records: bool = False, workers: int = 1):
    """One greedy episode per seed on ``spec`` (training diagonal must be off).

    Records are aggregated in seed order whatever the worker count.
    """
    if spec.training_diagonal:
        raise ValueError("evaluation environments exclude the training-only diagonal")
    jobs = [(table, spec, int(seed), reward, trace) for seed in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            records = list(pool.map(_scored_episode, jobs, chunksize=8))
    else:
        records = [_scored_episode(j) for j in jobs]
    report = summarize(records)
    return (report, records) if return_records else report


# --- trajectory files ----------------------------------------------------------

def format_trajectory(record: EpisodeRecord, spec: GridSpec) -> str:
    """Delimited text: a comment header with the environment and seed, then
    one row per visited cell (the action column holds the action taken from
    that cell, empty on the final row)."""
    lines = [f"# spec {json.dumps(spec.to_dict(), sort_keys=True)}",
             f"# seed {record.seed}",
             f"# outcome {record.outcome}",
             "step,x,y,heading,action"]
    for t, (cell, h) in enumerate(zip(record.cells, record.headings)):
        a = record.actions[t] if t < len(record.actions) else ""
        lines.append(f"{t},{cell[0]},{cell[1]},{h},{a}")
    return "\n".join(lines) + "\n"


def write_trajectory(record: EpisodeRecord, spec: GridSpec, path) -> None:
    with open(path, "w") as fh:
        fh.write(format_trajectory(record, spec))


class TrajectoryError(ValueError):
    pass


def parse_trajectory(text: str):
    """Returns (spec, seed, cells, headings, actions)."""
    spec = seed = None
    rows = []
    header_seen = False
    for no, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            try:
                if key == "spec":
                    spec = GridSpec.from_dict(json.loads(value))
                elif key == "seed":
                    seed = int(value)
            except (ValueError, TypeError, KeyError) as exc:
                raise TrajectoryError(f"line {no}: bad {key} header: {exc}") from None
            continue
        if not header_seen:
            if line.strip() != "step,x,y,heading,action":
                raise TrajectoryError(f"line {no}: expected column header")
            header_seen = True
            continue
        parts = line.split(",")
        try:
            if len(parts) != 5 or int(parts[0]) != len(rows):
                raise ValueError
            rows.append((int(parts[1]), int(parts[2]), int(parts[3]),
                         int(parts[4]) if parts[4] else None))
        except ValueError:
            raise TrajectoryError(f"line {no}: malformed row {line!r}") from None
    if spec is None or seed is None or not rows:
        raise TrajectoryError("trajectory needs spec and seed headers and at least one row")
    cells = [(x, y) for x, y, _, _ in rows]
    headings = [h for _, _, h, _ in rows]
    actions = [a for _, _, _, a in rows[:-1]]
    if any(a is None for a in actions):
        raise TrajectoryError("missing action before the final row")
    return spec, seed, cells, headings, actions


def read_trajectory(path):
    with open(path) as fh:
        return parse_trajectory(fh.read())
