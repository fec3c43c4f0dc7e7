"""Discrete grid-world navigation environment with static and dynamic obstacles.

The agent moves one cell per step along its heading. Headings are stored as an
integer index ``h`` in 0..7 (angle ``h * pi/4``) so kinematics stay exact;
the radian value is exposed through :attr:`GridWorld.heading`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

Cell = tuple[int, int]

N_ACTIONS = 5
FORWARD = 2
# heading change per action, in units of pi/4
ACTION_TURNS = (-2, -1, 0, 1, 2)
# unit displacement for heading index h: (round(cos), round(sin))
HEADING_MOVES = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))
# D_o encoding of a dynamic obstacle direction
DIRECTIONS = ((1, 0), (-1, 0), (0, 1), (0, -1))

GOAL = "goal"
COLLISION = "collision"
BOUNDARY = "boundary"
TIMEOUT = "timeout"

QUARTER = math.pi / 4
_SNAP = 1e-9


class ConfigurationError(ValueError):
    """Raised for environment layouts that cannot be realised."""


@dataclass(frozen=True)
class GridSpec:
    size: int = 20
    n_static: int = 6
    n_dynamic: int = 1
    training_diagonal: bool = False
    start: Cell | None = None
    goal: Cell | None = None
    cell_size: float = 1.0
    max_steps: int = 300

    def __post_init__(self):
        if self.size < 5:
            raise ConfigurationError(f"grid size must be >= 5, got {self.size}")
        if self.start is None:
            object.__setattr__(self, "start", (0, 0))
        if self.goal is None:
            object.__setattr__(self, "goal", (self.size - 1, self.size - 1))
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(int(v) for v in self.goal))
        for name in ("start", "goal"):
            if not self.inside(getattr(self, name)):
                raise ConfigurationError(f"{name} {getattr(self, name)} outside the grid")
        if self.start == self.goal:
            raise ConfigurationError("start and goal must differ")
        if self.n_static < 0 or self.n_dynamic < 0:
            raise ConfigurationError("obstacle counts must be non-negative")
        if self.cell_size <= 0 or self.max_steps < 1:
            raise ConfigurationError("cell_size and max_steps must be positive")

    def inside(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.size and 0 <= cell[1] < self.size

    def with_diagonal(self, flag: bool) -> GridSpec:
        return GridSpec(**{**self.to_dict(), "training_diagonal": flag})

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "n_static": self.n_static,
            "n_dynamic": self.n_dynamic,
            "training_diagonal": self.training_diagonal,
            "start": list(self.start),
            "goal": list(self.goal),
            "cell_size": self.cell_size,
            "max_steps": self.max_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> GridSpec:
        d = dict(d)
        for key in ("start", "goal"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


# (n_static, n_dynamic); 10 is the reduced desk-scale preset
PRESETS = {10: (2, 1), 20: (6, 1), 30: (9, 1), 40: (12, 3)}


def preset(size: int, training: bool = False, **overrides) -> GridSpec:
    """Environment preset for grid size 10, 20, 30 or 40."""
    if size not in PRESETS:
        raise ConfigurationError(f"no preset for size {size}; choose from {sorted(PRESETS)}")
    n_static, n_dynamic = PRESETS[size]
    kw = dict(size=size, n_static=n_static, n_dynamic=n_dynamic, training_diagonal=training)
    kw.update(overrides)
    return GridSpec(**kw)


@dataclass(frozen=True)
class RewardParams:
    # exp(beta2 * 0) = 1 on every step, so step_penalty = 1.05 leaves a net
    # per-step cost of 0.05 instead of a bonus for wandering
    beta1: float = 5.0
    beta2: float = -1.0
    beta3: float = 0.0
    step_penalty: float = 1.05
    r_goal: float = 30.0
    r_fail: float = -30.0
    r_timeout: float = 0.0

    def __post_init__(self):
        if not self.beta2 < 0:
            raise ConfigurationError(f"beta2 must be negative, got {self.beta2}")
        if self.step_penalty < 0:
            raise ConfigurationError("step_penalty must be >= 0")
        if not (self.r_goal > 0 and self.r_fail < 0 and self.r_timeout <= 0):
            raise ConfigurationError("terminal rewards need r_goal > 0, r_fail < 0, r_timeout <= 0")


@dataclass
class Obstacle:
    cell: Cell
    kind: str = "static"
    direction: Cell | None = None

    @property
    def dynamic(self) -> bool:
        return self.kind == "dynamic"


class ObsState(NamedTuple):
    R_o: int
    D_o: int
    R_T: int
    A: int


class Geometry(NamedTuple):
    d_goal: float
    d_obstacle: float
    alpha: float


@dataclass
class StepOutcome:
    obs: ObsState
    reward: float
    terminal: str | None = None

    @property
    def done(self) -> bool:
        return self.terminal is not None


def _snap_floor(q: float) -> int:
    r = round(q)
    if abs(q - r) < _SNAP:
        return int(r)
    return math.floor(q)


def angular_sector(vector: tuple[float, float], heading: float) -> int:
    """Sector 1..8 of ``vector`` measured counter-clockwise from ``heading``."""
    if vector[0] == 0 and vector[1] == 0:
        return 1
    angle = (math.atan2(vector[1], vector[0]) - heading) % (2 * math.pi)
    return _snap_floor(angle / QUARTER) % 8 + 1


def angle_between(u: tuple[float, float], v: tuple[float, float]) -> float:
    """Unsigned angle in [0, pi]; zero when either vector vanishes."""
    nu = math.hypot(*u)
    nv = math.hypot(*v)
    if nu == 0 or nv == 0:
        return 0.0
    c = (u[0] * v[0] + u[1] * v[1]) / (nu * nv)
    return math.acos(min(1.0, max(-1.0, c)))


def alpha_bin(alpha: float) -> int:
    """Eight half-open bins over [0, pi], the last one closed."""
    return min(_snap_floor(alpha / (math.pi / 8)), 7) + 1


def heading_angle(h: int) -> float:
    """Radian heading for index h, wrapped to (-pi, pi]."""
    h %= 8
    return h * QUARTER if h <= 4 else (h - 8) * QUARTER


def _round_half_up(v: float) -> int:
    return int(math.floor(v + 0.5))


def initial_heading(start: Cell, goal: Cell) -> int:
    angle = math.atan2(goal[1] - start[1], goal[0] - start[0])
    return _round_half_up(angle / QUARTER) % 8


def diagonal_cells(spec: GridSpec) -> list[Cell]:
    """Cells of the training-only diagonal block: floor(g/4) cells on the
    start->goal line, centred on its midpoint."""
    n = spec.size // 4
    (sx, sy), (gx, gy) = spec.start, spec.goal
    step = (int(np.sign(gx - sx)), int(np.sign(gy - sy)))
    mx = math.floor((sx + gx) / 2)
    my = math.floor((sy + gy) / 2)
    first = -((n - 1) // 2)
    cells = []
    for k in range(first, first + n):
        cell = (mx + k * step[0], my + k * step[1])
        if spec.inside(cell) and cell not in (spec.start, spec.goal):
            cells.append(cell)
    return cells


MAX_ATTEMPTS = 1000


def sample_obstacles(spec: GridSpec, rng: np.random.Generator) -> list[Obstacle]:
    """Sample the obstacle layout of one episode.

    Static obstacles are drawn near the start->goal segment (t ~ U[0.2, 0.8]
    plus an integer jitter in [-2, 2] per axis) so they tend to sit on the
    direct route. Dynamic obstacles are uniform over the remaining free cells.
    """
    g = spec.size
    if spec.n_static + spec.n_dynamic > g * g - 2:
        raise ConfigurationError("more obstacles than free cells")
    occupied = {spec.start, spec.goal}
    obstacles: list[Obstacle] = []
    (sx, sy), (gx, gy) = spec.start, spec.goal
    for _ in range(spec.n_static):
        for _attempt in range(MAX_ATTEMPTS):
            t = rng.uniform(0.2, 0.8)
            jx, jy = rng.integers(-2, 3, size=2)
            x = min(max(_round_half_up(sx + t * (gx - sx)) + int(jx), 0), g - 1)
            y = min(max(_round_half_up(sy + t * (gy - sy)) + int(jy), 0), g - 1)
            if (x, y) not in occupied:
                break
        else:
            raise ConfigurationError(f"static obstacle placement failed after {MAX_ATTEMPTS} attempts")
        occupied.add((x, y))
        obstacles.append(Obstacle((x, y), "static"))
    for _ in range(spec.n_dynamic):
        free = [(x, y) for x in range(g) for y in range(g) if (x, y) not in occupied]
        if not free:
            raise ConfigurationError("no free cell for dynamic obstacle")
        cell = free[int(rng.integers(len(free)))]
        direction = DIRECTIONS[int(rng.integers(4))]
        occupied.add(cell)
        obstacles.append(Obstacle(cell, "dynamic", direction))
    if spec.training_diagonal:
        for cell in diagonal_cells(spec):
            if cell not in occupied:
                occupied.add(cell)
                obstacles.append(Obstacle(cell, "static"))
    return obstacles


def _rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(int(seed) % 2**64)


class GridWorld:
    """Single navigation episode at a time; owns its RNG."""

    def __init__(self, spec: GridSpec, reward: RewardParams | None = None):
        self.spec = spec
        self.reward_params = reward or RewardParams()
        self.obstacles: list[Obstacle] = []
        self.cell: Cell = spec.start
        self.heading_index = 0
        self.steps = 0
        self.terminal: str | None = None
        self._geometry: Geometry | None = None
        self._occupied: set[Cell] = set()

    @property
    def heading(self) -> float:
        return heading_angle(self.heading_index)

    @property
    def done(self) -> bool:
        return self.terminal is not None

    def reset(self, seed: int) -> ObsState:
        rng = _rng_for(seed)
        self.obstacles = sample_obstacles(self.spec, rng)
        self._occupied = {o.cell for o in self.obstacles}
        self.cell = self.spec.start
        self.heading_index = initial_heading(self.spec.start, self.spec.goal)
        self.steps = 0
        self.terminal = None
        obs, self._geometry = self._observe()
        return obs

    def set_layout(self, obstacles, cell: Cell | None = None, heading_index: int | None = None) -> ObsState:
        """Start an episode from an explicit layout instead of a sampled one."""
        self.obstacles = [Obstacle(tuple(o.cell), o.kind, o.direction) for o in obstacles]
        self._occupied = {o.cell for o in self.obstacles}
        if len(self._occupied) != len(self.obstacles):
            raise ConfigurationError("obstacles must occupy distinct cells")
        self.cell = self.spec.start if cell is None else tuple(cell)
        self.heading_index = (initial_heading(self.spec.start, self.spec.goal)
                              if heading_index is None else heading_index % 8)
        self.steps = 0
        self.terminal = None
        obs, self._geometry = self._observe()
        return obs

    @property
    def static_cells(self) -> set[Cell]:
        return {o.cell for o in self.obstacles if not o.dynamic}

    @property
    def dynamic_cells(self) -> list[Cell]:
        return [o.cell for o in self.obstacles if o.dynamic]

    def advance_dynamics(self) -> None:
        """Move every dynamic obstacle one cell; reverse on boundary or conflict."""
        g = self.spec.size
        for ob in self.obstacles:
            if not ob.dynamic:
                continue
            x, y = ob.cell
            dx, dy = ob.direction
            target = (x + dx, y + dy)
            if not (0 <= target[0] < g and 0 <= target[1] < g) or target in self._occupied:
                dx, dy = -dx, -dy
                ob.direction = (dx, dy)
                target = (x + dx, y + dy)
                if not (0 <= target[0] < g and 0 <= target[1] < g) or target in self._occupied:
                    continue
            self._occupied.discard(ob.cell)
            self._occupied.add(target)
            ob.cell = target

    def nearest_obstacle(self) -> Obstacle | None:
        cx, cy = self.cell
        best = None
        best_key = None
        for ob in self.obstacles:
            ox, oy = ob.cell
            key = ((ox - cx) ** 2 + (oy - cy) ** 2, ox, oy)
            if best_key is None or key < best_key:
                best, best_key = ob, key
        return best

    def _observe(self) -> tuple[ObsState, Geometry]:
        cx, cy = self.cell
        theta = self.heading
        to_goal = (self.spec.goal[0] - cx, self.spec.goal[1] - cy)
        d_goal = math.hypot(*to_goal)
        r_t = angular_sector(to_goal, theta)
        ob = self.nearest_obstacle()
        if ob is None:
            return ObsState(1, 0, r_t, 1), Geometry(d_goal, 0.0, 0.0)
        to_ob = (ob.cell[0] - cx, ob.cell[1] - cy)
        alpha = angle_between(to_goal, to_ob)
        d_o = DIRECTIONS.index(ob.direction) + 1 if ob.dynamic else 0
        obs = ObsState(angular_sector(to_ob, theta), d_o, r_t, alpha_bin(alpha))
        return obs, Geometry(d_goal, math.hypot(*to_ob), alpha)

    def observe(self) -> ObsState:
        return self._observe()[0]

    def geometry(self) -> Geometry:
        return self._observe()[1]

    def step(self, action: int) -> StepOutcome:
        if self.done:
            raise RuntimeError("episode already terminated; call reset()")
        if not 0 <= int(action) < N_ACTIONS:
            raise ValueError(f"invalid action {action}")
        self.heading_index = (self.heading_index + ACTION_TURNS[int(action)]) % 8
        dx, dy = HEADING_MOVES[self.heading_index]
        self.cell = (self.cell[0] + dx, self.cell[1] + dy)
        self.steps += 1
        if self.steps % 2 == 0:
            self.advance_dynamics()

        if not self.spec.inside(self.cell):
            self.terminal = BOUNDARY
        elif self.cell in self._occupied:
            self.terminal = COLLISION
        elif self.cell == self.spec.goal:
            self.terminal = GOAL
        elif self.steps >= self.spec.max_steps:
            self.terminal = TIMEOUT

        obs, geom = self._observe()
        reward = compute_reward(self._geometry, geom, self.terminal, self.reward_params)
        self._geometry = geom
        return StepOutcome(obs, reward, self.terminal)


def compute_reward(
    prev: Geometry, new: Geometry, terminal: str | None, params: RewardParams
) -> float:
    if terminal == GOAL:
        return params.r_goal
    if terminal in (COLLISION, BOUNDARY):
        return params.r_fail
    if terminal == TIMEOUT:
        return params.r_timeout
    return (
        params.beta1 * (prev.d_goal - new.d_goal)
        + math.exp(params.beta2 * (prev.d_obstacle - new.d_obstacle))
        + params.beta3 * math.sin(new.alpha)
        - params.step_penalty
    )
