"""Weather / maze-choice toy environments.

Each block the agent sees the weather (good or bad), picks the easy or the
hard maze, then takes H up/down steps on an 8x4 grid with a rightward drift.
Positions are (x, y) with x the column and y the row, y = 0 at the bottom.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import InvalidInputError
from ..features import TabularFeatures

COLUMNS, ROWS = 8, 4
START = (0, 0)
GOAL = (7, 3)

GOOD, BAD = 0, 1
EASY, HARD = 0, 1
UP, DOWN = 0, 1
WEATHER_NAMES = ("good", "bad")
MAZE_NAMES = ("easy", "hard")
ACTION_NAMES = ("up", "down")

# Column scores; the goal cell carries one extra level.  Vertical moves never
# change the column, so column-constant scores cannot decrease along a path.
DENSE_COLUMN_SCORES = (0, 1, 1, 2, 2, 3, 3, 3)
SPARSE_COLUMN_SCORES = (0, 0, 0, 0, 1, 1, 1, 1)
HARD_OBSTACLES = frozenset({(4, 3), (3, 2), (5, 1)})
DEAD_END = (3, 3)
HARD_MULTIPLIER = 1.2

VARIANTS = ("toy1", "toy2", "toy3", "toy4", "toy5")
_SLOPE = {"toy1": 0.0, "toy2": 0.0, "toy3": 0.1, "toy4": 0.2, "toy5": 0.3}
_BASE = {
    "toy1": (0.9, 0.6), "toy2": (0.9, 0.6),
    "toy3": (1.0, 0.7), "toy4": (1.0, 0.7), "toy5": (1.0, 0.7),
}
_TAU = {"toy1": 0.0, "toy2": 0.0, "toy3": 1 / 3, "toy4": 2 / 3, "toy5": 1.0}


@dataclass(frozen=True)
class MazeLayout:
    columns: int
    rows: int
    obstacles: frozenset
    start: tuple
    goal: tuple
    scores: np.ndarray  # shape (columns, rows), integer
    multiplier: float = 1.0

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=int)
        if scores.shape != (self.columns, self.rows):
            raise InvalidInputError(f"score grid shape {scores.shape} != {(self.columns, self.rows)}")
        if self.start in self.obstacles or self.goal in self.obstacles:
            raise InvalidInputError("start and goal must be open cells")
        if (scores < 0).any():
            raise InvalidInputError("scores must be nonnegative")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "obstacles", frozenset(map(tuple, self.obstacles)))

    @property
    def n_cells(self) -> int:
        return self.columns * self.rows

    def index(self, pos) -> int:
        return pos[0] * self.rows + pos[1]

    def position(self, index: int) -> tuple:
        return (index // self.rows, index % self.rows)

    def is_open(self, pos) -> bool:
        x, y = pos
        return 0 <= x < self.columns and 0 <= y < self.rows and (x, y) not in self.obstacles

    def score(self, pos) -> int:
        return int(self.scores[pos[0], pos[1]])

    def open_cells(self) -> list:
        return [(x, y) for x in range(self.columns) for y in range(self.rows) if self.is_open((x, y))]


def _score_grid(mode: str) -> np.ndarray:
    if mode == "dense":
        cols, bonus = DENSE_COLUMN_SCORES, 4
    elif mode == "sparse":
        cols, bonus = SPARSE_COLUMN_SCORES, 2
    else:
        raise InvalidInputError(f"unknown reward mode {mode!r}")
    grid = np.repeat(np.asarray(cols)[:, None], ROWS, axis=1)
    grid[GOAL] = bonus
    return grid


def make_layout(maze: int, reward_mode: str) -> MazeLayout:
    if maze == EASY:
        return MazeLayout(COLUMNS, ROWS, frozenset(), START, GOAL, _score_grid(reward_mode), 1.0)
    if maze == HARD:
        return MazeLayout(COLUMNS, ROWS, HARD_OBSTACLES, START, GOAL, _score_grid(reward_mode),
                          HARD_MULTIPLIER)
    raise InvalidInputError(f"unknown maze {maze!r}")


def dump_layout(layout: MazeLayout) -> str:
    """Rows of '.', '#', 'S', 'G' (top row first), a blank line, then the score digits."""
    lines = []
    for y in reversed(range(layout.rows)):
        row = []
        for x in range(layout.columns):
            if (x, y) in layout.obstacles:
                row.append("#")
            elif (x, y) == layout.start:
                row.append("S")
            elif (x, y) == layout.goal:
                row.append("G")
            else:
                row.append(".")
        lines.append("".join(row))
    lines.append("")
    for y in reversed(range(layout.rows)):
        lines.append("".join(str(layout.scores[x, y]) for x in range(layout.columns)))
    return "\n".join(lines) + "\n"


def load_layout(text: str, multiplier: float = 1.0) -> MazeLayout:
    grid_part, score_part = text.strip("\n").split("\n\n")
    grid = grid_part.splitlines()
    score_rows = score_part.splitlines()
    rows, columns = len(grid), len(grid[0])
    obstacles, start, goal = set(), None, None
    scores = np.zeros((columns, rows), dtype=int)
    for r, (line, sline) in enumerate(zip(grid, score_rows)):
        y = rows - 1 - r
        for x, ch in enumerate(line):
            if ch == "#":
                obstacles.add((x, y))
            elif ch == "S":
                start = (x, y)
            elif ch == "G":
                goal = (x, y)
            elif ch != ".":
                raise InvalidInputError(f"unknown layout character {ch!r}")
            scores[x, y] = int(sline[x])
    if start is None or goal is None:
        raise InvalidInputError("layout needs one 'S' and one 'G'")
    return MazeLayout(columns, rows, frozenset(obstacles), start, goal, scores, multiplier)


def tiredness(past_high_actions: Sequence[int], w: int) -> float:
    """sum_{l=1}^{w-1} 0.5^(w-l) * A_l for blocks numbered from 1."""
    if len(past_high_actions) != w - 1:
        raise InvalidInputError(f"block {w} needs {w - 1} past high actions, got {len(past_high_actions)}")
    return float(sum(0.5 ** (w - l) * a for l, a in enumerate(past_high_actions, start=1)))


def move_prob(variant: str, weather: int, tiredness_value: float = 0.0) -> float:
    if variant not in _BASE:
        raise InvalidInputError(f"unknown variant {variant!r}")
    p = _BASE[variant][weather] - _SLOPE[variant] * tiredness_value
    return min(1.0, max(0.0, p))


def _vertical_outcomes(layout: MazeLayout, pos, action: int, p: float) -> list:
    """(position, probability) after the vertical part of a move."""
    x, y = pos
    intended = (x, y + 1) if action == UP else (x, y - 1)
    opposite = (x, y - 1) if action == UP else (x, y + 1)
    out = {pos: (1 - p) / 2}
    for target, prob in ((intended, p), (opposite, (1 - p) / 2)):
        dest = target if layout.is_open(target) else pos
        out[dest] = out.get(dest, 0.0) + prob
    return list(out.items())


def step_distribution(layout: MazeLayout, pos, action: int, p: float) -> dict:
    """Exact next-position distribution of :func:`maze_step`."""
    if pos == layout.goal:
        return {pos: 1.0}
    out: dict = {}
    for mid, q in _vertical_outcomes(layout, pos, action, p):
        right = (mid[0] + 1, mid[1])
        if layout.is_open(right):
            out[right] = out.get(right, 0.0) + q * p
            out[mid] = out.get(mid, 0.0) + q * (1 - p)
        else:
            out[mid] = out.get(mid, 0.0) + q
    return out


def maze_step(layout: MazeLayout, pos, action: int, p: float, rng: np.random.Generator) -> tuple:
    # two uniforms per step whatever happens, so environment streams stay aligned
    u_vert, u_right = rng.random(2)
    if pos == layout.goal:
        return pos
    x, y = pos
    if u_vert < p:
        dy = 1 if action == UP else -1
    elif u_vert < p + (1 - p) / 2:
        dy = 0
    else:
        dy = -1 if action == UP else 1
    mid = (x, y + dy) if layout.is_open((x, y + dy)) else pos
    right = (mid[0] + 1, mid[1])
    if u_right < p and layout.is_open(right):
        return right
    return mid


def maze_reward(layout: MazeLayout, old, new) -> float:
    return layout.multiplier * (layout.score(new) - layout.score(old))


@dataclass(frozen=True)
class MazeEnvConfig:
    variant: str = "toy1"
    tau_delayed: float = 0.0
    reward_mode: str = "dense"
    bad_weather_prob: float = 0.5

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown toy variant {self.variant!r}")
        if self.reward_mode not in ("dense", "sparse"):
            raise InvalidInputError(f"unknown reward mode {self.reward_mode!r}")
        if not 0.0 <= self.bad_weather_prob <= 1.0:
            raise InvalidInputError("weather parameter must lie in [0, 1]")
        expected_mode = "dense" if self.variant == "toy1" else "sparse"
        if self.reward_mode != expected_mode or not np.isclose(self.tau_delayed, _TAU[self.variant]):
            raise InvalidInputError(f"{self.variant} requires {expected_mode} rewards and "
                                    f"tau_delayed={_TAU[self.variant]:.4g}")

    @classmethod
    def for_variant(cls, variant: str, bad_weather_prob: float = 0.5) -> "MazeEnvConfig":
        if variant not in VARIANTS:
            raise InvalidInputError(f"unknown toy variant {variant!r}")
        mode = "dense" if variant == "toy1" else "sparse"
        return cls(variant, _TAU[variant], mode, bad_weather_prob)

    @property
    def delayed(self) -> bool:
        return _SLOPE[self.variant] > 0


def env_reset_block(config: MazeEnvConfig, rng: np.random.Generator, history: Sequence[int]):
    """Draw the weather of the next block and compute its tiredness.

    ``history`` lists the maze choices (1 = hard) of the blocks already played
    in this episode.
    """
    weather = BAD if rng.random() < config.bad_weather_prob else GOOD
    return weather, tiredness(list(history), len(history) + 1)


@dataclass
class MazeState:
    block: int = 0
    period: int = 0
    weather: int = GOOD
    maze: int | None = None
    position: tuple = START
    tiredness: float = 0.0


class MazeEnv:
    """Sequential interface used by the agents.

    Call order per episode: ``start_episode``; then per block ``start_block``
    (returns the weather index), ``set_high_action``, and H times
    ``low_state`` / ``step``.
    """

    tabular = True

    def __init__(self, config: MazeEnvConfig, rng: np.random.Generator, n_blocks: int = 15,
                 n_periods: int = 7):
        self.config = config
        self.rng = rng
        self.n_blocks = n_blocks
        self.n_periods = n_periods
        self.layouts = {m: make_layout(m, config.reward_mode) for m in (EASY, HARD)}
        self.n_low = COLUMNS * ROWS
        self.features = TabularFeatures(2, 2, self.n_low, 2)
        self.state = MazeState()
        self._history: list[int] = []

    @property
    def n_high_states(self) -> int:
        return 2

    def start_episode(self) -> None:
        self._history = []
        self.state = MazeState()

    def start_block(self) -> int:
        if len(self._history) >= self.n_blocks:
            raise InvalidInputError("episode already has all its blocks")
        weather, tired = env_reset_block(self.config, self.rng, self._history)
        self.state = MazeState(len(self._history) + 1, 0, weather, None, START, tired)
        return weather

    def set_high_action(self, maze: int) -> None:
        self.state.maze = int(maze)
        self.state.period = 1
        self._history.append(int(maze))
        self._p = move_prob(self.config.variant, self.state.weather, self.state.tiredness)

    def low_state(self) -> int:
        return self.layouts[EASY].index(self.state.position)

    def step(self, action: int) -> float:
        st = self.state
        if st.maze is None or not 1 <= st.period <= self.n_periods:
            raise InvalidInputError("step called outside a block")
        layout = self.layouts[st.maze]
        new = maze_step(layout, st.position, action, self._p, self.rng)
        reward = maze_reward(layout, st.position, new)
        st.position = new
        st.period += 1
        return reward

    def five_tuple(self) -> tuple:
        """(block, period, weather, maze or None, position index or None)."""
        st = self.state
        if st.period == 0:
            return (st.block, 0, st.weather, None, None)
        return (st.block, st.period, st.weather, st.maze, self.low_state())


def block_mdp(config: MazeEnvConfig, n_periods: int = 7, tiredness_value: float = 0.0):
    """Exact block MDP with periods 0..H.

    Period 0 states are the weathers and its actions the maze choices; later
    periods have states (weather, maze, cell) indexed as
    ``(weather * 2 + maze) * n_cells + cell`` and actions up/down, so the
    tabular feature index of (state, action) is ``state * 2 + action``.
    """
    from ..evaluation.oracle import BlockMDP

    layouts = {m: make_layout(m, config.reward_mode) for m in (EASY, HARD)}
    n_cells = COLUMNS * ROWS
    n_states = 2 * 2 * n_cells
    P = np.zeros((n_states, 2, n_states))
    R = np.zeros((n_states, 2))
    for weather in (GOOD, BAD):
        p = move_prob(config.variant, weather, tiredness_value)
        for maze in (EASY, HARD):
            layout = layouts[maze]
            offset = (weather * 2 + maze) * n_cells
            for cell in range(n_cells):
                pos = layout.position(cell)
                s = offset + cell
                if not layout.is_open(pos):
                    P[s, :, s] = 1.0
                    continue
                for a in (UP, DOWN):
                    for nxt, q in step_distribution(layout, pos, a, p).items():
                        P[s, a, offset + layout.index(nxt)] += q
                        R[s, a] += q * maze_reward(layout, pos, nxt)
    P0 = np.zeros((2, 2, n_states))
    start = layouts[EASY].index(START)
    for weather in (GOOD, BAD):
        for maze in (EASY, HARD):
            P0[weather, maze, (weather * 2 + maze) * n_cells + start] = 1.0
    initial = np.array([1 - config.bad_weather_prob, config.bad_weather_prob])
    return BlockMDP([P0] + [P] * (n_periods - 1), [np.zeros((2, 2))] + [R] * n_periods, initial)
