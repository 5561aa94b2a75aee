"""Seedable DoorKey and LavaCrossing gridworlds with MiniGrid action/reward semantics.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row, ``y``
growing downwards. Directions follow MiniGrid: 0 East, 1 South, 2 West,
3 North. The grid is stored as two ``(height, width)`` int8 arrays (cell kind
and colour); use :meth:`GridState.cell` for a typed view of one cell.

Observations are the 7x7 egocentric crop in front of the agent, three
channels per cell (MiniGrid object, colour and state indices), divided by
the channel maxima (10, 5, 2) and flattened row-major to 147 floats. View
row 0 is the farthest row ahead, the agent sits at row 6, column 3. Nothing
is occluded: walls do not hide the cells behind them.

ASCII legend used by :func:`render_ascii`::

    #  wall        .  empty      D  locked door   /  open door
    K  key         G  goal       ~  lava          > v < ^  agent (facing)
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, UsageError

VIEW_SIZE = 7
OBS_DIM = VIEW_SIZE * VIEW_SIZE * 3
N_ACTIONS = 7
CHANNEL_MAX = np.array([10.0, 5.0, 2.0])


class CellKind(enum.IntEnum):
    EMPTY = 0
    WALL = 1
    LOCKED_DOOR = 2
    OPEN_DOOR = 3
    KEY = 4
    GOAL = 5
    LAVA = 6


class Color(enum.IntEnum):
    RED = 0
    GREEN = 1
    BLUE = 2
    PURPLE = 3
    YELLOW = 4
    GREY = 5


class Direction(enum.IntEnum):
    EAST = 0
    SOUTH = 1
    WEST = 2
    NORTH = 3


class Action(enum.IntEnum):
    TURN_LEFT = 0
    TURN_RIGHT = 1
    FORWARD = 2
    PICKUP = 3
    DROP = 4
    TOGGLE = 5
    DONE = 6


DIR_VEC = np.array([(1, 0), (0, 1), (-1, 0), (0, -1)])

# MiniGrid encoding per CellKind: object index and state index.
_OBJECT_INDEX = np.array([1, 2, 4, 4, 5, 8, 9], dtype=np.int64)
_STATE_INDEX = np.array([0, 0, 2, 0, 0, 0, 0], dtype=np.int64)
_WALKABLE = np.array([True, False, False, True, False, True, True])
_WALL_CODE = (2, int(Color.GREY), 0)

_GLYPHS = {
    CellKind.EMPTY: ".",
    CellKind.WALL: "#",
    CellKind.LOCKED_DOOR: "D",
    CellKind.OPEN_DOOR: "/",
    CellKind.KEY: "K",
    CellKind.GOAL: "G",
    CellKind.LAVA: "~",
}
_AGENT_GLYPHS = ">v<^"


@dataclass(frozen=True)
class Cell:
    kind: CellKind
    color: Color = Color.RED


@dataclass
class GridState:
    kinds: np.ndarray  # (height, width) int8 of CellKind
    colors: np.ndarray  # (height, width) int8 of Color
    agent_pos: tuple[int, int]
    agent_dir: Direction
    max_steps: int
    carrying: Cell | None = None
    step_count: int = 0
    terminated: bool = False
    truncated: bool = False

    @property
    def height(self) -> int:
        return self.kinds.shape[0]

    @property
    def width(self) -> int:
        return self.kinds.shape[1]

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated

    def cell(self, x: int, y: int) -> Cell:
        return Cell(CellKind(int(self.kinds[y, x])), Color(int(self.colors[y, x])))

    def set_cell(self, x: int, y: int, cell: Cell) -> None:
        self.kinds[y, x] = cell.kind
        self.colors[y, x] = cell.color

    def front_pos(self) -> tuple[int, int]:
        dx, dy = DIR_VEC[self.agent_dir]
        return self.agent_pos[0] + int(dx), self.agent_pos[1] + int(dy)

    def copy(self) -> "GridState":
        return GridState(
            self.kinds.copy(),
            self.colors.copy(),
            self.agent_pos,
            self.agent_dir,
            self.max_steps,
            self.carrying,
            self.step_count,
            self.terminated,
            self.truncated,
        )

    def __eq__(self, other):
        if not isinstance(other, GridState):
            return NotImplemented
        return (
            np.array_equal(self.kinds, other.kinds)
            and np.array_equal(self.colors, other.colors)
            and (self.agent_pos, self.agent_dir, self.max_steps, self.carrying)
            == (other.agent_pos, other.agent_dir, other.max_steps, other.carrying)
            and (self.step_count, self.terminated, self.truncated)
            == (other.step_count, other.terminated, other.truncated)
        )


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


def empty_room(width: int, height: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Kind and colour arrays for an empty room enclosed by grey walls."""
    height = width if height is None else height
    kinds = np.full((height, width), CellKind.EMPTY, dtype=np.int8)
    colors = np.zeros((height, width), dtype=np.int8)
    kinds[0, :] = kinds[-1, :] = kinds[:, 0] = kinds[:, -1] = CellKind.WALL
    colors[kinds == CellKind.WALL] = Color.GREY
    return kinds, colors


def _place_random(rng, kinds, x_range, y_range, exclude=()) -> tuple[int, int]:
    # Rejection sampling over the region, as the upstream generators do.
    while True:
        x = int(rng.integers(*x_range))
        y = int(rng.integers(*y_range))
        if kinds[y, x] == CellKind.EMPTY and (x, y) not in exclude:
            return x, y


def reset_doorkey(seed: int, size: int = 8) -> GridState:
    """Fresh DoorKey layout: key and agent left of a walled split, goal bottom-right."""
    if int(size) != size or size < 5:
        raise ConfigurationError(f"DoorKey size must be an integer >= 5, got {size!r}")
    size = int(size)
    rng = np.random.default_rng(seed)
    kinds, colors = empty_room(size)
    kinds[size - 2, size - 2] = CellKind.GOAL
    colors[size - 2, size - 2] = Color.GREEN

    split = int(rng.integers(2, size - 2))
    kinds[:, split] = CellKind.WALL
    colors[:, split] = Color.GREY

    agent_pos = _place_random(rng, kinds, (0, split), (0, size))
    agent_dir = Direction(int(rng.integers(0, 4)))

    door_y = int(rng.integers(1, size - 2))
    kinds[door_y, split] = CellKind.LOCKED_DOOR
    colors[door_y, split] = Color.YELLOW

    kx, ky = _place_random(rng, kinds, (0, split), (0, size), exclude=(agent_pos,))
    kinds[ky, kx] = CellKind.KEY
    colors[ky, kx] = Color.YELLOW
    return GridState(kinds, colors, agent_pos, agent_dir, max_steps=10 * size * size)


def reset_lavacrossing(seed: int, size: int = 9, num_crossings: int = 1) -> GridState:
    """Fresh LavaCrossing layout: lava rivers with one opening each, agent at (1, 1)."""
    if int(size) != size or size < 5:
        raise ConfigurationError(f"LavaCrossing size must be an integer >= 5, got {size!r}")
    size = int(size)
    candidates = [("v", i) for i in range(2, size - 2, 2)] + [("h", j) for j in range(2, size - 2, 2)]
    if int(num_crossings) != num_crossings or not 1 <= num_crossings <= len(candidates):
        raise ConfigurationError(
            f"num_crossings must be in [1, {len(candidates)}] for size {size}, got {num_crossings!r}"
        )
    rng = np.random.default_rng(seed)
    kinds, colors = empty_room(size)
    kinds[size - 2, size - 2] = CellKind.GOAL
    colors[size - 2, size - 2] = Color.GREEN

    order = rng.permutation(len(candidates))
    chosen = [candidates[k] for k in order[: int(num_crossings)]]
    river_cols = sorted(pos for d, pos in chosen if d == "v")
    river_rows = sorted(pos for d, pos in chosen if d == "h")
    for y in river_rows:
        kinds[y, 1 : size - 1] = CellKind.LAVA
    for x in river_cols:
        kinds[1 : size - 1, x] = CellKind.LAVA

    # One opening per river, along a monotone room-to-room path to the goal.
    path = ["cross_col"] * len(river_cols) + ["cross_row"] * len(river_rows)
    path = [path[k] for k in rng.permutation(len(path))]
    col_limits = [0] + river_cols + [size - 1]
    row_limits = [0] + river_rows + [size - 1]
    room_x = room_y = 0
    for step in path:
        if step == "cross_col":
            x = col_limits[room_x + 1]
            y = int(rng.integers(row_limits[room_y] + 1, row_limits[room_y + 1]))
            room_x += 1
        else:
            x = int(rng.integers(col_limits[room_x] + 1, col_limits[room_x + 1]))
            y = row_limits[room_y + 1]
            room_y += 1
        kinds[y, x] = CellKind.EMPTY
    colors[kinds == CellKind.LAVA] = Color.RED
    return GridState(kinds, colors, (1, 1), Direction.EAST, max_steps=4 * size * size)


def success_reward(step_count: int, max_steps: int) -> float:
    return 1.0 - 0.9 * (step_count / max_steps)


def step(state: GridState, action) -> StepResult:
    """Apply ``action`` to ``state`` in place and return the observation and reward."""
    if state.terminated or state.truncated:
        raise UsageError("episode is finished; reset before stepping again")
    try:
        action = Action(int(action))
    except ValueError:
        raise UsageError(f"invalid action {action!r}") from None

    state.step_count += 1
    reward = 0.0
    fx, fy = state.front_pos()
    front = CellKind(int(state.kinds[fy, fx]))

    if action == Action.TURN_LEFT:
        state.agent_dir = Direction((state.agent_dir - 1) % 4)
    elif action == Action.TURN_RIGHT:
        state.agent_dir = Direction((state.agent_dir + 1) % 4)
    elif action == Action.FORWARD:
        if _WALKABLE[front]:
            state.agent_pos = (fx, fy)
            if front == CellKind.GOAL:
                state.terminated = True
                reward = success_reward(state.step_count, state.max_steps)
            elif front == CellKind.LAVA:
                state.terminated = True
    elif action == Action.PICKUP:
        if front == CellKind.KEY and state.carrying is None:
            state.carrying = state.cell(fx, fy)
            state.set_cell(fx, fy, Cell(CellKind.EMPTY))
    elif action == Action.DROP:
        if front == CellKind.EMPTY and state.carrying is not None:
            state.set_cell(fx, fy, state.carrying)
            state.carrying = None
    elif action == Action.TOGGLE:
        if (
            front == CellKind.LOCKED_DOOR
            and state.carrying is not None
            and state.carrying.kind == CellKind.KEY
            and state.carrying.color == state.colors[fy, fx]
        ):
            state.kinds[fy, fx] = CellKind.OPEN_DOOR
    # Action.DONE is inert.

    if state.step_count >= state.max_steps and not state.terminated:
        state.truncated = True
    return StepResult(observe(state), reward, state.terminated, state.truncated)


def _view_offsets():
    # World offset of every view cell, per facing direction.
    rows, cols = np.mgrid[0:VIEW_SIZE, 0:VIEW_SIZE]
    ahead = (VIEW_SIZE - 1) - rows
    right = cols - VIEW_SIZE // 2
    out = []
    for fx, fy in DIR_VEC:
        rx, ry = -fy, fx
        out.append((fx * ahead + rx * right, fy * ahead + ry * right))
    return out


_VIEW_OFFSETS = _view_offsets()


def encode_view(state: GridState) -> np.ndarray:
    """Integer (7, 7, 3) egocentric view: object, colour and state indices."""
    dx, dy = _VIEW_OFFSETS[state.agent_dir]
    xs = state.agent_pos[0] + dx
    ys = state.agent_pos[1] + dy
    inside = (xs >= 0) & (xs < state.width) & (ys >= 0) & (ys < state.height)
    xs_c = np.clip(xs, 0, state.width - 1)
    ys_c = np.clip(ys, 0, state.height - 1)
    kinds = state.kinds[ys_c, xs_c].astype(np.int64)
    colors = state.colors[ys_c, xs_c].astype(np.int64)

    # The agent's own cell shows what it carries, as in MiniGrid.
    ar, ac = VIEW_SIZE - 1, VIEW_SIZE // 2
    if state.carrying is None:
        kinds[ar, ac], colors[ar, ac] = CellKind.EMPTY, 0
    else:
        kinds[ar, ac], colors[ar, ac] = state.carrying.kind, state.carrying.color

    view = np.empty((VIEW_SIZE, VIEW_SIZE, 3), dtype=np.int64)
    view[..., 0] = _OBJECT_INDEX[kinds]
    view[..., 1] = np.where(kinds == CellKind.EMPTY, 0, colors)
    view[..., 2] = _STATE_INDEX[kinds]
    view[~inside] = _WALL_CODE
    return view


def normalize_view(view: np.ndarray) -> np.ndarray:
    return (np.asarray(view, dtype=np.float64) / CHANNEL_MAX).reshape(-1)


def observe(state: GridState) -> np.ndarray:
    """Flattened, normalised 147-vector for the agent's current view."""
    return normalize_view(encode_view(state))


def render_ascii(state: GridState) -> str:
    lines = []
    for y in range(state.height):
        row = []
        for x in range(state.width):
            if (x, y) == state.agent_pos:
                row.append(_AGENT_GLYPHS[state.agent_dir])
            else:
                row.append(_GLYPHS[CellKind(int(state.kinds[y, x]))])
        lines.append("".join(row))
    return "\n".join(lines)


ENV_IDS = ("doorkey8", "lavacrossing9")


@dataclass
class GridEnv:
    """Stateful wrapper around the functional API, used by the agents' training loop."""

    name: str = "doorkey8"
    n_actions: int = field(default=N_ACTIONS, init=False)
    obs_dim: int = field(default=OBS_DIM, init=False)
    state: GridState | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.name not in ENV_IDS:
            raise ConfigurationError(f"unknown environment {self.name!r}; expected one of {ENV_IDS}")

    def reset(self, seed: int) -> np.ndarray:
        if self.name == "doorkey8":
            self.state = reset_doorkey(seed, 8)
        else:
            self.state = reset_lavacrossing(seed, 9, 1)
        return observe(self.state)

    def step(self, action) -> StepResult:
        if self.state is None:
            raise UsageError("reset() must be called before step()")
        return step(self.state, action)

    def render(self) -> str:
        return render_ascii(self.state)


def make_env(env) -> GridEnv:
    return env if not isinstance(env, str) else GridEnv(env)
