"""Stochastic grid navigation with slip hazards and local observation noise.

A rectangular grid with a start and a goal. Stepping into a slip cell
succeeds only with the configured probability; otherwise the agent is
dropped into an absorbing sink cell. Observations are the agent's cell
corrupted at rate `obs_noise` into a uniform draw over the 4-neighborhood
plus self. Goal and sink cells absorb.

The simulator samples from the very same transition/observation tensors
the agent's generative model uses, so the two cannot drift apart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ModelValidationError, UsageError
from ..model import ModelSpec, ObservationModel, StateFactor, TransitionModel

N_ACTIONS = 4
ACTIONS = {"up": 0, "down": 1, "left": 2, "right": 3}
_MOVES = {0: (-1, 0), 1: (1, 0), 2: (0, -1), 3: (0, 1)}


@dataclass(frozen=True)
class GridSpec:
    width: int = 9
    height: int = 5
    start: tuple[int, int] = (2, 0)
    goal: tuple[int, int] = (2, 8)
    sink_cells: tuple[tuple[int, int], ...] = ((4, 4),)
    slip_cells: dict[tuple[int, int], float] = field(
        default_factory=lambda: {(2, 3): 0.5, (2, 4): 0.5, (2, 5): 0.5}
    )
    obs_noise: float = 0.1
    slip_obs_noise: float = 0.9
    horizon: int = 12
    preference_sharpness: float = 8.0

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def cell_index(self, cell: tuple[int, int]) -> int:
        r, c = cell
        return r * self.width + c

    def in_bounds(self, cell: tuple[int, int]) -> bool:
        r, c = cell
        return 0 <= r < self.height and 0 <= c < self.width

    def validate(self) -> None:
        cells = [self.start, self.goal, *self.sink_cells, *self.slip_cells]
        for cell in cells:
            if not self.in_bounds(cell):
                raise ModelValidationError(f"cell {cell} out of bounds")
        if not self.sink_cells and self.slip_cells:
            raise ModelValidationError("slip cells require at least one sink cell")
        for p in self.slip_cells.values():
            if not 0.0 <= p <= 1.0:
                raise ModelValidationError("slip probabilities must be in [0, 1]")
        if not 0.0 <= self.obs_noise <= 1.0 or not 0.0 <= self.slip_obs_noise <= 1.0:
            raise ModelValidationError("observation noise rates must be in [0, 1]")
        if self.horizon < 1:
            raise ModelValidationError("horizon must be >= 1")
        if self.start in self.sink_cells or self.goal in self.sink_cells:
            raise ModelValidationError("start/goal cannot be sink cells")
        if not self._slip_free_path_exists():
            raise ModelValidationError("no slip-free path from start to goal")

    def _slip_free_path_exists(self) -> bool:
        blocked = set(self.slip_cells) | set(self.sink_cells)
        if self.start in blocked:
            return False
        frontier = [self.start]
        seen = {self.start}
        while frontier:
            cell = frontier.pop()
            if cell == self.goal:
                return True
            r, c = cell
            for dr, dc in _MOVES.values():
                nxt = (r + dr, c + dc)
                if self.in_bounds(nxt) and nxt not in blocked and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
        return False

    def _nearest_sink(self, cell: tuple[int, int]) -> tuple[int, int]:
        return min(
            self.sink_cells,
            key=lambda s: (abs(s[0] - cell[0]) + abs(s[1] - cell[1]),
                           self.cell_index(s)),
        )


@dataclass
class GridModelTensors:
    A: np.ndarray  # (y, x)
    B: np.ndarray  # (x', x, u)
    init: np.ndarray  # one-hot at start
    preference: np.ndarray  # terminal preference over cells
    rewards: np.ndarray  # per-cell terminal reward


def _neighborhood(spec: GridSpec, cell: tuple[int, int]) -> list[int]:
    r, c = cell
    cells = [(r, c)]
    for dr, dc in _MOVES.values():
        nxt = (r + dr, c + dc)
        if spec.in_bounds(nxt):
            cells.append(nxt)
    return [spec.cell_index(x) for x in cells]


def build_tensors(spec: GridSpec) -> GridModelTensors:
    spec.validate()
    n = spec.n_cells
    goal = spec.cell_index(spec.goal)
    sinks = {spec.cell_index(s) for s in spec.sink_cells}
    absorbing = sinks | {goal}

    B = np.zeros((n, n, N_ACTIONS))
    for r in range(spec.height):
        for c in range(spec.width):
            x = spec.cell_index((r, c))
            for u, (dr, dc) in _MOVES.items():
                if x in absorbing:
                    B[x, x, u] = 1.0
                    continue
                tgt_cell = (r + dr, c + dc)
                if not spec.in_bounds(tgt_cell):
                    tgt_cell = (r, c)
                tgt = spec.cell_index(tgt_cell)
                slip = spec.slip_cells.get(tgt_cell, 0.0) if tgt != x else 0.0
                if slip > 0.0:
                    sink = spec.cell_index(spec._nearest_sink(tgt_cell))
                    B[tgt, x, u] += 1.0 - slip
                    B[sink, x, u] += slip
                else:
                    B[tgt, x, u] += 1.0

    A = np.zeros((n, n))
    for r in range(spec.height):
        for c in range(spec.width):
            x = spec.cell_index((r, c))
            # slip cells sit in the hazy region: their views are noisier
            rate = spec.slip_obs_noise if (r, c) in spec.slip_cells else spec.obs_noise
            A[x, x] += 1.0 - rate
            hood = _neighborhood(spec, (r, c))
            for y in hood:
                A[y, x] += rate / len(hood)

    init = np.zeros(n)
    init[spec.cell_index(spec.start)] = 1.0

    rewards = np.zeros(n)
    rewards[goal] = 1.0
    for s in sinks:
        rewards[s] = -1.0
    pref = np.exp(spec.preference_sharpness * rewards)
    pref /= pref.sum()

    return GridModelTensors(A=A, B=B, init=init, preference=pref, rewards=rewards)


def _neg_obs_entropy(A: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(A > 0.0, A * np.log(A), 0.0)
    return plogp.sum(axis=0)


def build_model(spec: GridSpec,
                tensors: GridModelTensors | None = None) -> ModelSpec:
    tensors = tensors if tensors is not None else build_tensors(spec)
    model = ModelSpec(
        name="grid",
        horizon=spec.horizon,
        control_card=N_ACTIONS,
        factors=(StateFactor("x", spec.n_cells, tensors.init),),
        transitions=(TransitionModel("x", ("x",), tensors.B),),
        observations=(ObservationModel("y", ("x",), tensors.A),),
        preferences={"x": tensors.preference},
        obs_entropy_scores={"x": _neg_obs_entropy(tensors.A)},
    )
    model.validate()
    return model


class GridEnv:
    """Samples transitions and observations from the model tensors."""

    def __init__(self, spec: GridSpec, tensors: GridModelTensors | None = None):
        spec.validate()
        self.spec = spec
        self.tensors = tensors if tensors is not None else build_tensors(spec)
        self._goal = spec.cell_index(spec.goal)
        self._sinks = {spec.cell_index(s) for s in spec.sink_cells}
        self._rng: np.random.Generator | None = None
        self.state: int = -1
        self.t = 0
        self.done = False
        self.success = False

    def reset(self, seed: int) -> int:
        self._rng = np.random.default_rng(seed)
        self.state = self.spec.cell_index(self.spec.start)
        self.t = 0
        self.success = self.state == self._goal
        self.done = self.success
        return self._observe()

    def _observe(self) -> int:
        return int(self._rng.choice(len(self.tensors.A), p=self.tensors.A[:, self.state]))

    def sample_next(self, state: int, action: int,
                    rng: np.random.Generator) -> int:
        return int(rng.choice(self.tensors.B.shape[0],
                              p=self.tensors.B[:, state, action]))

    def step(self, action: int) -> tuple[int, float, bool]:
        if self.done:
            raise UsageError("step() called on a finished episode")
        if not 0 <= action < N_ACTIONS:
            raise ConfigError(f"action {action} outside 0..{N_ACTIONS - 1}")
        self.state = self.sample_next(self.state, action, self._rng)
        self.t += 1
        reward = 0.0
        if self.state == self._goal:
            reward = 1.0
            self.done = True
            self.success = True
        elif self.state in self._sinks:
            reward = -1.0
            self.done = True
        elif self.t >= self.spec.horizon:
            self.done = True
        return self._observe(), reward, self.done


def render_frame(spec: GridSpec, agent_cell: int | None = None) -> str:
    """ASCII frame: S start, G goal, X sink, ~ slip, A agent, . floor."""
    rows = []
    for r in range(spec.height):
        row = []
        for c in range(spec.width):
            cell = (r, c)
            ch = "."
            if cell in spec.slip_cells:
                ch = "~"
            if cell in spec.sink_cells:
                ch = "X"
            if cell == spec.start:
                ch = "S"
            if cell == spec.goal:
                ch = "G"
            if agent_cell is not None and spec.cell_index(cell) == agent_cell:
                ch = "A"
            row.append(ch)
        rows.append("".join(row))
    return "\n".join(rows)


def render_trajectory(spec: GridSpec, states: list[int]) -> str:
    frames = [render_frame(spec, s) for s in states]
    return ("\n" + "-" * spec.width + "\n").join(frames)


def spec_from_config(text: str) -> GridSpec:
    """Parse the key=value config format.

    Cells are "r,c"; slip cells are "r,c:p" entries separated by
    whitespace; sink cells are "r,c" entries separated by whitespace.
    """
    values: dict[str, str] = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line {line!r}")
        key, val = line.split("=", 1)
        values[key.strip()] = val.strip()

    def cell(s: str) -> tuple[int, int]:
        r, c = s.split(",")
        return (int(r), int(c))

    kwargs: dict = {}
    if "width" in values:
        kwargs["width"] = int(values["width"])
    if "height" in values:
        kwargs["height"] = int(values["height"])
    if "start" in values:
        kwargs["start"] = cell(values["start"])
    if "goal" in values:
        kwargs["goal"] = cell(values["goal"])
    if "sink_cells" in values:
        kwargs["sink_cells"] = tuple(cell(tok) for tok in values["sink_cells"].split())
    if "slip_cells" in values:
        slips = {}
        for tok in values["slip_cells"].split():
            loc, p = tok.split(":")
            slips[cell(loc)] = float(p)
        kwargs["slip_cells"] = slips
    if "obs_noise" in values:
        kwargs["obs_noise"] = float(values["obs_noise"])
    if "slip_obs_noise" in values:
        kwargs["slip_obs_noise"] = float(values["slip_obs_noise"])
    if "horizon" in values:
        kwargs["horizon"] = int(values["horizon"])
    if "preference_sharpness" in values:
        kwargs["preference_sharpness"] = float(values["preference_sharpness"])
    return GridSpec(**kwargs)
