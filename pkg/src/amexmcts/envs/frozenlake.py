"""Deterministic (non-slippery) FrozenLake on a character map."""
from __future__ import annotations

from pathlib import Path
from typing import NamedTuple, Sequence

from ..errors import PreconditionViolation

DEFAULT_MAP_8X8 = (
    "SFFFFFFF",
    "FFFFFFFF",
    "FFFHFFFF",
    "FFFFFHFF",
    "FFFHFFFF",
    "FHHFFFHF",
    "FHFFHFHF",
    "FFFHFFFG",
)
DEFAULT_HORIZON = 400

LEFT, DOWN, RIGHT, UP = range(4)
_MOVES = {LEFT: (0, -1), DOWN: (1, 0), RIGHT: (0, 1), UP: (-1, 0)}

_FREE, _HOLE, _GOAL = 0, 1, 2


class LakeState(NamedTuple):
    row: int
    col: int
    steps_remaining: int


def parse_map(text: str) -> tuple[str, ...]:
    """Parse a map block: one row per line, characters from ``SFHG``."""
    rows = tuple(line.strip() for line in text.splitlines() if line.strip())
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError("lake map must be a non-empty rectangle")
    cells = "".join(rows)
    if set(cells) - set("SFHG"):
        raise ValueError(f"unknown map characters: {sorted(set(cells) - set('SFHG'))}")
    if cells.count("S") != 1:
        raise ValueError("lake map needs exactly one start cell")
    return rows


def load_map(path: str | Path) -> tuple[str, ...]:
    return parse_map(Path(path).read_text())


class FrozenLake:
    """Grid walk: holes end the episode with 0, the goal ends it with 1.

    Moves are clipped at the borders and every step burns one unit of horizon.
    """

    name = "frozenlake"

    def __init__(self, grid: Sequence[str] = DEFAULT_MAP_8X8, horizon: int = DEFAULT_HORIZON):
        self.grid = parse_map("\n".join(grid))
        self.nrow, self.ncol = len(self.grid), len(self.grid[0])
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.horizon = horizon
        flat = "".join(self.grid)
        self.start = divmod(flat.index("S"), self.ncol)
        self._kind = [_HOLE if c == "H" else _GOAL if c == "G" else _FREE for c in flat]
        self._next = [
            [self._move(divmod(cell, self.ncol), a) for a in range(4)]
            for cell in range(self.nrow * self.ncol)
        ]

    def _move(self, pos: tuple[int, int], action: int) -> int:
        dr, dc = _MOVES[action]
        row = min(max(pos[0] + dr, 0), self.nrow - 1)
        col = min(max(pos[1] + dc, 0), self.ncol - 1)
        return row * self.ncol + col

    def cell(self, state: LakeState) -> str:
        return self.grid[state.row][state.col]

    def initial(self) -> LakeState:
        return LakeState(*self.start, self.horizon)

    def is_terminal(self, state: LakeState) -> bool:
        return state.steps_remaining <= 0 or self._kind[state.row * self.ncol + state.col] != _FREE

    def actions(self, state: LakeState) -> Sequence[int]:
        return () if self.is_terminal(state) else (LEFT, DOWN, RIGHT, UP)

    def transition(self, state: LakeState, action: int) -> LakeState:
        return lake_step(self, state, action)[0]

    def reward(self, state: LakeState) -> float:
        return 1.0 if self._kind[state.row * self.ncol + state.col] == _GOAL else 0.0

    def encode(self, state: LakeState) -> bytes:
        return b"%d:%d:%d" % state

    def rollout(self, state: LakeState, rng, cap: int, gamma: float):
        """Uniform-random playout on the precomputed move table."""
        nxt, kind = self._next, self._kind
        cell = state.row * self.ncol + state.col
        steps = state.steps_remaining
        discount = 1.0
        rand = rng.random
        for _ in range(cap):
            if kind[cell] != _FREE or steps <= 0:
                break
            cell = nxt[cell][int(rand() * 4)]
            steps -= 1
            discount *= gamma
        value = discount if kind[cell] == _GOAL else 0.0
        return value, LakeState(*divmod(cell, self.ncol), steps)


def lake_step(env: FrozenLake, state: LakeState, action: int) -> tuple[LakeState, float, bool]:
    """One lake transition: ``(next_state, reward, terminal)``."""
    if env.is_terminal(state):
        raise PreconditionViolation(f"lake_step on terminal state {state}")
    if action not in _MOVES:
        raise PreconditionViolation(f"invalid lake action {action!r}")
    row, col = divmod(env._next[state.row * env.ncol + state.col][action], env.ncol)
    nxt = LakeState(row, col, state.steps_remaining - 1)
    return nxt, env.reward(nxt), env.is_terminal(nxt)
