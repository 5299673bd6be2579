"""Chain and ChainLoop: pick the correct one of two actions k times in a row."""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from ..errors import PreconditionViolation


class ChainState(NamedTuple):
    position: int
    failed: bool = False


class ChainLoopState(NamedTuple):
    position: int
    steps_remaining: int


@dataclass(frozen=True)
class ChainSpec:
    """Length of the chain and the correct action at every position."""

    k: int
    correct: tuple[int, ...]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if len(self.correct) != self.k or any(a not in (0, 1) for a in self.correct):
            raise ValueError("correct must hold k actions from {0, 1}")

    @classmethod
    def seeded(cls, k: int, seed: int) -> ChainSpec:
        rng = random.Random(seed)
        return cls(k, tuple(rng.randrange(2) for _ in range(k)))

    @classmethod
    def fixed(cls, k: int, action: int = 0) -> ChainSpec:
        return cls(k, (action,) * k)


def chain_step(state: ChainState, action: int, spec: ChainSpec) -> tuple[ChainState, float, bool]:
    """One Chain transition: ``(next_state, reward, terminal)``."""
    if state.failed or state.position >= spec.k:
        raise PreconditionViolation(f"chain_step on terminal state {state}")
    if action not in (0, 1):
        raise PreconditionViolation(f"invalid chain action {action!r}")
    if action != spec.correct[state.position]:
        return ChainState(state.position, True), 0.0, True
    nxt = state.position + 1
    if nxt == spec.k:
        return ChainState(nxt), 1.0, True
    return ChainState(nxt), 0.0, False


def chainloop_step(
    state: ChainLoopState, action: int, spec: ChainSpec
) -> tuple[ChainLoopState, float, bool]:
    """One ChainLoop transition; a wrong action sends the agent back to position 0."""
    if state.position >= spec.k or state.steps_remaining <= 0:
        raise PreconditionViolation(f"chainloop_step on terminal state {state}")
    if action not in (0, 1):
        raise PreconditionViolation(f"invalid chain action {action!r}")
    steps = state.steps_remaining - 1
    if action == spec.correct[state.position]:
        nxt = state.position + 1
        if nxt == spec.k:
            return ChainLoopState(nxt, steps), 1.0, True
    else:
        nxt = 0
    return ChainLoopState(nxt, steps), 0.0, steps == 0


class Chain:
    """Wrong action ends the episode with reward 0; reaching position k pays 1."""

    name = "chain"

    def __init__(self, spec: ChainSpec):
        self.spec = spec

    def initial(self) -> ChainState:
        return ChainState(0)

    def is_terminal(self, state: ChainState) -> bool:
        return state.failed or state.position >= self.spec.k

    def actions(self, state: ChainState) -> Sequence[int]:
        return () if self.is_terminal(state) else (0, 1)

    def transition(self, state: ChainState, action: int) -> ChainState:
        return chain_step(state, action, self.spec)[0]

    def reward(self, state: ChainState) -> float:
        return 1.0 if state.position >= self.spec.k and not state.failed else 0.0

    def encode(self, state: ChainState) -> bytes:
        return b"%d:%d" % (state.position, state.failed)


class ChainLoop:
    """Chain variant where a wrong action resets to position 0 instead of ending.

    The state carries the remaining horizon so values stay well defined.
    """

    name = "chainloop"

    def __init__(self, spec: ChainSpec, horizon: int | None = None):
        self.spec = spec
        self.horizon = spec.k if horizon is None else horizon
        if self.horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {self.horizon}")

    def initial(self) -> ChainLoopState:
        return ChainLoopState(0, self.horizon)

    def is_terminal(self, state: ChainLoopState) -> bool:
        return state.position >= self.spec.k or state.steps_remaining <= 0

    def actions(self, state: ChainLoopState) -> Sequence[int]:
        return () if self.is_terminal(state) else (0, 1)

    def transition(self, state: ChainLoopState, action: int) -> ChainLoopState:
        return chainloop_step(state, action, self.spec)[0]

    def reward(self, state: ChainLoopState) -> float:
        return 1.0 if state.position >= self.spec.k else 0.0

    def encode(self, state: ChainLoopState) -> bytes:
        return b"%d:%d" % state
