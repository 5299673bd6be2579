"""Deterministic MDP contract and helpers that only rely on that contract."""
from __future__ import annotations

from collections import deque
from typing import Any, Hashable, Iterator, Protocol, Sequence, runtime_checkable

from ..errors import BudgetExceeded, RewardSignViolation

State = Any
Action = Hashable


@runtime_checkable
class Mdp(Protocol):
    """Everything the search needs from an environment.

    ``transition`` and ``reward`` must be pure, ``encode`` must be injective on
    reachable states, and ``reward`` must be non-negative on non-terminal states.
    Environments may additionally provide ``rollout(state, rng, cap, gamma)``
    returning ``(value, final_state)`` as a faster equivalent of the generic
    uniform-random playout.
    """

    name: str

    def initial(self) -> State: ...

    def actions(self, state: State) -> Sequence[Action]: ...

    def transition(self, state: State, action: Action) -> State: ...

    def reward(self, state: State) -> float: ...

    def is_terminal(self, state: State) -> bool: ...

    def encode(self, state: State) -> bytes: ...


def is_leaf_state(env: Mdp, state: State) -> bool:
    """True when the state is terminal or has no actions left."""
    return env.is_terminal(state) or not env.actions(state)


def reachable_states(env: Mdp, start: State | None = None, limit: int = 1_000_000) -> Iterator[State]:
    """Breadth-first enumeration of states reachable from ``start``.

    States are deduplicated by their encoding. Raises :class:`BudgetExceeded`
    once more than ``limit`` distinct states have been seen.
    """
    if start is None:
        start = env.initial()
    seen = {env.encode(start)}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        yield state
        if is_leaf_state(env, state):
            continue
        for action in env.actions(state):
            nxt = env.transition(state, action)
            key = env.encode(nxt)
            if key in seen:
                continue
            seen.add(key)
            if len(seen) > limit:
                raise BudgetExceeded(f"{env.name}: more than {limit} reachable states")
            queue.append(nxt)


def validate_rewards(env: Mdp, exhaustive_bound: int = 100_000) -> int:
    """Check that every reachable non-terminal state has a reward >= 0.

    Enumerates at most ``exhaustive_bound`` states breadth-first; larger state
    spaces are only checked up to that bound (the search checks the rest
    online). Returns the number of states checked.
    """
    checked = 0
    start = env.initial()
    seen = {env.encode(start)}
    queue = deque([start])
    while queue and checked < exhaustive_bound:
        state = queue.popleft()
        checked += 1
        if is_leaf_state(env, state):
            continue
        reward = env.reward(state)
        if reward < 0:
            raise RewardSignViolation(state, reward)
        for action in env.actions(state):
            nxt = env.transition(state, action)
            key = env.encode(nxt)
            if key not in seen:
                seen.add(key)
                queue.append(nxt)
    return checked
