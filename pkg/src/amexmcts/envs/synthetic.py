"""Uniform synthetic game tree with seeded leaf rewards, used as a test fixture."""
from __future__ import annotations

from typing import Sequence

import numpy as np


class SyntheticTree:
    """Full ``b``-ary tree of depth ``D``; states are action paths.

    Leaves carry rewards drawn once from ``seed`` in [0, 1]; interior rewards
    are 0. No two paths share a state, so there are no transpositions.
    """

    name = "synthetic"

    def __init__(self, b: int, depth: int, seed: int = 0):
        if b < 1 or depth < 1:
            raise ValueError("branching and depth must be >= 1")
        if b ** depth > 5_000_000:
            raise ValueError("synthetic tree too large")
        self.b, self.depth, self.seed = b, depth, seed
        self.leaf_rewards = np.random.default_rng(seed).random(b ** depth)

    def initial(self) -> tuple[int, ...]:
        return ()

    def is_terminal(self, state: tuple[int, ...]) -> bool:
        return len(state) >= self.depth

    def actions(self, state: tuple[int, ...]) -> Sequence[int]:
        return () if len(state) >= self.depth else range(self.b)

    def transition(self, state: tuple[int, ...], action: int) -> tuple[int, ...]:
        return state + (action,)

    def leaf_index(self, state: tuple[int, ...]) -> int:
        index = 0
        for a in state:
            index = index * self.b + a
        return index

    def reward(self, state: tuple[int, ...]) -> float:
        if len(state) < self.depth:
            return 0.0
        return float(self.leaf_rewards[self.leaf_index(state)])

    def encode(self, state: tuple[int, ...]) -> bytes:
        return bytes(state) if self.b <= 256 else ",".join(map(str, state)).encode()
