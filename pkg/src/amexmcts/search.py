"""Monte-Carlo tree search with amplified exploration of not-yet-explored subtrees.

Three variants share one loop:

* ``classical`` -- plain UCT search with random rollouts.
* ``amex`` -- selection only follows actions whose subtree is not completely
  explored, while visit counts ``N_c`` keep following what classical UCT would
  have chosen. Real selections are counted separately in ``N_p``. Closed
  subtrees are backed up with the best child value and transpositions are
  closed with the value already known for their state.
* ``amexmax`` -- as ``amex``, but the exploitation term of UCT uses the
  running maximum of backed-up values instead of the mean.
"""
from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, NamedTuple, Optional

from .envs.base import Mdp
from .errors import InvariantViolation, PreconditionViolation, RewardSignViolation

SQRT2 = math.sqrt(2.0)
INF = math.inf


class Variant(str, enum.Enum):
    CLASSICAL = "classical"
    AMEX = "amex"
    AMEX_MAX = "amexmax"


class Status(enum.Enum):
    OPEN = "open"
    CLOSED_TERMINAL = "terminal"
    CLOSED_TRANSPOSITION = "transposition"
    CLOSED_COMPLETE = "complete"


@dataclass(frozen=True)
class SearchConfig:
    variant: Variant = Variant.AMEX
    n_sims: int = 100
    C: float = SQRT2
    gamma: float = 1.0
    rollout_cap: int = 1000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if not self.C > 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must be in (0, 1], got {self.gamma}")
        if self.n_sims < 1:
            raise ValueError(f"n_sims must be >= 1, got {self.n_sims}")
        if self.rollout_cap < 1:
            raise ValueError(f"rollout_cap must be >= 1, got {self.rollout_cap}")


class SearchNode:
    """One node of the search tree.

    ``N_c`` is the visit count classical UCT would have given the node and is
    what UCT and the output policy read. ``N_p`` counts real selections.
    ``open_actions`` holds the actions whose subtrees are not completely
    explored yet.
    """

    __slots__ = (
        "state", "key", "parent", "action", "children", "actions",
        "open_actions", "W", "N_c", "N_p", "q_max", "status",
    )

    def __init__(self, state: Any, key: bytes, parent: Optional[SearchNode] = None, action: Hashable = None):
        self.state = state
        self.key = key
        self.parent = parent
        self.action = action
        self.children: dict[Hashable, SearchNode] = {}
        self.actions: tuple = ()
        self.open_actions: set = set()
        self.W = 0.0
        self.N_c = 0
        self.N_p = 0
        self.q_max = -INF
        self.status = Status.OPEN

    @property
    def is_open(self) -> bool:
        return self.status is Status.OPEN

    def __repr__(self) -> str:
        return (
            f"SearchNode(key={self.key!r}, W={self.W:.6g}, N_c={self.N_c}, "
            f"N_p={self.N_p}, status={self.status.value})"
        )


class SearchTree:
    """Node arena, transposition table and best terminal seen for one search."""

    def __init__(self, env: Mdp, state: Any, config: SearchConfig):
        self.env = env
        self.config = config
        self.variant = config.variant
        self.table: dict[bytes, float] = {}
        self.root = SearchNode(state, env.encode(state))
        self.nodes: list[SearchNode] = [self.root]
        self.keys: set[bytes] = {self.root.key}
        self.best_reward = -INF
        self.best_state: Any = None

    def add_child(self, parent: SearchNode, action: Hashable) -> SearchNode:
        state = self.env.transition(parent.state, action)
        child = SearchNode(state, self.env.encode(state), parent, action)
        parent.children[action] = child
        self.nodes.append(child)
        self.keys.add(child.key)
        return child

    def record_terminal(self, state: Any, reward: float) -> None:
        if reward > self.best_reward:
            self.best_reward = reward
            self.best_state = state


class SelectionOutcome(NamedTuple):
    path: list  # (node, a_select, a_max) from the root down to the leaf's parent
    leaf: SearchNode


@dataclass
class Policy:
    actions: tuple
    weights: tuple
    chosen_action: Hashable
    q_values: Optional[dict] = None

    def weight(self, action: Hashable) -> float:
        return self.weights[self.actions.index(action)]


@dataclass
class SearchStats:
    iterations: int
    unique_states: int
    tree_size: int
    closed_nodes: int
    completed_subtrees: int
    fully_explored: bool
    best_terminal_reward: float
    best_terminal_state: Any = field(default=None, repr=False)


@dataclass
class SearchResult:
    policy: Policy
    stats: SearchStats
    tree: SearchTree


def uct_score(q: float, n_child: int, n_parent: int, C: float) -> float:
    """Upper confidence bound of a child; unvisited children score +inf."""
    if n_child == 0:
        return INF
    return q + C * math.sqrt(math.log(n_parent) / n_child)


def node_q(node: SearchNode, variant: Variant | str) -> float:
    """Value estimate of a node: mean ``W / N_c``, or the running max for ``amexmax``."""
    if Variant(variant) is Variant.AMEX_MAX:
        if node.q_max == -INF:
            raise PreconditionViolation(f"no value backed up into {node!r}")
        return node.q_max
    if node.N_c < 1:
        raise PreconditionViolation(f"Q requested for unvisited node {node!r}")
    return node.W / node.N_c


def _argmax(actions, scores, rng: random.Random):
    """Argmax over ``actions`` of ``scores[i]`` (aligned lists); ties broken by ``rng``."""
    best = max(scores)
    ties = [a for a, s in zip(actions, scores) if s == best]
    if len(ties) == 1:
        return ties[0]
    return ties[int(rng.random() * len(ties))]


def _uct_scores(node: SearchNode, C: float, use_max: bool) -> list:
    # Same arithmetic as uct_score, with the parent's log hoisted out of the loop.
    children = node.children
    log_parent = math.log(node.N_p) if node.N_p > 0 else 0.0
    sqrt = math.sqrt
    scores = []
    for a in node.actions:
        child = children.get(a)
        n = 0 if child is None else child.N_c
        if n == 0:
            scores.append(INF)
        else:
            scores.append((child.q_max if use_max else child.W / n) + C * sqrt(log_parent / n))
    return scores


def select_path(tree: SearchTree, rng: random.Random, root: SearchNode | None = None) -> SelectionOutcome:
    """Descend by UCT until reaching a node that is new to the tree or closed.

    At every node ``a_max`` is the UCT argmax over all actions and ``a_select``
    the argmax over open actions. When ``a_max`` is still open it is reused as
    ``a_select``, so no extra tie-break is drawn unless the two can differ.
    """
    node = tree.root if root is None else root
    classical = tree.variant is Variant.CLASSICAL
    use_max = tree.variant is Variant.AMEX_MAX
    C = tree.config.C
    path = []
    while True:
        open_actions = node.open_actions
        if not open_actions:
            raise InvariantViolation(f"open node without open actions: {node!r}")
        scores = _uct_scores(node, C, use_max)
        a_max = _argmax(node.actions, scores, rng)
        if classical or a_max in open_actions:
            a_select = a_max
        else:
            pairs = [(a, s) for a, s in zip(node.actions, scores) if a in open_actions]
            a_select = _argmax([a for a, _ in pairs], [s for _, s in pairs], rng)
        path.append((node, a_select, a_max))
        child = node.children.get(a_select)
        if child is None:
            return SelectionOutcome(path, tree.add_child(node, a_select))
        if child.status is not Status.OPEN:
            return SelectionOutcome(path, child)
        node = child


def _rollout(env: Mdp, state: Any, rng: random.Random, cap: int, gamma: float):
    custom = getattr(env, "rollout", None)
    if custom is not None:
        return custom(state, rng, cap, gamma)
    value, discount = 0.0, 1.0
    for _ in range(cap):
        if env.is_terminal(state):
            break
        actions = env.actions(state)
        if not actions:
            break
        state = env.transition(state, actions[int(rng.random() * len(actions))])
        discount *= gamma
        reward = env.reward(state)
        if reward < 0 and not env.is_terminal(state):
            raise RewardSignViolation(state, reward)
        value += discount * reward
    return value, state


def expand_and_simulate(tree: SearchTree, leaf: SearchNode, rng: random.Random) -> float:
    """Evaluate a freshly selected leaf and return its value.

    Known states are closed with their stored value, terminal states with
    their reward; anything else gets its actions registered as open and is
    valued by a discounted uniform-random rollout.
    """
    env, config = tree.env, tree.config
    if tree.variant is not Variant.CLASSICAL and leaf.key in tree.table:
        leaf.status = Status.CLOSED_TRANSPOSITION
        return tree.table[leaf.key]
    state = leaf.state
    actions = () if env.is_terminal(state) else tuple(env.actions(state))
    reward = env.reward(state)
    if not actions:
        leaf.status = Status.CLOSED_TERMINAL
        tree.record_terminal(state, reward)
        return reward
    if reward < 0:
        raise RewardSignViolation(state, reward)
    leaf.actions = actions
    leaf.open_actions = set(actions)
    value, final = _rollout(env, state, rng, config.rollout_cap, config.gamma)
    if env.is_terminal(final) or not env.actions(final):
        tree.record_terminal(final, env.reward(final))
    return value


def _count_visit(node: SearchNode) -> None:
    # A closed node's value is settled: further MCTS visits must not move it.
    node.N_c += 1
    if node.status is not Status.OPEN and node.N_c > 1:
        node.W = node.W * node.N_c / (node.N_c - 1)


def _complete(node: SearchNode, gamma: float, variant: Variant) -> None:
    children = node.children.values()
    node.status = Status.CLOSED_COMPLETE
    # The root can close before its first visit is counted.
    node.W = gamma * max(node.N_c, 1) * max(c.W / c.N_c for c in children)
    if variant is Variant.AMEX_MAX:
        node.q_max = gamma * max(c.q_max for c in children)


def backpropagate(tree: SearchTree, outcome: SelectionOutcome, r: float) -> None:
    """Propagate the leaf value ``r`` from the leaf up to the root."""
    variant = tree.variant
    gamma = tree.config.gamma
    use_max = variant is Variant.AMEX_MAX
    leaf = outcome.leaf
    leaf.W += r
    if use_max and r > leaf.q_max:
        leaf.q_max = r

    if variant is Variant.CLASSICAL:
        for node, a_select, _ in reversed(outcome.path):
            r *= gamma
            child = node.children[a_select]
            child.N_p += 1
            child.N_c += 1
            node.W += r
        root = tree.root
        root.N_p += 1
        root.N_c += 1
        return

    table = tree.table
    for node, a_select, a_max in reversed(outcome.path):
        r *= gamma
        c_s = node.children[a_select]
        c_m = node.children.get(a_max)
        if c_m is not c_s:
            if c_m is None or c_m.N_c < 1:
                raise InvariantViolation(f"a_max child {a_max!r} of {node!r} was never visited")
            q_m = c_m.W / c_m.N_c
            if r < q_m:
                r = q_m
            c_s.N_p += 1
            c_m.N_c += 1
            c_m.W = c_m.W * c_m.N_c / (c_m.N_c - 1)
        else:
            c_s.N_p += 1
            _count_visit(c_s)
        if c_s.N_c < 1:
            raise InvariantViolation(f"selected child {c_s!r} has no visits")
        table[c_s.key] = c_s.W / c_s.N_c
        node.W += r
        if use_max and r > node.q_max:
            node.q_max = r
        if c_s.status is not Status.OPEN:
            node.open_actions.discard(a_select)
            if not node.open_actions:
                _complete(node, gamma, variant)
    root = tree.root
    root.N_p += 1
    _count_visit(root)


def _init_root(tree: SearchTree) -> None:
    env, root = tree.env, tree.root
    if env.is_terminal(root.state):
        raise PreconditionViolation(f"search started from terminal state {root.state!r}")
    actions = tuple(env.actions(root.state))
    if not actions:
        raise PreconditionViolation(f"search started from state without actions {root.state!r}")
    reward = env.reward(root.state)
    if reward < 0:
        raise RewardSignViolation(root.state, reward)
    root.actions = actions
    root.open_actions = set(actions)


def _snapshot(tree: SearchTree) -> tuple:
    return tuple((n.key, n.W, n.N_c, n.N_p, n.q_max, n.status.value) for n in tree.nodes)


def search(
    env: Mdp,
    state: Any,
    config: SearchConfig,
    trace: Optional[list] = None,
    on_iteration: Optional[Callable[[SearchTree, SelectionOutcome, float], None]] = None,
) -> SearchResult:
    """Run up to ``config.n_sims`` iterations from ``state``.

    Returns as soon as the root is completely explored, with a one-hot policy
    on the best exact child value. Otherwise the policy is proportional to the
    root children's ``N_c``. ``trace`` collects one record per iteration
    (selected actions, leaf key, leaf value, all node statistics).
    """
    rng = random.Random(config.seed)
    tree = SearchTree(env, state, config)
    _init_root(tree)
    root = tree.root
    iterations = 0
    while iterations < config.n_sims:
        outcome = select_path(tree, rng)
        r = expand_and_simulate(tree, outcome.leaf, rng)
        backpropagate(tree, outcome, r)
        iterations += 1
        if trace is not None:
            trace.append((tuple(a for _, a, _ in outcome.path), outcome.leaf.key, r, _snapshot(tree)))
        if on_iteration is not None:
            on_iteration(tree, outcome, r)
        if root.status is Status.CLOSED_COMPLETE:
            break

    if root.status is Status.CLOSED_COMPLETE:
        q_values = {a: node_q(root.children[a], config.variant) for a in root.actions}
        chosen = _argmax(root.actions, [q_values[a] for a in root.actions], rng)
        weights = tuple(1.0 if a == chosen else 0.0 for a in root.actions)
        policy = Policy(root.actions, weights, chosen, q_values)
    else:
        counts = {a: (root.children[a].N_c if a in root.children else 0) for a in root.actions}
        total = sum(counts.values())
        chosen = _argmax(root.actions, [counts[a] for a in root.actions], rng)
        weights = tuple(counts[a] / total for a in root.actions)
        policy = Policy(root.actions, weights, chosen)

    stats = SearchStats(
        iterations=iterations,
        unique_states=len(tree.keys),
        tree_size=len(tree.nodes),
        closed_nodes=sum(1 for n in tree.nodes if not n.is_open),
        completed_subtrees=sum(1 for n in tree.nodes if n.status is Status.CLOSED_COMPLETE),
        fully_explored=root.status is Status.CLOSED_COMPLETE,
        best_terminal_reward=tree.best_reward,
        best_terminal_state=tree.best_state,
    )
    return SearchResult(policy, stats, tree)


def run_search(env_state: Any, env: Mdp, config: SearchConfig, **kwargs) -> tuple[Policy, SearchStats]:
    result = search(env, env_state, config, **kwargs)
    return result.policy, result.stats
