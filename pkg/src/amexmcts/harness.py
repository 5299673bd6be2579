"""Episode runner, seed sweeps, brute-force oracle and result files."""
from __future__ import annotations

import csv
import dataclasses
import logging
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .dot import tree_to_dot
from .envs.base import Mdp, is_leaf_state
from .errors import BudgetExceeded
from .search import SearchConfig, Variant, search

log = logging.getLogger(__name__)

CSV_HEADER = ("env", "variant", "n_sims", "seed", "episode_return", "steps_taken", "unique_states", "wall_ms")


@dataclass
class RunRecord:
    env: str
    variant: str
    n_sims: int
    seed: int
    episode_return: float
    steps_taken: int
    unique_states: int
    wall_ms: float


@dataclass
class OracleResult:
    state_value: float
    values: dict
    optimal_actions: tuple


@dataclass
class CoverageStats:
    iterations: int
    unique_states: int
    tree_size: int
    closed_nodes: int
    completed_subtrees: int
    best_reward: float
    best_state: Any = None


def derive_seed(*parts: int) -> int:
    """Stable 63-bit seed from a tuple of non-negative integers."""
    state = np.random.SeedSequence([int(p) for p in parts]).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])


def run_episode(env: Mdp, config: SearchConfig, max_steps: int | None = None) -> RunRecord:
    """Play one episode, searching from scratch before every move.

    The return is the undiscounted sum of rewards; ``config.seed`` seeds the
    per-move searches.
    """
    start = time.perf_counter()
    state = env.initial()
    total, steps = 0.0, 0
    keys: set = set()
    while not is_leaf_state(env, state):
        if max_steps is not None and steps >= max_steps:
            break
        move_config = dataclasses.replace(config, seed=derive_seed(config.seed, steps))
        result = search(env, state, move_config)
        keys |= result.tree.keys
        state = env.transition(state, result.policy.chosen_action)
        total += env.reward(state)
        steps += 1
    return RunRecord(
        env=env.name,
        variant=config.variant.value,
        n_sims=config.n_sims,
        seed=config.seed,
        episode_return=total,
        steps_taken=steps,
        unique_states=len(keys),
        wall_ms=(time.perf_counter() - start) * 1000.0,
    )


def sweep(
    make_env: Callable[[int], Mdp],
    variants: Sequence[Variant | str],
    n_sims_list: Sequence[int],
    n_seeds: int,
    base: SearchConfig | None = None,
    seed_offset: int = 0,
    progress: Callable[[RunRecord], None] | None = None,
) -> list[RunRecord]:
    """Run every (variant, n_sims, seed) cell; ``make_env(seed)`` builds the env per seed.

    Episode seeds are ``seed_offset .. seed_offset + n_seeds - 1``.
    """
    base = base or SearchConfig()
    records = []
    for seed in range(seed_offset, seed_offset + n_seeds):
        env = make_env(seed)
        for variant in variants:
            for n_sims in n_sims_list:
                config = dataclasses.replace(base, variant=Variant(variant), n_sims=n_sims, seed=seed)
                record = run_episode(env, config)
                log.debug("%s", record)
                if progress is not None:
                    progress(record)
                records.append(record)
    return sort_records(records)


def sort_records(records: Iterable[RunRecord]) -> list[RunRecord]:
    return sorted(records, key=lambda r: (r.env, r.variant, r.n_sims, r.seed))


def aggregate(records: Iterable[RunRecord]) -> list[dict]:
    """Mean and population std of the return per (env, variant, n_sims) cell."""
    cells: dict[tuple, list[float]] = {}
    for r in records:
        cells.setdefault((r.env, r.variant, r.n_sims), []).append(r.episode_return)
    rows = []
    for (env, variant, n_sims), returns in sorted(cells.items()):
        rows.append({
            "env": env,
            "variant": variant,
            "n_sims": n_sims,
            "n": len(returns),
            "mean": statistics.fmean(returns),
            "std": statistics.pstdev(returns),
        })
    return rows


def format_aggregate(rows: Sequence[dict]) -> str:
    lines = [f"{'env':<11}{'variant':<10}{'n_sims':>7}{'n':>4}{'mean':>10}{'std':>10}"]
    for row in rows:
        lines.append(
            f"{row['env']:<11}{row['variant']:<10}{row['n_sims']:>7}{row['n']:>4}"
            f"{row['mean']:>10.4f}{row['std']:>10.4f}"
        )
    return "\n".join(lines)


def write_csv(records: Iterable[RunRecord], path: str | Path) -> None:
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(CSV_HEADER) + "\n")
            for r in records:
                fh.write(
                    f"{r.env},{r.variant},{r.n_sims},{r.seed},{r.episode_return:.6f},"
                    f"{r.steps_taken},{r.unique_states},{r.wall_ms:.6f}\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write results to {path}: {exc}") from exc


def read_csv(path: str | Path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        return [
            RunRecord(
                env=row["env"],
                variant=row["variant"],
                n_sims=int(row["n_sims"]),
                seed=int(row["seed"]),
                episode_return=float(row["episode_return"]),
                steps_taken=int(row["steps_taken"]),
                unique_states=int(row["unique_states"]),
                wall_ms=float(row["wall_ms"]),
            )
            for row in csv.DictReader(fh)
        ]


def brute_force_values(
    env: Mdp,
    state: Any,
    gamma: float,
    depth_bound: int | None = None,
    max_states: int = 1_000_000,
) -> OracleResult:
    """Exact max-backup values by exhaustive depth-first search with memoisation.

    ``value(s) = R(s)`` at terminal states and ``R(s) + gamma * max_a value(T(s, a))``
    otherwise. Raises :class:`BudgetExceeded` when more than ``max_states``
    distinct states are reached or a non-terminal state lies at ``depth_bound``.
    """
    memo: dict[bytes, float] = {}

    def evaluate(start: Any, start_depth: int) -> float:
        # Iterative post-order walk so long horizons do not hit the recursion limit.
        stack = [(start, start_depth, False)]
        while stack:
            s, depth, expanded = stack.pop()
            key = env.encode(s)
            if key in memo:
                continue
            if is_leaf_state(env, s):
                memo[key] = env.reward(s)
                continue
            if depth_bound is not None and depth >= depth_bound:
                raise BudgetExceeded(f"non-terminal state {s!r} at depth bound {depth_bound}")
            children = [env.transition(s, a) for a in env.actions(s)]
            if expanded:
                memo[key] = env.reward(s) + gamma * max(memo[env.encode(c)] for c in children)
                continue
            stack.append((s, depth, True))
            for c in children:
                if env.encode(c) not in memo:
                    stack.append((c, depth + 1, False))
            if len(memo) + len(stack) > max_states:
                raise BudgetExceeded(f"more than {max_states} states below {state!r}")
        return memo[env.encode(start)]

    if is_leaf_state(env, state):
        raise BudgetExceeded(f"oracle needs a state with actions, got terminal {state!r}")
    values = {a: evaluate(env.transition(state, a), 1) for a in env.actions(state)}
    best = max(values.values())
    return OracleResult(
        state_value=env.reward(state) + gamma * best,
        values=values,
        optimal_actions=tuple(a for a, v in values.items() if v == best),
    )


def format_oracle(result: OracleResult) -> str:
    lines = ["action,value"]
    lines += [f"{a},{v:.9f}" for a, v in result.values.items()]
    return "\n".join(lines)


def coverage_report(env: Mdp, config: SearchConfig, state: Any = None) -> tuple[CoverageStats, str]:
    """Single search from ``state`` (default: the initial state) plus its DOT snapshot."""
    result = search(env, env.initial() if state is None else state, config)
    s = result.stats
    stats = CoverageStats(
        iterations=s.iterations,
        unique_states=s.unique_states,
        tree_size=s.tree_size,
        closed_nodes=s.closed_nodes,
        completed_subtrees=s.completed_subtrees,
        best_reward=s.best_terminal_reward,
        best_state=s.best_terminal_state,
    )
    return stats, tree_to_dot(result.tree)
