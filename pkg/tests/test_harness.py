import itertools

import pytest

from amexmcts.envs.chain import Chain, ChainSpec
from amexmcts.envs.frozenlake import FrozenLake
from amexmcts.envs.synthetic import SyntheticTree
from amexmcts.errors import BudgetExceeded
from amexmcts.harness import (
    CSV_HEADER,
    RunRecord,
    aggregate,
    brute_force_values,
    coverage_report,
    derive_seed,
    format_oracle,
    read_csv,
    run_episode,
    sweep,
    write_csv,
)
from amexmcts.search import SearchConfig


def _record(**kw):
    base = dict(env="chain", variant="amex", n_sims=8, seed=0, episode_return=1.0,
                steps_taken=3, unique_states=7, wall_ms=1.5)
    base.update(kw)
    return RunRecord(**base)


def test_oracle_chain_k2():
    env = Chain(ChainSpec.fixed(2, action=1))
    result = brute_force_values(env, env.initial(), 1.0)
    assert result.state_value == 1.0
    assert result.optimal_actions == (1,)


def test_oracle_synthetic_enumerates_leaves():
    env = SyntheticTree(2, 3, seed=7)
    result = brute_force_values(env, env.initial(), 0.9)
    assert result.state_value == pytest.approx(max(env.leaf_rewards) * 0.9 ** 3)
    for a in (0, 1):
        best = max(env.reward((a,) + rest) for rest in itertools.product(range(2), repeat=2))
        assert result.values[a] == pytest.approx(best * 0.9 ** 2)


def test_oracle_lake_shortest_path():
    env = FrozenLake()
    result = brute_force_values(env, env.initial(), 0.99)
    # 14 moves to the goal: the best first action is worth 0.99**13,
    # the start state one more discount step
    assert max(result.values.values()) == pytest.approx(0.99 ** 13)
    assert result.state_value == pytest.approx(0.99 ** 14)
    assert result.optimal_actions == (1, 2)


def test_oracle_budget():
    env = SyntheticTree(3, 6)
    with pytest.raises(BudgetExceeded):
        brute_force_values(env, env.initial(), 1.0, max_states=100)
    with pytest.raises(BudgetExceeded):
        brute_force_values(env, env.initial(), 1.0, depth_bound=2)


def test_format_oracle():
    text = format_oracle(brute_force_values(SyntheticTree(2, 1, seed=0), (), 1.0))
    lines = text.splitlines()
    assert lines[0] == "action,value" and len(lines) == 3


def test_derive_seed_is_stable_and_spread():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert len({derive_seed(0, m) for m in range(100)}) == 100


def test_run_episode_chain_amex():
    env = Chain(ChainSpec.seeded(10, 4))
    rec = run_episode(env, SearchConfig(variant="amex", n_sims=64, seed=4))
    assert rec.episode_return == 1.0 and rec.steps_taken == 10


def test_sweep_reproducible_and_sorted():
    make = lambda s: Chain(ChainSpec.seeded(4, s))
    a = sweep(make, ["classical", "amex"], [4, 8], 3)
    b = sweep(make, ["classical", "amex"], [4, 8], 3)
    strip = lambda rs: [(r.variant, r.n_sims, r.seed, r.episode_return, r.steps_taken, r.unique_states) for r in rs]
    assert strip(a) == strip(b)
    assert [(r.variant, r.n_sims, r.seed) for r in a] == sorted((r.variant, r.n_sims, r.seed) for r in a)


def test_sweep_empty_budget_list():
    assert sweep(lambda s: Chain(ChainSpec.seeded(3, s)), ["amex"], [], 5) == []


def test_csv_line_counts(tmp_path):
    path = tmp_path / "r.csv"
    write_csv([], path)
    assert path.read_text() == ",".join(CSV_HEADER) + "\n"
    write_csv([_record()], path)
    assert len(path.read_text().splitlines()) == 2
    records = [_record(variant=v, n_sims=n, seed=s) for v in ("amex", "classical") for n in (1, 2, 3) for s in range(25)]
    write_csv(records, path)
    assert len(path.read_text().splitlines()) == 151


def test_csv_roundtrip(tmp_path):
    recs = [_record(seed=s, episode_return=s / 3) for s in range(4)]
    write_csv(recs, tmp_path / "r.csv")
    back = read_csv(tmp_path / "r.csv")
    assert [r.seed for r in back] == [0, 1, 2, 3]
    assert back[1].episode_return == pytest.approx(1 / 3, abs=1e-6)


def test_csv_unwritable_path(tmp_path):
    with pytest.raises(OSError, match="cannot write"):
        write_csv([], tmp_path / "missing" / "r.csv")


def test_aggregate():
    rows = aggregate([_record(seed=0, episode_return=1.0), _record(seed=1, episode_return=0.0)])
    assert rows == [{"env": "chain", "variant": "amex", "n_sims": 8, "n": 2, "mean": 0.5, "std": 0.5}]


def test_coverage_single_iteration():
    stats, dot = coverage_report(SyntheticTree(2, 3, seed=1), SearchConfig(n_sims=1))
    assert stats.tree_size == 2 and stats.iterations == 1
    assert dot.startswith("digraph search {") and "n0 -> n1" in dot


def test_dot_marks_closed_nodes():
    env = Chain(ChainSpec.fixed(1))
    _, dot = coverage_report(env, SearchConfig(n_sims=2))
    assert dot.count("fillcolor=lightgrey") == 3
