import math
import random

import pytest

from amexmcts.envs.chain import Chain, ChainSpec
from amexmcts.envs.synthetic import SyntheticTree
from amexmcts.errors import InvariantViolation, PreconditionViolation, RewardSignViolation
from amexmcts.search import (
    SearchConfig,
    SearchNode,
    SearchTree,
    SelectionOutcome,
    Status,
    Variant,
    _complete,
    backpropagate,
    expand_and_simulate,
    node_q,
    run_search,
    search,
    select_path,
    uct_score,
)


class ConstRng:
    """Stand-in RNG that always returns the same draw."""

    def __init__(self, value):
        self.value = value

    def random(self):
        return self.value


def _tree(env, variant="amex", **kw):
    return SearchTree(env, env.initial(), SearchConfig(variant=variant, **kw))


def _child(tree, parent, action, W=0.0, N_c=0, N_p=0, status=Status.OPEN):
    node = tree.add_child(parent, action)
    node.W, node.N_c, node.N_p, node.status = W, N_c, N_p, status
    return node


# --- uct_score / node_q -------------------------------------------------------

def test_uct_zero_exploration():
    assert uct_score(1.0, 1, 1, math.sqrt(2)) == 1.0


def test_uct_matches_hand_value():
    assert uct_score(0.5, 1, 2, math.sqrt(2)) == pytest.approx(1.677410, abs=1e-6)


def test_uct_unvisited_is_infinite():
    assert uct_score(123.0, 0, 5, 1.0) == math.inf


def test_node_q_mean_and_max():
    node = SearchNode(None, b"x")
    node.W, node.N_c = 2.52, 4
    assert node_q(node, "amex") == pytest.approx(0.63)
    for r in (0.1, 0.9, 0.4):
        node.q_max = max(node.q_max, r)
    assert node_q(node, Variant.AMEX_MAX) == 0.9


def test_node_q_unvisited_raises():
    with pytest.raises(PreconditionViolation):
        node_q(SearchNode(None, b"x"), "classical")
    with pytest.raises(PreconditionViolation):
        node_q(SearchNode(None, b"x"), "amexmax")


def test_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(C=0)
    with pytest.raises(ValueError):
        SearchConfig(gamma=1.5)
    with pytest.raises(ValueError):
        SearchConfig(n_sims=0)
    with pytest.raises(ValueError):
        SearchConfig(variant="greedy")


# --- selection ----------------------------------------------------------------

def test_select_skips_closed_child():
    env = SyntheticTree(2, 3, seed=1)
    tree = _tree(env)
    root = tree.root
    root.actions, root.open_actions = (0, 1), {1}
    root.N_p = root.N_c = 10
    _child(tree, root, 0, W=4.5, N_c=5, status=Status.CLOSED_COMPLETE)
    b = _child(tree, root, 1, W=0.1, N_c=1)
    b.actions, b.open_actions = (0, 1), {0, 1}
    out = select_path(tree, random.Random(0))
    node, a_select, a_max = out.path[0]
    assert node is root and a_select == 1


def test_select_argmaxes_differ():
    # Q_A = 0.9 with N_c = 40 against Q_B = 0.1 with N_c = 1, N_p = 50:
    # UCT_A = 0.9 + sqrt(2 ln 50 / 40) ~ 1.342, UCT_B = 0.1 + sqrt(2 ln 50) ~ 2.897.
    # With N_c(B) = 30, UCT_B ~ 0.611 < UCT_A, so a_max = A (closed) and a_select = B.
    env = SyntheticTree(2, 3, seed=1)
    tree = _tree(env)
    root = tree.root
    root.actions, root.open_actions = (0, 1), {1}
    root.N_p = root.N_c = 50
    _child(tree, root, 0, W=0.9 * 40, N_c=40, status=Status.CLOSED_COMPLETE)
    b = _child(tree, root, 1, W=0.1 * 30, N_c=30)
    b.actions, b.open_actions = (0, 1), {0, 1}
    uct_a = uct_score(0.9, 40, 50, math.sqrt(2))
    uct_b = uct_score(0.1, 30, 50, math.sqrt(2))
    assert uct_a > uct_b
    out = select_path(tree, random.Random(0))
    _, a_select, a_max = out.path[0]
    assert (a_select, a_max) == (1, 0)


def test_select_fresh_root_tie_break_is_seeded():
    env = Chain(ChainSpec.fixed(1))
    picks = set()
    for seed in range(20):
        tree = _tree(env, seed=seed)
        tree.root.actions, tree.root.open_actions = (0, 1), {0, 1}
        out = select_path(tree, random.Random(seed))
        _, a_select, a_max = out.path[0]
        assert a_select == a_max
        picks.add(a_select)
        again = _tree(env)
        again.root.actions, again.root.open_actions = (0, 1), {0, 1}
        assert select_path(again, random.Random(seed)).path[0][1] == a_select
    assert picks == {0, 1}


def test_select_rejects_node_without_open_actions():
    env = Chain(ChainSpec.fixed(1))
    tree = _tree(env)
    tree.root.actions = (0, 1)
    with pytest.raises(InvariantViolation):
        select_path(tree, random.Random(0))


# --- expansion ----------------------------------------------------------------

def test_expand_transposition_uses_table():
    env = SyntheticTree(2, 3, seed=1)
    tree = _tree(env)
    leaf = tree.add_child(tree.root, 0)
    tree.table[leaf.key] = 0.4
    assert expand_and_simulate(tree, leaf, random.Random(0)) == 0.4
    assert leaf.status is Status.CLOSED_TRANSPOSITION


def test_classical_ignores_table():
    env = SyntheticTree(2, 3, seed=1)
    tree = _tree(env, variant="classical")
    leaf = tree.add_child(tree.root, 0)
    tree.table[leaf.key] = 0.4
    expand_and_simulate(tree, leaf, random.Random(0))
    assert leaf.status is Status.OPEN


def test_expand_terminal_leaf():
    env = Chain(ChainSpec.fixed(1, action=0))
    tree = _tree(env)
    leaf = tree.add_child(tree.root, 0)
    assert expand_and_simulate(tree, leaf, random.Random(0)) == 1.0
    assert leaf.status is Status.CLOSED_TERMINAL
    assert tree.best_reward == 1.0


def test_rollout_discounts_two_correct_steps():
    env = Chain(ChainSpec.fixed(3, action=0))
    tree = _tree(env, gamma=0.9)
    leaf = tree.add_child(tree.root, 0)
    # draws below 0.5 pick action 0, the correct one at every position
    r = expand_and_simulate(tree, leaf, ConstRng(0.1))
    assert r == pytest.approx(0.9 ** 2)
    assert leaf.status is Status.OPEN and leaf.open_actions == {0, 1}


def test_expand_rejects_negative_interior_reward():
    class Bad(SyntheticTree):
        def reward(self, state):
            return -0.1 if len(state) == 1 else super().reward(state)

    env = Bad(2, 3)
    tree = _tree(env)
    leaf = tree.add_child(tree.root, 0)
    with pytest.raises(RewardSignViolation):
        expand_and_simulate(tree, leaf, random.Random(0))


# --- backpropagation ----------------------------------------------------------

def test_backprop_rescale_preserves_q_of_a_max():
    env = SyntheticTree(2, 3, seed=1)
    tree = _tree(env)
    root = tree.root
    root.actions, root.open_actions = (0, 1), {1}
    c_m = _child(tree, root, 0, W=2.0, N_c=2, N_p=2, status=Status.CLOSED_COMPLETE)
    c_s = _child(tree, root, 1, W=0.0, N_c=1, N_p=1)
    c_s.actions, c_s.open_actions = (0, 1), {0, 1}
    leaf = tree.add_child(c_s, 0)
    backpropagate(tree, SelectionOutcome([(root, 1, 0), (c_s, 0, 0)], leaf), 0.2)
    assert (c_m.N_c, c_m.W) == (3, pytest.approx(3.0))
    assert c_m.W / c_m.N_c == pytest.approx(1.0)
    # clamp: the value credited to the root is Q(c_m) = 1.0, not 0.2
    assert root.W == pytest.approx(1.0)
    assert c_s.N_p == 2 and c_s.N_c == 1


def test_backprop_clamp_uses_a_max_value():
    env = SyntheticTree(2, 3, seed=1)
    tree = _tree(env)
    root = tree.root
    root.actions, root.open_actions = (0, 1), {1}
    _child(tree, root, 0, W=0.8, N_c=1, status=Status.CLOSED_COMPLETE)
    c_s = _child(tree, root, 1, W=0.0, N_c=1, N_p=1)
    c_s.actions, c_s.open_actions = (0, 1), {0, 1}
    leaf = tree.add_child(c_s, 0)
    backpropagate(tree, SelectionOutcome([(root, 1, 0), (c_s, 0, 0)], leaf), 0.2)
    assert root.W == pytest.approx(0.8)
    assert c_s.W == pytest.approx(0.2)


def test_completion_backup():
    env = SyntheticTree(2, 1, seed=1)
    tree = _tree(env)
    s = tree.root
    s.N_c = 4
    _child(tree, s, 0, W=0.5, N_c=1, status=Status.CLOSED_TERMINAL)
    _child(tree, s, 1, W=1.4, N_c=2, status=Status.CLOSED_TERMINAL)
    _complete(s, 0.9, Variant.AMEX)
    assert s.W == pytest.approx(2.52)
    assert s.W / s.N_c == pytest.approx(0.63)
    assert s.status is Status.CLOSED_COMPLETE


def test_closed_terminal_q_stays_exact_under_repeat_visits():
    env = Chain(ChainSpec.fixed(1, action=0))
    tree = _tree(env)
    root = tree.root
    root.actions, root.open_actions = (0, 1), {1}
    goal = _child(tree, root, 0, W=1.0, N_c=1, N_p=1, status=Status.CLOSED_TERMINAL)
    other = _child(tree, root, 1, W=0.0, N_c=1, N_p=1)
    for _ in range(5):
        backpropagate(tree, SelectionOutcome([(root, 1, 0)], other), 0.0)
    assert goal.N_c == 6
    assert goal.W / goal.N_c == 1.0


# --- full searches ------------------------------------------------------------

def test_chain_k1_early_return():
    env = Chain(ChainSpec.fixed(1, action=1))
    result = search(env, env.initial(), SearchConfig(variant="amex", n_sims=2, seed=3))
    assert result.stats.iterations == 2
    assert result.stats.fully_explored
    assert result.policy.chosen_action == 1
    assert result.policy.weights == (0.0, 1.0)
    assert result.policy.q_values == {0: 0.0, 1: 1.0}


def test_single_iteration():
    env = SyntheticTree(3, 4, seed=2)
    policy, stats = run_search(env.initial(), env, SearchConfig(n_sims=1, seed=5))
    assert stats.iterations == 1 and stats.tree_size == 2
    assert sorted(policy.weights) == [0.0, 0.0, 1.0]


def test_search_from_terminal_state_is_rejected():
    env = Chain(ChainSpec.fixed(1))
    with pytest.raises(PreconditionViolation):
        search(env, env.transition(env.initial(), 0), SearchConfig())


@pytest.mark.parametrize("variant", ["classical", "amex", "amexmax"])
def test_search_is_deterministic(variant):
    env = SyntheticTree(3, 5, seed=4)
    cfg = SearchConfig(variant=variant, n_sims=150, seed=11)
    t1, t2 = [], []
    search(env, env.initial(), cfg, trace=t1)
    search(env, env.initial(), cfg, trace=t2)
    assert t1 == t2


def test_amex_max_root_completion_policy():
    env = SyntheticTree(2, 3, seed=9)
    result = search(env, env.initial(), SearchConfig(variant="amexmax", n_sims=100, seed=0))
    assert result.stats.fully_explored
    best = max(env.leaf_rewards)
    assert max(result.policy.q_values.values()) == pytest.approx(best)
