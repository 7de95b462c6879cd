import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import bufsched.agent as agent_mod
from bufsched.agent import (EVALUATE, TRAIN, AgentConfig, DQNAgent, ReplayBuffer, TabularQ, Transition,
                            bellman_target, observe_and_learn, schedule_queue, select_action)
from bufsched.bufferpool import BufferPool
from bufsched.errors import ValidationError
from bufsched.neuralnet import MLP, forward, init_network
from bufsched.workload import EXPECTED, WorkloadSpec, generate_workload, materialize_reads


def linear_net(dim, action_weight=1.0, bias=0.0):
    """Q = bias + action_weight * sum(action half of the input)."""
    w = np.zeros((dim, 1))
    w[dim // 2:] = action_weight
    return MLP([dim, 1], [w], [np.array([bias])])


def test_select_action_argmax():
    net = linear_net(4)
    state = np.zeros((1, 2))
    queue = [np.array([[0.1, 0.1]]), np.array([[0.2, 0.0]]), np.array([[0.5, 0.4]]), np.array([[0.3, 0.3]])]
    assert select_action(net, state, queue, 0.0, None) == 2


def test_select_action_ties_go_to_lowest_index():
    net = linear_net(4)
    queue = [np.array([[0.1, 0.1]]), np.array([[0.5, 0.5]]), np.array([[0.5, 0.5]])]
    assert select_action(net, np.zeros((1, 2)), queue, 0.0, None) == 1


def test_select_action_random_is_reproducible():
    net = linear_net(4)
    queue = [np.zeros((1, 2))] * 6
    a = [select_action(net, np.zeros((1, 2)), queue, 1.0, np.random.default_rng(5)) for _ in range(3)]
    assert len(set(a)) == 1
    rng1, rng2 = np.random.default_rng(7), np.random.default_rng(7)
    seq1 = [select_action(net, np.zeros((1, 2)), queue, 1.0, rng1) for _ in range(20)]
    seq2 = [select_action(net, np.zeros((1, 2)), queue, 1.0, rng2) for _ in range(20)]
    assert seq1 == seq2 and len(set(seq1)) > 1


def test_select_action_single_and_empty():
    net = linear_net(4)
    assert select_action(net, np.zeros((1, 2)), [np.zeros((1, 2))], 1.0, np.random.default_rng(0)) == 0
    with pytest.raises(ValidationError):
        select_action(net, np.zeros((1, 2)), [], 0.0, None)


def _tr(reward, candidates=None, dim=2):
    return Transition.from_candidates(np.zeros(dim), np.zeros(dim), reward, np.zeros(dim), candidates)


def test_bellman_target_examples():
    net = linear_net(4, action_weight=0.0, bias=1.0)  # Q == 1 everywhere
    assert bellman_target(_tr(0.7), 0.9, net) == 0.7
    assert _tr(0.7).terminal
    assert bellman_target(_tr(0.3, [np.ones(2)]), 0.0, net) == 0.3
    assert bellman_target(_tr(0.5, [np.ones(2), np.zeros(2)]), 0.9, net) == pytest.approx(1.4)


def test_replay_ring_evicts_oldest():
    rb = ReplayBuffer(3)
    items = [_tr(i / 10) for i in range(4)]
    for t in items:
        rb.push(t)
    assert len(rb) == 3
    assert list(rb) == items[1:]


def small_workload(seed=0, n=6):
    spec = WorkloadSpec(relation_count=6, block_range=(8, 32), template_count=4, fanout_range=(1, 2),
                        query_count=n, test_fraction=0.0, seed=seed)
    return generate_workload(spec)


def test_observe_and_learn_threshold(monkeypatch):
    wl = small_workload()
    agent = DQNAgent(wl.catalog, 4, AgentConfig(min_replay_before_training=3, batch_size=3, seed=0))
    d = agent.feature_dim
    assert observe_and_learn(agent, _tr(0.5, dim=d)) is None
    assert observe_and_learn(agent, _tr(0.5, dim=d)) is None
    assert observe_and_learn(agent, _tr(0.5, dim=d)) is not None


def test_batch_targets_match_independent_computation(monkeypatch):
    wl = small_workload()
    cfg = AgentConfig(gamma=0.9, min_replay_before_training=3, batch_size=3, seed=0)
    agent = DQNAgent(wl.catalog, 4, cfg)
    d = agent.feature_dim
    rng = np.random.default_rng(3)
    trs = [Transition.from_candidates(rng.random(d), rng.random(d), r, rng.random(d), cands)
           for r, cands in [(0.2, rng.random((3, d))), (0.6, None), (1.0, rng.random((2, d)))]]
    captured = {}

    def fake_train(net, adam, batch):
        captured["X"], captured["y"] = batch
        return 0.0

    monkeypatch.setattr(agent_mod, "train_batch", fake_train)
    for t in trs:
        observe_and_learn(agent, t)
    X, y = captured["X"], captured["y"]
    for row, target in zip(X, y):
        t = next(t for t in trs if np.array_equal(row, np.concatenate([t.state_features, t.action_features])))
        expected = t.reward
        if not t.terminal:
            expected += 0.9 * max(forward(agent.target_net, np.concatenate([t.next_state_features, a]))
                                  for a in t.next_candidate_actions)
        assert target == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_target_network_sync():
    wl = small_workload()
    agent = DQNAgent(wl.catalog, 4, AgentConfig(min_replay_before_training=1, batch_size=2,
                                                target_sync_period=5, seed=0))
    d = agent.feature_dim
    for i in range(4):
        observe_and_learn(agent, _tr(1.0, dim=d))
    assert agent.target_version == 0
    assert not all(np.array_equal(p, q) for p, q in zip(agent.net.params(), agent.target_net.params()))
    observe_and_learn(agent, _tr(1.0, dim=d))
    assert agent.target_version == 1
    assert all(np.array_equal(p, q) for p, q in zip(agent.net.params(), agent.target_net.params()))


def test_epsilon_schedule():
    wl = small_workload()
    agent = DQNAgent(wl.catalog, 4, AgentConfig(epsilon_decay_steps=100))
    assert agent.epsilon() == 1.0
    agent.decisions = 50
    assert agent.epsilon() == pytest.approx(0.525)
    agent.decisions = 1000
    assert agent.epsilon() == pytest.approx(0.05)


def test_config_validation():
    with pytest.raises(ValidationError):
        AgentConfig(gamma=1.5).validate()
    with pytest.raises(ValidationError):
        AgentConfig(epsilon_end=-0.1).validate()


def _run(agent, wl, mode, reads=None):
    return schedule_queue(agent, BufferPool(24, wl.catalog), wl.queries, mode, reads)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 7))
def test_schedule_is_permutation_with_bounded_rewards(seed, n):
    wl = small_workload(seed, n)
    agent = DQNAgent(wl.catalog, 4, AgentConfig(seed=seed, min_replay_before_training=2, batch_size=4,
                                                epsilon_decay_steps=10))
    for mode in (TRAIN, EVALUATE):
        order, stats, rewards = _run(agent, wl, mode)
        assert sorted(order) == list(range(n))
        assert all(0.0 <= r <= 1.0 for r in rewards)
        assert len(stats) == n


def test_queue_of_one():
    wl = small_workload(n=1)
    agent = DQNAgent(wl.catalog, 4)
    assert _run(agent, wl, EVALUATE).order == [0]


def test_evaluate_mode_is_deterministic_and_does_not_learn():
    wl = small_workload(seed=4, n=7)
    agent = DQNAgent(wl.catalog, 4, AgentConfig(seed=1))
    before = [p.copy() for p in agent.net.params()]
    a, b = _run(agent, wl, EVALUATE), _run(agent, wl, EVALUATE)
    assert a.order == b.order and a.rewards == b.rewards
    assert all(np.array_equal(p, q) for p, q in zip(before, agent.net.params()))
    assert len(agent.replay) == 0


def test_last_decision_is_terminal_with_reward_target():
    wl = small_workload(seed=2, n=5)
    agent = DQNAgent(wl.catalog, 4, AgentConfig(seed=0, min_replay_before_training=100))
    res = _run(agent, wl, TRAIN)
    transitions = list(agent.replay)
    assert [t.terminal for t in transitions] == [False] * 4 + [True]
    last = transitions[-1]
    assert last.reward == res.rewards[-1]
    assert agent._target(last) == last.reward
    # candidates are exactly the still-queued actions
    assert [len(t.next_candidate_actions) for t in transitions] == [4, 3, 2, 1, 0]


def test_empty_queue_rejected():
    wl = small_workload()
    with pytest.raises(ValidationError):
        schedule_queue(DQNAgent(wl.catalog, 4), BufferPool(8, wl.catalog), [], EVALUATE)


def test_agent_checkpoint_resumes(tmp_path):
    wl = small_workload(seed=3, n=6)
    reads = [materialize_reads(q, wl.catalog, mode=EXPECTED) for q in wl.queries]
    cfg = AgentConfig(seed=2, min_replay_before_training=4, batch_size=4, epsilon_decay_steps=30,
                      target_sync_period=7)
    agent = DQNAgent(wl.catalog, 4, cfg)
    _run(agent, wl, TRAIN, reads)
    agent.save(tmp_path / "agent.npz")
    loaded = DQNAgent.load(tmp_path / "agent.npz", wl.catalog)
    assert loaded.decisions == agent.decisions and loaded.epsilon() == agent.epsilon()
    assert loaded.config == agent.config
    assert all(np.array_equal(p, q) for p, q in zip(agent.net.params(), loaded.net.params()))
    assert all(np.array_equal(p, q) for p, q in zip(agent.target_net.params(), loaded.target_net.params()))
    assert _run(agent, wl, EVALUATE, reads).order == _run(loaded, wl, EVALUATE, reads).order


def solve_two_state_mdp():
    """Hand-solved fixed point for the toy MDP used below (gamma = 0.5).

    State A: stay -> A with reward 1, go -> B with reward 0.5.
    State B: stay -> B with reward 2, go -> A with reward 0.
    V(B) = 2 / (1 - 0.5) = 4; Q(A, go) = 0.5 + 0.5 * 4 = 2.5 beats
    Q(A, stay) = 1 + 0.5 * V(A) = 2.25 when V(A) = 2.5; Q(B, go) = 0.5 * 2.5.
    """
    return np.array([[2.25, 2.5], [4.0, 1.25]])


def test_tabular_bellman_fixed_point():
    nxt = {(0, 0): (0, 1.0), (0, 1): (1, 0.5), (1, 0): (1, 2.0), (1, 1): (0, 0.0)}
    tab = TabularQ(2, 2, alpha=0.5, gamma=0.5)
    expected = solve_two_state_mdp()
    for step in range(10_000):
        s, a = divmod(step % 4, 2)
        s2, r = nxt[(s, a)]
        tab.update(s, a, r, s2)
        if np.abs(tab.q - expected).max() < 1e-6:
            break
    assert np.abs(tab.q - expected).max() < 1e-6
    assert step < 10_000
