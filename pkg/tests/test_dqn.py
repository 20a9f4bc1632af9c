import numpy as np
import pytest

from radarjam.deep.dqn import DQNConfig, Replay, bellman_targets, dqn_train
from radarjam.game import JAMMER, RADAR, GameConfig, RadarGame
from radarjam.kuhn import KuhnPoker
from radarjam.nn import NonFiniteLossError
from radarjam.policy import UniformPolicy

FAST = dict(hidden=(16,), batch_size=32, replay_capacity=2000, target_sync=20)


def test_pure_exploration_is_uniform():
    game = RadarGame(GameConfig(pulses=1))
    cfg = DQNConfig(episodes=10_000, epsilon_start=1.0, epsilon_end=1.0, updates_per_step=0, **FAST)
    result = dqn_train(game, cfg, opponent=UniformPolicy(), learner=RADAR)
    counts = result.action_counts[RADAR]
    n, p = counts.sum(), 1 / 27
    assert n == 10_000
    assert np.all(np.abs(counts - n * p) < 3 * np.sqrt(n * p * (1 - p)))


def test_terminal_target_is_the_reward():
    q_next = np.array([[5.0, 7.0], [5.0, 7.0]])
    mask = np.array([[True, True], [True, False]])
    reward = np.array([0.25, 0.0])
    out = bellman_targets(q_next, mask, reward, np.array([True, False]), gamma=1.0)
    assert out[0] == 0.25
    assert out[1] == 5.0  # max over legal next actions only


def test_replay_is_fifo():
    r = Replay(3, 2, 4)
    for i in range(5):
        r.add(np.full((1, 2), i), np.array([i]), np.array([0.0]), np.zeros((1, 2)), np.ones((1, 4), bool), np.array([False]))
    assert len(r) == 3 and sorted(r.action.tolist()) == [2, 3, 4]


def test_epsilon_schedule():
    cfg = DQNConfig(episodes=100, epsilon_start=1.0, epsilon_end=0.1, epsilon_decay=0.5)
    assert cfg.epsilon(0) == 1.0 and cfg.epsilon(50) == pytest.approx(0.1) and cfg.epsilon(99) == pytest.approx(0.1)
    assert cfg.epsilon(25) == pytest.approx(0.55)


def test_restricted_jammer_never_leaves_its_set():
    game = RadarGame(scenario="case_d")
    result = dqn_train(game, DQNConfig(episodes=200, **FAST), opponent=UniformPolicy(), learner=RADAR)
    counts = result.action_counts[JAMMER]
    assert counts[game.react_id] == 200 * game.pulses
    assert counts.sum() == counts[game.react_id]


def test_self_play_is_deterministic_and_logs_rewards():
    game = RadarGame(GameConfig(pulses=2))
    cfg = DQNConfig(episodes=96, seed=4, **FAST)
    a, b = dqn_train(game, cfg), dqn_train(game, cfg)
    assert a.metrics == b.metrics
    for p in (RADAR, JAMMER):
        assert all(np.array_equal(x, y) for x, y in zip(a.q_nets[p].params, b.q_nets[p].params))
    names = {m for _, m, _ in a.metrics}
    assert {"mean_pd", "q_loss_p0", "q_loss_p1"} <= names
    # the returned policy is greedy
    probs = a.policy.action_probabilities(game.new_initial_state())
    assert sorted(probs.tolist())[-1] == 1.0


def test_divergence_aborts():
    game = RadarGame(GameConfig(pulses=1))
    with pytest.raises(NonFiniteLossError, match="Q update"):
        with np.errstate(all="ignore"):
            dqn_train(game, DQNConfig(episodes=500, lr=1e200, **FAST))


def test_rejects_other_games_and_bad_config():
    with pytest.raises(TypeError):
        dqn_train(KuhnPoker(), DQNConfig())
    with pytest.raises(ValueError):
        DQNConfig(num_envs=0)
    with pytest.raises(ValueError):
        DQNConfig(gamma=1.5)
