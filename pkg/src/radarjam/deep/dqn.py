"""Deep Q-learning baseline on the radar game.

Episodes run in lock-step across ``num_envs`` copies of the game.  Each
learning player keeps its own Q-network, target network and replay memory
(self-play means two independent learners).  A transition links a player's
decision to its next decision, or to the end of the game; the only reward is
the terminal utility, scaled by the game's maximum utility.
"""

from __future__ import annotations

import dataclasses
import time

import numpy as np

from ..game import RadarGame
from ..nn import MLP, MlpSpec, NonFiniteLossError, make_optimizer, train_step
from ..policy import batch_probabilities, sample_rows
from .common import NetworkPolicy


@dataclasses.dataclass(frozen=True)
class DQNConfig:
    episodes: int = 20_000
    num_envs: int = 16
    hidden: tuple[int, ...] = (128, 64)
    lr: float = 0.03
    optimizer: str = "sgd"
    batch_size: int = 128
    replay_capacity: int = 50_000
    target_sync: int = 200
    updates_per_step: int = 1
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay: float = 0.5
    gamma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        for name in ("num_envs", "batch_size", "replay_capacity", "target_sync"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name}: must be positive")
        if self.episodes < 0:
            raise ValueError("episodes: must be nonnegative")
        for name in ("epsilon_start", "epsilon_end", "epsilon_decay", "gamma"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name}: must lie in [0, 1]")

    def epsilon(self, episode: int) -> float:
        horizon = self.epsilon_decay * self.episodes
        if horizon <= 0:
            return self.epsilon_end
        frac = min(1.0, episode / horizon)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


class Replay:
    """FIFO transition memory."""

    def __init__(self, capacity: int, width: int, actions: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, width), np.uint8)
        self.action = np.zeros(capacity, np.int64)
        self.reward = np.zeros(capacity)
        self.next_obs = np.zeros((capacity, width), np.uint8)
        self.next_mask = np.zeros((capacity, actions), bool)
        self.done = np.zeros(capacity, bool)
        self.size = 0
        self.head = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, next_mask, done) -> None:
        n = len(action)
        idx = (self.head + np.arange(n)) % self.capacity
        self.obs[idx], self.action[idx], self.reward[idx] = obs, action, reward
        self.next_obs[idx], self.next_mask[idx], self.done[idx] = next_obs, next_mask, done
        self.head = (self.head + n) % self.capacity
        self.size = min(self.capacity, self.size + n)

    def sample(self, n: int, rng: np.random.Generator):
        idx = rng.integers(0, self.size, size=n)
        return self.obs[idx], self.action[idx], self.reward[idx], self.next_obs[idx], self.next_mask[idx], self.done[idx]


def bellman_targets(q_next: np.ndarray, next_mask: np.ndarray, reward: np.ndarray, done: np.ndarray, gamma: float):
    """``reward`` at terminal transitions, else reward + gamma * max legal Q."""
    best = np.where(next_mask, q_next, -np.inf).max(axis=1)
    return np.where(done, reward, reward + gamma * np.where(done, 0.0, best))


@dataclasses.dataclass
class DQNResult:
    policy: NetworkPolicy
    q_nets: dict[int, MLP]
    metrics: list[tuple[int, str, float]]
    action_counts: dict[int, np.ndarray]
    seconds: float


class _Learner:
    def __init__(self, game: RadarGame, player: int, cfg: DQNConfig):
        widths = (game.info_state_tensor_size, *cfg.hidden, game.num_distinct_actions(player))
        seed = int(np.random.SeedSequence([cfg.seed, 11, player]).generate_state(1)[0])
        self.q = MLP(MlpSpec(widths, "identity", seed))
        self.target = self.q.copy()
        self.opt = make_optimizer(cfg.optimizer, cfg.lr)
        self.replay = Replay(cfg.replay_capacity, game.info_state_tensor_size, widths[-1])
        self.mask = game.legal_masks[player]
        self.updates = 0
        self.pending = None
        self.last_loss = float("nan")

    def learn(self, cfg: DQNConfig, rng: np.random.Generator) -> None:
        if len(self.replay) < cfg.batch_size:
            return
        for _ in range(cfg.updates_per_step):
            obs, action, reward, next_obs, next_mask, done = self.replay.sample(cfg.batch_size, rng)
            target = bellman_targets(self.target.forward(next_obs), next_mask, reward, done, cfg.gamma)
            y = np.zeros((len(action), len(self.mask)))
            chosen = np.zeros(y.shape, dtype=bool)
            y[np.arange(len(y)), action] = target
            chosen[np.arange(len(y)), action] = True
            try:
                self.last_loss = train_step(self.q, obs, y, "mse", cfg.lr, optimizer=self.opt, mask=chosen)
            except NonFiniteLossError as exc:
                raise NonFiniteLossError(f"Q update {self.updates}: {exc}") from exc
            self.updates += 1
            if self.updates % cfg.target_sync == 0:
                self.target = self.q.copy()


def dqn_train(game: RadarGame, config: DQNConfig, opponent=None, learner: int = 0) -> DQNResult:
    """Train Q-learners on ``game``.

    With ``opponent=None`` both players learn (self-play).  Otherwise only
    ``learner`` learns and the other player follows ``opponent``.
    """
    if not isinstance(game, RadarGame):
        raise TypeError("dqn_train runs on the radar game only")
    start = time.perf_counter()
    cfg = config
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 10]))
    learners = {p: _Learner(game, p, cfg) for p in ((0, 1) if opponent is None else (learner,))}
    counts = {p: np.zeros(game.num_distinct_actions(p), np.int64) for p in range(game.num_players)}
    metrics: list[tuple[int, str, float]] = []
    scale = game.max_utility
    episode = 0
    while episode < cfg.episodes:
        n = min(cfg.num_envs, cfg.episodes - episode)
        eps = cfg.epsilon(episode)
        hist = np.zeros((n, 0), np.int16)
        for lrn in learners.values():
            lrn.pending = None
        for ply in range(game.horizon):
            q = ply % 2
            if q in learners:
                lrn = learners[q]
                obs = game.batch_tensors(hist, q, dtype=np.uint8)
                if lrn.pending is not None:
                    p_obs, p_act = lrn.pending
                    lrn.replay.add(p_obs, p_act, np.zeros(n), obs, np.broadcast_to(lrn.mask, (n, len(lrn.mask))),
                                   np.zeros(n, bool))
                greedy = np.argmax(np.where(lrn.mask, lrn.q.forward(obs), -np.inf), axis=1)
                explore = rng.random(n) < eps
                legal = np.flatnonzero(lrn.mask)
                action = np.where(explore, legal[rng.integers(0, len(legal), size=n)], greedy)
                lrn.pending = (obs, action)
            else:
                probs = batch_probabilities(opponent, game, hist, q)
                action = sample_rows(probs, rng)
            np.add.at(counts[q], action, 1)
            hist = np.hstack([hist, action[:, None].astype(np.int16)])
            for lrn in learners.values():
                lrn.learn(cfg, rng)
        pd = game.batch_returns(hist)
        for p, lrn in learners.items():
            p_obs, p_act = lrn.pending
            reward = (pd if p == 0 else -pd) / scale
            lrn.replay.add(p_obs, p_act, reward, np.zeros_like(p_obs), np.zeros((n, len(lrn.mask)), bool),
                           np.ones(n, bool))
            lrn.learn(cfg, rng)
        episode += n
        metrics.append((episode, "mean_pd", float(pd.mean())))
        for p, lrn in learners.items():
            if lrn.updates:
                metrics.append((episode, f"q_loss_p{p}", lrn.last_loss))

    nets = {p: lrn.q for p, lrn in learners.items()}
    fixed = {} if opponent is None else {1 - learner: opponent}
    policy = NetworkPolicy(game, nets, "greedy", fixed=fixed)
    return DQNResult(policy, nets, metrics, counts, time.perf_counter() - start)
