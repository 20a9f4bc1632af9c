"""Deep CFR: external-sampling traversals with learned regrets.

Each iteration t, for each player p:

1. run traversals with p as traverser under the current profile, where every
   player plays regret matching on its advantage network (uniform before the
   first fit);
2. push the sampled regrets into p's advantage reservoir and the opponent's
   distributions into the opponent's strategy reservoir, all stamped with t;
3. refit p's advantage network from a fresh initialization on its reservoir,
   weighting samples by t.

After the last iteration a softmax strategy network per player is fitted to
its strategy reservoir (t-weighted cross-entropy) and returned as the policy.

Players listed in ``fixed`` follow a given policy: they still traverse, so the
learner collects strategy samples, but they never fit a network.
"""

from __future__ import annotations

import dataclasses
import time
from typing import Callable, Mapping

import numpy as np

from ..efg import Game, TreeTooLargeError
from ..nn import MLP, MlpSpec, NonFiniteLossError, ReservoirBuffer, fit
from .common import NetworkPolicy
from .traversal import run_traversals


@dataclasses.dataclass(frozen=True)
class DeepCFRConfig:
    iterations: int = 40
    traversals: int = 200
    advantage_capacity: int = 200_000
    strategy_capacity: int = 400_000
    hidden: tuple[int, ...] = (128, 64)
    advantage_steps: int = 400
    strategy_steps: int = 2000
    batch_size: int = 256
    advantage_lr: float = 0.05
    strategy_lr: float = 0.05
    optimizer: str = "sgd"
    seed: int = 0

    def __post_init__(self):
        for name in ("traversals", "advantage_capacity", "strategy_capacity", "advantage_steps",
                     "strategy_steps", "batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name}: must be positive")
        if self.iterations < 0:
            raise ValueError("iterations: must be nonnegative")
        if min(self.advantage_capacity, self.strategy_capacity) < self.batch_size:
            raise ValueError("buffers must hold at least one batch")


@dataclasses.dataclass
class DeepCFRResult:
    policy: NetworkPolicy
    advantage_nets: dict[int, MLP | None]
    strategy_nets: dict[int, MLP | None]
    metrics: list[tuple[int, str, float]]
    seconds: float


def _stream(seed: int, *tags: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *tags]))


def _net_seed(seed: int, *tags: int) -> int:
    return int(np.random.SeedSequence([seed, *tags]).generate_state(1)[0])


class DeepCFR:
    def __init__(self, game: Game, config: DeepCFRConfig, fixed: Mapping[int, object] | None = None):
        self.game = game
        self.config = config
        self.fixed = dict(fixed or {})
        self.players = range(game.num_players)
        self.learners = [p for p in self.players if p not in self.fixed]
        self.adv_nets: dict[int, MLP | None] = {p: None for p in self.players}
        self.adv_buffers = {p: ReservoirBuffer(config.advantage_capacity, _stream(config.seed, 3, p)) for p in self.players}
        self.strat_buffers = {p: ReservoirBuffer(config.strategy_capacity, _stream(config.seed, 4, p)) for p in self.players}
        self.iteration = 0
        self.metrics: list[tuple[int, str, float]] = []

    def _spec(self, player: int, head: str, seed: int) -> MlpSpec:
        widths = (self.game.info_state_tensor_size, *self.config.hidden, self.game.num_distinct_actions(player))
        return MlpSpec(widths, head, seed)

    def current_profile(self) -> NetworkPolicy:
        return NetworkPolicy(self.game, self.adv_nets, "regret", fixed=self.fixed)

    def step(self) -> None:
        cfg = self.config
        self.iteration += 1
        t = self.iteration
        for p in self.players:
            profile = self.current_profile()
            samples = run_traversals(self.game, p, profile, cfg.traversals, _stream(cfg.seed, 1, p, t))
            stamp_a = np.full(len(samples.adv_targets), t, dtype=np.int64)
            stamp_s = np.full(len(samples.strat_probs), t, dtype=np.int64)
            if p in self.learners:
                self.adv_buffers[p].add_batch(samples.adv_tensors, samples.adv_targets, stamp_a)
            opp = 1 - p
            if opp in self.learners:
                self.strat_buffers[opp].add_batch(samples.strat_tensors, samples.strat_probs, stamp_s)
            if p not in self.learners:
                continue
            net = MLP(self._spec(p, "identity", _net_seed(cfg.seed, 2, p, t)))
            x, y, w = self.adv_buffers[p].contents()
            try:
                loss = fit(net, x, y, loss="mse", steps=cfg.advantage_steps, batch_size=cfg.batch_size,
                           lr=cfg.advantage_lr, rng=_stream(cfg.seed, 5, p, t), weights=w.astype(float),
                           optimizer=cfg.optimizer)
            except NonFiniteLossError as exc:
                raise NonFiniteLossError(f"advantage fit for player {p} at iteration {t}: {exc}") from exc
            self.adv_nets[p] = net
            self.metrics.append((t, f"advantage_loss_p{p}", loss))

    def strategy_policy(self) -> NetworkPolicy:
        cfg = self.config
        nets: dict[int, MLP | None] = {p: None for p in self.players}
        for p in self.learners:
            if len(self.strat_buffers[p]) == 0:
                continue
            net = MLP(self._spec(p, "softmax", _net_seed(cfg.seed, 6, p)))
            x, y, w = self.strat_buffers[p].contents()
            try:
                loss = fit(net, x, y, loss="cross_entropy", steps=cfg.strategy_steps, batch_size=cfg.batch_size,
                           lr=cfg.strategy_lr, rng=_stream(cfg.seed, 7, p), weights=w.astype(float),
                           optimizer=cfg.optimizer)
            except NonFiniteLossError as exc:
                raise NonFiniteLossError(f"strategy fit for player {p}: {exc}") from exc
            self.metrics.append((self.iteration, f"strategy_loss_p{p}", loss))
            nets[p] = net
        return NetworkPolicy(self.game, nets, "softmax", fixed=self.fixed)


def deep_cfr_solve(
    game: Game,
    config: DeepCFRConfig,
    fixed: Mapping[int, object] | None = None,
    exploitability_every: int = 0,
    callback: Callable[[DeepCFR], None] | None = None,
) -> DeepCFRResult:
    """Run Deep CFR; see the module docstring.

    With ``exploitability_every > 0`` and an enumerable game, the
    exploitability of the current regret-matching profile is logged every
    that many iterations, and that of the final strategy network at the end.
    """
    from ..cfr import exploitability, get_tree

    start = time.perf_counter()
    solver = DeepCFR(game, config, fixed)
    tree = None
    if exploitability_every:
        try:
            tree = get_tree(game)
        except TreeTooLargeError:
            tree = None
    for _ in range(config.iterations):
        solver.step()
        if tree is not None and solver.iteration % exploitability_every == 0:
            solver.metrics.append((solver.iteration, "exploitability_current",
                                   exploitability(game, solver.current_profile(), tree)))
        if callback is not None:
            callback(solver)
    policy = solver.strategy_policy()
    if tree is not None:
        solver.metrics.append((solver.iteration, "exploitability", exploitability(game, policy, tree)))
    return DeepCFRResult(
        policy=policy,
        advantage_nets=dict(solver.adv_nets),
        strategy_nets=dict(policy.nets),
        metrics=solver.metrics,
        seconds=time.perf_counter() - start,
    )

