"""Head-to-head evaluation of two policies.

``exact`` mode computes the expected utility of player 0 by enumeration.
For the radar game this walks the game level by level, dropping branches of
probability zero, so even M=4 matchups are exact whenever the surviving
history count stays under ``max_histories``.  Other games use the compiled
tree.  ``sampled`` mode plays independent episodes and reports the mean with
its standard error.
"""

from __future__ import annotations

import dataclasses
from typing import Literal

import numpy as np

from .efg import Game, TreeTooLargeError
from .game import RadarGame
from .policy import JointPolicy, batch_probabilities, policy_for_player, sample_rows

DEFAULT_MAX_HISTORIES = 20_000_000


class NotEnumerableError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class MatchupResult:
    value: float
    stderr: float
    mode: str
    episodes: int

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def matchup_profile(policy_a, policy_b) -> JointPolicy:
    return JointPolicy({0: policy_for_player(policy_a, 0), 1: policy_for_player(policy_b, 1)})


def radar_exact_value(game: RadarGame, profile, max_histories: int = DEFAULT_MAX_HISTORIES) -> float:
    hist = np.zeros((1, 0), dtype=np.int8)
    prob = np.ones(1)
    parent = np.zeros(1, dtype=np.int64)
    for ply in range(game.horizon):
        q = ply % 2
        if q == 1:
            # siblings that differ only in the radar's pending move share the
            # jammer's information state
            boundary = np.r_[True, parent[1:] != parent[:-1]]
        else:
            boundary = np.ones(len(hist), dtype=bool)
        starts = np.flatnonzero(boundary)
        group = np.cumsum(boundary) - 1
        probs = batch_probabilities(profile, game, hist[starts], q)[group]
        rows, acts = np.nonzero(probs > 0)
        if len(rows) > max_histories:
            raise NotEnumerableError(
                f"{len(rows)} histories with nonzero probability at ply {ply + 1} (limit {max_histories})"
            )
        prob = prob[rows] * probs[rows, acts]
        hist = np.hstack([hist[rows], acts[:, None].astype(np.int8)])
        parent = rows
    return float(prob @ game.batch_returns(hist))


def exact_value(game: Game, profile, max_histories: int = DEFAULT_MAX_HISTORIES) -> float:
    if isinstance(game, RadarGame):
        return radar_exact_value(game, profile, max_histories)
    from .cfr import expected_value

    try:
        return float(expected_value(game, profile)[0])
    except TreeTooLargeError as exc:
        raise NotEnumerableError(str(exc)) from exc


def sampled_value(game: Game, profile, episodes: int, seed: int = 0, chunk: int = 100_000) -> tuple[float, float]:
    """Mean player-0 utility over ``episodes`` games and its standard error."""
    if episodes < 2:
        raise ValueError("episodes: need at least 2 for a standard error")
    rng = np.random.default_rng(seed)
    if isinstance(game, RadarGame):
        parts = []
        for lo in range(0, episodes, chunk):
            n = min(chunk, episodes - lo)
            hist = np.zeros((n, 0), dtype=np.int16)
            for ply in range(game.horizon):
                q = ply % 2
                a = sample_rows(batch_probabilities(profile, game, hist, q), rng)
                hist = np.hstack([hist, a[:, None].astype(np.int16)])
            parts.append(game.batch_returns(hist))
        u = np.concatenate(parts)
    else:
        u = np.empty(episodes)
        for i in range(episodes):
            state = game.new_initial_state()
            while not state.is_terminal():
                if state.is_chance_node():
                    actions, p = zip(*state.chance_outcomes())
                else:
                    actions = state.legal_actions()
                    p = policy_for_player(profile, state.current_player()).action_probabilities(state)
                state = state.apply_action(actions[sample_rows(np.asarray(p, dtype=float)[None], rng)[0]])
            u[i] = state.returns()[0]
    return float(u.mean()), float(u.std(ddof=1) / np.sqrt(len(u)))


def eval_matchup(
    policy_a,
    policy_b,
    game: Game,
    mode: Literal["exact", "sampled"] = "exact",
    episodes: int = 100_000,
    seed: int = 0,
    max_histories: int = DEFAULT_MAX_HISTORIES,
) -> MatchupResult:
    """Expected utility of player 0 when ``policy_a`` plays player 0 and
    ``policy_b`` plays player 1."""
    profile = matchup_profile(policy_a, policy_b)
    if mode == "exact":
        return MatchupResult(exact_value(game, profile, max_histories), 0.0, "exact", 0)
    if mode == "sampled":
        mean, se = sampled_value(game, profile, episodes, seed)
        return MatchupResult(mean, se, "sampled", episodes)
    raise ValueError(f"mode: expected 'exact' or 'sampled', got {mode!r}")
