"""External-sampling traversals that feed Deep CFR's memories.

The traverser explores every legal action; the other player samples one
action per information state from its current policy, and chance samples one
outcome.  At each traverser node the sampled counterfactual regrets

    r(s, a) = v(s, a) - sum_b pi(b | s) v(s, b)

become an advantage sample; at each opponent information state the
opponent's distribution becomes a strategy sample.

Two implementations exist: a recursive one for any game with tensors, and a
level-by-level numpy one for the radar game.  With pure policies both produce
the same samples, which the tests use as a cross-check.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from ..efg import Game, State
from ..game import RadarGame
from ..policy import batch_probabilities, policy_for_player, sample_rows


@dataclasses.dataclass
class Samples:
    """Memories gathered by a batch of traversals of one traverser."""

    adv_tensors: np.ndarray
    adv_targets: np.ndarray
    strat_tensors: np.ndarray
    strat_probs: np.ndarray
    root_values: np.ndarray

    @classmethod
    def empty(cls, tensor_width: int, traverser_width: int, opponent_width: int) -> "Samples":
        return cls(
            np.zeros((0, tensor_width), np.uint8),
            np.zeros((0, traverser_width)),
            np.zeros((0, tensor_width), np.uint8),
            np.zeros((0, opponent_width)),
            np.zeros(0),
        )

    @classmethod
    def concat(cls, parts: list["Samples"]) -> "Samples":
        return cls(*(np.concatenate([getattr(p, f.name) for p in parts]) for f in dataclasses.fields(cls)))


def _policy_rows(policy, game: RadarGame, hist: np.ndarray, tensors: np.ndarray, player: int) -> np.ndarray:
    policy = policy_for_player(policy, player)
    fast = getattr(policy, "probs_from_tensors", None)
    if fast is not None and player not in getattr(policy, "fixed", {}):
        return fast(tensors, player, game.legal_masks[player])
    return batch_probabilities(policy, game, hist, player)


def radar_traversals(
    game: RadarGame,
    traverser: int,
    profile,
    count: int,
    rng: np.random.Generator,
    scale: float | None = None,
) -> Samples:
    """``count`` independent traversals of the radar game, run side by side.

    ``profile`` maps each player to a policy with batch support (see
    :func:`radarjam.policy.batch_probabilities`).  Utilities are divided by
    ``scale`` (default: the game's maximum utility).
    """
    scale = game.max_utility if scale is None else scale
    hist = np.zeros((count, 0), dtype=np.int16)
    levels = []
    strat_t, strat_p = [], []
    for ply in range(game.horizon):
        q = ply % 2
        n = len(hist)
        legal = np.asarray(game.legal[q])
        if q == 1 and ply > 0 and levels and levels[-1]["expanded"]:
            # a jammer cannot tell apart siblings that differ only in the
            # radar's pending move, so they form one information state
            group = levels[-1]["parent_of_child"]
        else:
            group = np.arange(n)
        starts = np.flatnonzero(np.r_[True, group[1:] != group[:-1]])
        group_id = np.cumsum(np.r_[False, group[1:] != group[:-1]])
        rep_hist = hist[starts]
        tensors = game.batch_tensors(rep_hist, q, dtype=np.uint8)
        probs = _policy_rows(profile, game, rep_hist, tensors, q)
        if q == traverser:
            width = len(legal)
            child = np.repeat(hist, width, axis=0)
            child = np.hstack([child, np.tile(legal, n)[:, None].astype(np.int16)])
            levels.append(dict(q=q, expanded=True, n=n, legal=legal, tensors=tensors, probs=probs,
                               group_id=group_id, parent_of_child=np.repeat(np.arange(n), width)))
        else:
            strat_t.append(tensors)
            strat_p.append(probs)
            pick = sample_rows(probs, rng)[group_id]
            child = np.hstack([hist, pick[:, None].astype(np.int16)])
            levels.append(dict(q=q, expanded=False, n=n, parent_of_child=np.arange(n)))
        hist = child

    pd = game.batch_returns(hist)
    values = (pd if traverser == 0 else -pd) / scale
    adv_t, adv_y = [], []
    for lvl in reversed(levels):
        if not lvl["expanded"]:
            continue
        legal, n = lvl["legal"], lvl["n"]
        child_values = values.reshape(n, len(legal))
        pol = lvl["probs"][lvl["group_id"]][:, legal]
        node_values = (pol * child_values).sum(axis=1)
        regrets = np.zeros((n, game.num_distinct_actions(lvl["q"])))
        regrets[:, legal] = child_values - node_values[:, None]
        adv_t.append(lvl["tensors"][lvl["group_id"]])
        adv_y.append(regrets)
        values = node_values

    width = game.info_state_tensor_size
    return Samples(
        np.concatenate(adv_t[::-1]) if adv_t else np.zeros((0, width), np.uint8),
        np.concatenate(adv_y[::-1]) if adv_y else np.zeros((0, game.num_distinct_actions(traverser))),
        np.concatenate(strat_t) if strat_t else np.zeros((0, width), np.uint8),
        np.concatenate(strat_p) if strat_p else np.zeros((0, game.num_distinct_actions(1 - traverser))),
        values,
    )


def external_traversal(
    game: Game,
    state: State,
    traverser: int,
    profile,
    rng: np.random.Generator,
    out: dict | None = None,
    scale: float | None = None,
) -> float:
    """One recursive traversal from ``state``; returns the sampled value.

    Samples are appended to ``out`` (lists under ``adv_tensors``,
    ``adv_targets``, ``strat_tensors``, ``strat_probs``).
    """
    scale = game.max_utility if scale is None else scale
    if out is None:
        out = {}
    for name in ("adv_tensors", "adv_targets", "strat_tensors", "strat_probs"):
        out.setdefault(name, [])
    return _traverse(game, state, traverser, profile, rng, out, scale, {})


def _traverse(game, state, traverser, profile, rng, out, scale, sampled) -> float:
    if state.is_terminal():
        return float(state.returns()[traverser]) / scale
    if state.is_chance_node():
        outcomes = state.chance_outcomes()
        probs = np.array([p for _, p in outcomes])
        pick = sample_rows(probs[None], rng)[0]
        return _traverse(game, state.apply_action(outcomes[pick][0]), traverser, profile, rng, out, scale, sampled)

    q = state.current_player()
    legal = state.legal_actions()
    width = game.num_distinct_actions(q)
    if q == traverser:
        probs = np.asarray(policy_for_player(profile, q).action_probabilities(state), dtype=float)
        values = np.array(
            [_traverse(game, state.apply_action(a), traverser, profile, rng, out, scale, sampled) for a in legal]
        )
        node_value = float(probs @ values)
        regrets = np.zeros(width)
        regrets[legal] = values - node_value
        out["adv_tensors"].append(state.info_state_tensor(q).astype(np.uint8))
        out["adv_targets"].append(regrets)
        return node_value

    key = state.info_state_key(q)
    action = sampled.get(key)
    if action is None:
        probs = np.asarray(policy_for_player(profile, q).action_probabilities(state), dtype=float)
        action = sampled[key] = legal[sample_rows(probs[None], rng)[0]]
        full = np.zeros(width)
        full[legal] = probs
        out["strat_tensors"].append(state.info_state_tensor(q).astype(np.uint8))
        out["strat_probs"].append(full)
    return _traverse(game, state.apply_action(action), traverser, profile, rng, out, scale, sampled)


def generic_traversals(
    game: Game, traverser: int, profile, count: int, rng: np.random.Generator, scale: float | None = None
) -> Samples:
    out: dict = {}
    roots = [
        external_traversal(game, game.new_initial_state(), traverser, profile, rng, out, scale)
        for _ in range(count)
    ]
    width = game.info_state_tensor_size

    def stack(rows, cols, dtype):
        return np.asarray(rows, dtype=dtype).reshape(len(rows), cols) if rows else np.zeros((0, cols), dtype)

    return Samples(
        stack(out["adv_tensors"], width, np.uint8),
        stack(out["adv_targets"], game.num_distinct_actions(traverser), float),
        stack(out["strat_tensors"], width, np.uint8),
        stack(out["strat_probs"], game.num_distinct_actions(1 - traverser), float),
        np.asarray(roots),
    )


def run_traversals(game: Game, traverser: int, profile, count: int, rng, scale=None, chunk_leaves: int = 1_000_000):
    """Dispatch to the vectorized radar traversal when possible."""
    if not isinstance(game, RadarGame):
        return generic_traversals(game, traverser, profile, count, rng, scale)
    branching = len(game.legal[traverser]) ** game.pulses
    per_chunk = max(1, chunk_leaves // branching)
    parts = []
    done = 0
    while done < count:
        step = min(per_chunk, count - done)
        parts.append(radar_traversals(game, traverser, profile, step, rng, scale))
        done += step
    return Samples.concat(parts)
