"""Behaviour policies and the policy-dump file format.

A policy is anything with ``action_probabilities(state)`` returning one
probability per entry of ``state.legal_actions()``.  Policies that can score
many radar-game histories at once also provide
``batch_probabilities(hist, player, game)`` returning full-width rows (zeros on
illegal actions).
"""

from __future__ import annotations

import json
import os
from typing import Mapping, Protocol

import numpy as np

from .efg import Game, InfoStateKey, State
from .game import GameConfig, RadarGame, RadarState, Scenario
from .kuhn import KuhnPoker
from .physics import PhysicsParams

POLICY_FORMAT = "radarjam-policy"
POLICY_VERSION = 1


class Policy(Protocol):
    def action_probabilities(self, state: State) -> np.ndarray: ...


class UniformPolicy:
    def action_probabilities(self, state: State) -> np.ndarray:
        n = len(state.legal_actions())
        return np.full(n, 1.0 / n)

    def batch_probabilities(self, hist, player, game: RadarGame) -> np.ndarray:
        mask = game.legal_masks[player]
        out = np.zeros((len(hist), len(mask)))
        out[:, mask] = 1.0 / mask.sum()
        return out


class TabularPolicy:
    """Explicit distribution per information state."""

    def __init__(self, table: Mapping[InfoStateKey, np.ndarray], default: Policy | None = None,
                 labels: Mapping[InfoStateKey, list[str]] | None = None):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.default = default
        # action labels carried over from a loaded dump, so re-exporting is lossless
        self.labels = dict(labels or {})

    def __len__(self):
        return len(self.table)

    def action_probabilities(self, state: State) -> np.ndarray:
        key = state.info_state_key()
        probs = self.table.get(key)
        if probs is None:
            if self.default is None:
                raise KeyError(f"policy has no entry for info state {key.describe()!r}")
            return self.default.action_probabilities(state)
        return probs

    def restricted_to(self, player: int) -> "TabularPolicy":
        return TabularPolicy({k: v for k, v in self.table.items() if k.player == player}, self.default)


class JointPolicy:
    """One policy per player, dispatched on the acting player."""

    def __init__(self, per_player: Mapping[int, Policy]):
        self.per_player = dict(per_player)

    def for_player(self, player: int) -> Policy:
        return self.per_player[player]

    def action_probabilities(self, state: State) -> np.ndarray:
        return self.per_player[state.current_player()].action_probabilities(state)


def policy_for_player(policy, player: int):
    if isinstance(policy, JointPolicy):
        return policy.for_player(player)
    return policy


def batch_probabilities(policy, game: RadarGame, hist: np.ndarray, player: int) -> np.ndarray:
    """Full-width action distributions of ``player`` at equal-length histories."""
    policy = policy_for_player(policy, player)
    batch = getattr(policy, "batch_probabilities", None)
    if batch is not None:
        return batch(hist, player, game)
    legal = list(game.legal[player])
    out = np.zeros((len(hist), game.num_distinct_actions(player)))
    cache: dict[tuple, np.ndarray] = {}
    for i, row in enumerate(np.asarray(hist)):
        actions = tuple(int(a) for a in row)
        state = RadarState(game, actions)
        key = state.info_state_key(player)
        probs = cache.get(key)
        if probs is None:
            probs = cache[key] = np.asarray(policy.action_probabilities(state), dtype=float)
        out[i, legal] = probs
    return out


def sample_rows(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One action index per row of ``probs``, drawn by inverse CDF."""
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(probs)) * cdf[:, -1]
    choice = (cdf <= u[:, None]).sum(axis=1)
    # round-off must never push the draw past the last supported action
    last = probs.shape[1] - 1 - np.argmax(probs[:, ::-1] > 0, axis=1)
    return np.minimum(choice, last)


# -- game (de)serialization --------------------------------------------------


def game_to_dict(game: Game) -> dict:
    if isinstance(game, KuhnPoker):
        return {"name": "kuhn"}
    if isinstance(game, RadarGame):
        c = game.config
        return {
            "name": "radar",
            "pulses": c.pulses,
            "subpulses": c.subpulses,
            "frequencies": c.frequencies,
            "scenario": c.scenario.value,
            "physics": c.physics.to_dict(),
        }
    raise TypeError(f"cannot serialize {type(game).__name__}")


def game_from_dict(data: Mapping) -> Game:
    data = dict(data)
    name = data.pop("name", "radar")
    if name == "kuhn":
        return KuhnPoker()
    if name != "radar":
        raise ValueError(f"unknown game {name!r}")
    physics = PhysicsParams.from_dict(data.pop("physics", {}))
    return RadarGame(GameConfig(physics=physics, scenario=Scenario(data.pop("scenario", "free")), **data))


# -- dump format -------------------------------------------------------------


def tabular_to_dict(policy: TabularPolicy, game: Game, legal: Mapping[InfoStateKey, tuple] | None = None) -> dict:
    entries = {}
    for key, probs in policy.table.items():
        entry = {"probs": [float(p) for p in probs]}
        if legal is not None and key in legal:
            entry["actions"] = [game.action_label(key.player, a) for a in legal[key]]
        elif key in policy.labels:
            entry["actions"] = list(policy.labels[key])
        entries[key.describe()] = entry
    return {
        "format": POLICY_FORMAT,
        "version": POLICY_VERSION,
        "kind": "tabular",
        "game": game_to_dict(game),
        "policy": dict(sorted(entries.items())),
    }


def dump_json(data: dict, path: str | os.PathLike) -> None:
    text = json.dumps(data, indent=1, sort_keys=False) + "\n"
    with open(path, "w", encoding="ascii") as fh:
        fh.write(text)


def export_policy(policy, game: Game, path: str | os.PathLike, tree=None) -> None:
    """Write ``policy`` as a tabular dump.

    Non-tabular policies are tabulated over every information state of the
    game, which must therefore be enumerable.
    """
    from .cfr import get_tree

    if tree is None and not isinstance(policy, TabularPolicy):
        tree = get_tree(game)
    if tree is not None:
        table = {}
        for i, key in enumerate(tree.infoset_keys):
            state = tree.infoset_states[i]
            table[key] = np.asarray(policy_for_player(policy, key.player).action_probabilities(state))
        legal = dict(zip(tree.infoset_keys, tree.infoset_legal))
        policy = TabularPolicy(table)
    else:
        legal = None
    dump_json(tabular_to_dict(policy, game, legal), path)


def load_policy(path: str | os.PathLike, game: Game | None = None):
    """Read a policy file; returns ``(policy, game)``."""
    with open(path, encoding="ascii") as fh:
        data = json.load(fh)
    if data.get("format") != POLICY_FORMAT:
        raise ValueError(f"{path}: not a policy file")
    if data.get("version") != POLICY_VERSION:
        raise ValueError(f"{path}: unsupported policy version {data.get('version')!r}")
    if game is None:
        game = game_from_dict(data["game"])
    kind = data.get("kind")
    if kind == "tabular":
        entries = {InfoStateKey.parse(k): v for k, v in data["policy"].items()}
        table = {k: np.asarray(v["probs"], dtype=float) for k, v in entries.items()}
        labels = {k: v["actions"] for k, v in entries.items() if "actions" in v}
        return TabularPolicy(table, labels=labels), game
    if kind == "network":
        from .deep.common import network_policy_from_dict

        return network_policy_from_dict(data, game), game
    raise ValueError(f"{path}: unknown policy kind {kind!r}")

