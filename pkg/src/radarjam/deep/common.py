"""Turning network outputs into behaviour policies."""

from __future__ import annotations

from typing import Literal, Mapping

import numpy as np

from ..efg import Game, State
from ..game import RadarGame, ScenarioPolicy
from ..nn import MLP
from ..policy import POLICY_FORMAT, POLICY_VERSION, UniformPolicy, batch_probabilities, game_to_dict

Mode = Literal["softmax", "regret", "greedy"]
MODES = ("softmax", "regret", "greedy")
MIN_MASS = 1e-12


def masked_distribution(outputs: np.ndarray, mask: np.ndarray, mode: Mode) -> np.ndarray:
    """Rows of full-width distributions supported on ``mask``.

    ``softmax`` renormalizes network probabilities over legal actions,
    ``regret`` applies regret matching to predicted advantages and
    ``greedy`` puts all mass on the best legal output (lowest index on ties).
    Rows whose legal mass falls below 1e-12 become uniform over legal actions.
    """
    outputs = np.atleast_2d(outputs)
    mask = np.broadcast_to(mask, outputs.shape)
    if mode == "greedy":
        best = np.argmax(np.where(mask, outputs, -np.inf), axis=1)
        out = np.zeros(outputs.shape)
        out[np.arange(len(out)), best] = 1.0
        return out
    if mode == "softmax":
        mass = np.where(mask, outputs, 0.0)
    elif mode == "regret":
        mass = np.where(mask, np.maximum(outputs, 0.0), 0.0)
    else:
        raise ValueError(f"mode: expected one of {MODES}, got {mode!r}")
    total = mass.sum(axis=1, keepdims=True)
    uniform = mask / mask.sum(axis=1, keepdims=True)
    ok = total >= MIN_MASS
    return np.where(ok, mass / np.where(ok, total, 1.0), uniform)


def legal_mask(game: Game, state: State) -> np.ndarray:
    mask = np.zeros(game.num_distinct_actions(state.current_player()), dtype=bool)
    mask[state.legal_actions()] = True
    return mask


def evaluate_policy_net(net: MLP | None, state: State, mode: Mode = "softmax") -> np.ndarray:
    """Distribution over ``state.legal_actions()`` from ``net``; uniform if no net."""
    legal = state.legal_actions()
    if net is None:
        return np.full(len(legal), 1.0 / len(legal))
    mask = legal_mask(state.game, state)
    out = net.forward(state.info_state_tensor(state.current_player()))
    return masked_distribution(out, mask, mode)[0, legal]


class NetworkPolicy:
    """Per-player networks read as behaviour policies.

    A missing (None) network means uniform play.  ``fixed`` players use an
    arbitrary policy object instead of a network.
    """

    def __init__(
        self,
        game: Game,
        nets: Mapping[int, MLP | None],
        mode: Mode | Mapping[int, Mode] = "softmax",
        fixed: Mapping[int, object] | None = None,
    ):
        self.game = game
        self.nets = {p: nets.get(p) for p in range(game.num_players)}
        self.modes = {p: mode if isinstance(mode, str) else mode.get(p, "softmax") for p in self.nets}
        for p, m in self.modes.items():
            if m not in MODES:
                raise ValueError(f"mode: expected one of {MODES}, got {m!r}")
        self.fixed = dict(fixed or {})

    def action_probabilities(self, state: State) -> np.ndarray:
        p = state.current_player()
        if p in self.fixed:
            return self.fixed[p].action_probabilities(state)
        return evaluate_policy_net(self.nets[p], state, self.modes[p])

    def probs_from_tensors(self, tensors: np.ndarray, player: int, mask: np.ndarray) -> np.ndarray:
        net = self.nets[player]
        if net is None:
            return masked_distribution(np.zeros((len(tensors), len(mask))), mask, "regret")
        return masked_distribution(net.forward(tensors), mask, self.modes[player])

    def batch_probabilities(self, hist, player: int, game: RadarGame | None = None) -> np.ndarray:
        game = game or self.game
        if player in self.fixed:
            return batch_probabilities(self.fixed[player], game, hist, player)
        mask = game.legal_masks[player]
        if self.nets[player] is None:
            return masked_distribution(np.zeros((len(hist), len(mask))), mask, "regret")
        return self.probs_from_tensors(game.batch_tensors(hist, player), player, mask)

    def _player_entry(self, p: int):
        if p in self.fixed:
            name = _FIXED_NAMES.get(type(self.fixed[p]))
            if name is None:
                raise ValueError(f"player {p} follows a {type(self.fixed[p]).__name__}, which has no serialized form")
            return {"fixed": name}
        net = self.nets[p]
        return None if net is None else {"mode": self.modes[p], "net": net.to_dict()}

    def to_dict(self) -> dict:
        return {
            "format": POLICY_FORMAT,
            "version": POLICY_VERSION,
            "kind": "network",
            "game": game_to_dict(self.game),
            "players": {str(p): self._player_entry(p) for p in self.nets},
        }


_FIXED_NAMES = {ScenarioPolicy: "scenario", UniformPolicy: "uniform"}


def network_policy_from_dict(data: dict, game: Game) -> NetworkPolicy:
    nets, modes, fixed = {}, {}, {}
    for key, entry in data["players"].items():
        p = int(key)
        if entry is None:
            nets[p] = None
            continue
        if "fixed" in entry:
            fixed[p] = ScenarioPolicy(game) if entry["fixed"] == "scenario" else UniformPolicy()
            continue
        nets[p] = MLP.from_dict(entry["net"])
        modes[p] = entry["mode"]
        if nets[p].spec.input_width != game.info_state_tensor_size:
            raise ValueError(
                f"player {p} network expects {nets[p].spec.input_width} inputs, "
                f"game gives {game.info_state_tensor_size}"
            )
    return NetworkPolicy(game, nets, modes, fixed)
