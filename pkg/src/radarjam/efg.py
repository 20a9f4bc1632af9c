"""Finite two-player extensive-form games.

Games expose immutable states: ``apply_action`` returns a new state and never
touches the receiver.  Information states are identified by
:class:`InfoStateKey`, a (player, bytes) pair built only from what the player
observes, so keys are stable across processes.

:func:`build_tree` flattens an enumerable game into breadth-first arrays that
the tabular solvers traverse with numpy instead of Python recursion.
"""

from __future__ import annotations

import abc
import dataclasses
from typing import NamedTuple, Sequence

import numpy as np

CHANCE = -1
TERMINAL = -4

# Full-tree solvers refuse games with more histories than this.
MAX_TREE_NODES = 5_000_000


class GameError(Exception):
    """Base class for rule violations."""


class IllegalActionError(GameError, ValueError):
    pass


class TerminalStateError(GameError):
    """A decision-node operation was invoked on a terminal state."""


class NotTerminalError(GameError):
    """Utilities were requested for a non-terminal state."""


class TreeTooLargeError(GameError):
    pass


class InfoStateKey(NamedTuple):
    player: int
    digest: bytes

    def describe(self) -> str:
        return f"{self.player}|{self.digest.decode('ascii')}"

    @classmethod
    def parse(cls, text: str) -> "InfoStateKey":
        player, sep, digest = text.partition("|")
        if not sep:
            raise ValueError(f"malformed info-state descriptor {text!r}")
        return cls(int(player), digest.encode("ascii"))


class State(abc.ABC):
    """A node of the game tree."""

    game: "Game"

    @property
    @abc.abstractmethod
    def history(self) -> tuple[tuple[int, int], ...]:
        """(player, action) pairs from the root, chance moves included."""

    @abc.abstractmethod
    def current_player(self) -> int: ...

    @abc.abstractmethod
    def legal_actions(self) -> list[int]: ...

    @abc.abstractmethod
    def apply_action(self, action: int) -> "State": ...

    @abc.abstractmethod
    def returns(self) -> np.ndarray: ...

    @abc.abstractmethod
    def info_state_key(self, player: int | None = None) -> InfoStateKey: ...

    def info_state_tensor(self, player: int | None = None) -> np.ndarray:
        raise NotImplementedError(f"{type(self.game).__name__} has no tensor encoding")

    def chance_outcomes(self) -> list[tuple[int, float]]:
        raise GameError("not a chance node")

    def is_terminal(self) -> bool:
        return self.current_player() == TERMINAL

    def is_chance_node(self) -> bool:
        return self.current_player() == CHANCE

    def child(self, action: int) -> "State":
        return self.apply_action(action)


class Game(abc.ABC):
    num_players: int = 2
    zero_sum: bool = True

    @abc.abstractmethod
    def new_initial_state(self) -> State: ...

    @abc.abstractmethod
    def num_distinct_actions(self, player: int) -> int: ...

    @property
    def info_state_tensor_size(self) -> int:
        raise NotImplementedError

    @property
    def max_utility(self) -> float:
        """Upper bound on |utility| over all terminals."""
        raise NotImplementedError

    def action_label(self, player: int, action: int) -> str:
        return str(action)

    def num_histories(self) -> int | None:
        """Closed-form history count, if the game knows it."""
        return None


# -- thin functional surface -------------------------------------------------


def initial_state(game: Game) -> State:
    return game.new_initial_state()


def legal_actions(state: State) -> list[int]:
    if state.is_terminal():
        raise TerminalStateError("terminal state has no legal actions")
    return state.legal_actions()


def apply_action(state: State, action: int) -> State:
    return state.apply_action(action)


def returns(state: State) -> np.ndarray:
    return state.returns()


def info_state_key(state: State, player: int | None = None) -> InfoStateKey:
    return state.info_state_key(player)


def enumerate_info_states(game: Game, player: int) -> list[InfoStateKey]:
    """All information states where ``player`` acts, in depth-first order."""
    seen: dict[InfoStateKey, None] = {}
    stack = [game.new_initial_state()]
    while stack:
        state = stack.pop()
        if state.is_terminal():
            continue
        if state.current_player() == player:
            seen.setdefault(state.info_state_key(player))
        for action in reversed(state.legal_actions()):
            stack.append(state.apply_action(action))
    return list(seen)


# -- compiled tree -----------------------------------------------------------


@dataclasses.dataclass
class GameTree:
    """Breadth-first flattening of a game.

    Children of every node are contiguous and levels are contiguous, so
    per-level reductions use ``np.add.reduceat``.  Per-infoset quantities live
    in padded ``(num_infosets, max_actions)`` matrices; ``edge[c]`` is the flat
    index into such a matrix for the action leading to decision child ``c``.
    """

    game: Game
    parent: np.ndarray
    slot: np.ndarray
    player: np.ndarray
    infoset: np.ndarray
    first_child: np.ndarray
    num_children: np.ndarray
    chance_prob: np.ndarray
    utility: np.ndarray
    levels: list[np.ndarray]
    infoset_keys: list[InfoStateKey]
    infoset_player: np.ndarray
    infoset_legal: list[tuple[int, ...]]
    infoset_states: list[State]
    infoset_depth: np.ndarray
    max_actions: int

    def __post_init__(self):
        n_inf, width = len(self.infoset_keys), self.max_actions
        self.num_nodes = len(self.parent)
        self.legal_mask = np.zeros((n_inf, width), dtype=bool)
        for i, legal in enumerate(self.infoset_legal):
            self.legal_mask[i, : len(legal)] = True
        self.key_index = {k: i for i, k in enumerate(self.infoset_keys)}

        nonroot = np.arange(1, self.num_nodes)
        owner = self.player[self.parent[nonroot]]
        self.edge = np.full(self.num_nodes, -1)
        dec = nonroot[owner >= 0]
        self.edge[dec] = self.infoset[self.parent[dec]] * width + self.slot[dec]
        self.decision_children = dec
        self.decision_parents = self.parent[dec]
        self.chance_children = nonroot[owner == CHANCE]
        # reach-matrix column that each edge multiplies: player index, or
        # num_players for chance
        self.edge_owner = np.full(self.num_nodes, -1)
        self.edge_owner[nonroot] = np.where(owner == CHANCE, self.game.num_players, owner)

        self.terminals = np.flatnonzero(self.player == TERMINAL)
        dec_nodes = np.flatnonzero(self.player >= 0)
        _, first = np.unique(self.infoset[dec_nodes], return_index=True)
        self.infoset_rep_node = dec_nodes[first]

        # per level: internal nodes and the contiguous block of their children
        self._internal = []
        for lvl in self.levels:
            internal = lvl[self.num_children[lvl] > 0]
            if len(internal) == 0:
                continue
            lo = self.first_child[internal[0]]
            hi = self.first_child[internal[-1]] + self.num_children[internal[-1]]
            self._internal.append((internal, lo, hi, self.first_child[internal] - lo))
        # per (level, player): that player's nodes and all of their children
        self._owned = []
        for internal, *_ in self._internal:
            by_player = {}
            for p in range(self.game.num_players):
                mine = internal[self.player[internal] == p]
                if len(mine):
                    kids = np.concatenate(
                        [np.arange(f, f + c) for f, c in zip(self.first_child[mine], self.num_children[mine])]
                    )
                    by_player[p] = (mine, kids, np.unique(self.infoset[mine]))
            self._owned.append(by_player)

    @property
    def num_infosets(self) -> int:
        return len(self.infoset_keys)

    # -- profile plumbing

    def uniform_matrix(self) -> np.ndarray:
        m = self.legal_mask.astype(float)
        return m / m.sum(axis=1, keepdims=True)

    def policy_matrix(self, policy, players: Sequence[int] | None = None) -> np.ndarray:
        """Padded behaviour matrix of ``policy`` at every infoset.

        Rows for players outside ``players`` are left uniform.
        """
        sigma = self.uniform_matrix()
        for i, state in enumerate(self.infoset_states):
            if players is not None and self.infoset_player[i] not in players:
                continue
            probs = np.asarray(policy.action_probabilities(state), dtype=float)
            n = len(self.infoset_legal[i])
            if probs.shape != (n,):
                raise ValueError(
                    f"policy returned {probs.shape} probabilities for {n} legal actions "
                    f"at {self.infoset_keys[i].describe()!r}"
                )
            sigma[i, :n] = probs
        return sigma

    def edge_probabilities(self, sigma: np.ndarray) -> np.ndarray:
        prob = np.ones(self.num_nodes)
        prob[self.decision_children] = sigma.ravel()[self.edge[self.decision_children]]
        prob[self.chance_children] = self.chance_prob[self.chance_children]
        return prob

    def reach(self, edge_prob: np.ndarray) -> np.ndarray:
        """Per-node reach contributions, columns = players then chance."""
        reach = np.ones((self.num_nodes, self.game.num_players + 1))
        for lvl in self.levels[1:]:
            reach[lvl] = reach[self.parent[lvl]]
            reach[lvl, self.edge_owner[lvl]] *= edge_prob[lvl]
        return reach

    def expected_values(self, edge_prob: np.ndarray) -> np.ndarray:
        """Expected utility of every node under the profile, shape (n, players)."""
        values = self.utility.copy()
        for internal, lo, hi, offsets in reversed(self._internal):
            weighted = values[lo:hi] * edge_prob[lo:hi, None]
            values[internal] = np.add.reduceat(weighted, offsets, axis=0)
        return values

    def profile_value(self, sigma: np.ndarray) -> np.ndarray:
        return self.expected_values(self.edge_probabilities(sigma))[0]

    def best_response(self, sigma: np.ndarray, player: int) -> tuple[float, np.ndarray]:
        """Exact best response of ``player`` to the other rows of ``sigma``.

        Returns the best-response value and, per infoset, the chosen action
        slot (meaningful only on ``player``'s rows; ties go to the lowest slot).
        """
        edge_prob = self.edge_probabilities(sigma)
        reach = self.reach(edge_prob)
        opp_reach = np.prod(np.delete(reach, player, axis=1), axis=1)
        values = self.utility[:, player].copy()
        width = self.max_actions
        best = np.zeros(self.num_infosets, dtype=int)
        for (internal, lo, hi, offsets), owned in zip(reversed(self._internal), reversed(self._owned)):
            weighted = values[lo:hi] * edge_prob[lo:hi]
            values[internal] = np.add.reduceat(weighted, offsets)
            if player not in owned:
                continue
            mine, kids, sets = owned[player]
            q = np.bincount(
                self.edge[kids],
                weights=opp_reach[self.parent[kids]] * values[kids],
                minlength=self.num_infosets * width,
            ).reshape(-1, width)
            q = np.where(self.legal_mask, q, -np.inf)
            best[sets] = np.argmax(q[sets], axis=1)
            values[mine] = values[self.first_child[mine] + best[self.infoset[mine]]]
        return float(values[0]), best


def build_tree(game: Game, max_nodes: int = MAX_TREE_NODES) -> GameTree:
    """Enumerate every history of ``game`` breadth-first."""
    known = game.num_histories()
    if known is not None and known > max_nodes:
        raise TreeTooLargeError(f"game has {known} histories (limit {max_nodes})")

    parent, slot, player, infoset = [-1], [0], [], []
    first_child, num_children, chance_prob, utility = [], [], [1.0], []
    levels: list[np.ndarray] = []
    keys: dict[InfoStateKey, int] = {}
    infoset_player, infoset_legal, infoset_states, infoset_depth = [], [], [], []

    level = [game.new_initial_state()]
    next_id = 1
    depth = 0
    while level:
        start = len(player)
        levels.append(np.arange(start, start + len(level)))
        nxt = []
        for node_id, state in enumerate(level, start):
            p = state.current_player()
            player.append(p)
            if p == TERMINAL:
                infoset.append(-1)
                first_child.append(-1)
                num_children.append(0)
                utility.append(np.asarray(state.returns(), dtype=float))
                continue
            utility.append(np.zeros(game.num_players))
            if p == CHANCE:
                infoset.append(-1)
                outcomes = state.chance_outcomes()
                actions = [a for a, _ in outcomes]
                chance_prob.extend(pr for _, pr in outcomes)
            else:
                actions = state.legal_actions()
                key = state.info_state_key(p)
                idx = keys.get(key)
                if idx is None:
                    idx = keys[key] = len(keys)
                    infoset_player.append(p)
                    infoset_legal.append(tuple(actions))
                    infoset_states.append(state)
                    infoset_depth.append(depth)
                elif infoset_legal[idx] != tuple(actions) or infoset_depth[idx] != depth:
                    raise GameError(f"inconsistent information state {key.describe()!r}")
                infoset.append(idx)
                chance_prob.extend([1.0] * len(actions))
            first_child.append(next_id)
            num_children.append(len(actions))
            for s, a in enumerate(actions):
                parent.append(node_id)
                slot.append(s)
                nxt.append(state.apply_action(a))
            next_id += len(actions)
            if next_id > max_nodes:
                raise TreeTooLargeError(f"game exceeds {max_nodes} histories")
        level = nxt
        depth += 1

    return GameTree(
        game=game,
        parent=np.asarray(parent),
        slot=np.asarray(slot),
        player=np.asarray(player),
        infoset=np.asarray(infoset),
        first_child=np.asarray(first_child),
        num_children=np.asarray(num_children),
        chance_prob=np.asarray(chance_prob),
        utility=np.asarray(utility),
        levels=levels,
        infoset_keys=list(keys),
        infoset_player=np.asarray(infoset_player),
        infoset_legal=infoset_legal,
        infoset_states=infoset_states,
        infoset_depth=np.asarray(infoset_depth),
        max_actions=max((len(x) for x in infoset_legal), default=1),
    )
