"""Vanilla counterfactual regret minimization with exact best responses.

Everything runs on a :class:`~radarjam.efg.GameTree`.  One iteration is a
single simultaneous update: reach probabilities top-down, expected values
bottom-up, then for every information state s and action a

    r(s, a) = sum_{h in s} reach_{-p}(h) * (v(ha) - v(h))

is added to the cumulative regret, and the current strategy weighted by the
player's own reach is added to the average-strategy accumulator.
"""

from __future__ import annotations

import dataclasses
import weakref
from typing import Mapping

import numpy as np

from .efg import MAX_TREE_NODES, Game, GameTree, InfoStateKey, build_tree
from .policy import JointPolicy, TabularPolicy

_TREES: "weakref.WeakKeyDictionary[Game, GameTree]" = weakref.WeakKeyDictionary()


def get_tree(game: Game, max_nodes: int = MAX_TREE_NODES) -> GameTree:
    """Compiled tree of ``game``, cached per game object."""
    tree = _TREES.get(game)
    if tree is None:
        tree = _TREES[game] = build_tree(game, max_nodes)
    return tree


def regret_matching(regrets) -> np.ndarray:
    """Distribution proportional to positive regret; uniform if there is none."""
    r = np.asarray(regrets, dtype=float)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("regret_matching needs a nonempty 1-D regret vector")
    pos = np.maximum(r, 0.0)
    total = pos.sum()
    if total > 0:
        return pos / total
    return np.full(r.size, 1.0 / r.size)


def regret_matching_rows(regrets: np.ndarray, legal: np.ndarray) -> np.ndarray:
    """Row-wise regret matching over the ``legal`` entries of each row."""
    pos = np.where(legal, np.maximum(regrets, 0.0), 0.0)
    total = pos.sum(axis=1, keepdims=True)
    uniform = legal / legal.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, pos / np.where(total > 0, total, 1.0), uniform)


def normalize_rows(weights: np.ndarray, legal: np.ndarray) -> np.ndarray:
    total = weights.sum(axis=1, keepdims=True)
    uniform = legal / legal.sum(axis=1, keepdims=True)
    return np.where(total > 0, weights / np.where(total > 0, total, 1.0), uniform)


@dataclasses.dataclass
class RegretEntry:
    regrets: np.ndarray
    strategy_sum: np.ndarray
    visits: int


class CFRSolver:
    """Full-tree CFR; ``iterate`` performs one simultaneous update.

    Players in ``fixed`` always play the given policy instead of regret
    matching, which turns CFR into a best-response learner for the others.
    """

    def __init__(self, game: Game, tree: GameTree | None = None, fixed: Mapping[int, object] | None = None):
        self.game = game
        self.tree = tree if tree is not None else get_tree(game)
        t = self.tree
        shape = (t.num_infosets, t.max_actions)
        self.regrets = np.zeros(shape)
        self.strategy_sum = np.zeros(shape)
        self.visits = np.zeros(t.num_infosets, dtype=np.int64)
        self.iteration = 0

        parents = t.decision_parents
        owner = t.player[parents]
        n_players = game.num_players
        # columns of the reach matrix that make up the counterfactual reach
        self._cf_cols = [
            [c for c in range(n_players + 1) if c != p] for p in range(n_players)
        ]
        self._owner = owner
        self._rep = t.infoset_rep_node
        self._rep_player = t.infoset_player

        fixed = dict(fixed or {})
        self._fixed_rows = np.isin(t.infoset_player, list(fixed))
        self._fixed_sigma = t.policy_matrix(JointPolicy(fixed), players=list(fixed)) if fixed else None

    def current_strategy(self) -> np.ndarray:
        sigma = regret_matching_rows(self.regrets, self.tree.legal_mask)
        if self._fixed_sigma is not None:
            sigma[self._fixed_rows] = self._fixed_sigma[self._fixed_rows]
        return sigma

    def iterate(self) -> None:
        t = self.tree
        sigma = self.current_strategy()
        edge_prob = t.edge_probabilities(sigma)
        reach = t.reach(edge_prob)
        values = t.expected_values(edge_prob)

        kids, parents, owner = t.decision_children, t.decision_parents, self._owner
        cf_reach = np.empty(len(kids))
        for p, cols in enumerate(self._cf_cols):
            sel = owner == p
            cf_reach[sel] = np.prod(reach[parents[sel]][:, cols], axis=1)
        gain = values[kids, owner] - values[parents, owner]
        inst = np.bincount(t.edge[kids], weights=cf_reach * gain, minlength=self.regrets.size)
        self.regrets += inst.reshape(self.regrets.shape)

        own = reach[self._rep, self._rep_player]
        self.strategy_sum += own[:, None] * sigma
        self.visits += 1
        self.iteration += 1

    def run(self, iterations: int, callback=None) -> None:
        for _ in range(iterations):
            self.iterate()
            if callback is not None:
                callback(self)

    def average_strategy(self) -> np.ndarray:
        return normalize_rows(self.strategy_sum, self.tree.legal_mask)

    def average_policy(self) -> TabularPolicy:
        return matrix_to_policy(self.tree, self.average_strategy())

    def exploitability(self) -> float:
        return matrix_exploitability(self.tree, self.average_strategy())

    def regret_table(self) -> dict[InfoStateKey, RegretEntry]:
        t = self.tree
        out = {}
        for i, key in enumerate(t.infoset_keys):
            n = len(t.infoset_legal[i])
            out[key] = RegretEntry(self.regrets[i, :n].copy(), self.strategy_sum[i, :n].copy(), int(self.visits[i]))
        return out


def cfr_iteration(solver: CFRSolver) -> CFRSolver:
    solver.iterate()
    return solver


def matrix_to_policy(tree: GameTree, sigma: np.ndarray) -> TabularPolicy:
    return TabularPolicy(
        {key: sigma[i, : len(tree.infoset_legal[i])].copy() for i, key in enumerate(tree.infoset_keys)}
    )


def matrix_exploitability(tree: GameTree, sigma: np.ndarray) -> float:
    total = sum(tree.best_response(sigma, p)[0] for p in range(tree.game.num_players))
    return total / tree.game.num_players


def average_strategy(table: dict[InfoStateKey, RegretEntry]) -> TabularPolicy:
    """Normalized strategy accumulators; uniform where nothing accumulated."""
    out = {}
    for key, entry in table.items():
        total = entry.strategy_sum.sum()
        n = len(entry.strategy_sum)
        out[key] = entry.strategy_sum / total if total > 0 else np.full(n, 1.0 / n)
    return TabularPolicy(out)


def best_response(game: Game, policy, player: int, tree: GameTree | None = None):
    """Exact best response of ``player`` against ``policy``.

    Returns ``(value, pure_policy)`` where the pure policy covers ``player``'s
    information states.
    """
    tree = tree if tree is not None else get_tree(game)
    others = [p for p in range(game.num_players) if p != player]
    sigma = tree.policy_matrix(policy, players=others)
    value, best = tree.best_response(sigma, player)
    table = {}
    for i, key in enumerate(tree.infoset_keys):
        if tree.infoset_player[i] == player:
            row = np.zeros(len(tree.infoset_legal[i]))
            row[best[i]] = 1.0
            table[key] = row
    return value, TabularPolicy(table)


def exploitability(game: Game, policy, tree: GameTree | None = None) -> float:
    """Mean best-response gain over players; zero exactly at a Nash equilibrium."""
    if not game.zero_sum:
        raise ValueError("exploitability is only defined here for zero-sum games")
    tree = tree if tree is not None else get_tree(game)
    return matrix_exploitability(tree, tree.policy_matrix(policy))


def expected_value(game: Game, policy, tree: GameTree | None = None) -> np.ndarray:
    tree = tree if tree is not None else get_tree(game)
    return tree.profile_value(tree.policy_matrix(policy))
