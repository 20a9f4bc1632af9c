"""Kuhn poker, used to validate the solvers against a known equilibrium.

Three cards (J < Q < K), one dealt to each player, ante 1, single bet of 1.
The first player's equilibrium value is -1/18.
"""

from __future__ import annotations

import itertools

import numpy as np

from .efg import (
    CHANCE,
    TERMINAL,
    Game,
    IllegalActionError,
    InfoStateKey,
    NotTerminalError,
    State,
    TerminalStateError,
)

PASS, BET = 0, 1
CARD_NAMES = "JQK"
DEALS = tuple(itertools.permutations(range(3), 2))
_TERMINAL_BETS = frozenset({"pp", "bb", "bp", "pbp", "pbb"})


class KuhnPoker(Game):
    def new_initial_state(self) -> "KuhnState":
        return KuhnState(self, None, "")

    def num_distinct_actions(self, player: int) -> int:
        return 2

    @property
    def info_state_tensor_size(self) -> int:
        return 3 + 3 * 2

    @property
    def max_utility(self) -> float:
        return 2.0

    def action_label(self, player: int, action: int) -> str:
        if player == CHANCE:
            return "".join(CARD_NAMES[c] for c in DEALS[action])
        return "pb"[action]

    def num_histories(self) -> int:
        return 1 + len(DEALS) * 9

    def deal(self, first: str, second: str) -> "KuhnState":
        return self.new_initial_state().apply_action(
            DEALS.index((CARD_NAMES.index(first), CARD_NAMES.index(second)))
        )


class KuhnState(State):
    __slots__ = ("game", "cards", "bets")

    def __init__(self, game: KuhnPoker, cards: tuple[int, int] | None, bets: str):
        self.game = game
        self.cards = cards
        self.bets = bets

    def __repr__(self):
        cards = "??" if self.cards is None else "".join(CARD_NAMES[c] for c in self.cards)
        return f"KuhnState({cards}:{self.bets})"

    @property
    def history(self):
        if self.cards is None:
            return ()
        out = [(CHANCE, DEALS.index(self.cards))]
        out.extend((i % 2, "pb".index(b)) for i, b in enumerate(self.bets))
        return tuple(out)

    def current_player(self) -> int:
        if self.cards is None:
            return CHANCE
        if self.bets in _TERMINAL_BETS:
            return TERMINAL
        return len(self.bets) % 2

    def chance_outcomes(self):
        if self.cards is not None:
            return super().chance_outcomes()
        return [(i, 1.0 / len(DEALS)) for i in range(len(DEALS))]

    def legal_actions(self) -> list[int]:
        p = self.current_player()
        if p == TERMINAL:
            raise TerminalStateError("terminal state has no legal actions")
        if p == CHANCE:
            return list(range(len(DEALS)))
        return [PASS, BET]

    def apply_action(self, action: int) -> "KuhnState":
        if action not in self.legal_actions():
            raise IllegalActionError(f"illegal action {action!r} in {self!r}")
        if self.cards is None:
            return KuhnState(self.game, DEALS[action], "")
        return KuhnState(self.game, self.cards, self.bets + "pb"[action])

    def returns(self) -> np.ndarray:
        if self.current_player() != TERMINAL:
            raise NotTerminalError(f"{self!r} is not terminal")
        winner = 0 if self.cards[0] > self.cards[1] else 1
        if self.bets == "bp":
            winner, pot = 0, 1
        elif self.bets == "pbp":
            winner, pot = 1, 1
        elif self.bets == "pp":
            pot = 1
        else:
            pot = 2
        u = pot if winner == 0 else -pot
        return np.array([u, -u], dtype=float)

    def info_state_key(self, player: int | None = None) -> InfoStateKey:
        if player is None:
            player = self.current_player()
        if self.cards is None or player not in (0, 1):
            return InfoStateKey(player, b"")
        return InfoStateKey(player, f"{CARD_NAMES[self.cards[player]]}:{self.bets}".encode())

    def info_state_tensor(self, player: int | None = None) -> np.ndarray:
        if player is None:
            player = self.current_player()
        out = np.zeros(self.game.info_state_tensor_size)
        if self.cards is not None:
            out[self.cards[player]] = 1.0
        for i, b in enumerate(self.bets):
            out[3 + 2 * i + "pb".index(b)] = 1.0
        return out
