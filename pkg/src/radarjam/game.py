"""The multi-pulse radar/jammer frequency-selection game.

Each of ``pulses`` rounds is a radar move (one carrier per subpulse) followed
by a jammer move (spot on one carrier, react, or barrage).  The jammer moves
without seeing the radar's current pulse; both sides see every completed
round.  The radar is paid the probability of detection, the jammer its
negation.

Action ids
    radar   base-N code of the carrier tuple, first subpulse most significant,
            so (f1, f1, f1) -> 0 and (fN, ..., fN) -> N**K - 1
    jammer  Spot(f1) .. Spot(fN) -> 0 .. N-1, React -> N, Barrage -> N+1
"""

from __future__ import annotations

import dataclasses
import enum
import re
from functools import cached_property

import numpy as np

from . import physics
from .efg import (
    TERMINAL,
    Game,
    IllegalActionError,
    InfoStateKey,
    NotTerminalError,
    State,
    TerminalStateError,
)
from .physics import JamTag, PhysicsParams

RADAR, JAMMER = 0, 1

# info-state tensor cell codes
EMPTY, ACTIVE, UNKNOWN, PAD = range(4)
NUM_CODES = 4
GLYPHS = ".#?x"


class Scenario(str, enum.Enum):
    FREE = "free"
    CASE_A = "case_a"
    CASE_B = "case_b"
    CASE_C = "case_c"
    CASE_D = "case_d"


class JammerKind(enum.IntEnum):
    SPOT = 0
    REACT = 1
    BARRAGE = 2


@dataclasses.dataclass(frozen=True)
class RadarAction:
    freqs: tuple[int, ...]

    def label(self) -> str:
        return "".join(str(f + 1) for f in self.freqs)


@dataclasses.dataclass(frozen=True)
class JammerAction:
    kind: JammerKind
    freq: int | None = None

    def label(self) -> str:
        if self.kind is JammerKind.SPOT:
            return f"S{self.freq + 1}"
        return "Ra" if self.kind is JammerKind.REACT else "Ba"


@dataclasses.dataclass(frozen=True)
class JamMask:
    jammed: tuple[bool, ...]
    tags: tuple[JamTag, ...]


def encode_radar(freqs, num_freqs: int) -> int:
    code = 0
    for f in freqs:
        if not 0 <= f < num_freqs:
            raise ValueError(f"carrier index {f} out of range for {num_freqs} frequencies")
        code = code * num_freqs + int(f)
    return code


def decode_radar(code: int, num_freqs: int, subpulses: int) -> RadarAction:
    if not 0 <= code < num_freqs**subpulses:
        raise ValueError(f"radar action id {code} out of range")
    freqs = []
    for _ in range(subpulses):
        code, f = divmod(code, num_freqs)
        freqs.append(f)
    return RadarAction(tuple(reversed(freqs)))


def encode_jammer(action: JammerAction, num_freqs: int) -> int:
    if action.kind is JammerKind.SPOT:
        if action.freq is None or not 0 <= action.freq < num_freqs:
            raise ValueError(f"spot frequency {action.freq} out of range")
        return action.freq
    return num_freqs if action.kind is JammerKind.REACT else num_freqs + 1


def decode_jammer(code: int, num_freqs: int) -> JammerAction:
    if 0 <= code < num_freqs:
        return JammerAction(JammerKind.SPOT, code)
    if code == num_freqs:
        return JammerAction(JammerKind.REACT)
    if code == num_freqs + 1:
        return JammerAction(JammerKind.BARRAGE)
    raise ValueError(f"jammer action id {code} out of range")


def resolve_round(radar: RadarAction, jammer: JammerAction) -> JamMask:
    """Which subpulses of one pulse get jammed, and at what power density."""
    k = len(radar.freqs)
    if jammer.kind is JammerKind.BARRAGE:
        return JamMask((True,) * k, (JamTag.BARRAGE,) * k)
    if jammer.kind is JammerKind.SPOT:
        hit = tuple(f == jammer.freq for f in radar.freqs)
    else:
        # the first subpulse is what gets intercepted, so it always escapes
        first = radar.freqs[0]
        hit = (False,) + tuple(f == first for f in radar.freqs[1:])
    return JamMask(hit, tuple(JamTag.SPOT if h else JamTag.NONE for h in hit))


def jammer_spectrum(radar: RadarAction, jammer: JammerAction, num_freqs: int) -> np.ndarray:
    """Carriers the jammer transmitted on during one pulse, bool (N, K)."""
    k = len(radar.freqs)
    out = np.zeros((num_freqs, k), dtype=bool)
    if jammer.kind is JammerKind.BARRAGE:
        out[:] = True
    elif jammer.kind is JammerKind.SPOT:
        out[jammer.freq, :] = True
    else:
        out[radar.freqs[0], 1:] = True
    return out


@dataclasses.dataclass(frozen=True)
class GameConfig:
    pulses: int = 4
    subpulses: int = 3
    frequencies: int = 3
    scenario: Scenario = Scenario.FREE
    physics: PhysicsParams = dataclasses.field(default_factory=PhysicsParams)

    def __post_init__(self):
        object.__setattr__(self, "scenario", Scenario(self.scenario))
        for name, low in (("pulses", 1), ("subpulses", 1), ("frequencies", 2)):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < low:
                raise ValueError(f"{name}: must be an integer >= {low}, got {value!r}")
        if self.physics.num_frequencies != self.frequencies:
            raise ValueError(
                f"physics.rcs_per_freq: needs {self.frequencies} entries, "
                f"got {self.physics.num_frequencies}"
            )
        if self.scenario is Scenario.CASE_B and self.subpulses > self.frequencies:
            raise ValueError("scenario: case_b needs subpulses <= frequencies")


class RadarGame(Game):
    def __init__(self, config: GameConfig | None = None, **overrides):
        if config is None:
            config = GameConfig(**overrides)
        elif overrides:
            config = dataclasses.replace(config, **overrides)
        self.config = config
        n, k, m = config.frequencies, config.subpulses, config.pulses
        self.pulses, self.subpulses, self.num_freqs = m, k, n
        self.horizon = 2 * m
        self.num_radar_actions = n**k
        self.num_jammer_actions = n + 2
        self.react_id, self.barrage_id = n, n + 1

        self.radar_carriers = np.array(
            [decode_radar(c, n, k).freqs for c in range(self.num_radar_actions)], dtype=np.int64
        ).reshape(self.num_radar_actions, k)
        tags = np.zeros((self.num_radar_actions, self.num_jammer_actions, k), dtype=np.int64)
        spectrum = np.zeros((self.num_radar_actions, self.num_jammer_actions, n, k), dtype=bool)
        for r in range(self.num_radar_actions):
            ra = decode_radar(r, n, k)
            for j in range(self.num_jammer_actions):
                ja = decode_jammer(j, n)
                tags[r, j] = resolve_round(ra, ja).tags
                spectrum[r, j] = jammer_spectrum(ra, ja, n)
        self.round_tags = tags
        self.round_spectrum = spectrum
        # per-round histogram of (carrier, tag) cell types, for fast terminal PD
        cell = self.radar_carriers[:, None, :] * len(JamTag) + tags
        types = n * len(JamTag)
        self.round_cell_counts = (cell[..., None] == np.arange(types)).sum(axis=2).astype(np.int8)

        self.legal = (tuple(self._radar_legal()), tuple(self._jammer_legal()))
        masks = []
        for p, size in ((RADAR, self.num_radar_actions), (JAMMER, self.num_jammer_actions)):
            mask = np.zeros(size, dtype=bool)
            mask[list(self.legal[p])] = True
            masks.append(mask)
        self.legal_masks = tuple(masks)
        jammable = self.round_spectrum[:, list(self.legal[JAMMER])].any(axis=(0, 1, 3))
        self.pad_rows = np.flatnonzero(~jammable)

    def __repr__(self):
        c = self.config
        return f"RadarGame(M={c.pulses}, K={c.subpulses}, N={c.frequencies}, {c.scenario.value})"

    # -- scenario rules

    def _radar_legal(self):
        sc = self.config.scenario
        for r, freqs in enumerate(self.radar_carriers):
            distinct = len(set(freqs.tolist()))
            if sc is Scenario.CASE_A and distinct != 1:
                continue
            if sc is Scenario.CASE_B and distinct != len(freqs):
                continue
            yield r

    def _jammer_legal(self):
        sc = self.config.scenario
        if sc is Scenario.CASE_C:
            return [0, 1]
        if sc is Scenario.CASE_D:
            return [self.react_id]
        return list(range(self.num_jammer_actions))

    # -- Game interface

    def new_initial_state(self) -> "RadarState":
        return RadarState(self, ())

    def num_distinct_actions(self, player: int) -> int:
        return self.num_radar_actions if player == RADAR else self.num_jammer_actions

    @property
    def info_state_tensor_size(self) -> int:
        return self.num_freqs * self.pulses * self.subpulses * 2 * NUM_CODES

    @cached_property
    def max_utility(self) -> float:
        best = physics.snr_table(self.config.physics).max() * self.pulses * self.subpulses
        return float(physics.detection_probability(best, self.config.physics.pfa))

    def num_histories(self) -> int:
        per_round = len(self.legal[RADAR]) * len(self.legal[JAMMER])
        total, layer = 1, 1
        for _ in range(self.pulses):
            total += layer * len(self.legal[RADAR])
            layer *= per_round
            total += layer
        return total

    def num_terminals(self) -> int:
        return (len(self.legal[RADAR]) * len(self.legal[JAMMER])) ** self.pulses

    def action_label(self, player: int, action: int) -> str:
        if player == RADAR:
            return decode_radar(action, self.num_freqs, self.subpulses).label()
        return decode_jammer(action, self.num_freqs).label()

    def parse_action(self, player: int, token: str) -> int:
        if player == RADAR:
            if len(token) != self.subpulses or not token.isdigit():
                raise ValueError(f"radar token {token!r} needs {self.subpulses} carrier digits")
            return encode_radar([int(ch) - 1 for ch in token], self.num_freqs)
        low = token.lower()
        if low == "ra":
            return self.react_id
        if low == "ba":
            return self.barrage_id
        m = re.fullmatch(r"s(\d+)", low)
        if m:
            return encode_jammer(JammerAction(JammerKind.SPOT, int(m.group(1)) - 1), self.num_freqs)
        raise ValueError(f"jammer token {token!r} is not S<f>, Ra or Ba")

    def parse_history(self, text: str) -> "RadarState":
        """State reached by tokens like ``"111 Ra 123"`` (radar/jammer alternating)."""
        state = self.new_initial_state()
        for token in re.split(r"[\s/,]+", text.strip()):
            if token:
                state = state.apply_action(self.parse_action(state.current_player(), token))
        return state

    # -- batched helpers (histories are int arrays, one row per history)

    def batch_returns(self, hist: np.ndarray) -> np.ndarray:
        """Radar PD of complete histories, shape (n,)."""
        hist = np.asarray(hist)
        counts = self.round_cell_counts[hist[:, 0::2], hist[:, 1::2]].sum(axis=1, dtype=np.int64)
        params = self.config.physics
        return physics.detection_probability(physics.snr_from_cell_counts(counts, params), params.pfa)

    def batch_tensors(self, hist: np.ndarray, player: int, dtype=np.float64) -> np.ndarray:
        """Info-state tensors of ``player`` for equal-length histories."""
        hist = np.asarray(hist)
        n, plies = hist.shape
        k, cols = self.subpulses, self.pulses * self.subpulses
        codes = np.zeros((n, self.num_freqs, cols, 2), dtype=np.int8)
        rows = np.arange(n)
        for m in range(plies // 2):
            r, j = hist[:, 2 * m], hist[:, 2 * m + 1]
            carriers = self.radar_carriers[r]
            for s in range(k):
                codes[rows, carriers[:, s], m * k + s, RADAR] = ACTIVE
            spec = self.round_spectrum[r, j]
            codes[:, :, m * k : (m + 1) * k, JAMMER][spec] = ACTIVE
        if plies % 2:
            m = plies // 2
            if player == JAMMER:
                codes[:, :, m * k : (m + 1) * k, RADAR] = UNKNOWN
            else:
                carriers = self.radar_carriers[hist[:, -1]]
                for s in range(k):
                    codes[rows, carriers[:, s], m * k + s, RADAR] = ACTIVE
        if len(self.pad_rows):
            codes[:, self.pad_rows, :, JAMMER] = PAD
        return np.eye(NUM_CODES, dtype=dtype)[codes].reshape(n, -1)

    def batch_keys(self, hist: np.ndarray, player: int) -> list[InfoStateKey]:
        return [RadarState(self, tuple(int(a) for a in row)).info_state_key(player) for row in hist]

    def render_codes(self, codes: np.ndarray) -> str:
        """Text board from a (N, M*K, 2) array of cell codes."""
        lines = []
        k = self.subpulses
        for ch, name in ((RADAR, "radar"), (JAMMER, "jammer")):
            lines.append(name)
            for f in range(self.num_freqs):
                pulses = [
                    " ".join(GLYPHS[c] for c in codes[f, m * k : (m + 1) * k, ch])
                    for m in range(self.pulses)
                ]
                lines.append(f"f{f + 1} " + " | ".join(pulses))
        return "\n".join(lines)


class RadarState(State):
    __slots__ = ("game", "actions")

    def __init__(self, game: RadarGame, actions: tuple[int, ...]):
        self.game = game
        self.actions = actions

    def __repr__(self):
        return f"RadarState({self.describe()!r})"

    def __eq__(self, other):
        return isinstance(other, RadarState) and other.game is self.game and other.actions == self.actions

    def __hash__(self):
        return hash(self.actions)

    @property
    def history(self):
        return tuple((i % 2, a) for i, a in enumerate(self.actions))

    @property
    def round(self) -> int:
        """Zero-based index of the pulse being played."""
        return len(self.actions) // 2

    def describe(self) -> str:
        return " ".join(self.game.action_label(i % 2, a) for i, a in enumerate(self.actions))

    def current_player(self) -> int:
        if len(self.actions) >= self.game.horizon:
            return TERMINAL
        return len(self.actions) % 2

    def legal_actions(self) -> list[int]:
        p = self.current_player()
        if p == TERMINAL:
            raise TerminalStateError("terminal state has no legal actions")
        return list(self.game.legal[p])

    def apply_action(self, action: int) -> "RadarState":
        p = self.current_player()
        if p == TERMINAL:
            raise TerminalStateError("cannot act in a terminal state")
        if action not in self.game.legal[p]:
            raise IllegalActionError(f"action {action!r} is not legal for player {p} in {self!r}")
        return RadarState(self.game, self.actions + (int(action),))

    def returns(self) -> np.ndarray:
        if not self.is_terminal():
            raise NotTerminalError(f"{self!r} is not terminal")
        pd = float(self.game.batch_returns(np.asarray([self.actions]))[0])
        return np.array([pd, -pd])

    def jam_masks(self) -> list[JamMask]:
        g = self.game
        return [
            resolve_round(
                decode_radar(self.actions[2 * m], g.num_freqs, g.subpulses),
                decode_jammer(self.actions[2 * m + 1], g.num_freqs),
            )
            for m in range(len(self.actions) // 2)
        ]

    def info_state_key(self, player: int | None = None) -> InfoStateKey:
        if player is None:
            player = self.current_player()
        g = self.game
        done = len(self.actions) // 2
        parts = [
            f"{g.action_label(RADAR, self.actions[2 * m])}/{g.action_label(JAMMER, self.actions[2 * m + 1])}"
            for m in range(done)
        ]
        if len(self.actions) % 2 and player == RADAR:
            parts.append(f"{g.action_label(RADAR, self.actions[-1])}/?")
        return InfoStateKey(player, " ".join(parts).encode("ascii"))

    def info_state_tensor(self, player: int | None = None) -> np.ndarray:
        if player is None:
            player = self.current_player()
        return self.game.batch_tensors(np.asarray([self.actions], dtype=np.int64).reshape(1, -1), player)[0]

    def board_codes(self, player: int | None = None) -> np.ndarray:
        g = self.game
        t = self.info_state_tensor(player).reshape(g.num_freqs, g.pulses * g.subpulses, 2, NUM_CODES)
        return t.argmax(axis=-1)

    def render(self, player: int | None = None) -> str:
        return self.game.render_codes(self.board_codes(player))


def build_game(config: GameConfig | None = None, **overrides) -> RadarGame:
    return RadarGame(config, **overrides)


class ScenarioPolicy:
    """Environment radar of cases (a)/(b): uniform over the compliant tuples."""

    def __init__(self, game: RadarGame):
        if game.config.scenario not in (Scenario.CASE_A, Scenario.CASE_B):
            raise ValueError(
                f"no fixed radar policy for scenario {game.config.scenario.value!r}; "
                "cases c/d restrict the jammer's legal set instead"
            )
        self.game = game
        self.player = RADAR
        self.support = [decode_radar(r, game.num_freqs, game.subpulses) for r in game.legal[RADAR]]

    def action_probabilities(self, state: State) -> np.ndarray:
        if state.current_player() != RADAR:
            raise ValueError("scenario policy only covers radar states")
        n = len(self.game.legal[RADAR])
        return np.full(n, 1.0 / n)

    def batch_probabilities(self, hist: np.ndarray, player: int, game: RadarGame | None = None) -> np.ndarray:
        if player != RADAR:
            raise ValueError("scenario policy only covers radar states")
        mask = self.game.legal_masks[RADAR]
        out = np.zeros((len(hist), len(mask)))
        out[:, mask] = 1.0 / mask.sum()
        return out


def scenario_policy(game: RadarGame) -> ScenarioPolicy:
    return ScenarioPolicy(game)
