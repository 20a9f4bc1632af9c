import numpy as np
import pytest

from radarjam.efg import (
    CHANCE,
    TERMINAL,
    IllegalActionError,
    InfoStateKey,
    NotTerminalError,
    TerminalStateError,
    apply_action,
    build_tree,
    enumerate_info_states,
    initial_state,
    legal_actions,
)
from radarjam.game import (
    JAMMER,
    RADAR,
    GameConfig,
    JammerAction,
    JammerKind,
    RadarAction,
    RadarGame,
    ScenarioPolicy,
    decode_jammer,
    decode_radar,
    encode_radar,
    resolve_round,
)
from radarjam.kuhn import KuhnPoker
from radarjam.physics import JamTag, PhysicsParams


@pytest.fixture(scope="module")
def game():
    return RadarGame()


def test_initial_state(game):
    s = initial_state(game)
    assert s.history == () and s.current_player() == RADAR
    k = initial_state(KuhnPoker())
    assert k.current_player() == CHANCE and len(k.chance_outcomes()) == 6


def test_states_are_values(game):
    a, b = initial_state(game), initial_state(game)
    a2 = apply_action(a, 5)
    assert a.history == () and b.history == () and a2.history == ((RADAR, 5),)


def test_action_set_sizes(game):
    s = game.new_initial_state()
    assert legal_actions(s) == list(range(27))
    assert legal_actions(s.apply_action(0)) == list(range(5))
    case_c = RadarGame(scenario="case_c")
    assert len(case_c.new_initial_state().apply_action(0).legal_actions()) == 2
    case_d = RadarGame(scenario="case_d")
    assert case_d.new_initial_state().apply_action(0).legal_actions() == [case_d.react_id]


def test_scenario_radar_sets():
    a = RadarGame(scenario="case_a")
    assert [a.action_label(RADAR, r) for r in a.legal[RADAR]] == ["111", "222", "333"]
    b = RadarGame(scenario="case_b")
    labels = {b.action_label(RADAR, r) for r in b.legal[RADAR]}
    assert labels == {"123", "132", "213", "231", "312", "321"}


def test_radar_code_is_base_n_first_subpulse_major():
    assert encode_radar((0, 0, 0), 3) == 0
    assert encode_radar((2, 2, 2), 3) == 26
    assert encode_radar((1, 0, 0), 3) == 9
    assert decode_radar(9, 3, 3) == RadarAction((1, 0, 0))
    for code in range(27):
        assert encode_radar(decode_radar(code, 3, 3).freqs, 3) == code


def test_jammer_codes():
    assert [decode_jammer(j, 3).label() for j in range(5)] == ["S1", "S2", "S3", "Ra", "Ba"]
    with pytest.raises(ValueError):
        decode_jammer(5, 3)


def test_resolve_round():
    r = RadarAction((0, 1, 0))
    spot = resolve_round(r, JammerAction(JammerKind.SPOT, 0))
    assert spot.jammed == (True, False, True) and spot.tags[1] is JamTag.NONE
    react = resolve_round(r, JammerAction(JammerKind.REACT))
    assert react.jammed == (False, False, True)
    barrage = resolve_round(r, JammerAction(JammerKind.BARRAGE))
    assert barrage.tags == (JamTag.BARRAGE,) * 3


def test_terminal_rules(game):
    s = game.parse_history("111 Ra 222 Ba 333 S1 123 S2")
    assert s.is_terminal() and s.current_player() == TERMINAL
    r = s.returns()
    assert r[0] + r[1] == 0 and 1e-4 <= r[0] < 1
    with pytest.raises(TerminalStateError):
        s.legal_actions()
    with pytest.raises(TerminalStateError):
        s.apply_action(0)
    with pytest.raises(NotTerminalError):
        game.new_initial_state().returns()
    with pytest.raises(IllegalActionError):
        game.new_initial_state().apply_action(27)
    with pytest.raises(IllegalActionError):
        RadarGame(scenario="case_d").parse_history("111 Ba")


def test_jammer_cannot_see_current_radar_move(game):
    a = game.parse_history("111 S1 123")
    b = game.parse_history("111 S1 333")
    assert a.info_state_key(JAMMER) == b.info_state_key(JAMMER)
    assert a.info_state_key(RADAR) != b.info_state_key(RADAR)
    c = game.parse_history("112 S1 123")
    assert a.info_state_key(JAMMER) != c.info_state_key(JAMMER)


def test_info_state_key_is_stable_text(game):
    key = game.parse_history("111 Ra 123").info_state_key()
    assert key == InfoStateKey(JAMMER, b"111/Ra")
    assert InfoStateKey.parse(key.describe()) == key


def test_tensor_layout(game):
    assert game.info_state_tensor_size == 288
    s = game.parse_history("123 S2 111")
    t = s.info_state_tensor(JAMMER).reshape(3, 12, 2, 4)
    assert np.all(t.sum(axis=-1) == 1)
    codes = t.argmax(-1)
    # round one: radar carriers 1,2,3 on the diagonal, jammer spot row f2
    assert [codes[f, f, RADAR] for f in range(3)] == [1, 1, 1]
    assert np.all(codes[1, 0:3, JAMMER] == 1) and np.all(codes[0, 0:3, JAMMER] == 0)
    # round two unseen by the jammer
    assert np.all(codes[:, 3:6, RADAR] == 2)
    assert np.all(codes[:, 6:, :] == 0)


def test_batch_tensors_match_single_states(game):
    rng = np.random.default_rng(0)
    for plies in range(0, 8):
        hist = np.zeros((6, plies), dtype=int)
        for i in range(plies):
            hist[:, i] = rng.integers(0, 27 if i % 2 == 0 else 5, size=6)
        for p in (RADAR, JAMMER):
            batch = game.batch_tensors(hist, p)
            for row, t in zip(hist, batch):
                state = game.new_initial_state()
                for a in row:
                    state = state.apply_action(int(a))
                np.testing.assert_array_equal(state.info_state_tensor(p), t)


def test_pad_rows_under_restricted_jammer():
    g = RadarGame(scenario="case_c")
    codes = g.new_initial_state().board_codes(RADAR)
    assert np.all(codes[2, :, JAMMER] == 3) and np.all(codes[:2, :, JAMMER] == 0)


def test_render_glyphs(game):
    board = game.new_initial_state().render(RADAR)
    assert set(board.replace("radar", "").replace("jammer", "")) <= set(".|f123 \n")
    assert "#" not in board and "?" not in board
    hidden = game.parse_history("111 Ra 123").render(JAMMER)
    radar_block = hidden.split("jammer")[0]
    assert "? ? ?" in radar_block and "#" in radar_block
    shown = game.parse_history("111 Ra 123").render(RADAR)
    assert "?" not in shown
    assert "x" in RadarGame(scenario="case_c").new_initial_state().render(RADAR)


def test_parse_history_errors(game):
    with pytest.raises(ValueError):
        game.parse_history("12")
    with pytest.raises(ValueError):
        game.parse_history("111 Zz")


def test_config_validation():
    with pytest.raises(ValueError, match="pulses"):
        GameConfig(pulses=0)
    with pytest.raises(ValueError, match="rcs_per_freq"):
        GameConfig(frequencies=2)
    with pytest.raises(ValueError, match="case_b"):
        GameConfig(subpulses=3, frequencies=2, scenario="case_b", physics=PhysicsParams(rcs_per_freq=(1, 1)))


def test_history_counts_match_tree():
    g = RadarGame(pulses=1)
    tree = build_tree(g)
    assert tree.num_nodes == g.num_histories() == 1 + 27 + 27 * 5
    assert tree.num_infosets == 2
    assert len(enumerate_info_states(g, JAMMER)) == 1


def test_kuhn_fixture():
    g = KuhnPoker()
    s = g.deal("K", "J")
    assert s.info_state_key(0).digest == b"K:"
    s = s.apply_action(1).apply_action(1)
    assert s.returns().tolist() == [2.0, -2.0]
    tree = build_tree(g)
    assert tree.num_infosets == 12


def test_scenario_policy(game):
    a = RadarGame(scenario="case_a")
    pol = ScenarioPolicy(a)
    np.testing.assert_allclose(pol.action_probabilities(a.new_initial_state()), [1 / 3] * 3)
    with pytest.raises(ValueError):
        ScenarioPolicy(game)
