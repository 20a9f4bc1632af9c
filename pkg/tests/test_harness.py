import csv
import json

import numpy as np
import pytest

from radarjam.game import JAMMER, RADAR, GameConfig, RadarGame
from radarjam.evaluate import eval_matchup
from radarjam.harness.config import ConfigError, load_config, parse_config
from radarjam.harness.runner import (
    PROBE_HISTORIES,
    export,
    render,
    run_case_study,
    run_experiment,
    write_case_study,
)
from radarjam.policy import batch_probabilities, load_policy

TABULAR = """\
seed: 1
game:
  pulses: 1
solver:
  kind: tabular_cfr
  iterations: 40
  log_every: 5
"""

DEEP = """\
seed: 2
game:
  pulses: 1
solver:
  kind: deep_cfr
  iterations: 2
  traversals: 10
  hidden: [8]
  advantage_steps: 5
  strategy_steps: 5
  batch_size: 16
  exploitability_every: 1
"""

DQN = """\
seed: 3
game:
  pulses: 2
solver:
  kind: dqn
  episodes: 64
  hidden: [8]
  batch_size: 16
"""


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


# -- configuration ---------------------------------------------------------------


def test_defaults_need_only_a_solver():
    cfg = parse_config("solver: {kind: tabular_cfr}\n")
    assert cfg.game.pulses == 4 and cfg.game.subpulses == 3 and cfg.evaluation.mode == "exact"
    assert cfg.solver.iterations == 1000


def test_unknown_key_is_named_with_its_line():
    text = "seed: 0\nsolver:\n  kind: tabular_cfr\n  alpha: 0.5\n"
    with pytest.raises(ConfigError) as err:
        parse_config(text, "exp.yaml")
    assert err.value.key == "solver.alpha" and err.value.line == 4
    assert str(err.value) == "exp.yaml:4: solver.alpha: unknown key"


@pytest.mark.parametrize(
    "text, key, line",
    [
        ("game: {pulses: 2}\n", "solver", None),
        ("solver:\n  kind: deep_cfr\n  iterations: lots\n", "solver.iterations", 3),
        ("solver: {kind: nfsp}\n", "solver", 1),
        ("game:\n  physics:\n    pfa: 2\nsolver: {kind: dqn}\n", "game.physics.pfa", 3),
        ("game:\n  scenario: case_z\nsolver: {kind: dqn}\n", "game.scenario", 2),
    ],
)
def test_config_errors_locate_the_key(text, key, line):
    with pytest.raises(ConfigError) as err:
        parse_config(text, "x.yaml")
    assert err.value.key == key
    if line is not None:
        assert err.value.line == line


def test_invalid_yaml_reports_a_line():
    with pytest.raises(ConfigError) as err:
        parse_config("solver: [1\n", "x.yaml")
    assert err.value.line is not None


def test_snapshot_round_trips():
    cfg = parse_config(DEEP)
    assert parse_config(cfg.snapshot()) == cfg


# -- runs ----------------------------------------------------------------------------


def read_metrics(path):
    with open(path / "metrics.csv") as fh:
        return list(csv.DictReader(fh))


@pytest.mark.parametrize("text", [TABULAR, DEEP, DQN], ids=["tabular", "deep_cfr", "dqn"])
def test_runs_are_byte_identical(tmp_path, text):
    cfg = write(tmp_path, "cfg.yaml", text)
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    for name in ("metrics.csv", "policy.json", "summary.json", "config.yaml"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert (a / "timing.json").exists()


def test_tabular_run_artifacts(tmp_path):
    out = run_experiment(write(tmp_path, "cfg.yaml", TABULAR), tmp_path / "run")
    rows = read_metrics(out)
    assert list(rows[0]) == ["index", "metric", "value", "seconds"]
    for metric in {r["metric"] for r in rows}:
        idx = [int(r["index"]) for r in rows if r["metric"] == metric]
        assert idx == sorted(set(idx)) and idx[-1] == 40
    summary = json.loads((out / "summary.json").read_text())
    assert summary["evaluation"]["exploitability"] == pytest.approx(
        float([r for r in rows if r["metric"] == "exploitability"][-1]["value"]), abs=1e-15)
    policy, game = load_policy(out / "policy.json")
    assert isinstance(game, RadarGame) and game.pulses == 1
    assert load_config(out / "config.yaml") == load_config(tmp_path / "cfg.yaml")


def test_wall_clock_column_is_opt_in(tmp_path):
    out = run_experiment(write(tmp_path, "cfg.yaml", TABULAR + "record_seconds: true\n"), tmp_path / "run")
    assert all(r["seconds"] for r in read_metrics(out))


def test_network_policy_file_reloads(tmp_path):
    out = run_experiment(write(tmp_path, "cfg.yaml", DEEP), tmp_path / "run")
    policy, game = load_policy(out / "policy.json")
    s = game.new_initial_state()
    assert policy.action_probabilities(s).sum() == pytest.approx(1.0)


def test_export_round_trip(tmp_path):
    out = run_experiment(write(tmp_path, "cfg.yaml", DEEP), tmp_path / "run")
    export(out / "policy.json", tmp_path / "table.json")
    net, game = load_policy(out / "policy.json")
    table, _ = load_policy(tmp_path / "table.json")
    assert len(table) == 2
    for key, probs in table.table.items():
        state = game.new_initial_state() if key.player == RADAR else game.new_initial_state().apply_action(0)
        np.testing.assert_allclose(probs, net.action_probabilities(state), rtol=0, atol=1e-12)
    # exporting a tabular dump again is a fixed point
    export(tmp_path / "table.json", tmp_path / "again.json")
    assert (tmp_path / "again.json").read_bytes() == (tmp_path / "table.json").read_bytes()


def test_export_to_unwritable_path_fails(tmp_path):
    out = run_experiment(write(tmp_path, "cfg.yaml", TABULAR), tmp_path / "run")
    with pytest.raises(OSError):
        export(out / "policy.json", tmp_path / "missing" / "dir" / "p.json")


def test_render_board():
    cfg = parse_config("solver: {kind: tabular_cfr}\n")
    assert set(render(cfg, "").replace("radar", "").replace("jammer", "")) <= set(".|f1234 \n")
    assert "?" in render(cfg, "111 Ra 123")
    assert "?" not in render(cfg, "111 Ra 123", RADAR)


# -- case studies ------------------------------------------------------------------------


def test_case_study_rejects_bad_budget_and_case():
    cfg = parse_config(TABULAR)
    with pytest.raises(ValueError, match="budget"):
        run_case_study("a", cfg, budget=0)
    with pytest.raises(ValueError, match="case"):
        run_case_study("e", cfg)


def test_probe_states_are_jammer_decisions():
    for case, history in PROBE_HISTORIES.items():
        game = RadarGame(scenario=f"case_{case}")
        state = game.parse_history(history)
        assert state.current_player() == JAMMER and state.round == 1


def test_tabular_case_study_reports_probe(tmp_path):
    cfg = parse_config(TABULAR.replace("pulses: 1", "pulses: 2"))
    result = run_case_study("a", cfg, budget=20)
    summary = result.summary()
    assert set(summary["probe"]["distribution"]) == {"S1", "S2", "S3", "Ra", "Ba"}
    assert sum(summary["probe"]["distribution"].values()) == pytest.approx(1.0)
    # the trained jammer lowers PD against the scenario radar
    assert result.utility <= result.baseline
    out = write_case_study(tmp_path / "case", cfg, result, budget=20)
    assert json.loads((out / "summary.json").read_text())["case_study"]["case"] == "a"


def test_case_d_jammer_is_only_react():
    cfg = parse_config(DQN)
    result = run_case_study("d", cfg, budget=32)
    game = RadarGame(GameConfig(pulses=2, scenario="case_d"))
    hist = np.random.default_rng(0).integers(27, size=(50, 1))
    probs = batch_probabilities(result.policy, game, hist, JAMMER)
    expected = np.zeros((50, 5))
    expected[:, game.react_id] = 1.0
    np.testing.assert_array_equal(probs, expected)
    assert result.summary()["probe"] is None
    assert eval_matchup(result.policy, result.policy, game).value == pytest.approx(result.utility, abs=1e-15)
