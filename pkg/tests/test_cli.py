import json

import pytest

from radarjam.harness.cli import main

CONFIG = """\
seed: 0
game:
  pulses: 1
solver:
  kind: tabular_cfr
  iterations: 30
evaluation:
  episodes: 500
"""


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "cfg.yaml").write_text(CONFIG)
    return tmp_path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_every_verb_succeeds(workdir, capsys):
    cfg = workdir / "cfg.yaml"
    code, out, _ = run(capsys, "solve", cfg, "--out", workdir / "run")
    assert code == 0 and out.strip() == str(workdir / "run")
    policy = workdir / "run" / "policy.json"

    code, out, _ = run(capsys, "exploitability", cfg, policy)
    assert code == 0 and float(out) >= 0

    code, out, _ = run(capsys, "eval", cfg, policy, "uniform")
    assert code == 0 and json.loads(out)["mode"] == "exact"
    code, out, _ = run(capsys, "eval", cfg, "uniform", policy, "--mode", "sampled")
    result = json.loads(out)
    assert code == 0 and result["episodes"] == 500 and result["stderr"] > 0

    code, out, _ = run(capsys, "case", "c", cfg, "--budget", "5", "--out", workdir / "case")
    assert code == 0 and "margin" in json.loads(out)
    assert (workdir / "case" / "summary.json").exists()

    code, out, _ = run(capsys, "render", cfg, "123 Ba", "--player", "radar")
    assert code == 0 and "radar" in out

    code, out, _ = run(capsys, "export", policy, workdir / "table.json")
    assert code == 0 and (workdir / "table.json").exists()


def test_solve_seed_override_is_recorded(workdir, capsys):
    code, _, _ = run(capsys, "solve", workdir / "cfg.yaml", "--out", workdir / "run", "--seed", "7")
    assert code == 0
    assert "seed: 7" in (workdir / "run" / "config.yaml").read_text()


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "{dir}/missing.yaml"],
        ["solve", "{dir}/bad.yaml"],
        ["render", "{dir}/cfg.yaml", "12 Ra"],
        ["exploitability", "{dir}/cfg.yaml", "{dir}/cfg.yaml"],
        ["eval", "{dir}/cfg.yaml", "uniform", "uniform", "--episodes", "1", "--mode", "sampled"],
    ],
    ids=["missing-file", "unknown-key", "bad-history", "not-a-policy", "too-few-episodes"],
)
def test_bad_input_exits_with_one_error_line(workdir, capsys, argv):
    (workdir / "bad.yaml").write_text("solver:\n  kind: dqn\n  alpha: 1\n")
    code, out, err = run(capsys, *[a.format(dir=workdir) for a in argv])
    assert code == 2 and out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1 and lines[0].startswith("radarjam: error: ")


def test_unknown_key_message_names_key_and_line(workdir, capsys):
    (workdir / "bad.yaml").write_text("solver:\n  kind: dqn\n  alpha: 1\n")
    _, _, err = run(capsys, "solve", workdir / "bad.yaml")
    assert err.strip().endswith("bad.yaml:3: solver.alpha: unknown key")


def test_oversized_exact_evaluation_is_a_run_error(tmp_path, capsys):
    (tmp_path / "big.yaml").write_text("game: {pulses: 4}\nsolver: {kind: tabular_cfr}\n")
    code, _, err = run(capsys, "exploitability", tmp_path / "big.yaml", "uniform")
    assert code == 1 and err.startswith("radarjam: error: ")


def test_argparse_rejects_unknown_verb(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
