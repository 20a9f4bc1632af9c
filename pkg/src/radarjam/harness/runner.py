"""Experiment execution and artifact writing.

A run directory holds

``config.yaml``
    the fully resolved configuration,
``metrics.csv``
    ``index,metric,value,seconds`` rows (``seconds`` stays empty unless
    ``record_seconds`` is set, so that identical runs are byte-identical),
``policy.json``
    the final policy dump,
``summary.json``
    final metrics and evaluation results,
``timing.json``
    wall-clock durations, kept apart from the deterministic files.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import os
import time
from pathlib import Path

import numpy as np

from ..cfr import CFRSolver, exploitability, get_tree, matrix_exploitability
from ..deep.common import NetworkPolicy
from ..deep.deep_cfr import deep_cfr_solve
from ..deep.dqn import dqn_train
from ..efg import Game, TreeTooLargeError
from ..evaluate import NotEnumerableError, eval_matchup
from ..game import JAMMER, RADAR, RadarGame, Scenario, ScenarioPolicy
from ..policy import UniformPolicy, dump_json, export_policy, policy_for_player, tabular_to_dict
from .config import DeepCFRSection, DQNSection, ExperimentConfig, TabularCFRSection, load_config


class SolverFailure(RuntimeError):
    pass


@dataclasses.dataclass
class RunOutput:
    policy: object
    metrics: list[tuple[int, str, float, float | None]]
    summary: dict
    seconds: float


def _enumerable_tree(game: Game):
    try:
        return get_tree(game)
    except TreeTooLargeError:
        return None


def _fixed_players(game: Game) -> dict[int, object]:
    """Environment players of the case-study scenarios."""
    if not isinstance(game, RadarGame):
        return {}
    sc = game.config.scenario
    if sc in (Scenario.CASE_A, Scenario.CASE_B):
        return {RADAR: ScenarioPolicy(game)}
    if sc in (Scenario.CASE_C, Scenario.CASE_D):
        return {JAMMER: UniformPolicy()}
    return {}


def solve(config: ExperimentConfig, game: Game | None = None, fixed: dict[int, object] | None = None) -> RunOutput:
    """Run the configured solver on ``game`` (built from the config if omitted)."""
    game = game if game is not None else config.build_game()
    fixed = {} if fixed is None else fixed
    solver = config.solver
    start = time.perf_counter()
    metrics: list[tuple[int, str, float, float | None]] = []
    summary: dict = {"solver": solver.kind, "game": repr(game)}

    def clock() -> float | None:
        return time.perf_counter() - start if config.record_seconds else None

    try:
        if isinstance(solver, TabularCFRSection):
            cfr = CFRSolver(game, fixed=fixed)
            for it in range(1, solver.iterations + 1):
                cfr.iterate()
                if it % solver.log_every == 0 or it == solver.iterations:
                    sigma = cfr.average_strategy()
                    metrics.append((it, "exploitability", matrix_exploitability(cfr.tree, sigma), clock()))
                    metrics.append((it, "value_p0", float(cfr.tree.profile_value(sigma)[0]), clock()))
            policy = cfr.average_policy()
        elif isinstance(solver, DeepCFRSection):
            result = deep_cfr_solve(game, solver.to_config(config.seed), fixed=fixed,
                                    exploitability_every=solver.exploitability_every)
            metrics.extend((i, m, float(v), None) for i, m, v in result.metrics)
            policy = result.policy
        elif isinstance(solver, DQNSection):
            opponent = None
            learner = solver.learner
            if fixed:
                (env_player, opponent), = fixed.items()
                learner = 1 - env_player
            elif solver.opponent == "uniform":
                opponent = UniformPolicy()
            elif solver.opponent == "scenario":
                opponent = ScenarioPolicy(game)
            result = dqn_train(game, solver.to_config(config.seed), opponent=opponent, learner=learner)
            metrics.extend((i, m, float(v), None) for i, m, v in result.metrics)
            policy = result.policy
        else:  # pragma: no cover - the config union is closed
            raise SolverFailure(f"unsupported solver {solver.kind!r}")
    except (FloatingPointError, ValueError) as exc:
        raise SolverFailure(f"{solver.kind} on {game!r} failed: {exc}") from exc

    metrics = _sorted_metrics(metrics)
    return RunOutput(policy, metrics, summary, time.perf_counter() - start)


def _sorted_metrics(rows):
    # stable per-metric order keeps each metric's index increasing
    return sorted(rows, key=lambda r: (r[1], r[0]))


def metrics_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "metric", "value", "seconds"])
    for index, metric, value, seconds in rows:
        writer.writerow([index, metric, repr(float(value)), "" if seconds is None else f"{seconds:.6f}"])
    return buf.getvalue()


def policy_document(policy, game: Game) -> dict:
    if isinstance(policy, NetworkPolicy):
        return policy.to_dict()
    tree = _enumerable_tree(game)
    legal = None if tree is None else dict(zip(tree.infoset_keys, tree.infoset_legal))
    return tabular_to_dict(policy, game, legal)


def evaluate_run(config: ExperimentConfig, game: Game, policy) -> dict:
    ev = config.evaluation
    out: dict = {}
    tree = _enumerable_tree(game)
    if tree is not None:
        out["exploitability"] = exploitability(game, policy, tree)
    try:
        res = eval_matchup(policy, policy, game, ev.mode, ev.episodes, config.seed)
        out["self_play"] = res.as_dict()
        if isinstance(game, RadarGame):
            out["radar_vs_uniform"] = eval_matchup(policy, UniformPolicy(), game, ev.mode, ev.episodes, config.seed).as_dict()
            out["uniform_vs_jammer"] = eval_matchup(UniformPolicy(), policy, game, ev.mode, ev.episodes, config.seed).as_dict()
    except NotEnumerableError as exc:
        out["evaluation_error"] = str(exc)
    return out


def write_run(out_dir: str | os.PathLike, config: ExperimentConfig, game: Game, run: RunOutput, extra: dict | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.yaml").write_text(config.snapshot(), encoding="utf-8")
    (out / "metrics.csv").write_text(metrics_csv(run.metrics), encoding="ascii")
    dump_json(policy_document(run.policy, game), out / "policy.json")
    summary = dict(run.summary)
    summary.update(extra or {})
    final = {}
    for index, metric, value, _ in run.metrics:
        final[metric] = value
    summary["final_metrics"] = dict(sorted(final.items()))
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n", encoding="ascii")
    (out / "timing.json").write_text(json.dumps({"solve_seconds": run.seconds}) + "\n", encoding="ascii")
    return out


def run_experiment(config_path: str | os.PathLike | ExperimentConfig, output_dir: str | os.PathLike | None = None) -> Path:
    """Load, solve, evaluate and write a run directory; returns its path."""
    config = config_path if isinstance(config_path, ExperimentConfig) else load_config(config_path)
    game = config.build_game()
    run = solve(config, game, _fixed_players(game))
    extra = {"evaluation": evaluate_run(config, game, run.policy)}
    return write_run(output_dir or config.output_dir, config, game, run, extra)


# -- case studies ------------------------------------------------------------

CASES = {"a": Scenario.CASE_A, "b": Scenario.CASE_B, "c": Scenario.CASE_C, "d": Scenario.CASE_D}

# one completed round, then the jammer to act with the radar's move hidden
PROBE_HISTORIES = {"a": "111 Ra 111", "b": "123 Ba 123"}


@dataclasses.dataclass
class CaseStudyResult:
    case: str
    policy: object
    utility: float
    baseline: float
    probe: dict | None
    metrics: list

    def summary(self) -> dict:
        return {
            "case": self.case,
            "utility": self.utility,
            "baseline_utility": self.baseline,
            "margin": self.utility - self.baseline,
            "probe": self.probe,
        }


def case_game(case: str, config: ExperimentConfig) -> RadarGame:
    if case not in CASES:
        raise ValueError(f"case must be one of a, b, c, d; got {case!r}")
    if config.game.name != "radar":
        raise ValueError("case studies need the radar game")
    game_section = config.game.model_copy(update={"scenario": CASES[case]})
    return game_section.build()


def with_budget(config: ExperimentConfig, budget: int | None) -> ExperimentConfig:
    if budget is None:
        return config
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    field = "episodes" if isinstance(config.solver, DQNSection) else "iterations"
    return config.model_copy(update={"solver": config.solver.model_copy(update={field: budget})})


def probe_distribution(game: RadarGame, policy, case: str) -> dict | None:
    history = PROBE_HISTORIES.get(case)
    if history is None:
        return None
    state = game.parse_history(history)
    probs = policy_for_player(policy, JAMMER).action_probabilities(state)
    labels = [game.action_label(JAMMER, a) for a in state.legal_actions()]
    return {
        "history": history,
        "info_state": state.info_state_key().describe(),
        "distribution": {lab: float(p) for lab, p in zip(labels, probs)},
        "argmax": labels[int(np.argmax(probs))],
    }


def run_case_study(case: str, config: ExperimentConfig, budget: int | None = None) -> CaseStudyResult:
    """Train the free side of a scenario against the environment player.

    Cases a/b fix the radar to the scenario policy and train the jammer;
    cases c/d restrict the jammer (uniform over its legal set) and train the
    radar.  Utilities are exact radar PD.
    """
    config = with_budget(config, budget)
    game = case_game(case, config)
    fixed = _fixed_players(game)
    run = solve(config, game, fixed)
    env_player, env_policy = next(iter(fixed.items()))
    if env_player == RADAR:
        utility = eval_matchup(env_policy, run.policy, game).value
        baseline = eval_matchup(env_policy, UniformPolicy(), game).value
    else:
        utility = eval_matchup(run.policy, env_policy, game).value
        baseline = eval_matchup(UniformPolicy(), env_policy, game).value
    return CaseStudyResult(case, run.policy, utility, baseline, probe_distribution(game, run.policy, case), run.metrics)


def write_case_study(out_dir, config: ExperimentConfig, result: CaseStudyResult, budget: int | None = None) -> Path:
    config = with_budget(config, budget)
    game = case_game(result.case, config)
    run = RunOutput(result.policy, result.metrics, {"solver": config.solver.kind, "game": repr(game)}, 0.0)
    return write_run(out_dir, config, game, run, {"case_study": result.summary()})


# -- small verbs ----------------------------------------------------------------


def render(config: ExperimentConfig, history: str, player: int | None = None) -> str:
    game = config.build_game()
    if not isinstance(game, RadarGame):
        raise ValueError("boards exist for the radar game only")
    state = game.parse_history(history)
    if player is None:
        player = state.current_player() if not state.is_terminal() else RADAR
    return state.render(player)


def export(policy_path, out_path, game: Game | None = None) -> None:
    from ..policy import load_policy

    policy, game = load_policy(policy_path, game)
    export_policy(policy, game, out_path)
