"""Command-line entry point: ``radarjam <verb> ...``.

Every verb exits 0 on success and prints a single ``radarjam: error: ...``
line with a nonzero status otherwise (2 for bad input, 1 for failures while
solving or evaluating).
"""

from __future__ import annotations

import argparse
import json
import sys

from ..cfr import exploitability
from ..efg import TreeTooLargeError
from ..evaluate import NotEnumerableError, eval_matchup
from ..game import ScenarioPolicy
from ..policy import UniformPolicy, load_policy
from .config import ConfigError, load_config
from .runner import SolverFailure, export, render, run_case_study, run_experiment, write_case_study

USAGE_ERROR, RUN_ERROR = 2, 1


def _policy_arg(text: str, game):
    """A policy file, or one of the built-ins ``uniform`` / ``scenario``."""
    if text == "uniform":
        return UniformPolicy()
    if text == "scenario":
        return ScenarioPolicy(game)
    policy, _ = load_policy(text, game)
    return policy


def _cmd_solve(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.model_copy(update={"seed": args.seed})
    out = run_experiment(config, args.out)
    print(out)
    return 0


def _cmd_exploitability(args) -> int:
    config = load_config(args.config)
    game = config.build_game()
    policy = _policy_arg(args.policy, game)
    print(repr(exploitability(game, policy)))
    return 0


def _cmd_eval(args) -> int:
    config = load_config(args.config)
    game = config.build_game()
    a, b = _policy_arg(args.policy_a, game), _policy_arg(args.policy_b, game)
    mode = args.mode or config.evaluation.mode
    episodes = args.episodes or config.evaluation.episodes
    result = eval_matchup(a, b, game, mode, episodes, config.seed)
    print(json.dumps(result.as_dict(), sort_keys=True))
    return 0


def _cmd_case(args) -> int:
    config = load_config(args.config)
    result = run_case_study(args.case, config, args.budget)
    if args.out:
        write_case_study(args.out, config, result, args.budget)
    print(json.dumps(result.summary(), sort_keys=True))
    return 0


def _cmd_render(args) -> int:
    config = load_config(args.config)
    player = {"radar": 0, "jammer": 1, None: None}[args.player]
    print(render(config, args.history, player))
    return 0


def _cmd_export(args) -> int:
    export(args.policy, args.path)
    print(args.path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radarjam", description="Radar/jammer game solver laboratory.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("solve", help="run the configured solver and write a run directory")
    p.add_argument("config")
    p.add_argument("--out", help="run directory (default: output_dir from the config)")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("exploitability", help="exact exploitability of a policy file")
    p.add_argument("config")
    p.add_argument("policy")
    p.set_defaults(func=_cmd_exploitability)

    p = sub.add_parser("eval", help="expected radar utility of policy A (radar) against policy B (jammer)")
    p.add_argument("config")
    p.add_argument("policy_a")
    p.add_argument("policy_b")
    p.add_argument("--mode", choices=("exact", "sampled"))
    p.add_argument("--episodes", type=int)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("case", help="train one side of a scenario against its environment player")
    p.add_argument("case", choices=("a", "b", "c", "d"))
    p.add_argument("config")
    p.add_argument("--budget", type=int, help="iterations (CFR solvers) or episodes (DQN)")
    p.add_argument("--out", help="also write a run directory here")
    p.set_defaults(func=_cmd_case)

    p = sub.add_parser("render", help="print the board for a history such as '111 Ra 123'")
    p.add_argument("config")
    p.add_argument("history")
    p.add_argument("--player", choices=("radar", "jammer"))
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("export", help="rewrite a policy file as a tabular dump")
    p.add_argument("policy")
    p.add_argument("path")
    p.set_defaults(func=_cmd_export)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError, PermissionError, json.JSONDecodeError) as exc:
        print(f"radarjam: error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (SolverFailure, NotEnumerableError, TreeTooLargeError) as exc:
        print(f"radarjam: error: {exc}", file=sys.stderr)
        return RUN_ERROR
    except (ValueError, KeyError, TypeError) as exc:
        print(f"radarjam: error: {exc}", file=sys.stderr)
        return USAGE_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
