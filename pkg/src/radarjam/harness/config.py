"""Experiment configuration files.

A config is a YAML mapping with four sections; only ``solver.kind`` is
required.  Unknown keys are rejected, and every error names the offending
dotted key together with its line in the file.

.. code-block:: yaml

    seed: 0
    output_dir: runs/example
    record_seconds: false      # wall-clock column in metrics.csv
    game:
      pulses: 2
      subpulses: 3
      frequencies: 3
      scenario: free           # free | case_a | case_b | case_c | case_d
      physics: {}              # any PhysicsParams field
    solver:
      kind: tabular_cfr        # tabular_cfr | deep_cfr | dqn
      iterations: 1000
    evaluation:
      mode: exact              # exact | sampled
      episodes: 100000
"""

from __future__ import annotations

import dataclasses
import os
from typing import Annotated, Any, Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..deep.deep_cfr import DeepCFRConfig
from ..deep.dqn import DQNConfig
from ..game import GameConfig, RadarGame, Scenario
from ..physics import PhysicsParams

_PHYSICS_DEFAULTS = PhysicsParams()


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None, source: str | None = None):
        self.key, self.line, self.source = key, line, source
        where = ""
        if source:
            where = f"{source}:{line}: " if line else f"{source}: "
        elif line:
            where = f"line {line}: "
        super().__init__(f"{where}{key + ': ' if key else ''}{message}")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhysicsSection(_Strict):
    rcs_per_freq: tuple[float, ...] = _PHYSICS_DEFAULTS.rcs_per_freq
    pfa: float = _PHYSICS_DEFAULTS.pfa
    subpulse_bandwidth: float = _PHYSICS_DEFAULTS.subpulse_bandwidth
    noise_bandwidth: float = _PHYSICS_DEFAULTS.noise_bandwidth
    subpulse_power: float = _PHYSICS_DEFAULTS.subpulse_power
    radar_gain: float = _PHYSICS_DEFAULTS.radar_gain
    range: float = _PHYSICS_DEFAULTS.range
    jammer_power: float = _PHYSICS_DEFAULTS.jammer_power
    jammer_gain: float = _PHYSICS_DEFAULTS.jammer_gain
    wavelength: float = _PHYSICS_DEFAULTS.wavelength
    system_temperature: float = _PHYSICS_DEFAULTS.system_temperature
    spot_bandwidth: float = _PHYSICS_DEFAULTS.spot_bandwidth


class GameSection(_Strict):
    name: Literal["radar", "kuhn"] = "radar"
    pulses: int = 4
    subpulses: int = 3
    frequencies: int = 3
    scenario: Scenario = Scenario.FREE
    physics: PhysicsSection = PhysicsSection()

    def build(self):
        if self.name == "kuhn":
            from ..kuhn import KuhnPoker

            return KuhnPoker()
        try:
            physics = PhysicsParams(**self.physics.model_dump())
        except ValueError as exc:
            raise ValueError(f"physics.{exc}") from exc
        return RadarGame(GameConfig(self.pulses, self.subpulses, self.frequencies, self.scenario, physics))


class TabularCFRSection(_Strict):
    kind: Literal["tabular_cfr"]
    iterations: int = Field(1000, ge=0)
    log_every: int = Field(10, ge=1)


def _defaults(cls) -> dict[str, Any]:
    return {f.name: f.default for f in dataclasses.fields(cls) if f.name != "seed"}


_DEEP = _defaults(DeepCFRConfig)
_DQN = _defaults(DQNConfig)


class DeepCFRSection(_Strict):
    kind: Literal["deep_cfr"]
    iterations: int = Field(_DEEP["iterations"], ge=0)
    traversals: int = Field(_DEEP["traversals"], gt=0)
    advantage_capacity: int = Field(_DEEP["advantage_capacity"], gt=0)
    strategy_capacity: int = Field(_DEEP["strategy_capacity"], gt=0)
    hidden: tuple[int, ...] = _DEEP["hidden"]
    advantage_steps: int = Field(_DEEP["advantage_steps"], gt=0)
    strategy_steps: int = Field(_DEEP["strategy_steps"], gt=0)
    batch_size: int = Field(_DEEP["batch_size"], gt=0)
    advantage_lr: float = Field(_DEEP["advantage_lr"], ge=0)
    strategy_lr: float = Field(_DEEP["strategy_lr"], ge=0)
    optimizer: Literal["sgd", "adam"] = _DEEP["optimizer"]
    exploitability_every: int = Field(0, ge=0)

    def to_config(self, seed: int) -> DeepCFRConfig:
        fields = self.model_dump(exclude={"kind", "exploitability_every"})
        return DeepCFRConfig(seed=seed, **fields)


class DQNSection(_Strict):
    kind: Literal["dqn"]
    episodes: int = Field(_DQN["episodes"], ge=0)
    num_envs: int = Field(_DQN["num_envs"], gt=0)
    hidden: tuple[int, ...] = _DQN["hidden"]
    lr: float = Field(_DQN["lr"], ge=0)
    optimizer: Literal["sgd", "adam"] = _DQN["optimizer"]
    batch_size: int = Field(_DQN["batch_size"], gt=0)
    replay_capacity: int = Field(_DQN["replay_capacity"], gt=0)
    target_sync: int = Field(_DQN["target_sync"], gt=0)
    updates_per_step: int = Field(_DQN["updates_per_step"], ge=0)
    epsilon_start: float = Field(_DQN["epsilon_start"], ge=0, le=1)
    epsilon_end: float = Field(_DQN["epsilon_end"], ge=0, le=1)
    epsilon_decay: float = Field(_DQN["epsilon_decay"], ge=0, le=1)
    gamma: float = Field(_DQN["gamma"], ge=0, le=1)
    opponent: Literal["self", "uniform", "scenario"] = "self"
    learner: Literal[0, 1] = 0

    def to_config(self, seed: int) -> DQNConfig:
        return DQNConfig(seed=seed, **self.model_dump(exclude={"kind", "opponent", "learner"}))


Solver = Annotated[Union[TabularCFRSection, DeepCFRSection, DQNSection], Field(discriminator="kind")]


class EvaluationSection(_Strict):
    mode: Literal["exact", "sampled"] = "exact"
    episodes: int = Field(100_000, ge=2)


class ExperimentConfig(_Strict):
    seed: int = 0
    output_dir: str = "runs/experiment"
    record_seconds: bool = False
    game: GameSection = GameSection()
    solver: Solver
    evaluation: EvaluationSection = EvaluationSection()

    @field_validator("seed")
    @classmethod
    def _seed_nonnegative(cls, v: int) -> int:
        if v < 0:
            raise ValueError("must be nonnegative")
        return v

    def build_game(self):
        return self.game.build()

    def snapshot(self) -> str:
        data = self.model_dump(mode="json")
        return yaml.safe_dump(data, sort_keys=False, default_flow_style=None)


# -- loading with line numbers ------------------------------------------------


def _line_of(root: yaml.Node | None, loc: tuple) -> int | None:
    """Line of the deepest YAML node on the path ``loc`` (1-based)."""
    node, line = root, None
    for part in loc:
        if not isinstance(node, yaml.MappingNode):
            break
        for key_node, value_node in node.value:
            if key_node.value == str(part):
                line = key_node.start_mark.line + 1
                node = value_node
                break
        # parts that are not keys (union tags, list indices) are skipped
    return line


def _dotted(loc: tuple, solver_tags: set[str]) -> str:
    parts = [str(p) for p in loc if not (isinstance(p, str) and p in solver_tags)]
    return ".".join(parts)


_SOLVER_TAGS = {"tabular_cfr", "deep_cfr", "dqn"}


def parse_config(text: str, source: str | None = None) -> ExperimentConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"invalid YAML: {getattr(exc, 'problem', exc)}", line=mark.line + 1 if mark else None,
                          source=source) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1, source=source)
    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        err = exc.errors()[0]
        loc = tuple(err["loc"])
        key = _dotted(loc, _SOLVER_TAGS) or "<root>"
        if err["type"] == "extra_forbidden":
            message = "unknown key"
        elif err["type"] == "missing":
            message = "required key is missing"
        else:
            message = err["msg"]
        raise ConfigError(message, key=key, line=_line_of(root, loc), source=source) from exc
    if config.game.name == "radar":
        try:
            config.game.build()
        except ValueError as exc:
            field = str(exc).split(":", 1)[0]
            line = _line_of(root, ("game", *field.split(".")))
            raise ConfigError(str(exc).split(": ", 1)[-1], key=f"game.{field}", line=line, source=source) from exc
    return config


def load_config(path: str | os.PathLike) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), source=os.fspath(path))
