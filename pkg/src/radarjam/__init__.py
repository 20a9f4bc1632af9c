"""Solver laboratory for the multi-round radar-versus-jammer frequency game."""

from .efg import Game, InfoStateKey, State, build_tree
from .game import GameConfig, RadarGame, Scenario, build_game
from .kuhn import KuhnPoker
from .physics import PhysicsParams

__version__ = "0.1.0"
