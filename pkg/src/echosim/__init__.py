"""Agent-based simulation of echo-chamber formation with pluggable opinion engines."""

__version__ = "0.1.0"

from .engines import EngineKind, EquationEngine, EquationParams, make_engine
from .graph import Post, Screen, SocialGraph, UserState, build_screen, neighbors_in, recent_context
from .llm import LlmEngine, MockEngine, parse_response
from .simulation import RunResult, SimConfig, StepEvent, run

__all__ = [
    "EngineKind", "EquationEngine", "EquationParams", "make_engine",
    "Post", "Screen", "SocialGraph", "UserState", "build_screen", "neighbors_in",
    "recent_context", "LlmEngine", "MockEngine", "parse_response",
    "RunResult", "SimConfig", "StepEvent", "run",
]
