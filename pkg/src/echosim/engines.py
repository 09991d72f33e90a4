"""Opinion engines: influence ``f``, compatibility ``g`` and post generation.

Every engine works on opinions quantised to 1e-6 so that an engine which
routes numbers through text (the mock engine) can reproduce the equation
engine bit for bit.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

from .graph import Post, Screen, UserState, clamp, quantize, recent_context

log = logging.getLogger(__name__)

MAX_INFLUENCE = 2.0


class EngineKind(str, enum.Enum):
    EQUATION = "equation"
    MOCK = "mock"
    LLM = "llm"


@dataclass(frozen=True)
class EquationParams:
    mu: float = 0.5
    epsilon: float = 0.4

    def __post_init__(self):
        if not 0.0 < self.mu <= 1.0:
            raise ValueError("mu must lie in (0, 1]")
        if not 0.0 < self.epsilon <= 2.0:
            raise ValueError("epsilon must lie in (0, 2]")


@dataclass(frozen=True)
class Context:
    """What an engine may know about a user: id, current opinion, recent posts."""
    user: int
    opinion: float
    posts: tuple[Post, ...] = ()


def context_of(user: UserState, window: int) -> Context:
    return Context(user.id, user.opinion, tuple(recent_context(user, window)))


def clip_influence(value: float) -> float:
    if abs(value) > MAX_INFLUENCE:
        log.warning("influence %.6f clipped to +/-%.1f", value, MAX_INFLUENCE)
        return MAX_INFLUENCE if value > 0 else -MAX_INFLUENCE
    return value


def stance_words(stance: float) -> str:
    if stance <= -0.6:
        return "strongly opposed"
    if stance <= -0.2:
        return "somewhat opposed"
    if stance < 0.2:
        return "undecided"
    if stance < 0.6:
        return "somewhat in favor"
    return "strongly in favor"


@dataclass
class EngineStats:
    calls: int = 0
    clean: int = 0
    recovered: int = 0
    failed: int = 0
    fallbacks: int = 0

    @property
    def failed_fraction(self) -> float:
        return self.failed / self.calls if self.calls else 0.0


class EquationEngine:
    """Bounded-confidence DeGroot baseline.

    ``f(O_j, O_i) = mu * (O_j - O_i)`` when ``|O_j - O_i| <= epsilon``,
    otherwise 0, and ``g = 1 - |O_i - O_j| / 2``.
    """

    kind = EngineKind.EQUATION

    def __init__(self, params: EquationParams = EquationParams(), history_window: int = 10):
        self.params = params
        self.history_window = history_window
        self.stats = EngineStats()

    @property
    def fallback_count(self) -> int:
        return self.stats.fallbacks

    # --- pairwise primitives -------------------------------------------------
    def influence(self, o_j: float, o_i: float, c_j: Optional[Context] = None,
                  c_i: Optional[Context] = None) -> float:
        gap = o_j - o_i
        if abs(gap) > self.params.epsilon:
            return 0.0
        return quantize(self.params.mu * gap)

    def compatibility(self, o_i: float, o_j: float, c_i: Optional[Context] = None,
                      c_j: Optional[Context] = None) -> float:
        return quantize(1.0 - abs(o_i - o_j) / 2.0)

    # --- user-level operations -----------------------------------------------
    def context(self, user: UserState) -> Context:
        return context_of(user, self.history_window)

    def user_compatibility(self, i: UserState, j: UserState) -> float:
        return self.compatibility(i.opinion, j.opinion, self.context(i), self.context(j))

    def update_opinion(self, i: UserState, neighbor_states: Sequence[UserState]) -> float:
        if not neighbor_states:
            return i.opinion
        ci = self.context(i)
        total = 0.0
        for j in neighbor_states:
            total += self.influence(j.opinion, i.opinion, self.context(j), ci)
        return quantize(clamp(i.opinion + total / len(neighbor_states)))

    def opinion_from_stances(self, o_i: float, stances: Sequence[float]) -> float:
        """Apply the update rule treating each stance as one neighbour."""
        if not stances:
            return o_i
        total = 0.0
        for s in stances:
            total += self.influence(s, o_i)
        return quantize(clamp(o_i + total / len(stances)))

    def generate_post(self, i: UserState, screen: Screen, step: int, rng=None,
                      neighbor_states: Sequence[UserState] = ()) -> Post:
        stance = self.opinion_from_stances(i.opinion, screen.stances())
        return self.synthesize_post(i, stance, step)

    def synthesize_post(self, i: UserState, stance: float, step: int) -> Post:
        return Post(i.id, step, f"stance update {stance:+.6f}", stance)


def make_engine(kind, params: EquationParams = EquationParams(), history_window: int = 10,
                **llm_kwargs):
    """Build an engine by kind; LLM options are forwarded to :class:`LlmEngine`."""
    kind = EngineKind(kind)
    if kind is EngineKind.EQUATION:
        return EquationEngine(params, history_window)
    from .llm import LlmEngine, MockEngine

    if kind is EngineKind.MOCK:
        return MockEngine(params, history_window=history_window)
    return LlmEngine(params=params, history_window=history_window, **llm_kwargs)
