"""Asynchronous step loop: pick a user, show a screen, update, rewire."""

from __future__ import annotations

import dataclasses
import enum
import json
import logging
import random
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, TextIO

from .engines import EngineKind, EquationParams
from .graph import Post, SocialGraph, build_screen, quantize

log = logging.getLogger(__name__)

CANDIDATE_POOL = 10
FOF_SLOTS = 5


@dataclass
class SimConfig:
    seed: int = 0
    max_steps: int = 2000
    screen_size: int = 10
    history_window: int = 10
    rec_fraction: float = 0.25
    q_unfollow: float = 0.3
    paired_rewiring: bool = True
    epsilon: float = 0.4
    mu: float = 0.5
    engine: str = "mock"
    update_mode: str = "generative"
    stability_delta: float = 0.01
    stability_window: int = 100

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        for name in ("screen_size", "history_window", "stability_window"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("rec_fraction", "q_unfollow"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.update_mode not in ("generative", "pairwise"):
            raise ValueError("update_mode must be 'generative' or 'pairwise'")
        EngineKind(self.engine)
        self.equation_params  # validates mu / epsilon

    @property
    def equation_params(self) -> EquationParams:
        return EquationParams(mu=self.mu, epsilon=self.epsilon)


@dataclass
class StepEvent:
    step: int
    actor: int
    new_post: Post
    unfollowed: list[int]
    followed: list[int]
    opinion_before: float
    opinion_after: float
    screen_size: int = 0

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["new_post"] = self.new_post.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StepEvent":
        d = dict(d)
        d["new_post"] = Post.from_dict(d["new_post"])
        return cls(**d)


class StopReason(str, enum.Enum):
    MAX_STEPS = "max_steps"
    STABILIZED = "stabilized"
    ABORTED = "aborted"


@dataclass
class RunResult:
    final_graph: SocialGraph
    events: list[StepEvent]
    stopped_reason: StopReason
    fallback_count: int = 0
    error: Optional[str] = None


@dataclass
class SimState:
    graph: SocialGraph
    rng: random.Random
    t: int = 0

    @classmethod
    def start(cls, initial: SocialGraph, seed: int) -> "SimState":
        g = initial.copy()
        for u in g.users:
            u.opinion = quantize(u.opinion)
        return cls(g, random.Random(seed))


def _follow_candidates(g: SocialGraph, actor: int, excluded: set[int],
                       rng: random.Random) -> list[int]:
    """Up to 5 friends-of-friends, topped up with uniform non-neighbours."""
    friends = g.in_set(actor)
    fof = set()
    for j in friends:
        fof.update(g.in_set(j))
    fof -= excluded
    fof -= friends
    fof.discard(actor)
    pool = rng.sample(sorted(fof), min(FOF_SLOTS, len(fof)))
    need = CANDIDATE_POOL - len(pool)
    if need > 0:
        taken = set(pool)
        rest = [k for k in range(g.n)
                if k != actor and k not in friends and k not in excluded and k not in taken]
        pool += rng.sample(rest, min(need, len(rest)))
    return pool


def _weighted_pick(items: list[int], weights: list[float], rng: random.Random) -> int:
    total = sum(weights)
    if total <= 0:
        return items[rng.randrange(len(items))]
    r = rng.random() * total
    acc = 0.0
    for item, w in zip(items, weights):
        acc += w
        if r < acc:
            return item
    return items[-1]


def rewire(state: SimState, actor: int, engine, config: SimConfig) -> tuple[list[int], list[int]]:
    """Unfollow discordant friends; follow like-minded candidates.

    Each friend ``j`` is dropped with probability ``q * (1 - g(actor, j))``.
    In paired mode every drop is matched by exactly one follow drawn from a
    candidate pool with weights ``g``; a drop with no candidate available is
    cancelled so the edge count never changes.
    """
    g, rng = state.graph, state.rng
    me = g.users[actor]
    q = config.q_unfollow
    unfollowed: list[int] = []
    followed: list[int] = []
    for j in sorted(g.in_set(actor)):
        compat = engine.user_compatibility(me, g.users[j])
        if not rng.random() < q * (1.0 - compat):
            continue
        if not config.paired_rewiring:
            unfollowed.append(j)
            continue
        excluded = set(unfollowed)
        excluded.add(j)
        pool = _follow_candidates(g, actor, excluded, rng)
        if not pool:
            continue
        weights = [engine.user_compatibility(me, g.users[k]) for k in pool]
        k = _weighted_pick(pool, weights, rng)
        g.remove_edge(j, actor)
        g.add_edge(k, actor)
        unfollowed.append(j)
        followed.append(k)

    if not config.paired_rewiring:
        for j in unfollowed:
            g.remove_edge(j, actor)
        pool = _follow_candidates(g, actor, set(unfollowed), rng)
        for k in pool:
            if rng.random() < q * engine.user_compatibility(me, g.users[k]):
                g.add_edge(k, actor)
                followed.append(k)
    return unfollowed, followed


def step(state: SimState, config: SimConfig, engine) -> StepEvent:
    g, rng = state.graph, state.rng
    if g.n == 0:
        raise ValueError("graph has no users")
    state.t += 1
    actor = rng.randrange(g.n)
    me = g.users[actor]
    screen = build_screen(g, actor, config.screen_size, config.rec_fraction, rng)
    neighbors = [g.users[j] for j in sorted(g.in_set(actor))]
    before = me.opinion
    if config.update_mode == "generative":
        post = engine.generate_post(me, screen, state.t, rng, neighbors)
    else:
        post = engine.synthesize_post(me, engine.update_opinion(me, neighbors), state.t)
    me.opinion = post.stance
    unfollowed, followed = rewire(state, actor, engine, config)
    me.append_post(post)
    return StepEvent(state.t, actor, post, unfollowed, followed, before, me.opinion, len(screen))


def run(initial: SocialGraph, config: SimConfig, engine,
        on_event: Optional[Callable[[StepEvent, SimState], None]] = None) -> RunResult:
    """Step until ``max_steps`` or until opinions and edges have been still
    for ``stability_window`` consecutive steps. Transport failures end the
    run with ``StopReason.ABORTED``; events so far are kept."""
    from .llm import ApiError, TransportError

    state = SimState.start(initial, config.seed)
    events: list[StepEvent] = []
    quiet = 0
    reason = StopReason.MAX_STEPS
    error = None
    while state.t < config.max_steps:
        try:
            ev = step(state, config, engine)
        except (TransportError, ApiError) as exc:
            reason, error = StopReason.ABORTED, str(exc)
            log.error("run aborted at step %d: %s", state.t, exc)
            break
        events.append(ev)
        if on_event is not None:
            on_event(ev, state)
        still = (abs(ev.opinion_after - ev.opinion_before) < config.stability_delta
                 and not ev.unfollowed and not ev.followed)
        quiet = quiet + 1 if still else 0
        if quiet >= config.stability_window:
            reason = StopReason.STABILIZED
            break
    return RunResult(state.graph, events, reason, engine.fallback_count, error)


def replay(initial: SocialGraph, events: Iterable[StepEvent]) -> SocialGraph:
    """Rebuild the final graph from the initial snapshot and an event log."""
    g = initial.copy()
    for u in g.users:
        u.opinion = quantize(u.opinion)
    for ev in events:
        for j in ev.unfollowed:
            g.remove_edge(j, ev.actor)
        for k in ev.followed:
            g.add_edge(k, ev.actor)
        g.users[ev.actor].opinion = ev.opinion_after
        g.users[ev.actor].append_post(ev.new_post)
    return g


def write_events(events: Iterable[StepEvent], fh: TextIO) -> None:
    for ev in events:
        fh.write(json.dumps(ev.to_dict(), sort_keys=True) + "\n")


def read_events(fh: TextIO) -> list[StepEvent]:
    return [StepEvent.from_dict(json.loads(line)) for line in fh if line.strip()]
