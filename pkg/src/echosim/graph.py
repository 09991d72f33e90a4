"""Directed social graph, users, posts and the per-step screen.

An edge ``(j, i)`` means *i follows j*: i receives j's content, so
``j`` is in the incoming neighbour set of ``i``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional

OPINION_DECIMALS = 6
LABELS = ("favor", "neutral", "oppose")


class NotFound(KeyError):
    """Raised when a user id is not present in the graph."""


def quantize(x: float) -> float:
    """Round an opinion-like value to the 1e-6 grid used everywhere."""
    q = round(float(x), OPINION_DECIMALS)
    return q + 0.0  # normalise -0.0


def clamp(x: float, lo: float = -1.0, hi: float = 1.0) -> float:
    return lo if x < lo else hi if x > hi else x


@dataclass(frozen=True)
class Post:
    author: int
    step: int
    text: str
    stance: float
    origin: str = "sim"  # "real" for ingested posts (always step 0)

    def __post_init__(self):
        if not self.text:
            raise ValueError("post text must be non-empty")
        if not -1.0 <= self.stance <= 1.0:
            raise ValueError(f"stance {self.stance} outside [-1, 1]")
        if self.step < 0:
            raise ValueError("step must be non-negative")

    def to_dict(self) -> dict:
        return {"author": self.author, "step": self.step, "text": self.text,
                "stance": self.stance, "origin": self.origin}

    @classmethod
    def from_dict(cls, d: dict) -> "Post":
        return cls(int(d["author"]), int(d["step"]), d["text"], float(d["stance"]),
                   d.get("origin", "sim"))


@dataclass
class UserState:
    id: int
    opinion: float
    history: list[Post] = field(default_factory=list)
    ground_truth_stance: Optional[str] = None
    name: Optional[str] = None

    def __post_init__(self):
        if not -1.0 <= self.opinion <= 1.0:
            raise ValueError(f"opinion {self.opinion} outside [-1, 1]")
        if self.ground_truth_stance is not None and self.ground_truth_stance not in LABELS:
            raise ValueError(f"unknown stance label {self.ground_truth_stance!r}")

    def append_post(self, post: Post) -> None:
        if self.history and post.step < self.history[-1].step:
            raise ValueError("history must be non-decreasing in step")
        self.history.append(post)

    def copy(self) -> "UserState":
        return UserState(self.id, self.opinion, list(self.history),
                         self.ground_truth_stance, self.name)

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "opinion": self.opinion,
                "label": self.ground_truth_stance,
                "history": [p.to_dict() for p in self.history]}

    @classmethod
    def from_dict(cls, d: dict) -> "UserState":
        return cls(int(d["id"]), float(d["opinion"]),
                   [Post.from_dict(p) for p in d.get("history", [])],
                   d.get("label"), d.get("name"))


class SocialGraph:
    """Users indexed ``0..n-1`` plus a set of directed edges.

    Mutation happens only through :meth:`add_edge` / :meth:`remove_edge`,
    which keep the graph free of self-loops and duplicates. Use
    :meth:`copy` to take a snapshot before mutating a shared graph.
    """

    def __init__(self, users: Iterable[UserState] = (), edges: Iterable[tuple[int, int]] = ()):
        self.users: list[UserState] = list(users)
        for idx, u in enumerate(self.users):
            if u.id != idx:
                raise ValueError(f"user at position {idx} has id {u.id}")
        n = len(self.users)
        self._in: list[set[int]] = [set() for _ in range(n)]
        self._out: list[set[int]] = [set() for _ in range(n)]
        self._m = 0
        for s, t in edges:
            if self.has_edge(s, t):
                raise ValueError(f"duplicate edge ({s}, {t})")
            self.add_edge(s, t)

    @property
    def n(self) -> int:
        return len(self.users)

    @property
    def num_edges(self) -> int:
        return self._m

    def _check(self, i: int) -> None:
        if not (isinstance(i, int) and 0 <= i < len(self.users)):
            raise NotFound(i)

    def has_edge(self, source: int, target: int) -> bool:
        self._check(source)
        self._check(target)
        return source in self._in[target]

    def add_edge(self, source: int, target: int) -> None:
        self._check(source)
        self._check(target)
        if source == target:
            raise ValueError("self-loops are not allowed")
        if source in self._in[target]:
            raise ValueError(f"edge ({source}, {target}) already present")
        self._in[target].add(source)
        self._out[source].add(target)
        self._m += 1

    def remove_edge(self, source: int, target: int) -> None:
        if not self.has_edge(source, target):
            raise KeyError((source, target))
        self._in[target].discard(source)
        self._out[source].discard(target)
        self._m -= 1

    def in_set(self, i: int) -> set[int]:
        """Live (not copied) incoming neighbour set; read-only by convention."""
        self._check(i)
        return self._in[i]

    def out_set(self, i: int) -> set[int]:
        self._check(i)
        return self._out[i]

    def edges(self) -> list[tuple[int, int]]:
        return sorted((s, t) for t in range(self.n) for s in self._in[t])

    def opinions(self) -> list[float]:
        return [u.opinion for u in self.users]

    def copy(self) -> "SocialGraph":
        g = SocialGraph([u.copy() for u in self.users])
        g._in = [set(s) for s in self._in]
        g._out = [set(s) for s in self._out]
        g._m = self._m
        return g

    def to_dict(self) -> dict:
        return {"users": [u.to_dict() for u in self.users],
                "edges": [list(e) for e in self.edges()]}

    @classmethod
    def from_dict(cls, d: dict) -> "SocialGraph":
        return cls([UserState.from_dict(u) for u in d["users"]],
                   [tuple(e) for e in d["edges"]])

    def __repr__(self) -> str:
        return f"SocialGraph(n={self.n}, m={self.num_edges})"


def neighbors_in(graph: SocialGraph, i: int) -> set[int]:
    """Users whose content ``i`` receives, i.e. ``{j : (j, i) in edges}``."""
    return set(graph.in_set(i))


def recent_context(user: UserState, window: int) -> list[Post]:
    if window < 1:
        raise ValueError("window must be >= 1")
    return user.history[-window:]


@dataclass(frozen=True)
class Screen:
    viewer: int
    posts: tuple[Post, ...] = ()
    sources: tuple[str, ...] = ()  # parallel to posts: "friend" | "recommended"

    def __len__(self) -> int:
        return len(self.posts)

    def stances(self) -> list[float]:
        return [p.stance for p in self.posts]


def friend_slots(size: int, rec_fraction: float) -> int:
    # round first so that e.g. (1 - 0.3) * 10 does not ceil to 8
    return math.ceil(round((1.0 - rec_fraction) * size, 9))


def build_screen(graph: SocialGraph, viewer: int, size: int, rec_fraction: float,
                 rng: random.Random) -> Screen:
    """Fill a viewer's feed: friends' most recent posts, then recommendations.

    Friend posts are ranked by step (newest first), ties broken by
    ascending author id and then newest-in-history first. Recommended
    slots hold the latest post of uniformly sampled non-neighbours that
    have posted at least once. The viewer's own posts never appear.
    """
    if size < 1:
        raise ValueError("screen size must be >= 1")
    if not 0.0 <= rec_fraction <= 1.0:
        raise ValueError("rec_fraction must lie in [0, 1]")
    friends = graph.in_set(viewer)
    n_friend = friend_slots(size, rec_fraction)
    n_rec = size - n_friend

    pool = []
    for j in friends:
        hist = graph.users[j].history
        start = max(0, len(hist) - n_friend)
        for pos in range(start, len(hist)):
            pool.append((-hist[pos].step, j, -pos, hist[pos]))
    pool.sort(key=lambda t: t[:3])
    posts = [t[3] for t in pool[:n_friend]]
    sources = ["friend"] * len(posts)

    if n_rec > 0:
        candidates = [u.id for u in graph.users
                      if u.id != viewer and u.id not in friends and u.history]
        if candidates:
            picked = rng.sample(candidates, min(n_rec, len(candidates)))
            for k in picked:
                posts.append(graph.users[k].history[-1])
                sources.append("recommended")
    return Screen(viewer, tuple(posts), tuple(sources))
