"""Turn labelled post records into an initial social graph."""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from .graph import LABELS, Post, SocialGraph, UserState

STANCE_VALUE = {"favor": 1.0, "neutral": 0.0, "oppose": -1.0}


class FormatError(ValueError):
    pass


class TooSmall(ValueError):
    pass


@dataclass(frozen=True)
class RawRecord:
    user: str
    timestamp: int
    text: str
    stance_label: str
    retweeted_user: Optional[str] = None

    def __post_init__(self):
        if not self.user:
            raise ValueError("empty user id")
        if self.stance_label not in LABELS:
            raise ValueError(f"unknown stance {self.stance_label!r}")

    @classmethod
    def from_json(cls, obj: dict) -> "RawRecord":
        if not isinstance(obj, dict):
            raise ValueError("record is not an object")
        ts = obj["ts"]
        if isinstance(ts, bool) or not isinstance(ts, int):
            raise ValueError("ts must be an integer")
        text = obj["text"]
        if not isinstance(text, str) or not text.strip():
            raise ValueError("text must be a non-empty string")
        rt = obj.get("rt_user")
        if rt is not None and not isinstance(rt, str):
            raise ValueError("rt_user must be a string")
        return cls(str(obj["user"]), ts, text, obj["stance"], rt or None)

    def to_json(self) -> dict:
        d = {"user": self.user, "ts": self.timestamp, "text": self.text,
             "stance": self.stance_label}
        if self.retweeted_user:
            d["rt_user"] = self.retweeted_user
        return d


@dataclass(frozen=True)
class IngestConfig:
    top_k_users: int = 200
    min_posts: int = 0
    history_cap: int = 10

    def __post_init__(self):
        if self.top_k_users < 1 or self.history_cap < 1 or self.min_posts < 0:
            raise ValueError("invalid ingest configuration")


@dataclass
class Reject:
    line: int
    reason: str
    content: str


def load_records(path) -> tuple[list[RawRecord], list[Reject]]:
    """Parse JSON Lines; bad lines go to the rejects list, never vanish."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from exc
    records, rejects = [], []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(RawRecord.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            rejects.append(Reject(lineno, f"{type(exc).__name__}: {exc}", line[:200]))
    total = len(records) + len(rejects)
    if total and len(rejects) / total > 0.5:
        raise FormatError(f"{path}: {len(rejects)} of {total} lines rejected")
    return records, rejects


def write_rejects(rejects: Iterable[Reject], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in rejects:
            fh.write(json.dumps({"line": r.line, "reason": r.reason, "content": r.content},
                                ensure_ascii=False) + "\n")


def kept_users(records: list[RawRecord], config: IngestConfig) -> list[str]:
    counts = Counter(r.user for r in records)
    ranked = sorted(counts, key=lambda u: (-counts[u], u))
    return [u for u in ranked[:config.top_k_users] if counts[u] >= config.min_posts]


def ground_truth_labels(records: list[RawRecord], kept: Iterable[str]) -> dict[str, str]:
    """Majority stance per user; any tie at the top resolves to neutral."""
    by_user: dict[str, Counter] = defaultdict(Counter)
    for r in records:
        by_user[r.user][r.stance_label] += 1
    out = {}
    for u in kept:
        counts = by_user.get(u)
        if not counts:
            continue
        top = max(counts.values())
        winners = [lab for lab, c in counts.items() if c == top]
        out[u] = winners[0] if len(winners) == 1 else "neutral"
    return out


def read_edges_file(path) -> list[tuple[str, str]]:
    pairs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        follower, followee = (p.strip() for p in line.split(","))
        pairs.append((follower, followee))
    return pairs


def build_network(records: list[RawRecord], config: IngestConfig = IngestConfig(),
                  follows: Iterable[tuple[str, str]] = ()) -> SocialGraph:
    """Keep the most active users and connect them by retweets.

    User ids are assigned in ascending order of the original user name.
    ``(j, i)`` is added when i retweeted j or (from ``follows``) i follows j.
    """
    if not records:
        raise TooSmall("no records")
    kept = sorted(kept_users(records, config))
    if len(kept) < 2:
        raise TooSmall(f"only {len(kept)} user(s) kept")
    index = {u: i for i, u in enumerate(kept)}
    labels = ground_truth_labels(records, kept)

    posts: dict[str, list[tuple[int, int, RawRecord]]] = defaultdict(list)
    edges = set()
    for order, r in enumerate(records):
        if r.user not in index:
            continue
        posts[r.user].append((r.timestamp, order, r))
        j = index.get(r.retweeted_user) if r.retweeted_user else None
        if j is not None and j != index[r.user]:
            edges.add((j, index[r.user]))
    for follower, followee in follows:
        if follower in index and followee in index and follower != followee:
            edges.add((index[followee], index[follower]))

    users = []
    for name in kept:
        uid = index[name]
        recent = sorted(posts[name])[-config.history_cap:]
        history = [Post(uid, 0, r.text, STANCE_VALUE[r.stance_label], origin="real")
                   for _, _, r in recent]
        opinion = sum(p.stance for p in history) / len(history)
        users.append(UserState(uid, opinion, history, labels.get(name), name))
    return SocialGraph(users, sorted(edges))


def save_graph(graph: SocialGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph.to_dict(), fh, sort_keys=True, indent=1, ensure_ascii=False)
        fh.write("\n")


def load_graph(path) -> SocialGraph:
    with open(path, encoding="utf-8") as fh:
        return SocialGraph.from_dict(json.load(fh))
