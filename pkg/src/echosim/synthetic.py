"""Seeded synthetic inputs: random follow graphs and labelled tweet records."""

from __future__ import annotations

import json
import random
from typing import Optional

from .engines import stance_words
from .graph import Post, SocialGraph, UserState, quantize
from .ingest import RawRecord


def random_social_graph(n: int, density: float, seed: int = 0,
                        opinions: Optional[list[float]] = None) -> SocialGraph:
    """Directed G(n, p) with p = density and uniform opinions in [-1, 1].

    Every user gets one seed post at step 0 carrying their opinion so the
    first screens are not empty.
    """
    rng = random.Random(seed)
    if opinions is None:
        opinions = [quantize(rng.uniform(-1.0, 1.0)) for _ in range(n)]
    users = []
    for i, o in enumerate(opinions):
        post = Post(i, 0, f"I am {stance_words(o)} ({o:+.6f}).", o, origin="init")
        users.append(UserState(i, o, [post]))
    edges = [(s, t) for s in range(n) for t in range(n) if s != t and rng.random() < density]
    return SocialGraph(users, edges)


_PHRASES = {
    "favor": ["Got my booster today, feeling great", "Vaccines save lives, simple as that",
              "Grateful for the science behind this", "Everyone should get the jab"],
    "neutral": ["Reading both sides of the vaccine debate", "Not sure what to think yet",
                "Any good summaries of the trial data?", "Clinic hours changed again"],
    "oppose": ["Not taking it, my body my choice", "Too many unanswered questions",
               "Mandates have gone way too far", "They rushed this and you know it"],
}


def synthetic_records(n_records: int = 6000, n_users: int = 300, seed: int = 7) -> list[RawRecord]:
    """Labelled posts from users in three stance camps; retweets are homophilous."""
    rng = random.Random(seed)
    names = [f"u{i:04d}" for i in range(n_users)]
    camp = {u: rng.choice(("favor", "favor", "neutral", "oppose", "oppose")) for u in names}
    weights = [1.0 / (r + 1) ** 0.8 for r in range(n_users)]
    members = {c: [u for u in names if camp[u] == c] for c in ("favor", "neutral", "oppose")}
    member_w = {c: [weights[int(u[1:])] for u in members[c]] for c in members}
    records = []
    for k in range(n_records):
        user = rng.choices(names, weights)[0]
        label = camp[user] if rng.random() < 0.8 else rng.choice(("favor", "neutral", "oppose"))
        text = f"{rng.choice(_PHRASES[label])} #{k}"
        rt = None
        if rng.random() < 0.35:
            if rng.random() < 0.85:
                cand = rng.choices(members[camp[user]], member_w[camp[user]])[0]
            else:
                cand = rng.choices(names, weights)[0]
            rt = cand if cand != user else None
        records.append(RawRecord(user, 1_600_000_000 + 37 * k, text, label, rt))
    return records


def write_records(records: list[RawRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
