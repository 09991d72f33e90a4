"""Cluster post embeddings and summarise how tight the clusters are.

All distances are Euclidean between L2-normalised vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class TooFewPoints(ValueError):
    pass


class DimError(ValueError):
    pass


class Undefined(ValueError):
    pass


@dataclass
class EmbeddingSet:
    vectors: np.ndarray
    source: str = "real"
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 2:
            raise DimError("vectors must be an (n, d) array with d >= 2")
        if not np.all(np.isfinite(self.vectors)):
            raise ValueError("non-finite entries in embeddings")
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.vectors))]
        if len(self.ids) != len(self.vectors):
            raise ValueError("ids and vectors differ in length")
        if self.source not in ("real", "simulated"):
            raise ValueError("source must be 'real' or 'simulated'")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def normalized(self) -> np.ndarray:
        return normalize(self.vectors)


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    centroids: np.ndarray
    inertia_history: list[float] = field(default_factory=list)
    iterations: int = 0

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def inertia(self) -> float:
        return self.inertia_history[-1] if self.inertia_history else float("nan")


def normalize(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    return x / np.where(norms == 0, 1.0, norms)


def read_embeddings(path) -> EmbeddingSet:
    """Parse ``dim=<d> source=<real|simulated>`` then ``id,v1,...,vd`` lines."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{path}: empty embedding file")
    header = dict(tok.split("=", 1) for tok in lines[0].split())
    dim = int(header["dim"])
    ids, rows = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != dim + 1:
            raise DimError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    return EmbeddingSet(np.array(rows).reshape(-1, dim), header.get("source", "real"), ids)


def write_embeddings(path, emb: EmbeddingSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={emb.dim} source={emb.source}\n")
        for pid, row in zip(emb.ids, emb.vectors):
            fh.write(pid + "," + ",".join(repr(float(v)) for v in row) + "\n")


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x ** 2).sum(1)[:, None] - 2 * x @ c.T + (c ** 2).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [x[rng.integers(n)]]
    d2 = _sq_dists(x, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = d2.sum()
        idx = rng.choice(n, p=d2 / total) if total > 0 else rng.integers(n)
        centers.append(x[idx])
        d2 = np.minimum(d2, _sq_dists(x, x[idx:idx + 1])[:, 0])
    return np.array(centers)


def _repair_empty(x, labels, centroids, k):
    # steal the point farthest from its centroid in the largest cluster
    for c in range(k):
        if np.any(labels == c):
            continue
        counts = np.bincount(labels, minlength=k)
        big = int(np.argmax(counts))
        members = np.flatnonzero(labels == big)
        far = members[np.argmax(((x[members] - centroids[big]) ** 2).sum(1))]
        labels[far] = c
        centroids[c] = x[far]
        centroids[big] = x[labels == big].mean(0)
    return labels, centroids


def kmeans(emb: EmbeddingSet | np.ndarray, k: int, rng: Optional[np.random.Generator] = None,
           max_iters: int = 300) -> ClusterAssignment:
    """Lloyd iterations with k-means++ seeding on the normalised vectors."""
    x = normalize(emb.vectors if isinstance(emb, EmbeddingSet) else emb)
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(x) < k:
        raise TooFewPoints(f"{len(x)} points for k={k}")
    rng = rng if rng is not None else np.random.default_rng(0)
    centroids = _plusplus(x, k, rng)
    labels = np.argmin(_sq_dists(x, centroids), axis=1)
    history = []
    it = 0
    for it in range(1, max_iters + 1):
        labels, centroids = _repair_empty(x, labels, centroids, k)
        centroids = np.array([x[labels == c].mean(0) for c in range(k)])
        history.append(float(((x - centroids[labels]) ** 2).sum()))
        new = np.argmin(_sq_dists(x, centroids), axis=1)
        # keep the current label on exact ties so the loop cannot cycle
        cur = _sq_dists(x, centroids)[np.arange(len(x)), labels]
        best = _sq_dists(x, centroids)[np.arange(len(x)), new]
        new = np.where(best < cur, new, labels)
        if np.array_equal(new, labels):
            break
        labels = new
    return ClusterAssignment(labels, centroids, history, it)


def _check(labels: np.ndarray) -> int:
    k = len(np.unique(labels))
    if k < 2:
        raise Undefined("need at least two clusters")
    return k


def _pairwise(x: np.ndarray) -> np.ndarray:
    return np.linalg.norm(x[:, None, :] - x[None, :, :], axis=2)


def silhouette(emb: EmbeddingSet | np.ndarray, assignment: ClusterAssignment | np.ndarray) -> float:
    x = normalize(emb.vectors if isinstance(emb, EmbeddingSet) else emb)
    labels = np.asarray(assignment.labels if isinstance(assignment, ClusterAssignment)
                        else assignment)
    _check(labels)
    d = _pairwise(x)
    clusters = np.unique(labels)
    scores = np.zeros(len(x))
    for i in range(len(x)):
        own = labels == labels[i]
        if own.sum() == 1:
            continue
        a = d[i, own].sum() / (own.sum() - 1)
        b = min(d[i, labels == c].mean() for c in clusters if c != labels[i])
        top = max(a, b)
        scores[i] = 0.0 if top == 0 else (b - a) / top
    return float(scores.mean())


def cluster_distances(emb: EmbeddingSet | np.ndarray,
                      assignment: ClusterAssignment | np.ndarray) -> tuple[float, float]:
    """(mean within-cluster pairwise distance, mean distance between centroids)."""
    x = normalize(emb.vectors if isinstance(emb, EmbeddingSet) else emb)
    labels = np.asarray(assignment.labels if isinstance(assignment, ClusterAssignment)
                        else assignment)
    _check(labels)
    clusters = np.unique(labels)
    intra = []
    centroids = []
    for c in clusters:
        pts = x[labels == c]
        centroids.append(pts.mean(0))
        if len(pts) < 2:
            intra.append(0.0)
            continue
        d = _pairwise(pts)
        intra.append(d[np.triu_indices(len(pts), 1)].mean())
    cd = _pairwise(np.array(centroids))
    inter = cd[np.triu_indices(len(centroids), 1)].mean()
    return float(np.mean(intra)), float(inter)


def analyse(emb: EmbeddingSet, k: int = 8, seed: int = 0) -> dict:
    fit = kmeans(emb, k, np.random.default_rng(seed))
    intra, inter = cluster_distances(emb, fit)
    return {"source": emb.source, "n": len(emb.vectors), "dim": emb.dim, "k": k, "seed": seed,
            "silhouette": silhouette(emb, fit), "intra": intra, "inter": inter,
            "inertia": fit.inertia, "iterations": fit.iterations, "labels": fit.labels}
