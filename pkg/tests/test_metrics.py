import itertools
import random

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from echosim.metrics import (Undefined, average_path_length, clustering_coefficient,
                             community_opinion_spread, compute_metrics, density,
                             detect_communities, discretize, modularity_of, relabel,
                             stance_accuracy, undirected_adjacency)

import oracles
from conftest import make_graph


def g_from(n, edges, opinions=None):
    return make_graph(opinions or [0.0] * n, edges)


def two_cliques(size=10):
    edges = []
    for base in (0, size):
        edges += [(base + i, base + j) for i in range(size) for j in range(size) if i != j]
    edges.append((size - 1, size))
    return g_from(2 * size, edges)


def test_density_examples():
    assert density(g_from(4, [(i, j) for i in range(4) for j in range(4) if i != j])) == 1.0
    assert density(g_from(3, [(0, 1), (1, 2)])) == pytest.approx(2 / 6, abs=1e-15)
    assert density(g_from(5, [])) == 0.0
    with pytest.raises(Undefined):
        density(g_from(1, []))


def test_modularity_two_triangles():
    g = g_from(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert modularity_of(g, [0, 0, 0, 1, 1, 1]) == pytest.approx(0.5, abs=1e-12)


def test_modularity_single_community_is_zero():
    g = g_from(5, [(0, 1), (1, 2), (3, 4), (2, 4)])
    assert modularity_of(g, [0] * 5) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(Undefined):
        modularity_of(g_from(3, []), [0, 1, 2])


def test_reciprocal_edges_project_once():
    g = g_from(3, [(0, 1), (1, 0), (1, 2)])
    a = oracles.adjacency_matrix(3, [(0, 1), (1, 2)])
    assert modularity_of(g, [0, 0, 1]) == pytest.approx(oracles.modularity_matrix_form(a, [0, 0, 1]))


@pytest.mark.parametrize("seed", range(8))
def test_modularity_matches_exhaustive_oracle(seed):
    rng = random.Random(seed)
    n = 4 + seed % 3
    edges = [(i, j) for i, j in itertools.combinations(range(n), 2) if rng.random() < 0.45]
    edges = edges or [(0, 1)]
    g = g_from(n, edges)
    a = oracles.adjacency_matrix(n, edges)
    best = -1.0
    for lab in oracles.partition_labels(n):
        q = modularity_of(g, lab)
        assert q == pytest.approx(oracles.modularity_matrix_form(a, lab), abs=1e-12)
        best = max(best, q)
    # greedy ascent is a heuristic: bounded above by the true optimum
    assert modularity_of(g, detect_communities(g, random.Random(seed))) <= best + 1e-12


def test_two_cliques_recovered():
    part = detect_communities(two_cliques(), random.Random(0))
    assert part == [0] * 10 + [1] * 10


def test_triangle_single_community():
    assert detect_communities(g_from(3, [(0, 1), (1, 2), (2, 0)])) == [0, 0, 0]


@settings(max_examples=40, deadline=None)
@given(st.integers(6, 30), st.floats(0.05, 0.3), st.integers(0, 10**6))
def test_detection_beats_components(n, p, seed):
    rng = random.Random(seed)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if not edges:
        return
    g = g_from(n, edges)
    adj = undirected_adjacency(g)
    comps = relabel(nx_components(n, edges))
    part = detect_communities(adj, random.Random(seed))
    assert modularity_of(adj, part) >= modularity_of(adj, comps) - 1e-12
    assert sorted(set(part)) == list(range(max(part) + 1))


def nx_components(n, edges):
    G = nx.Graph()
    G.add_nodes_from(range(n))
    G.add_edges_from(edges)
    lab = [0] * n
    for c, comp in enumerate(nx.connected_components(G)):
        for u in comp:
            lab[u] = c
    return lab


def test_clustering_examples():
    assert clustering_coefficient(g_from(3, [(0, 1), (1, 2), (2, 0)])) == 1.0
    assert clustering_coefficient(g_from(4, [(0, 1), (0, 2), (0, 3)])) == 0.0
    chorded = [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)]
    expected = oracles.clustering_by_triangles(oracles.adjacency_matrix(4, chorded))
    assert expected == pytest.approx(5 / 6)  # nodes 0,2: 2/3 each; nodes 1,3: 1 each
    assert clustering_coefficient(g_from(4, chorded)) == pytest.approx(expected, abs=1e-12)


def test_path_length_examples():
    assert average_path_length(g_from(3, [(0, 1), (1, 2)])) == pytest.approx(4 / 3)
    k5 = [(i, j) for i in range(5) for j in range(5) if i < j]
    assert average_path_length(g_from(5, k5)) == 1.0
    # components of size 4 (path 0-1-2-3) and 2 (4-5)
    g = g_from(6, [(0, 1), (1, 2), (2, 3), (4, 5)])
    assert average_path_length(g) == pytest.approx((1 + 2 + 3 + 1 + 2 + 1) / 6)
    with pytest.raises(Undefined):
        average_path_length(g_from(3, []))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 64), st.floats(0.02, 0.4), st.integers(0, 10**6))
def test_structural_metrics_match_oracles(n, p, seed):
    rng = random.Random(seed)
    edges = [(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < p]
    g = g_from(n, edges)
    a = oracles.adjacency_matrix(n, edges)
    assert clustering_coefficient(g) == pytest.approx(oracles.clustering_by_triangles(a), abs=1e-9)
    assert density(g) == pytest.approx(len(edges) / (n * (n - 1)), abs=1e-12)
    if a.sum():
        assert average_path_length(g) == pytest.approx(
            oracles.path_length_largest_component(a), abs=1e-9)
        G = nx.Graph(edges)
        assert clustering_coefficient(g) == pytest.approx(
            sum(nx.clustering(G).values()) / n, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(3, 20), st.integers(0, 10**6))
def test_metrics_invariant_under_relabeling(n, seed):
    rng = random.Random(seed)
    edges = [(i, j) for i in range(n) for j in range(n) if i != j and rng.random() < 0.2]
    if not edges:
        return
    perm = list(range(n))
    rng.shuffle(perm)
    g, h = g_from(n, edges), g_from(n, [(perm[s], perm[t]) for s, t in edges])
    part = [rng.randrange(3) for _ in range(n)]
    ppart = [0] * n
    for u in range(n):
        ppart[perm[u]] = part[u]
    assert modularity_of(g, part) == pytest.approx(modularity_of(h, ppart), abs=1e-12)
    assert density(g) == density(h)
    assert clustering_coefficient(g) == pytest.approx(clustering_coefficient(h), abs=1e-12)
    try:
        apl = average_path_length(g)
    except Undefined:
        return
    assert apl == pytest.approx(average_path_length(h), abs=1e-12)


def test_stance_accuracy_examples():
    g = make_graph([1.0, 1.0, 1.0])
    assert stance_accuracy(g, {0: "favor", 1: "favor", 2: "favor"}) == 1.0
    g = make_graph([1.0, -1.0, 0.0, 0.9])
    assert stance_accuracy(g, {0: "favor", 1: "favor", 2: "neutral", 3: "oppose"}) == 0.5
    assert discretize(1 / 3) == "favor" and discretize(-1 / 3) == "oppose"
    with pytest.raises(Undefined):
        stance_accuracy(g, {})


@given(st.lists(st.sampled_from(["favor", "neutral", "oppose"]), min_size=1, max_size=20))
def test_stance_accuracy_perfect_when_copied(labels):
    value = {"favor": 0.8, "neutral": 0.0, "oppose": -0.8}
    g = make_graph([value[l] for l in labels])
    assert stance_accuracy(g, dict(enumerate(labels))) == 1.0


def test_compute_metrics_report_ranges():
    g = two_cliques(6)
    rep = compute_metrics(g, 10)
    assert rep.communities == 2 and -0.5 <= rep.modularity <= 1
    assert 0 <= rep.clustering <= 1 and rep.path_length >= 1 and 0 <= rep.density <= 1
    assert rep.stance_accuracy is None
    empty = compute_metrics(make_graph([0.0, 0.0]), 0)
    assert empty.modularity is None and empty.path_length is None


def test_community_opinion_spread():
    g = make_graph([0.1, 0.1, -0.5, -0.5, 0.9])
    assert community_opinion_spread(g, [0, 0, 1, 1, 2]) == 0.0
    assert community_opinion_spread(g, [0, 0, 0, 0, 1]) == pytest.approx(np.std([0.1, 0.1, -0.5, -0.5]))
