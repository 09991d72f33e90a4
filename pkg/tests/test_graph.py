import random

import pytest
from hypothesis import given, settings, strategies as st

from echosim.graph import (NotFound, Post, SocialGraph, UserState, build_screen, friend_slots,
                           neighbors_in, quantize, recent_context)

from conftest import make_graph


def test_neighbors_in_filters_incoming_edges():
    a, b, c = 0, 1, 2
    g = make_graph([0, 0, 0], [(a, b), (c, b)])
    assert neighbors_in(g, b) == {a, c}
    assert neighbors_in(g, a) == set()


def test_neighbors_in_empty_graph():
    assert neighbors_in(make_graph([0.0, 0.5]), 0) == set()


def test_neighbors_in_unknown_user():
    with pytest.raises(NotFound):
        neighbors_in(make_graph([0.0]), 3)


def test_graph_rejects_self_loops_and_duplicates():
    g = make_graph([0, 0])
    with pytest.raises(ValueError):
        g.add_edge(0, 0)
    g.add_edge(0, 1)
    with pytest.raises(ValueError):
        g.add_edge(0, 1)
    with pytest.raises(NotFound):
        g.add_edge(0, 5)
    with pytest.raises(ValueError):
        SocialGraph([UserState(0, 0.0), UserState(1, 0.0)], [(0, 1), (0, 1)])


def test_opinion_and_post_bounds():
    with pytest.raises(ValueError):
        UserState(0, 1.5)
    with pytest.raises(ValueError):
        Post(0, 0, "x", -1.01)
    with pytest.raises(ValueError):
        Post(0, 0, "", 0.0)


@pytest.mark.parametrize("n_posts,expected", [(3, [1, 2, 3]), (15, list(range(6, 16))), (0, [])])
def test_recent_context(n_posts, expected):
    user = UserState(0, 0.0, [Post(0, s, f"p{s}", 0.0) for s in range(1, n_posts + 1)])
    assert [p.step for p in recent_context(user, 10)] == expected


def test_recent_context_rejects_zero_window():
    with pytest.raises(ValueError):
        recent_context(UserState(0, 0.0), 0)


def test_screen_is_supply_limited():
    g = make_graph([0, 0, 0], [(1, 0), (2, 0)], posts={1: [(3, 0.1)], 2: [(4, 0.2)]})
    screen = build_screen(g, 0, 10, 0.0, random.Random(0))
    assert sorted(p.step for p in screen.posts) == [3, 4]
    assert screen.sources == ("friend", "friend")


def test_screen_recency_priority():
    posts = {1: [(5, 0.0)], 2: [(9, 0.0)], 3: [(9, 0.0)], 4: [(2, 0.0)]}
    g = make_graph([0] * 5, [(1, 0), (2, 0), (3, 0), (4, 0)], posts)
    screen = build_screen(g, 0, 3, 0.0, random.Random(0))
    assert [p.step for p in screen.posts] == [9, 9, 5]
    assert [p.author for p in screen.posts] == [2, 3, 1]  # tie broken by ascending id


def test_screen_slot_split():
    n = 21
    posts = {i: [(i, 0.0)] for i in range(1, n)}
    g = make_graph([0.0] * n, [(i, 0) for i in range(1, 11)], posts)
    screen = build_screen(g, 0, 4, 0.5, random.Random(1))
    assert screen.sources.count("friend") == 2
    assert screen.sources.count("recommended") == 2
    friends = neighbors_in(g, 0)
    for post, src in zip(screen.posts, screen.sources):
        assert (post.author in friends) == (src == "friend")


def test_screen_excludes_own_posts():
    g = make_graph([0, 0], [], posts={0: [(1, 0.0)], 1: [(1, 0.5)]})
    screen = build_screen(g, 0, 4, 1.0, random.Random(0))
    assert all(p.author != 0 for p in screen.posts)


def test_friend_slots_float_safety():
    assert friend_slots(10, 0.3) == 7
    assert friend_slots(10, 0.25) == 8
    assert friend_slots(4, 0.5) == 2


@st.composite
def graphs(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    pairs = [(s, t) for s in range(n) for t in range(n) if s != t]
    edges = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    opinions = draw(st.lists(st.floats(-1, 1), min_size=n, max_size=n))
    posts = {i: [(s, quantize(opinions[i]))] for i in range(n)
             for s in [draw(st.integers(0, 30))]}
    return make_graph(opinions, edges, posts)


@given(graphs())
def test_neighbor_round_trip(g):
    edges = set(g.edges())
    for i in range(g.n):
        for j in range(g.n):
            assert (j in neighbors_in(g, i)) == ((j, i) in edges)


@given(graphs(), st.data())
def test_remove_then_add_restores_edges(g, data):
    if g.num_edges == 0:
        return
    before = g.edges()
    s, t = data.draw(st.sampled_from(before))
    g.remove_edge(s, t)
    assert (s, t) not in g.edges()
    g.add_edge(s, t)
    assert g.edges() == before


@settings(max_examples=50)
@given(graphs(), st.integers(1, 12), st.floats(0, 1), st.integers(0, 2**32))
def test_screen_deterministic_and_bounded(g, size, rec, seed):
    a = build_screen(g, 0, size, rec, random.Random(seed))
    b = build_screen(g, 0, size, rec, random.Random(seed))
    assert a == b
    assert len(a) <= size
    friends = neighbors_in(g, 0)
    for post, src in zip(a.posts, a.sources):
        if src == "friend":
            assert post.author in friends


def test_copy_is_independent():
    g = make_graph([0.1, 0.2], [(0, 1)])
    snap = g.copy()
    g.remove_edge(0, 1)
    g.users[0].opinion = 0.9
    assert snap.edges() == [(0, 1)]
    assert snap.users[0].opinion == 0.1


def test_dict_round_trip():
    g = make_graph([0.1, -0.2, 0.0], [(0, 1), (2, 1)], posts={0: [(0, 0.1), (3, 0.4)]})
    h = SocialGraph.from_dict(g.to_dict())
    assert h.to_dict() == g.to_dict()
