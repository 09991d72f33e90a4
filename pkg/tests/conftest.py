import pytest

from echosim.graph import Post, SocialGraph, UserState

ACCEPTANCE_LINES: list[str] = []


def make_graph(opinions, edges=(), posts=None):
    """Users with given opinions; ``posts`` maps user -> list of (step, stance)."""
    users = []
    for i, o in enumerate(opinions):
        hist = [Post(i, s, f"post {i}/{s}", st) for s, st in (posts or {}).get(i, [])]
        users.append(UserState(i, o, hist))
    return SocialGraph(users, edges)


@pytest.fixture
def graph_factory():
    return make_graph


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
