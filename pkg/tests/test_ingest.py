import json
from collections import Counter
from pathlib import Path

import pytest

from echosim.ingest import (FormatError, IngestConfig, RawRecord, TooSmall, build_network,
                            ground_truth_labels, load_records, read_edges_file, write_rejects)
from echosim.synthetic import synthetic_records, write_records

FIXTURE = Path(__file__).parent / "fixtures" / "synthetic_6000.jsonl"


def rec(user, ts=0, stance="neutral", rt=None, text="hello"):
    return RawRecord(user, ts, text, stance, rt)


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return path


def test_load_valid_lines(tmp_path):
    lines = [json.dumps({"user": f"u{i}", "ts": i, "text": "x", "stance": "favor"}) for i in range(3)]
    records, rejects = load_records(write_lines(tmp_path / "a.jsonl", lines))
    assert len(records) == 3 and rejects == []


def test_load_collects_rejects(tmp_path):
    lines = [json.dumps({"user": "a", "ts": 1, "text": "x", "stance": "oppose"}), "{not json"]
    records, rejects = load_records(write_lines(tmp_path / "a.jsonl", lines))
    assert len(records) == 1 and len(rejects) == 1 and rejects[0].line == 2
    write_rejects(rejects, tmp_path / "r.jsonl")
    assert json.loads((tmp_path / "r.jsonl").read_text())["content"] == "{not json"


def test_mostly_bad_file_is_format_error(tmp_path):
    lines = [json.dumps({"user": "a", "ts": 1, "text": "x", "stance": "maybe"}), "[]", "{}"]
    with pytest.raises(FormatError):
        load_records(write_lines(tmp_path / "a.jsonl", lines))
    with pytest.raises(OSError):
        load_records(tmp_path / "missing.jsonl")


def test_fixture_has_6000_records_and_is_reproducible(tmp_path):
    records, rejects = load_records(FIXTURE)
    assert len(records) == 6000 and not rejects
    write_records(synthetic_records(), tmp_path / "regen.jsonl")
    assert (tmp_path / "regen.jsonl").read_bytes() == FIXTURE.read_bytes()


def test_top_k_ranking():
    records = []
    for name, count in zip("abcde", (9, 7, 5, 3, 1)):
        records += [rec(name, t) for t in range(count)]
    g = build_network(records, IngestConfig(top_k_users=3))
    assert [u.name for u in g.users] == ["a", "b", "c"]


def test_rank_ties_are_lexicographic():
    records = [rec(n, t) for n in ("z", "m", "b") for t in range(2)]
    g = build_network(records, IngestConfig(top_k_users=2))
    assert [u.name for u in g.users] == ["b", "m"]


def test_min_posts_filter_and_too_small():
    records = [rec("a", 1), rec("a", 2), rec("b", 1)]
    with pytest.raises(TooSmall):
        build_network(records, IngestConfig(min_posts=2))
    with pytest.raises(TooSmall):
        build_network([])


def test_retweets_dedup_to_one_edge():
    records = [rec("i", 1, rt="j"), rec("i", 2, rt="j"), rec("j", 3)]
    g = build_network(records)
    j, i = (u.id for u in sorted(g.users, key=lambda u: u.name != "j"))
    assert g.edges() == [(j, i)]


def test_opinion_is_history_mean():
    records = [rec("a", 1, "favor"), rec("a", 2, "favor"), rec("a", 3, "neutral"), rec("b", 1)]
    g = build_network(records)
    assert g.users[0].opinion == 2 / 3


def test_history_cap_keeps_latest():
    records = [rec("a", t, "oppose" if t < 5 else "favor", text=f"t{t}") for t in range(12)]
    records.append(rec("b", 0))
    g = build_network(records, IngestConfig(history_cap=4))
    a = g.users[0]
    assert [p.text for p in a.history] == ["t8", "t9", "t10", "t11"]
    assert a.opinion == 1.0


def test_ground_truth_majority_and_ties():
    records = [rec("a", 0, "favor"), rec("a", 1, "favor"), rec("a", 2, "oppose"),
               rec("b", 0, "favor"), rec("b", 1, "oppose")]
    assert ground_truth_labels(records, ["a", "b"]) == {"a": "favor", "b": "neutral"}


def test_ground_truth_on_fixture_matches_counting():
    records, _ = load_records(FIXTURE)
    g = build_network(records)
    counts = {}
    for r in records:
        counts.setdefault(r.user, Counter())[r.stance_label] += 1
    for u in g.users:
        c = counts[u.name].most_common()
        want = c[0][0] if len(c) == 1 or c[0][1] > c[1][1] else "neutral"
        assert u.ground_truth_stance == want
        assert -1 <= u.opinion <= 1


def test_edges_side_file_is_unioned(tmp_path):
    (tmp_path / "e.csv").write_text("# follower,followee\na,b\nb,zz\n")
    follows = read_edges_file(tmp_path / "e.csv")
    g = build_network([rec("a", 0), rec("b", 0)], follows=follows)
    assert g.edges() == [(1, 0)]


def test_record_validation():
    with pytest.raises(ValueError):
        RawRecord("", 0, "x", "favor")
    with pytest.raises(ValueError):
        RawRecord.from_json({"user": "a", "ts": "5", "text": "x", "stance": "favor"})
    r = RawRecord.from_json({"user": "a", "ts": 5, "text": "x", "stance": "favor", "rt_user": "b"})
    assert RawRecord.from_json(r.to_json()) == r
