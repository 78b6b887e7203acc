import io
import json
import re

import pytest
from hypothesis import given, settings, strategies as st

from convoarg.ingest import (Conversation, DanglingParent, MalformedLine, Mention, MixedConversation,
                             Post, dump_corpus, extract_mentions, parse_conversation, parse_corpus,
                             validate_thread)
from helpers import make_conversation, record


def test_three_line_thread():
    lines = [record("a", "u1", ts=10), record("b", "u2", "a", ts=11), record("c", "u1", "b", ts=12)]
    c = parse_conversation(lines)
    assert [p.ordinal for p in c.posts] == [0, 1, 2]
    assert [p.post_id for p in c.posts] == ["a", "b", "c"]
    assert validate_thread(c) == []


def test_dangling_parent():
    with pytest.raises(DanglingParent):
        parse_conversation([record("a", "u1"), record("b", "u2", "zzz", ts=1)])


def test_equal_timestamps_keep_input_order():
    lines = [record("x", "u1", ts=5), record("b", "u2", ts=5), record("a", "u3", ts=5)]
    assert [p.post_id for p in parse_conversation(lines).posts] == ["x", "b", "a"]


def test_sorted_by_timestamp_then_input():
    lines = [record("late", "u1", ts=9), record("early", "u2", ts=1), record("mid", "u3", ts=5)]
    c = parse_conversation(lines)
    assert [p.post_id for p in c.posts] == ["early", "mid", "late"]


def test_parent_after_child_in_time_is_rejected():
    with pytest.raises(DanglingParent):
        parse_conversation([record("a", "u1", ts=0), record("b", "u2", "c", ts=1),
                            record("c", "u1", ts=2)])


def test_mixed_conversations():
    with pytest.raises(MixedConversation):
        parse_conversation([record("a", "u1"), record("b", "u2", conv="other")])


@pytest.mark.parametrize("line", [
    "{not json",
    json.dumps({"id": "a", "author": "u"}),
    json.dumps([1, 2]),
    record("a", "u1").replace('"timestamp": 0', '"timestamp": "0"'),
    record("a", "u1").replace('"score": 0', '"score": true'),
])
def test_malformed_lines(line):
    with pytest.raises(MalformedLine):
        parse_conversation([line])


def test_empty_input():
    with pytest.raises(MalformedLine):
        parse_conversation([])


def test_corpus_groups_in_first_appearance_order():
    lines = [record("a", "u1", conv="z"), record("b", "u2", conv="y"),
             record("c", "u3", "a", ts=1, conv="z")]
    convs = parse_corpus(lines)
    assert [c.conversation_id for c in convs] == ["z", "y"]
    assert len(convs[0]) == 2


def test_dump_roundtrip_adds_ordinal():
    c = parse_conversation([record("a", "u1", body="héllo"), record("b", "u2", "a", ts=3)])
    text = dump_corpus([c])
    assert '"ordinal": 1' in text and "héllo" in text
    assert parse_corpus(io.StringIO(text)) == [c]


@pytest.mark.parametrize("body,expected", [
    ("u/alice you are wrong", [Mention("alice", 0)]),
    ("@bob and @carol agree", [Mention("bob", 0), Mention("carol", 9)]),
    ("nothing here", []),
    ("see /u/dan_99 now", [Mention("dan_99", 4)]),
    ("mail me at x@example", []),
    ("a/u/b is a path", []),
])
def test_extract_mentions(body, expected):
    assert extract_mentions(body) == expected


def test_validate_thread_cases():
    assert validate_thread(make_conversation([("A",), ("B", 0), ("A", 1)])) == []
    bad = Conversation("t", (Post("p1", "t", "A", None, "", 0, 0, 0),
                             Post("p2", "t", "B", "p3", "", 1, 0, 1),
                             Post("p3", "t", "C", None, "", 2, 0, 2)))
    assert validate_thread(bad) == [("p2", "parent not earlier")]
    assert validate_thread(Conversation("t", ())) == [(None, "empty")]


_names = st.text("abcXYZ019_-", min_size=1, max_size=6)
_prefix = st.sampled_from(["u/", "/u/", "@"])
_filler = st.text("abc .,!?\n", max_size=8)


@given(st.lists(st.tuples(_filler, _prefix, _names), max_size=5), _filler)
def test_mention_offsets_point_at_matches(parts, tail):
    body = "".join(f"{f} {p}{n} " for f, p, n in parts) + tail
    got = extract_mentions(body)
    assert [m.username for m in got] == [n for _, _, n in parts]
    for m in got:
        assert 0 <= m.char_offset < len(body)
        assert re.match(r"(/?u/|@)" + re.escape(m.username), body[m.char_offset:])


@st.composite
def threads(draw):
    n = draw(st.integers(1, 12))
    rows = []
    ts = 0
    for i in range(n):
        parent = None if i == 0 else draw(st.one_of(st.none(), st.integers(0, i - 1)))
        ts += draw(st.integers(0, 3))
        rows.append((f"id{i}", draw(st.sampled_from("ABCD")), parent, ts))
    order = draw(st.permutations(range(n)))
    return [record(rows[i][0], rows[i][1], None if rows[i][2] is None else f"id{rows[i][2]}",
                   ts=rows[i][3]) for i in order], rows


@settings(max_examples=150, deadline=None)
@given(threads())
def test_parsed_threads_are_valid_and_deterministic(data):
    lines, rows = data
    try:
        c = parse_conversation(lines)
    except DanglingParent:
        # a shuffled reply may tie its parent's timestamp and land first
        return
    assert validate_thread(c) == []
    assert parse_conversation(list(lines)) == c
    assert sorted(p.post_id for p in c.posts) == sorted(r[0] for r in rows)
