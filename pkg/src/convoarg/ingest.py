"""Parsing and validation of threaded conversation dumps.

Input is line-delimited JSON, one post per line, with the keys listed in
``REQUIRED_KEYS``. Posts are put in canonical order (timestamp, then input
order) and given an ``ordinal``.
"""

from __future__ import annotations

import json
import re
from collections import OrderedDict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

REQUIRED_KEYS = ("id", "conversation_id", "author", "parent_id", "body", "timestamp", "score")

# A mention must not be glued to a preceding word character or slash, so
# "menu/x" and "bob@example.org" are not mentions.
MENTION_RE = re.compile(r"(?<![A-Za-z0-9_/-])(?:/?u/|@)([A-Za-z0-9_-]+)")


class IngestError(ValueError):
    """Base class for input problems."""


class MalformedLine(IngestError):
    pass


class DanglingParent(IngestError):
    pass


class MixedConversation(IngestError):
    pass


@dataclass(frozen=True)
class Post:
    post_id: str
    conversation_id: str
    author_id: str
    parent_id: Optional[str]
    body: str
    timestamp: int
    score: int
    ordinal: int = -1

    def to_record(self) -> dict:
        return {
            "id": self.post_id,
            "conversation_id": self.conversation_id,
            "author": self.author_id,
            "parent_id": self.parent_id,
            "body": self.body,
            "timestamp": self.timestamp,
            "score": self.score,
            "ordinal": self.ordinal,
        }


@dataclass(frozen=True)
class Conversation:
    conversation_id: str
    posts: tuple

    def __len__(self):
        return len(self.posts)

    def by_id(self) -> dict:
        return {p.post_id: p for p in self.posts}

    def authors(self) -> list:
        """Distinct authors in order of first appearance."""
        return list(OrderedDict.fromkeys(p.author_id for p in self.posts))


@dataclass(frozen=True)
class Mention:
    username: str
    char_offset: int


def _int_field(obj, key, lineno):
    value = obj[key]
    # bool is an int subclass; reject it explicitly
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedLine(f"line {lineno}: {key!r} must be an integer, got {value!r}")
    return value


def _post_from_record(obj, lineno) -> Post:
    if not isinstance(obj, dict):
        raise MalformedLine(f"line {lineno}: expected a JSON object")
    missing = [k for k in REQUIRED_KEYS if k not in obj]
    if missing:
        raise MalformedLine(f"line {lineno}: missing key(s) {', '.join(missing)}")
    for key in ("id", "conversation_id", "author", "body"):
        if not isinstance(obj[key], str):
            raise MalformedLine(f"line {lineno}: {key!r} must be a string")
    parent = obj["parent_id"]
    if parent is not None and not isinstance(parent, str):
        raise MalformedLine(f"line {lineno}: 'parent_id' must be a string or null")
    return Post(
        post_id=obj["id"],
        conversation_id=obj["conversation_id"],
        author_id=obj["author"],
        parent_id=parent,
        body=obj["body"],
        timestamp=_int_field(obj, "timestamp", lineno),
        score=_int_field(obj, "score", lineno),
    )


def _read_records(raw_lines: Iterable[str]):
    for lineno, line in enumerate(raw_lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedLine(f"line {lineno}: {exc.msg}") from None
        yield lineno, _post_from_record(obj, lineno)


def _normalize(conversation_id: str, posts: Sequence[Post]) -> Conversation:
    order = sorted(range(len(posts)), key=lambda i: (posts[i].timestamp, i))
    ordered = [posts[i] for i in order]
    ordinal_of = {}
    for i, p in enumerate(ordered):
        if p.post_id in ordinal_of:
            raise MalformedLine(f"duplicate post id {p.post_id!r} in conversation {conversation_id!r}")
        ordinal_of[p.post_id] = i
    out = []
    for i, p in enumerate(ordered):
        if p.parent_id is not None:
            if p.parent_id not in ordinal_of:
                raise DanglingParent(f"post {p.post_id!r}: parent {p.parent_id!r} not in conversation")
            # a parent that sorts after its reply did not exist when the reply was made
            if ordinal_of[p.parent_id] >= i:
                raise DanglingParent(f"post {p.post_id!r}: parent {p.parent_id!r} is not earlier")
        out.append(Post(p.post_id, p.conversation_id, p.author_id, p.parent_id,
                        p.body, p.timestamp, p.score, i))
    return Conversation(conversation_id, tuple(out))


def parse_conversation(raw_lines: Iterable[str]) -> Conversation:
    """Parse the JSONL lines of exactly one conversation."""
    posts = []
    cid = None
    for lineno, post in _read_records(raw_lines):
        if cid is None:
            cid = post.conversation_id
        elif post.conversation_id != cid:
            raise MixedConversation(
                f"line {lineno}: conversation {post.conversation_id!r} mixed with {cid!r}")
        posts.append(post)
    if cid is None:
        raise MalformedLine("no posts in input")
    return _normalize(cid, posts)


def parse_corpus(raw_lines: Iterable[str]) -> list:
    """Parse a multi-conversation dump.

    Conversations are returned in order of first appearance; within each,
    posts are canonically sorted exactly as by :func:`parse_conversation`.
    """
    groups = OrderedDict()
    for _, post in _read_records(raw_lines):
        groups.setdefault(post.conversation_id, []).append(post)
    return [_normalize(cid, posts) for cid, posts in groups.items()]


def read_corpus(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh)


def dump_corpus(conversations: Iterable[Conversation]) -> str:
    lines = []
    for c in conversations:
        for p in c.posts:
            lines.append(json.dumps(p.to_record(), ensure_ascii=False, sort_keys=True))
    return "".join(line + "\n" for line in lines)


def extract_mentions(body: str) -> list:
    return [Mention(m.group(1), m.start()) for m in MENTION_RE.finditer(body)]


def validate_thread(c: Conversation) -> list:
    """Return a list of ``(post_id, rule)`` violations; empty means valid."""
    violations = []
    if not c.posts:
        return [(None, "empty")]
    by_id = {}
    for i, p in enumerate(c.posts):
        if p.post_id in by_id:
            violations.append((p.post_id, "duplicate post_id"))
        by_id.setdefault(p.post_id, p)
        if p.ordinal != i:
            violations.append((p.post_id, "ordinal gap"))
        if p.conversation_id != c.conversation_id:
            violations.append((p.post_id, "foreign conversation_id"))
        if i > 0 and p.timestamp < c.posts[i - 1].timestamp:
            violations.append((p.post_id, "timestamp decreasing"))
    if c.posts[0].parent_id is not None:
        violations.append((c.posts[0].post_id, "first post has parent"))
    for p in c.posts:
        if p.parent_id is None:
            continue
        parent = by_id.get(p.parent_id)
        if parent is None:
            violations.append((p.post_id, "dangling parent"))
        elif parent.ordinal >= p.ordinal:
            violations.append((p.post_id, "parent not earlier"))
    return violations
