"""Attack/defence graph of a conversation.

Edges point from the attacking (or defending) post to its target. A post
attacks at most one other post, so every node has out-degree at most one
in each edge type.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass
from typing import Optional

from .ingest import Conversation, Post, extract_mentions, validate_thread


class InvalidConversation(ValueError):
    pass


@dataclass(frozen=True)
class ArgGraph:
    conversation_id: str
    nodes: tuple                 # post ids in ordinal order
    author_of: dict
    attack_edges: tuple          # (source, target)
    defence_edges: tuple         # (source, target, witness)

    def union_edges(self) -> list:
        """Attack and defence edges collapsed to a simple directed edge list."""
        seen = set()
        out = []
        for a, b in self.attack_edges:
            if (a, b) not in seen:
                seen.add((a, b))
                out.append((a, b))
        for a, c, _ in self.defence_edges:
            if (a, c) not in seen:
                seen.add((a, c))
                out.append((a, c))
        return out

    def to_json(self) -> dict:
        return {
            "conversation_id": self.conversation_id,
            "nodes": list(self.nodes),
            "authors": {n: self.author_of[n] for n in self.nodes},
            "attacks": [list(e) for e in self.attack_edges],
            "defences": [list(e) for e in self.defence_edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ArgGraph":
        return cls(
            conversation_id=obj["conversation_id"],
            nodes=tuple(obj["nodes"]),
            author_of=dict(obj["authors"]),
            attack_edges=tuple(tuple(e) for e in obj["attacks"]),
            defence_edges=tuple(tuple(e) for e in obj["defences"]),
        )


class _History:
    """Running index over the posts seen so far in canonical order."""

    def __init__(self):
        self.last_by_author = {}
        self.last = None
        self.last_other = None   # latest post whose author differs from self.last's

    def push(self, p: Post):
        if self.last is not None and self.last.author_id != p.author_id:
            self.last_other = self.last
        self.last = p
        self.last_by_author[p.author_id] = p

    def latest_not_by(self, author) -> Optional[Post]:
        if self.last is None:
            return None
        if self.last.author_id != author:
            return self.last
        return self.last_other

    def resolve(self, p: Post, by_id) -> Optional[str]:
        if p.parent_id is not None:
            parent = by_id[p.parent_id]
            if parent.author_id == p.author_id:
                return None
            return parent.post_id
        mentions = extract_mentions(p.body)
        if mentions:
            user = mentions[0].username
            hit = self.last_by_author.get(user)
            if user != p.author_id and hit is not None:
                return hit.post_id
            # self-mention, or the user has no earlier post: fall through
        hit = self.latest_not_by(p.author_id)
        return hit.post_id if hit is not None else None


def resolve_target(p: Post, c: Conversation) -> Optional[str]:
    """Post id that ``p`` attacks, or None.

    Priority: the replied-to post; else the latest earlier post of the first
    mentioned user; else the latest earlier post by anybody other than the
    author. A self-reply is a continuation and attacks nothing.
    """
    history = _History()
    for q in c.posts[:p.ordinal]:
        history.push(q)
    return history.resolve(p, c.by_id())


def defence_closure(attacks) -> list:
    """All ``(a, c, b)`` such that a attacks b and b attacks c."""
    by_source = defaultdict(list)
    for b, c in attacks:
        by_source[b].append(c)
    out = []
    for a, b in attacks:
        for c in by_source.get(b, ()):
            out.append((a, c, b))
    return out


def build_graph(c: Conversation) -> ArgGraph:
    problems = validate_thread(c)
    if problems:
        raise InvalidConversation(f"conversation {c.conversation_id!r}: {problems[:3]}")
    by_id = c.by_id()
    history = _History()
    attacks = []
    for p in c.posts:
        target = history.resolve(p, by_id)
        if target is not None:
            attacks.append((p.post_id, target))
        history.push(p)
    return ArgGraph(
        conversation_id=c.conversation_id,
        nodes=tuple(p.post_id for p in c.posts),
        author_of={p.post_id: p.author_id for p in c.posts},
        attack_edges=tuple(attacks),
        defence_edges=tuple(defence_closure(attacks)),
    )


def dump_graphs(graphs) -> str:
    return "".join(json.dumps(g.to_json(), sort_keys=True) + "\n" for g in graphs)


def read_graphs(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [ArgGraph.from_json(json.loads(line)) for line in fh if line.strip()]
