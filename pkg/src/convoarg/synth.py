"""Seeded synthetic conversations with planted user archetypes.

Archetypes:

* ``appreciated``: posts attract replies, and the replies to them attract
  counter-replies, so these users collect attack *and* defence in-edges;
  their posts score high.
* ``provocateur``: posts more often within a thread and always replies; the
  replies they attract are not defended; scores are mixed.
* ``lurker``: joins few conversations.
* ``regular``: everyone else.

Appreciated and regular users post at the same rate inside a conversation,
so post counts alone carry little signal about who is appreciated.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .ingest import Conversation, Post

ARCHETYPES = ("appreciated", "provocateur", "lurker", "regular")


class InvalidConfig(ValueError):
    pass


@dataclass(frozen=True)
class SynthConfig:
    n_conversations: int = 50
    posts_per_conversation: tuple = (200, 400)
    n_users: int = 2000
    top_fraction: float = 0.05
    provocateur_fraction: float = 0.08
    lurker_fraction: float = 0.25
    # share of the user base taking part in a conversation, relative to its post count
    participants_per_post: float = 0.4
    lurker_participation: float = 0.2
    provocateur_post_weight: float = 1.5
    appreciated_attraction: float = 20.0
    provocateur_attraction: float = 3.0
    defence_attraction: float = 10.0
    recency_window: float = 15.0
    reply_probability: float = 0.75
    provocateur_reply_probability: float = 1.0
    self_reply_probability: float = 0.05
    mention_probability: float = 0.15
    appreciated_score_mean: float = 8.0
    regular_score_mean: float = 1.0
    provocateur_score_mean: float = 0.0
    score_noise: float = 3.0
    provocateur_score_noise: float = 6.0
    score_min: int = -10
    seed: int = 42

    def __post_init__(self):
        lo, hi = self.posts_per_conversation
        object.__setattr__(self, "posts_per_conversation", (int(lo), int(hi)))
        problems = []
        if self.n_conversations < 1:
            problems.append("n_conversations must be >= 1")
        if self.n_users < 2:
            problems.append("n_users must be >= 2")
        if not 2 <= lo <= hi:
            problems.append("posts_per_conversation must satisfy 2 <= min <= max")
        if not 0.0 < self.top_fraction < 1.0:
            problems.append("top_fraction must lie in (0, 1)")
        for name in ("provocateur_fraction", "lurker_fraction", "reply_probability",
                     "provocateur_reply_probability", "self_reply_probability",
                     "mention_probability", "lurker_participation"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                problems.append(f"{name} must lie in [0, 1]")
        if self.top_fraction + self.provocateur_fraction + self.lurker_fraction > 1.0:
            problems.append("archetype fractions exceed 1")
        for name in ("participants_per_post", "provocateur_post_weight", "appreciated_attraction",
                     "provocateur_attraction", "defence_attraction", "recency_window"):
            if getattr(self, name) <= 0:
                problems.append(f"{name} must be positive")
        if self.score_noise < 0 or self.provocateur_score_noise < 0:
            problems.append("score noise must be non-negative")
        if problems:
            raise InvalidConfig("; ".join(problems))

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise InvalidConfig(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        if "posts_per_conversation" in d:
            d["posts_per_conversation"] = tuple(d["posts_per_conversation"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["posts_per_conversation"] = list(self.posts_per_conversation)
        return d


@dataclass
class SynthCorpus:
    conversations: list
    ground_truth_top: set
    archetype_of: dict = field(default_factory=dict)

    def posts(self):
        for c in self.conversations:
            yield from c.posts

    def truth_json(self) -> dict:
        return {
            "ground_truth_top": sorted(self.ground_truth_top),
            "archetypes": {u: self.archetype_of[u] for u in sorted(self.archetype_of)},
        }


def _user_ids(n):
    width = max(4, len(str(n - 1)))
    return [f"user{i:0{width}d}" for i in range(n)]


def assign_archetypes(config: SynthConfig, rng) -> dict:
    users = _user_ids(config.n_users)
    n_top = math.floor(config.top_fraction * config.n_users)
    n_prov = math.floor(config.provocateur_fraction * config.n_users)
    n_lurk = math.floor(config.lurker_fraction * config.n_users)
    order = rng.permutation(config.n_users)
    labels = ["regular"] * config.n_users
    for rank, i in enumerate(order):
        if rank < n_top:
            labels[i] = "appreciated"
        elif rank < n_top + n_prov:
            labels[i] = "provocateur"
        elif rank < n_top + n_prov + n_lurk:
            labels[i] = "lurker"
    return dict(zip(users, labels))


def _score(archetype, config, rng) -> int:
    if archetype == "appreciated":
        mean, sd = config.appreciated_score_mean, config.score_noise
    elif archetype == "provocateur":
        mean, sd = config.provocateur_score_mean, config.provocateur_score_noise
    else:
        mean, sd = config.regular_score_mean, config.score_noise
    return max(config.score_min, int(round(rng.normal(mean, sd))))


def _conversation(cid, config, users, archetype_of, rng) -> Conversation:
    lo, hi = config.posts_per_conversation
    n_posts = int(rng.integers(lo, hi + 1))
    participation = np.array([config.lurker_participation if archetype_of[u] == "lurker" else 1.0
                              for u in users])
    n_part = min(len(users), max(2, int(round(config.participants_per_post * n_posts))))
    pool_idx = rng.choice(len(users), size=n_part, replace=False,
                          p=participation / participation.sum())
    pool = [users[i] for i in sorted(pool_idx)]
    post_weight = np.array([config.provocateur_post_weight if archetype_of[u] == "provocateur"
                            else 1.0 for u in pool])
    post_weight /= post_weight.sum()

    base_attraction = {"appreciated": config.appreciated_attraction,
                       "provocateur": config.provocateur_attraction}
    authors = []
    attraction = np.zeros(n_posts)
    posts = []
    timestamp = 1_600_000_000 + int(rng.integers(0, 10_000_000))
    for i in range(n_posts):
        author = pool[int(rng.choice(len(pool), p=post_weight))]
        arche = archetype_of[author]
        parent = None
        body = f"comment {i} in {cid}"
        if i > 0:
            ages = i - np.arange(i)
            recency = np.exp(-(ages - 1) / config.recency_window)
            weight = attraction[:i] * recency
            if rng.random() >= config.self_reply_probability:
                weight = np.where([a == author for a in authors], 0.0, weight)
            if weight.sum() <= 0:
                weight = recency
            choice = int(rng.choice(i, p=weight / weight.sum()))
            reply_p = (config.provocateur_reply_probability if arche == "provocateur"
                       else config.reply_probability)
            if rng.random() < reply_p:
                parent = choice
            elif rng.random() < config.mention_probability and authors[choice] != author:
                body = f"u/{authors[choice]} {body}"
        attraction[i] = base_attraction.get(arche, 1.0)
        # answering an appreciated post invites counter-replies, i.e. defences of it
        if (parent is not None and arche != "appreciated"
                and archetype_of[authors[parent]] == "appreciated"):
            attraction[i] *= config.defence_attraction
        authors.append(author)
        posts.append(Post(f"{cid}-{i:04d}", cid, author,
                          None if parent is None else posts[parent].post_id,
                          body, timestamp, _score(arche, config, rng), i))
        timestamp += int(rng.integers(1, 120))
    return Conversation(cid, tuple(posts))


def generate(config: SynthConfig) -> SynthCorpus:
    rng = np.random.default_rng(config.seed)
    archetype_of = assign_archetypes(config, rng)
    users = list(archetype_of)
    conversations = []
    width = max(3, len(str(config.n_conversations - 1)))
    for k in range(config.n_conversations):
        conv_rng = np.random.default_rng([config.seed, k])
        cid = f"c{k:0{width}d}"
        conversations.append(_conversation(cid, config, users, archetype_of, conv_rng))
    top = {u for u, a in archetype_of.items() if a == "appreciated"}
    return SynthCorpus(conversations, top, archetype_of)


def load_config(path) -> SynthConfig:
    with open(path, encoding="utf-8") as fh:
        return SynthConfig.from_dict(json.load(fh))
