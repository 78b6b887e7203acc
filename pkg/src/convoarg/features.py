"""Per-user, per-conversation structural features."""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import astuple, dataclass, fields

import numpy as np

# Column order used for CSV output and for the ``full`` selector.
FEATURE_NAMES = (
    "PC", "CC",
    "Att_IN", "Att_OUT", "Def_IN", "Def_OUT",
    "AvgAtt_OUT", "AvgAtt_IN", "AvgDef_OUT", "AvgDef_IN",
    "Agr", "Dis", "En", "NEn", "As", "NAs",
    "CBC", "CEC", "CClC",
)


class GraphMismatch(ValueError):
    pass


@dataclass(frozen=True)
class UserFeatureVector:
    conversation_id: str
    user_id: str
    PC: int
    CC: float
    Att_IN: int
    Att_OUT: int
    Def_IN: int
    Def_OUT: int
    AvgAtt_OUT: float
    AvgAtt_IN: float
    AvgDef_OUT: float
    AvgDef_IN: float
    Agr: float
    Dis: float
    En: int
    NEn: float
    As: float
    NAs: float
    CBC: float
    CEC: float
    CClC: float

    def values(self) -> tuple:
        return astuple(self)[2:]


@dataclass(frozen=True)
class FeatureSetSelector:
    name: str
    members: tuple

    def __post_init__(self):
        if not self.members or len(set(self.members)) != len(self.members):
            raise ValueError(f"feature selector {self.name!r} must list distinct members")

    def columns(self) -> list:
        """Positions of the members in ``FEATURE_NAMES``."""
        unknown = [m for m in self.members if m not in FEATURE_NAMES]
        if unknown:
            raise ValueError(f"selector {self.name!r} names unknown features {unknown}")
        return [FEATURE_NAMES.index(m) for m in self.members]

    def __len__(self):
        return len(self.members)


MINIMAL = FeatureSetSelector("minimal", ("AvgAtt_IN", "AvgDef_IN", "En", "CBC"))
REDUCED = FeatureSetSelector(
    "reduced", ("Def_IN", "CC", "AvgAtt_OUT", "AvgAtt_IN", "AvgDef_IN", "Dis", "En"))
FULL = FeatureSetSelector("full", FEATURE_NAMES)
SELECTORS = {s.name: s for s in (MINIMAL, REDUCED, FULL)}


def selector(name_or_members) -> FeatureSetSelector:
    if isinstance(name_or_members, FeatureSetSelector):
        return name_or_members
    if isinstance(name_or_members, str):
        if name_or_members in SELECTORS:
            return SELECTORS[name_or_members]
        raise ValueError(f"unknown feature set {name_or_members!r}; "
                         f"expected one of {', '.join(SELECTORS)}")
    members = tuple(name_or_members)
    return FeatureSetSelector("custom", members)


def smoothed_ratio(num, den):
    """Laplace-smoothed ratio used for aggressiveness and disapproval."""
    return (num + 1.0) / (den + 1.0)


def aggregate_features(g, cent, c=None) -> dict:
    """Feature vectors for every author in the conversation.

    ``c`` supplies the post list; when omitted the graph's own node/author map
    is used, which carries the same information.
    """
    if c is not None:
        post_author = {p.post_id: p.author_id for p in c.posts}
        missing = [n for n in g.nodes if n not in post_author]
        if missing:
            raise GraphMismatch(f"graph nodes not in conversation: {missing[:5]}")
        n_posts = len(c.posts)
    else:
        post_author = dict(g.author_of)
        n_posts = len(g.nodes)

    users = list(dict.fromkeys(post_author.values()))
    pc = defaultdict(int)
    for author in post_author.values():
        pc[author] += 1
    att_in, att_out = defaultdict(int), defaultdict(int)
    def_in, def_out = defaultdict(int), defaultdict(int)
    for a, b in g.attack_edges:
        att_out[post_author[a]] += 1
        att_in[post_author[b]] += 1
    for a, t, _ in g.defence_edges:
        def_out[post_author[a]] += 1
        def_in[post_author[t]] += 1
    cbc, cec, cclc = defaultdict(float), defaultdict(float), defaultdict(float)
    for node, author in post_author.items():
        cbc[author] += cent.betweenness.get(node, 0.0)
        cec[author] += cent.eigenvector.get(node, 0.0)
        cclc[author] += cent.closeness.get(node, 0.0)

    en = {u: att_in[u] + att_out[u] + def_in[u] + def_out[u] for u in users}
    total_en = sum(en.values())
    activity = {u: en[u] * (pc[u] / n_posts) for u in users}
    max_as = max(activity.values(), default=0.0)

    out = {}
    for u in users:
        k = pc[u]
        out[u] = UserFeatureVector(
            conversation_id=g.conversation_id,
            user_id=u,
            PC=k,
            CC=k / n_posts,
            Att_IN=att_in[u],
            Att_OUT=att_out[u],
            Def_IN=def_in[u],
            Def_OUT=def_out[u],
            AvgAtt_OUT=att_out[u] / k,
            AvgAtt_IN=att_in[u] / k,
            AvgDef_OUT=def_out[u] / k,
            AvgDef_IN=def_in[u] / k,
            Agr=smoothed_ratio(att_out[u], def_out[u]),
            Dis=smoothed_ratio(att_in[u], def_in[u]),
            En=en[u],
            NEn=en[u] / total_en if total_en else 0.0,
            As=activity[u],
            NAs=activity[u] / max_as if max_as > 0 else 0.0,
            CBC=cbc[u],
            CEC=cec[u],
            CClC=cclc[u],
        )
    return out


def select_features(v: UserFeatureVector, s) -> np.ndarray:
    values = v.values()
    return np.array([float(values[i]) for i in selector(s).columns()])


_INT_FIELDS = {"PC", "Att_IN", "Att_OUT", "Def_IN", "Def_OUT", "En"}
CSV_COLUMNS = ("conversation_id", "user_id") + FEATURE_NAMES


def vector_from_row(row: dict) -> UserFeatureVector:
    kwargs = {}
    for f in fields(UserFeatureVector):
        raw = row[f.name]
        if f.name in ("conversation_id", "user_id"):
            kwargs[f.name] = raw
        elif f.name in _INT_FIELDS:
            kwargs[f.name] = int(raw)
        else:
            kwargs[f.name] = float(raw)
    return UserFeatureVector(**kwargs)


def vector_to_row(v: UserFeatureVector) -> list:
    return [v.conversation_id, v.user_id] + [repr(x) if isinstance(x, float) else str(x)
                                             for x in v.values()]


def write_features_csv(path_or_fh, vectors, extra=None):
    """Write vectors; ``extra`` maps column name -> callable(vector) -> str."""
    extra = extra or {}
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="", encoding="utf-8") if own else path_or_fh
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CSV_COLUMNS) + list(extra))
        for v in vectors:
            w.writerow(vector_to_row(v) + [fn(v) for fn in extra.values()])
    finally:
        if own:
            fh.close()


def read_features_csv(path) -> list:
    """Return ``(vector, row)`` pairs so callers can pick up extra columns."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [(vector_from_row(row), row) for row in csv.DictReader(fh)]
