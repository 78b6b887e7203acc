"""Cumulative approval, top-user flags and dataset assembly."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .features import (FEATURE_NAMES, FULL, UserFeatureVector, read_features_csv,
                       selector as as_selector)


class EmptyCorpus(ValueError):
    pass


class InsufficientClass(ValueError):
    pass


@dataclass(frozen=True)
class UserApproval:
    user_id: str
    cumulative_approval: int


@dataclass(frozen=True)
class LabeledExample:
    conversation_id: str
    user_id: str
    features: UserFeatureVector
    is_top: bool


@dataclass
class Dataset:
    examples: list
    selector: object = FULL
    provenance: str = "evaluation"

    def __post_init__(self):
        self.selector = as_selector(self.selector)

    def __len__(self):
        return len(self.examples)

    @cached_property
    def _full_matrix(self) -> np.ndarray:
        if not self.examples:
            return np.zeros((0, len(FEATURE_NAMES)))
        return np.array([e.features.values() for e in self.examples], dtype=float)

    @property
    def X(self) -> np.ndarray:
        return self._full_matrix[:, self.selector.columns()]

    @cached_property
    def y(self) -> np.ndarray:
        return np.array([e.is_top for e in self.examples], dtype=int)

    def subset(self, indices) -> "Dataset":
        return Dataset([self.examples[i] for i in indices], self.selector, self.provenance)

    def with_selector(self, s) -> "Dataset":
        d = Dataset(self.examples, s, self.provenance)
        # share the cached matrix; the examples are the same objects
        if "_full_matrix" in self.__dict__:
            d.__dict__["_full_matrix"] = self.__dict__["_full_matrix"]
        return d

    def class_counts(self) -> tuple:
        pos = int(self.y.sum())
        return pos, len(self) - pos


def cumulative_approval(posts) -> dict:
    totals = defaultdict(int)
    for p in posts:
        totals[p.author_id] += p.score
    return {u: UserApproval(u, s) for u, s in totals.items()}


def flag_top_users(approvals: dict, fraction: float) -> set:
    """The ``floor(fraction * N)`` best users; ties go to the smaller user id."""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if not approvals:
        raise EmptyCorpus("no users to rank")
    n_top = math.floor(fraction * len(approvals))
    ranked = sorted(approvals.values(), key=lambda a: (-a.cumulative_approval, a.user_id))
    return {a.user_id for a in ranked[:n_top]}


def label_examples(vectors, top_users) -> list:
    return [LabeledExample(v.conversation_id, v.user_id, v, v.user_id in top_users)
            for v in vectors]


def balance_dataset(examples, target_size: int, seed: int, selector=FULL,
                    provenance="evaluation") -> Dataset:
    """Seeded sample of ``target_size / 2`` examples from each class, shuffled."""
    if target_size <= 0 or target_size % 2:
        raise ValueError(f"target_size must be a positive even number, got {target_size}")
    half = target_size // 2
    pos = [i for i, e in enumerate(examples) if e.is_top]
    neg = [i for i, e in enumerate(examples) if not e.is_top]
    if len(pos) < half or len(neg) < half:
        raise InsufficientClass(
            f"need {half} per class, have {len(pos)} top and {len(neg)} other")
    rng = np.random.default_rng(seed)
    chosen = np.concatenate([rng.choice(pos, size=half, replace=False),
                             rng.choice(neg, size=half, replace=False)])
    rng.shuffle(chosen)
    return Dataset([examples[i] for i in chosen], selector, provenance)


def max_balanced_size(examples) -> int:
    pos = sum(1 for e in examples if e.is_top)
    return 2 * min(pos, len(examples) - pos)


def read_labeled_csv(path, selector=FULL, provenance="evaluation") -> Dataset:
    """Load a features CSV that carries an ``is_top`` column."""
    examples = []
    for v, row in read_features_csv(path):
        if "is_top" not in row:
            raise ValueError(f"{path}: no is_top column; run the label step first")
        examples.append(LabeledExample(v.conversation_id, v.user_id, v, row["is_top"] == "1"))
    return Dataset(examples, selector, provenance)
