"""Flat binary-tree storage shared by the tree learners."""

from __future__ import annotations

import numpy as np


class TreeBuilder:
    def __init__(self):
        self.feature = []
        self.threshold = []
        self.left = []
        self.right = []
        self.value = []      # fraction of positives in the node
        self.n = []

    def add(self, value, n) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        self.n.append(int(n))
        return len(self.feature) - 1

    def split(self, node, feature, threshold, left, right):
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right

    def to_dict(self) -> dict:
        return {"feature": self.feature, "threshold": self.threshold,
                "left": self.left, "right": self.right,
                "value": self.value, "n": self.n}


def apply(tree: dict, X: np.ndarray) -> np.ndarray:
    """Leaf index reached by every row of ``X`` (rows go left when x <= threshold)."""
    feature = np.asarray(tree["feature"])
    threshold = np.asarray(tree["threshold"], dtype=float)
    left = np.asarray(tree["left"])
    right = np.asarray(tree["right"])
    node = np.zeros(len(X), dtype=np.intp)
    rows = np.arange(len(X))
    active = feature[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        go_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(go_left, left[nd], right[nd])
        active = feature[node] >= 0
    return node


def leaf_values(tree: dict, X: np.ndarray) -> np.ndarray:
    return np.asarray(tree["value"], dtype=float)[apply(tree, X)]


def depth(tree: dict) -> int:
    def rec(i):
        if tree["feature"][i] < 0:
            return 0
        return 1 + max(rec(tree["left"][i]), rec(tree["right"][i]))
    return rec(0)


def n_leaves(tree: dict) -> int:
    return sum(1 for f in tree["feature"] if f < 0)
