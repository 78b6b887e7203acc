"""Random forest of Gini trees on bootstrap resamples."""

from __future__ import annotations

import math

import numpy as np

from ._tree import TreeBuilder, leaf_values


def default_mtry(d: int) -> int:
    return max(1, math.ceil(math.sqrt(d)))


def _best_split(Xs, y, min_leaf):
    """Best Gini cut over the columns of ``Xs``.

    Returns ``(weighted child impurity, column, threshold)`` or None when no
    column admits a split leaving ``min_leaf`` rows on each side.
    """
    n, m = Xs.shape
    order = Xs.argsort(axis=0, kind="stable")
    xs = Xs[order, np.arange(m)]
    ys = y[order]
    left_n = np.arange(1, n)[:, None]
    left_pos = np.cumsum(ys, axis=0)[:-1]
    right_n = n - left_n
    right_pos = left_pos[-1] + ys[-1] - left_pos
    valid = (xs[1:] > xs[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    pl = left_pos / left_n
    pr = right_pos / right_n
    impurity = left_n * 2.0 * pl * (1.0 - pl) + right_n * 2.0 * pr * (1.0 - pr)
    impurity = np.where(valid, impurity, np.inf)
    # column-major argmin so ties go to the first sampled column
    flat = int(np.argmin(impurity.T))
    col, i = divmod(flat, n - 1)
    t = (xs[i, col] + xs[i + 1, col]) / 2.0
    if not xs[i, col] <= t < xs[i + 1, col]:
        t = xs[i, col]       # neighbours too close for a distinct midpoint
    return float(impurity[i, col]), col, float(t)


def grow_tree(X, y, mtry, rng, min_leaf=1):
    d = X.shape[1]
    tree = TreeBuilder()
    gain = np.zeros(d)
    root = tree.add(y.mean(), len(y))
    stack = [(root, np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        yn = y[idx]
        n = len(idx)
        pos = int(yn.sum())
        if pos == 0 or pos == n or n < 2 * min_leaf:
            continue
        parent_impurity = n * 2.0 * (pos / n) * (1.0 - pos / n)
        feats = rng.choice(d, size=mtry, replace=False)
        found = _best_split(X[np.ix_(idx, feats)], yn, min_leaf)
        if found is None:
            continue
        impurity, col, t = found
        j = int(feats[col])
        go_left = X[idx, j] <= t
        li, ri = idx[go_left], idx[~go_left]
        left_pos = int(y[li].sum())
        left = tree.add(left_pos / len(li), len(li))
        right = tree.add((pos - left_pos) / len(ri), len(ri))
        tree.split(node, j, t, left, right)
        gain[j] += parent_impurity - impurity
        stack.append((right, ri))
        stack.append((left, li))
    return tree.to_dict(), gain


def fit(X, y, hp) -> dict:
    n, d = X.shape
    mtry = min(d, hp.forest_mtry or default_mtry(d))
    trees = []
    importances = np.zeros(d)
    oob_votes = np.zeros(n)
    oob_count = np.zeros(n)
    for t in range(hp.forest_trees):
        rng = np.random.default_rng(hp.seed + t)
        sample = rng.integers(0, n, size=n)
        tree, gain = grow_tree(X[sample], y[sample], mtry, rng, hp.forest_min_leaf)
        trees.append(tree)
        if gain.sum() > 0:
            importances += gain / gain.sum()
        oob = np.ones(n, dtype=bool)
        oob[sample] = False
        if oob.any():
            oob_votes[oob] += leaf_values(tree, X[oob]) > 0.5
            oob_count[oob] += 1
    seen = oob_count > 0
    oob_pred = oob_votes[seen] / oob_count[seen] > 0.5
    oob_accuracy = float((oob_pred == (y[seen] == 1)).mean()) if seen.any() else None
    return {
        "mtry": mtry,
        "trees": trees,
        "importances": (importances / hp.forest_trees).tolist(),
        "oob_accuracy": oob_accuracy,
    }


def positive_proba(params, X) -> np.ndarray:
    votes = np.zeros(len(X))
    for tree in params["trees"]:
        votes += leaf_values(tree, X) > 0.5
    return votes / len(params["trees"])
