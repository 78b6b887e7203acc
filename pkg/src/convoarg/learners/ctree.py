"""Conditional-inference style classification tree.

Variable selection and stopping use Monte-Carlo permutation tests of the
association between each feature and the class, Bonferroni-adjusted over
features. The split point is then chosen on the decile grid of the selected
feature only, so features with many distinct values gain no advantage in the
selection step.
"""

from __future__ import annotations

import numpy as np

from ._tree import TreeBuilder, leaf_values

N_PERMUTATIONS = 999
DECILES = np.linspace(0.1, 0.9, 9)
MAX_DEPTH = 32


def _standardized_diff(sum1, total, sq_total, n1, n0):
    """|mean_1 - mean_0| / (sd * sqrt(1/n1 + 1/n0)) for one or many columns."""
    n = n1 + n0
    mean1 = sum1 / n1
    mean0 = (total - sum1) / n0
    var = np.maximum(sq_total / n - (total / n) ** 2, 0.0)
    scale = np.sqrt(var) * np.sqrt(1.0 / n1 + 1.0 / n0)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = np.abs(mean1 - mean0) / scale
    return np.where(scale > 1e-12, stat, 0.0)


def association_test(X, y, rng, n_perm=N_PERMUTATIONS):
    """Observed statistic and raw permutation p-value for every column of ``X``."""
    n1 = int(y.sum())
    n0 = len(y) - n1
    total = X.sum(axis=0)
    sq_total = (X ** 2).sum(axis=0)
    observed = _standardized_diff(y @ X, total, sq_total, n1, n0)
    perms = np.array([rng.permutation(y) for _ in range(n_perm)], dtype=float)
    null = _standardized_diff(perms @ X, total, sq_total, n1, n0)
    exceed = (null >= observed - 1e-12).sum(axis=0)
    pvalue = (1.0 + exceed) / (n_perm + 1.0)
    pvalue = np.where(observed > 0, pvalue, 1.0)
    return observed, pvalue


def best_threshold(x, y, min_leaf):
    """Decile cut maximising the class association of the split indicator."""
    best_t, best_stat = None, -1.0
    n1 = int(y.sum())
    n0 = len(y) - n1
    for t in np.unique(np.quantile(x, DECILES)):
        ind = (x <= t).astype(float)
        n_left = int(ind.sum())
        if n_left < min_leaf or len(x) - n_left < min_leaf:
            continue
        stat = float(_standardized_diff(ind @ y, n_left, n_left, n1, n0))
        if stat > best_stat:
            best_t, best_stat = float(t), stat
    return best_t


def fit(X, y, hp) -> dict:
    rng = np.random.default_rng(hp.seed)
    d = X.shape[1]
    tree = TreeBuilder()
    importances = np.zeros(d)
    root = tree.add(y.mean(), len(y))
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, level = stack.pop()
        yn = y[idx]
        n1 = int(yn.sum())
        if n1 == 0 or n1 == len(yn) or len(idx) < 2 * hp.tree_min_leaf or level >= MAX_DEPTH:
            continue
        Xn = X[idx]
        stat, p = association_test(Xn, yn, rng)
        adjusted = np.minimum(1.0, p * d)
        # smallest adjusted p; ties broken by the larger statistic, then column order
        j = int(np.lexsort((np.arange(d), -stat, adjusted))[0])
        if adjusted[j] > hp.tree_alpha:
            continue
        t = best_threshold(Xn[:, j], yn, hp.tree_min_leaf)
        if t is None:
            continue
        go_left = Xn[:, j] <= t
        li, ri = idx[go_left], idx[~go_left]
        left = tree.add(y[li].mean(), len(li))
        right = tree.add(y[ri].mean(), len(ri))
        tree.split(node, j, t, left, right)
        importances[j] += 1.0 - adjusted[j]
        stack.append((right, ri, level + 1))
        stack.append((left, li, level + 1))
    params = tree.to_dict()
    params["importances"] = importances.tolist()
    return params


def positive_proba(params, X) -> np.ndarray:
    return leaf_values(params, X)
