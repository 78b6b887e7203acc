"""Evaluation harness and exploratory analyses.

Precision, recall and F1 are reported for the top-user class. When a metric
has a zero denominator it is ``None`` (``null`` in JSON), never 0 or NaN.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .features import FEATURE_NAMES, FeatureSetSelector
from .learners import Hyperparams, TrainedModel, fit_arrays

NO_GRAPH = FeatureSetSelector("no_graph", ("PC", "CC"))
ATTACKS = FeatureSetSelector(
    "attacks", ("PC", "CC", "Att_IN", "Att_OUT", "AvgAtt_OUT", "AvgAtt_IN"))
FULL_REGIME = FeatureSetSelector("full", FEATURE_NAMES)
ABLATION_REGIMES = (NO_GRAPH, ATTACKS, FULL_REGIME)
ABLATION_KINDS = ("cond_tree", "random_forest", "linear_svm")


class TooFewExamples(ValueError):
    pass


class DegenerateData(ValueError):
    pass


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: Optional[float]
    recall: Optional[float]
    f1: Optional[float]
    flagged_fraction: float
    folds: list = field(default_factory=list)
    fold_accuracy: Optional[dict] = None   # min / mean / max over folds

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_json(self) -> dict:
        out = asdict(self)
        out["confusion"] = {k: out.pop(k) for k in ("tp", "fp", "fn", "tn")}
        return out


def report_from_counts(tp, fp, fn, tn, folds=None) -> EvalReport:
    total = tp + fp + fn + tn
    precision = tp / (tp + fp) if tp + fp else None
    recall = tp / (tp + fn) if tp + fn else None
    if precision is None or recall is None:
        f1 = None
    elif precision + recall == 0:
        f1 = 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    report = EvalReport(
        tp=int(tp), fp=int(fp), fn=int(fn), tn=int(tn),
        accuracy=(tp + tn) / total if total else None,
        precision=precision, recall=recall, f1=f1,
        flagged_fraction=(tp + fp) / total if total else None,
    )
    if folds:
        accs = [f.accuracy for f in folds]
        report.folds = [f.to_json() for f in folds]
        report.fold_accuracy = {"min": min(accs), "mean": float(np.mean(accs)), "max": max(accs)}
    return report


def confusion(y_true, y_pred) -> tuple:
    y_true = np.asarray(y_true, dtype=bool)
    y_pred = np.asarray(y_pred, dtype=bool)
    tp = int((y_true & y_pred).sum())
    fp = int((~y_true & y_pred).sum())
    fn = int((y_true & ~y_pred).sum())
    tn = int((~y_true & ~y_pred).sum())
    return tp, fp, fn, tn


def report_from_predictions(y_true, y_pred) -> EvalReport:
    return report_from_counts(*confusion(y_true, y_pred))


def evaluate(model: TrainedModel, test) -> EvalReport:
    X = test.with_selector(model.selector).X
    return report_from_predictions(test.y, model.predict_labels(X))


def stratified_kfold(data, k: int, seed: int) -> list:
    """``k`` disjoint ``(train_idx, test_idx)`` pairs with per-class balance."""
    y = data.y if hasattr(data, "y") else np.asarray(data)
    if k < 2:
        raise ValueError("k must be at least 2")
    rng = np.random.default_rng(seed)
    order = []
    for cls in (1, 0):
        members = np.flatnonzero(y == cls)
        if 0 < len(members) < k:
            raise TooFewExamples(f"class {cls} has {len(members)} examples for {k} folds")
        order.extend(rng.permutation(members).tolist())
    if len(set(y.tolist())) < 2:
        raise TooFewExamples("both classes are needed for stratified folds")
    fold_of = np.empty(len(y), dtype=int)
    # dealing the class-grouped list round-robin keeps every class within one
    # example of its share in each fold
    for pos, i in enumerate(order):
        fold_of[i] = pos % k
    all_idx = np.arange(len(y))
    return [(all_idx[fold_of != f], all_idx[fold_of == f]) for f in range(k)]


def cross_validate(kind, data, hp: Hyperparams = Hyperparams(), k: int = 10, seed: int = 0) -> EvalReport:
    """Pooled (micro-averaged) confusion over ``k`` stratified folds."""
    X, y = data.X, data.y
    folds = []
    for train_idx, test_idx in stratified_kfold(data, k, seed):
        model = fit_arrays(kind, X[train_idx], y[train_idx], hp, data.selector)
        folds.append(report_from_predictions(y[test_idx], model.predict_labels(X[test_idx])))
    tp = sum(f.tp for f in folds)
    fp = sum(f.fp for f in folds)
    fn = sum(f.fn for f in folds)
    tn = sum(f.tn for f in folds)
    return report_from_counts(tp, fp, fn, tn, folds)


@dataclass
class PcaResult:
    components: np.ndarray          # d x k, orthonormal columns
    explained_variance: np.ndarray  # eigenvalues, descending
    explained_variance_ratio: np.ndarray
    mean: np.ndarray
    feature_names: tuple = ()

    def transform(self, X) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) @ self.components

    def reconstruction_error(self, X) -> float:
        Z = self.transform(X)
        back = Z @ self.components.T + self.mean
        return float(((np.asarray(X, dtype=float) - back) ** 2).sum())

    def to_json(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean": self.mean.tolist(),
            "components": self.components.T.tolist(),
            "explained_variance": self.explained_variance.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
        }


def _power_iteration(C, basis, rng, tol, max_iter):
    d = C.shape[0]
    v = rng.standard_normal(d)
    for b in basis:
        v -= (v @ b) * b
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        w = C @ v
        for b in basis:     # deflation by projection keeps the basis orthonormal
            w -= (w @ b) * b
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            # remaining spectrum is zero; any orthogonal direction will do
            return v
        w /= norm
        if w @ v < 0:
            w = -w
        if np.linalg.norm(w - v) < tol:
            v = w
            break
        v = w
    for b in basis:
        v -= (v @ b) * b
    return v / np.linalg.norm(v)


def pca_matrix(X, k: int, tol: float = 1e-10, max_iter: int = 20000, seed: int = 0) -> PcaResult:
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("PCA needs at least two examples")
    if not 1 <= k <= d:
        raise ValueError(f"k must lie in 1..{d}")
    mean = X.mean(axis=0)
    Xc = X - mean
    C = Xc.T @ Xc / (n - 1)
    total = float(np.trace(C))
    if total <= 0:
        raise DegenerateData("zero total variance")
    rng = np.random.default_rng(seed)
    basis = []
    for _ in range(k):
        basis.append(_power_iteration(C, basis, rng, tol, max_iter))
    V = np.column_stack(basis)
    eig = np.einsum("ij,ik,kj->j", V, C, V)
    order = np.argsort(-eig, kind="stable")
    V, eig = V[:, order], eig[order]
    # orient each component so its largest-magnitude loading is positive
    signs = np.sign(V[np.abs(V).argmax(axis=0), np.arange(k)])
    V = V * np.where(signs == 0, 1.0, signs)
    eig = np.maximum(eig, 0.0)
    return PcaResult(V, eig, eig / total, mean)


def pca(data, k: int, **kw) -> PcaResult:
    result = pca_matrix(data.X, k, **kw)
    result.feature_names = tuple(data.selector.members)
    return result


@dataclass
class RfeResult:
    subsets: list        # list of feature-name tuples, largest first
    accuracies: list     # cross-validated accuracy per subset
    eliminated: list     # feature dropped after each step
    best: tuple

    def to_json(self) -> dict:
        return {
            "steps": [{"features": list(s), "cv_accuracy": a}
                      for s, a in zip(self.subsets, self.accuracies)],
            "eliminated": self.eliminated,
            "best": list(self.best),
        }


def rfe(data, hp: Hyperparams = Hyperparams(), k_folds: int = 5, seed: int = 0) -> RfeResult:
    """Recursive feature elimination driven by random-forest impurity importance."""
    names = list(data.selector.members)
    X_all, y = data.X, data.y
    cols = list(range(len(names)))
    subsets, accuracies, eliminated = [], [], []
    while cols:
        sub = data.with_selector(FeatureSetSelector("rfe", tuple(names[c] for c in cols)))
        report = cross_validate("random_forest", sub, hp, k_folds, seed)
        subsets.append(tuple(sub.selector.members))
        accuracies.append(report.accuracy)
        if len(cols) == 1:
            break
        model = fit_arrays("random_forest", X_all[:, cols], y, hp)
        imp = np.asarray(model.parameters["importances"])
        drop = int(np.argmin(imp))      # first minimum: earliest column loses ties
        eliminated.append(names[cols[drop]])
        del cols[drop]
    best_acc = max(accuracies)
    # ties go to the smaller subset, i.e. the later step
    best = max(i for i, a in enumerate(accuracies) if a == best_acc)
    return RfeResult(subsets, accuracies, eliminated, subsets[best])


def ablation_study(data, hp: Hyperparams = Hyperparams(), seed: int = 0, k: int = 10,
                   kinds=ABLATION_KINDS, regimes=ABLATION_REGIMES) -> list:
    """Rows of ``(regime, kind, accuracy)`` for nested feature regimes."""
    rows = []
    for regime in regimes:
        sub = data.with_selector(regime)
        for kind in kinds:
            report = cross_validate(kind, sub, hp, k, seed)
            rows.append((regime.name, kind, report.accuracy))
    return rows
