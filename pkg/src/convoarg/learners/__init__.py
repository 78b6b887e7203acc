"""Classifier training, inference and model files.

Four families are available: Gaussian naive Bayes, a conditional-inference
tree, a random forest and a linear SVM. Every model stores the per-feature
standardisation learned on its training data and applies it at inference.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np

from ..features import FeatureSetSelector, selector as as_selector
from . import bayes, ctree, forest, svm

FORMAT_VERSION = 1
STD_FLOOR = 1e-12

KINDS = {
    "gaussian_nb": bayes,
    "cond_tree": ctree,
    "random_forest": forest,
    "linear_svm": svm,
}
ALIASES = {"nb": "gaussian_nb", "cit": "cond_tree", "rf": "random_forest", "svm": "linear_svm"}


class SingleClass(ValueError):
    pass


class ArityMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Hyperparams:
    nb_var_floor: float = 1e-9
    tree_alpha: float = 0.05
    tree_min_leaf: int = 7
    forest_trees: int = 100
    forest_mtry: Optional[int] = None     # None: ceil(sqrt(d))
    forest_min_leaf: int = 1
    svm_lambda: float = 1e-4
    svm_epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        for name in ("nb_var_floor", "tree_alpha", "tree_min_leaf", "forest_trees",
                     "forest_min_leaf", "svm_lambda", "svm_epochs"):
            if not getattr(self, name) > 0:
                raise ValueError(f"hyperparameter {name} must be positive")
        if self.forest_mtry is not None and self.forest_mtry <= 0:
            raise ValueError("hyperparameter forest_mtry must be positive")

    def with_seed(self, seed: int) -> "Hyperparams":
        return replace(self, seed=seed)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def canonical_kind(kind: str) -> str:
    kind = ALIASES.get(kind, kind)
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}")
    return kind


def _build_time() -> int:
    # reproducible builds: honour SOURCE_DATE_EPOCH, otherwise a fixed epoch
    return int(os.environ.get("SOURCE_DATE_EPOCH", "0"))


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    selector: object
    parameters: dict
    standardization: dict            # {"mean": [...], "std": [...]}
    train_meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.standardization["mean"])

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise ArityMismatch(f"model expects {self.n_features} features, got {X.shape[1]}")
        return (X - np.asarray(self.standardization["mean"])) / np.asarray(self.standardization["std"])

    def positive_proba(self, X) -> np.ndarray:
        return KINDS[self.kind].positive_proba(self.parameters, self.transform(X))

    def predict_labels(self, X) -> np.ndarray:
        return self.positive_proba(X) > 0.5

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "kind": self.kind,
            "selector": {"name": self.selector.name, "members": list(self.selector.members)},
            "standardization": self.standardization,
            "parameters": self.parameters,
            "train_meta": self.train_meta,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "TrainedModel":
        version = obj.get("format_version")
        if not isinstance(version, int) or version > FORMAT_VERSION:
            raise ValueError(f"unsupported model format_version {version!r}")
        sel = obj["selector"]
        return cls(
            kind=canonical_kind(obj["kind"]),
            selector=FeatureSetSelector(sel["name"], tuple(sel["members"])),
            parameters=obj["parameters"],
            standardization=obj["standardization"],
            train_meta=obj.get("train_meta", {}),
        )

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())


def standardization_of(X) -> dict:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > STD_FLOOR, std, 1.0)
    return {"mean": mean.tolist(), "std": std.tolist()}


def fit_arrays(kind, X, y, hp: Hyperparams, sel=None) -> TrainedModel:
    """Train on a raw matrix; ``y`` holds 0/1 labels."""
    kind = canonical_kind(kind)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if len(y) == 0 or y.min() == y.max():
        raise SingleClass(f"{kind} needs examples of both classes")
    if kind in ("cond_tree", "random_forest") and len(y) < 2 * hp.tree_min_leaf:
        raise ValueError(f"{kind} needs at least {2 * hp.tree_min_leaf} examples")
    if sel is None:
        sel = as_selector([f"x{i}" for i in range(X.shape[1])])
    std = standardization_of(X)
    Z = (X - np.asarray(std["mean"])) / np.asarray(std["std"])
    params = KINDS[kind].fit(Z, y, hp)
    meta = {"seed": hp.seed, "hyperparams": asdict(hp), "timestamp": _build_time(),
            "n_train": int(len(y)), "n_positive": int(y.sum())}
    return TrainedModel(kind, sel, params, std, meta)


def train(kind, data, hp: Hyperparams = Hyperparams()) -> TrainedModel:
    return fit_arrays(kind, data.X, data.y, hp, data.selector)


def train_gaussian_nb(data, hp: Hyperparams = Hyperparams()) -> TrainedModel:
    return train("gaussian_nb", data, hp)


def train_cond_tree(data, hp: Hyperparams = Hyperparams()) -> TrainedModel:
    return train("cond_tree", data, hp)


def train_random_forest(data, hp: Hyperparams = Hyperparams()) -> TrainedModel:
    return train("random_forest", data, hp)


def train_linear_svm(data, hp: Hyperparams = Hyperparams()) -> TrainedModel:
    return train("linear_svm", data, hp)


def predict(model: TrainedModel, v) -> tuple:
    """``(label, score)`` for one feature vector in the model's selector order."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise ArityMismatch("predict takes a single vector")
    score = float(model.positive_proba(v)[0])
    return score > 0.5, score
