"""Linear SVM trained by primal stochastic subgradient descent (Pegasos)."""

from __future__ import annotations

import numpy as np


def fit(X, y, hp) -> dict:
    # constant column carries the bias; it is regularised like any weight
    Xa = np.hstack([X, np.ones((len(X), 1))])
    signs = np.where(y == 1, 1.0, -1.0)
    lam = hp.svm_lambda
    rng = np.random.default_rng(hp.seed)
    w = np.zeros(Xa.shape[1])
    t = 0
    for _ in range(hp.svm_epochs):
        for i in rng.permutation(len(Xa)):
            t += 1
            eta = 1.0 / (lam * t)
            margin = signs[i] * (w @ Xa[i])
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta * signs[i] * Xa[i]
    return {"weights": w[:-1].tolist(), "bias": float(w[-1])}


def decision_function(params, X) -> np.ndarray:
    return X @ np.asarray(params["weights"]) + params["bias"]


def positive_proba(params, X) -> np.ndarray:
    m = decision_function(params, X)
    return np.where(m >= 0, 1.0 / (1.0 + np.exp(-np.abs(m))),
                    np.exp(-np.abs(m)) / (1.0 + np.exp(-np.abs(m))))
