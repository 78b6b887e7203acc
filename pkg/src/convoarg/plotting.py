"""Report figures. Everything renders off-screen to PNG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# no version/date stamps, so reruns give identical bytes
_PNG_META = {"Software": None}

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 10,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=100, metadata=_PNG_META)
    plt.close(fig)
    return path


def approval_histogram(approvals, cut, path):
    """Distribution of cumulative approval with the top-user cut marked."""
    values = np.asarray(sorted(approvals), dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(values, bins=min(60, max(10, len(values) // 20)), color="0.55")
        if cut is not None:
            ax.axvline(cut, color="C3", linestyle="--", label=f"top-user cut ({cut:g})")
            ax.legend(frameon=False)
        ax.set_xlabel("cumulative approval")
        ax.set_ylabel("users")
        return _save(fig, path)


def score_histogram(scores, labels, path, title=None):
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    bins = np.linspace(0.0, 1.0, 21)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.hist(scores[~labels], bins=bins, alpha=0.7, label="other users", color="C0")
        ax.hist(scores[labels], bins=bins, alpha=0.7, label="top users", color="C3")
        ax.axvline(0.5, color="k", linewidth=0.8)
        ax.set_yscale("log")
        ax.set_xlabel("classifier score")
        ax.set_ylabel("examples")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def ablation_bars(rows, path):
    """Grouped bars of accuracy per feature regime and classifier."""
    regimes = list(dict.fromkeys(r[0] for r in rows))
    kinds = list(dict.fromkeys(r[1] for r in rows))
    acc = {(r[0], r[1]): r[2] for r in rows}
    width = 0.8 / len(kinds)
    x = np.arange(len(regimes))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for i, kind in enumerate(kinds):
            ax.bar(x + i * width, [acc[(r, kind)] for r in regimes], width, label=kind)
        ax.set_xticks(x + width * (len(kinds) - 1) / 2)
        ax.set_xticklabels(regimes)
        ax.set_ylim(0, 1)
        ax.axhline(0.5, color="k", linewidth=0.8, linestyle=":")
        ax.set_ylabel("cross-validated accuracy")
        ax.legend(frameon=False, loc="lower right")
        return _save(fig, path)


def scree_plot(ratios, path):
    ratios = np.asarray(ratios, dtype=float)
    k = np.arange(1, len(ratios) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(k, ratios, color="0.6", label="component")
        ax.plot(k, np.cumsum(ratios), "o-", color="C3", label="cumulative")
        ax.set_xlabel("principal component")
        ax.set_ylabel("explained variance ratio")
        ax.set_ylim(0, 1.05)
        ax.legend(frameon=False)
        return _save(fig, path)


def rfe_curve(sizes, accuracies, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(sizes, accuracies, "o-")
        ax.set_xlabel("number of features")
        ax.set_ylabel("cross-validated accuracy")
        ax.invert_xaxis()
        return _save(fig, path)
