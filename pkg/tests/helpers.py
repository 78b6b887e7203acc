import json

import numpy as np
from hypothesis import strategies as st

from convoarg.features import FEATURE_NAMES, UserFeatureVector
from convoarg.ingest import Conversation, Post
from convoarg.labeling import Dataset, LabeledExample


def record(pid, author, parent=None, body="", ts=0, score=0, conv="t1"):
    return json.dumps({"id": pid, "conversation_id": conv, "author": author,
                       "parent_id": parent, "body": body, "timestamp": ts, "score": score})


def make_conversation(rows, conv="t1"):
    """Canonical conversation from ``(author, parent_index, body, score)`` rows."""
    posts = []
    for i, row in enumerate(rows):
        author, parent, body, score = tuple(row) + (None, "", 0)[len(row) - 1:]
        posts.append(Post(f"p{i + 1}", conv, author,
                          None if parent is None else f"p{parent + 1}", body, i, score, i))
    return Conversation(conv, tuple(posts))


@st.composite
def conversations(draw):
    n = draw(st.integers(1, 15))
    rows = []
    for i in range(n):
        author = draw(st.sampled_from("ABCD"))
        parent = None if i == 0 else draw(st.one_of(st.none(), st.integers(0, i - 1)))
        mention = draw(st.one_of(st.none(), st.sampled_from("ABCDZ")))
        body = "" if mention is None else draw(st.sampled_from(["u/{}", "@{} no", "x /u/{}"])).format(mention)
        rows.append((author, parent, body, mention))
    return rows


def separable_2d(n, margin=1.0, seed=0):
    """Points in [-5, 5]^2 labelled by a random line, with an empty band of
    width ``margin`` around it."""
    rng = np.random.default_rng(seed)
    angle = rng.uniform(0, 2 * np.pi)
    w = np.array([np.cos(angle), np.sin(angle)])
    X = np.empty((0, 2))
    while len(X) < n:
        cand = rng.uniform(-5, 5, size=(2 * n, 2))
        cand = cand[np.abs(cand @ w) >= margin / 2]
        X = np.vstack([X, cand])
    X = X[:n]
    return X, (X @ w > 0).astype(int)


def dataset_from(X, y, names=FEATURE_NAMES):
    """Wrap a matrix in a Dataset; columns fill the named features, the rest stay 0."""
    examples = []
    for i, (row, label) in enumerate(zip(X, y)):
        values = dict.fromkeys(FEATURE_NAMES, 0.0)
        values.update(zip(names, row))
        examples.append(LabeledExample("c", f"u{i}", UserFeatureVector("c", f"u{i}", **values),
                                       bool(label)))
    return Dataset(examples, list(names))


def run_cli_chain(work, main, seed=7):
    """Drive every subcommand once inside `work`; return the artifacts written."""
    import json
    work.mkdir(parents=True, exist_ok=True)
    w = lambda name: str(work / name)  # noqa: E731
    (work / "synth.json").write_text(json.dumps(
        {"n_conversations": 8, "posts_per_conversation": [60, 100], "n_users": 300, "seed": seed}))
    (work / "hp.json").write_text(json.dumps({"forest_trees": 15, "svm_epochs": 10}))
    steps = [
        ["synth", "--config", w("synth.json"), "--out", w("raw.jsonl"), "--truth", w("truth.json")],
        ["ingest", "--in", w("raw.jsonl"), "--out", w("corpus.jsonl")],
        ["graph", "--in", w("corpus.jsonl"), "--out", w("graphs.jsonl")],
        ["centrality", "--in", w("graphs.jsonl"), "--out", w("centrality.csv")],
        ["features", "--graphs", w("graphs.jsonl"), "--centrality", w("centrality.csv"),
         "--out", w("features.csv")],
        ["label", "--posts", w("corpus.jsonl"), "--features", w("features.csv"),
         "--out", w("labels.csv")],
        ["balance", "--in", w("labels.csv"), "--seed", "3", "--out", w("balanced.csv")],
        ["train", "--kind", "rf", "--features", "minimal", "--in", w("balanced.csv"),
         "--hyperparams", w("hp.json"), "--seed", "3", "--out", w("model.json")],
        ["eval", "--model", w("model.json"), "--in", w("labels.csv"), "--report", w("eval.json"),
         "--table", w("eval.csv"), "--predictions", w("predictions.csv")],
        ["cv", "--kind", "svm", "--in", w("balanced.csv"), "--k", "3", "--hyperparams",
         w("hp.json"), "--report", w("cv.json"), "--table", w("cv.csv")],
        ["analyze", "pca", "--in", w("labels.csv"), "--report", w("pca.json"),
         "--figure", w("pca.png")],
        ["analyze", "rfe", "--in", w("balanced.csv"), "--features", "reduced", "--k-folds", "3",
         "--hyperparams", w("hp.json"), "--report", w("rfe.json"), "--table", w("rfe.csv"),
         "--figure", w("rfe.png")],
        ["analyze", "ablation", "--in", w("balanced.csv"), "--k", "3", "--kinds", "rf",
         "--hyperparams", w("hp.json"), "--report", w("ablation.json"),
         "--table", w("ablation.csv"), "--figure", w("ablation.png")],
        ["detect", "--model", w("model.json"), "--in", w("corpus.jsonl"), "--all",
         "--out", w("detected.csv")],
    ]
    for argv in steps:
        code = main(["--quiet"] + argv)
        if code != 0:
            raise AssertionError(f"{argv[0]} exited {code}")
    return sorted(p for p in work.iterdir() if p.suffix in (".jsonl", ".csv", ".json", ".png")
                  and p.name not in ("synth.json", "hp.json"))
