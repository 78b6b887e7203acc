"""End-to-end runs: corpus in, flagged users and an evaluation report out.

Every stage materializes its output under the run directory; the manifest
records each file's sha256 together with stage versions and the seed, and is
written last so a failed run never leaves one behind.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .analysis import EvalReport, report_from_predictions
from .argraph import build_graph, dump_graphs
from .features import aggregate_features, selector as as_selector, write_features_csv
from .ingest import dump_corpus, read_corpus
from .labeling import (Dataset, balance_dataset, cumulative_approval, flag_top_users,
                       label_examples, max_balanced_size)
from .learners import Hyperparams, TrainedModel, canonical_kind, train
from .metrics import CSV_COLUMNS as CENTRALITY_COLUMNS, centralities, centrality_rows
from .synth import SynthConfig, generate

log = logging.getLogger("convoarg")

MANIFEST_VERSION = 1
STAGE_VERSIONS = {
    "ingest": 1,
    "graph": 1,
    "centrality": 1,
    "features": 1,
    "label": 1,
    "balance": 1,
    "train": 1,
    "evaluate": 1,
    "figures": 1,
}


class ConfigError(ValueError):
    """Rejected before any stage runs."""

    def __init__(self, message, stage=None):
        self.stage = stage
        super().__init__(f"[{stage}] {message}" if stage else message)


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


@dataclass(frozen=True)
class RunConfig:
    output_dir: str
    input: Optional[str] = None
    holdout_input: Optional[str] = None
    synth: Optional[dict] = None
    truth: Optional[str] = None
    holdout_fraction: float = 0.4
    fraction: float = 0.05
    features: object = "minimal"
    kind: str = "random_forest"
    hyperparams: dict = field(default_factory=dict)
    seed: int = 0
    balance_size: Optional[int] = None
    figures: bool = True

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "output_dir" not in d:
            raise ConfigError("output_dir is required")
        d = dict(d)
        if base_dir is not None:
            # relative paths in a config file are relative to that file
            for key in ("input", "holdout_input", "truth", "output_dir"):
                if d.get(key) is not None:
                    d[key] = os.path.join(base_dir, d[key])
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigError(f"config is not valid JSON: {e}")
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw, base_dir=os.path.dirname(os.path.abspath(path)))

    def validate(self):
        if (self.input is None) == (self.synth is None):
            raise ConfigError("give exactly one of input or synth", "ingest")
        for key in ("input", "holdout_input", "truth"):
            path = getattr(self, key)
            if path is not None and not os.path.isfile(path):
                stage = "label" if key == "truth" else "ingest"
                raise ConfigError(f"{key} path does not exist: {path}", stage)
        if self.holdout_input is None and not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must lie in (0, 1)", "label")
        if not 0.0 < self.fraction < 1.0:
            raise ConfigError("fraction must lie in (0, 1)", "label")
        if self.balance_size is not None and (self.balance_size <= 0 or self.balance_size % 2):
            raise ConfigError("balance_size must be a positive even number", "balance")
        try:
            canonical_kind(self.kind)
            as_selector(self.features)
        except (ValueError, KeyError) as e:
            raise ConfigError(str(e), "train")
        unknown = sorted(set(self.hyperparams) - set(Hyperparams.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {unknown}", "train")
        try:
            self.hyperparameters()
            if self.synth is not None:
                SynthConfig.from_dict(self.synth)
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e))

    def hyperparameters(self) -> Hyperparams:
        return Hyperparams.from_dict({**self.hyperparams, "seed": self.seed})

    def to_json(self) -> dict:
        """Path-free description used in the manifest (inputs are hashed instead)."""
        d = asdict(self)
        for key in ("output_dir", "input", "holdout_input", "truth"):
            d.pop(key)
        d["kind"] = canonical_kind(self.kind)
        sel = as_selector(self.features)
        d["features"] = {"name": sel.name, "members": list(sel.members)}
        d["hyperparams"] = asdict(self.hyperparameters())
        return d


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_text(path, text: str) -> str:
    data = text.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(data)
    return sha256_bytes(data)


def dumps_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def centrality_csv(scores_by_conv: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CENTRALITY_COLUMNS)
    for cid, scores in scores_by_conv.items():
        w.writerows(centrality_rows(cid, scores))
    return buf.getvalue()


def features_csv(vectors, extra=None) -> str:
    buf = io.StringIO()
    write_features_csv(buf, vectors, extra)
    return buf.getvalue()


def labeled_csv(examples, extra=None) -> str:
    by_vec = {id(e.features): e for e in examples}
    cols = {"is_top": lambda v: "1" if by_vec[id(v)].is_top else "0"}
    cols.update(extra or {})
    return features_csv([e.features for e in examples], cols)


def corpus_graphs(conversations):
    return [build_graph(c) for c in conversations]


def corpus_features(conversations, graphs=None, scores=None) -> list:
    """Per-(conversation, user) feature vectors, conversation order preserved."""
    graphs = graphs or corpus_graphs(conversations)
    scores = scores or {g.conversation_id: centralities(g) for g in graphs}
    vectors = []
    for c, g in zip(conversations, graphs):
        vectors.extend(aggregate_features(g, scores[g.conversation_id], c).values())
    return vectors


def split_conversations(conversations, holdout_fraction: float, seed: int):
    """Seeded conversation-level split so no thread straddles train and holdout."""
    n = len(conversations)
    n_hold = int(round(holdout_fraction * n))
    if n < 2 or not 0 < n_hold < n:
        raise ValueError(f"cannot split {n} conversations with holdout_fraction {holdout_fraction}")
    order = np.random.default_rng(seed).permutation(n)
    hold = set(order[:n_hold].tolist())
    train_part = [c for i, c in enumerate(conversations) if i not in hold]
    hold_part = [c for i, c in enumerate(conversations) if i in hold]
    return train_part, hold_part


def prediction_rows(model: TrainedModel, vectors):
    if not vectors:
        return np.zeros(0), np.zeros(0, dtype=bool)
    X = np.array([v.values() for v in vectors], dtype=float)[:, model.selector.columns()]
    score = model.positive_proba(X)
    return score, score > 0.5


def flagged_csv(vectors, score, flagged, is_top=None, only_flagged=True) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    header = ["conversation_id", "user_id", "score", "flagged"]
    if is_top is not None:
        header.append("is_top")
    w.writerow(header)
    for i, v in enumerate(vectors):
        if only_flagged and not flagged[i]:
            continue
        row = [v.conversation_id, v.user_id, repr(float(score[i])), int(flagged[i])]
        if is_top is not None:
            row.append(int(is_top[i]))
        w.writerow(row)
    return buf.getvalue()


@dataclass
class RunResult:
    report: EvalReport
    extra: dict
    manifest: dict
    manifest_hash: str
    output_dir: Path


class _Run:
    """Bookkeeping for one run: stage timing, logging and output hashes."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = Path(config.output_dir)
        self.stages = []

    def stage(self, name):
        return _Stage(self, name)

    def emit(self, stage, filename, text: str):
        digest = write_text(self.out / filename, text)
        stage.outputs[filename] = digest
        return digest

    def emit_file(self, stage, filename):
        stage.outputs[filename] = sha256_file(self.out / filename)


class _Stage:
    def __init__(self, run, name):
        self.run = run
        self.name = name
        self.outputs = {}
        self.seed = None

    def __enter__(self):
        self.t0 = time.perf_counter()
        log.info("stage %s: start", self.name, extra={"stage": self.name})
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None:
            if isinstance(exc, StageError):
                return False
            raise StageError(self.name, exc) from exc
        entry = {"name": self.name, "version": STAGE_VERSIONS[self.name],
                 "outputs": dict(sorted(self.outputs.items()))}
        if self.seed is not None:
            entry["seed"] = self.seed
        self.run.stages.append(entry)
        log.info("stage %s: done in %.2fs", self.name, time.perf_counter() - self.t0,
                 extra={"stage": self.name})
        return False


def run_detect(config: RunConfig) -> RunResult:
    """Run every stage and return the held-out evaluation.

    Raises ``ConfigError`` before touching the output directory, and
    ``StageError`` (naming the stage) when a stage fails.
    """
    config.validate()
    run = _Run(config)
    out = run.out
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        manifest_path.unlink()
    seed = config.seed
    sel = as_selector(config.features)
    inputs = {}

    with run.stage("ingest") as st:
        truth = None
        if config.synth is not None:
            synth_cfg = SynthConfig.from_dict(config.synth)
            st.seed = synth_cfg.seed
            corpus = generate(synth_cfg)
            conversations = corpus.conversations
            truth = set(corpus.ground_truth_top)
            run.emit(st, "truth.json", dumps_json(corpus.truth_json()))
        else:
            inputs["input"] = sha256_file(config.input)
            conversations = read_corpus(config.input)
        if config.truth is not None:
            inputs["truth"] = sha256_file(config.truth)
            with open(config.truth, encoding="utf-8") as fh:
                truth = set(json.load(fh)["ground_truth_top"])
        run.emit(st, "corpus.jsonl", dump_corpus(conversations))
        holdout_convs = None
        if config.holdout_input is not None:
            inputs["holdout_input"] = sha256_file(config.holdout_input)
            holdout_convs = read_corpus(config.holdout_input)
            shared = ({c.conversation_id for c in conversations}
                      & {c.conversation_id for c in holdout_convs})
            if shared:
                # every per-conversation artifact is keyed by id, so overlap is ambiguous
                raise ValueError(f"holdout input reuses {len(shared)} conversation ids, "
                                 f"e.g. {min(shared)!r}")
            run.emit(st, "holdout_corpus.jsonl", dump_corpus(holdout_convs))
        log.info("%d conversations, %d posts", len(conversations),
                 sum(len(c) for c in conversations), extra={"stage": "ingest"})

    everything = conversations + (holdout_convs or [])
    with run.stage("graph") as st:
        graphs = corpus_graphs(everything)
        run.emit(st, "graphs.jsonl", dump_graphs(graphs))

    with run.stage("centrality") as st:
        scores = {g.conversation_id: centralities(g) for g in graphs}
        unconverged = [cid for cid, s in scores.items() if not s.converged]
        if unconverged:
            log.warning("eigenvector centrality did not converge for %s", unconverged,
                        extra={"stage": "centrality"})
        run.emit(st, "centrality.csv", centrality_csv(scores))

    with run.stage("features") as st:
        vectors = corpus_features(everything, graphs, scores)
        run.emit(st, "features.csv", features_csv(vectors))

    with run.stage("label") as st:
        if holdout_convs is None:
            st.seed = seed
            train_convs, hold_convs = split_conversations(conversations, config.holdout_fraction, seed)
            # one corpus, one ranking: flags come from every conversation
            approvals = cumulative_approval(p for c in conversations for p in c.posts)
            top = flag_top_users(approvals, config.fraction)
            top_train = top_hold = top
            approval_sets = [approvals]
        else:
            train_convs, hold_convs = conversations, holdout_convs
            a_train = cumulative_approval(p for c in train_convs for p in c.posts)
            a_hold = cumulative_approval(p for c in hold_convs for p in c.posts)
            top_train = flag_top_users(a_train, config.fraction)
            top_hold = flag_top_users(a_hold, config.fraction)
            approval_sets = [a_train, a_hold]
        hold_ids = {c.conversation_id for c in hold_convs}
        train_vecs = [v for v in vectors if v.conversation_id not in hold_ids]
        hold_vecs = [v for v in vectors if v.conversation_id in hold_ids]
        train_ex = label_examples(train_vecs, top_train)
        hold_ex = label_examples(hold_vecs, top_hold)
        split_of = {id(e.features): "train" for e in train_ex}
        split_of.update({id(e.features): "holdout" for e in hold_ex})
        run.emit(st, "labels.csv", labeled_csv(train_ex + hold_ex,
                                               {"split": lambda v: split_of[id(v)]}))
        cut = approval_cut(approval_sets[0], config.fraction)

    with run.stage("balance") as st:
        st.seed = seed
        size = config.balance_size or max_balanced_size(train_ex)
        train_data = balance_dataset(train_ex, size, seed, sel)
        run.emit(st, "train_balanced.csv", labeled_csv(train_data.examples))
        hold_data = Dataset(hold_ex, sel, provenance="validation")
        log.info("training on %d balanced examples, holding out %d", len(train_data),
                 len(hold_data), extra={"stage": "balance"})

    with run.stage("train") as st:
        hp = config.hyperparameters()
        st.seed = hp.seed
        model = train(config.kind, train_data, hp)
        run.emit(st, "model.json", model.dumps())

    with run.stage("evaluate") as st:
        score, flagged = prediction_rows(model, hold_vecs)
        y_hold = hold_data.y.astype(bool)
        report = report_from_predictions(y_hold, flagged)
        extra = {
            "seed": seed,
            "kind": model.kind,
            "features": {"name": sel.name, "members": list(sel.members)},
            "n_train": len(train_data),
            "n_holdout": len(hold_data),
            "holdout_positive_fraction": float(y_hold.mean()) if len(y_hold) else None,
            "n_conversations": {"train": len(train_convs), "holdout": len(hold_convs)},
        }
        if model.kind == "random_forest":
            extra["oob_accuracy"] = model.parameters["oob_accuracy"]
        if truth is not None:
            planted = np.array([v.user_id in truth for v in hold_vecs], dtype=bool)
            extra["planted_recall"] = (float(flagged[planted].mean()) if planted.any() else None)
            extra["planted_examples"] = int(planted.sum())
        run.emit(st, "report.json", dumps_json({**report.to_json(), **extra}))
        run.emit(st, "flagged_users.csv", flagged_csv(hold_vecs, score, flagged, y_hold))
        log.info("holdout accuracy %.3f recall %s flagged %.3f", report.accuracy,
                 "n/a" if report.recall is None else f"{report.recall:.3f}",
                 report.flagged_fraction, extra={"stage": "evaluate"})

    if config.figures:
        from . import plotting

        with run.stage("figures") as st:
            (out / "figures").mkdir(exist_ok=True)
            values = [a.cumulative_approval for a in approval_sets[0].values()]
            plotting.approval_histogram(values, cut, out / "figures" / "approval.png")
            run.emit_file(st, "figures/approval.png")
            plotting.score_histogram(score, y_hold, out / "figures" / "holdout_scores.png",
                                     title=f"{model.kind}, {sel.name} features")
            run.emit_file(st, "figures/holdout_scores.png")

    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "package_version": __version__,
        "seed": seed,
        "config": config.to_json(),
        "inputs": inputs,
        "stages": run.stages,
    }
    text = dumps_json(manifest)
    manifest_hash = write_text(manifest_path, text)
    log.info("manifest %s", manifest_hash, extra={"stage": "manifest"})
    return RunResult(report, extra, manifest, manifest_hash, out)


def detect(model: TrainedModel, conversations):
    """Score every (conversation, user) pair of a corpus with a trained model."""
    vectors = corpus_features(conversations)
    score, flagged = prediction_rows(model, vectors)
    return vectors, score, flagged


def approval_cut(approvals: dict, fraction: float):
    n_top = math.floor(fraction * len(approvals))
    ranked = sorted((a.cumulative_approval for a in approvals.values()), reverse=True)
    return ranked[n_top - 1] if n_top else None
