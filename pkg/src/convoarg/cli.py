"""Command-line entry point: ``convoarg <command> ...``.

Exit codes: 0 success, 2 invalid input or configuration, 3 a pipeline stage
failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys

from . import __version__
from .analysis import (ABLATION_KINDS, ablation_study, cross_validate, evaluate, pca, rfe)
from .argraph import build_graph, dump_graphs, read_graphs
from .features import aggregate_features, read_features_csv, selector as as_selector
from .ingest import dump_corpus, parse_corpus, read_corpus
from .labeling import (balance_dataset, cumulative_approval, flag_top_users, label_examples,
                       max_balanced_size, read_labeled_csv)
from .learners import Hyperparams, TrainedModel, canonical_kind, train
from .metrics import centralities, read_centrality_csv
from .pipeline import (ConfigError, RunConfig, StageError, centrality_csv, detect, dumps_json,
                       features_csv, flagged_csv, labeled_csv, run_detect)
from .synth import SynthConfig, generate, load_config

log = logging.getLogger("convoarg")

EXIT_OK, EXIT_INVALID, EXIT_STAGE = 0, 2, 3


class JsonFormatter(logging.Formatter):
    def format(self, record):
        entry = {"level": record.levelname.lower(), "logger": record.name,
                 "message": record.getMessage()}
        stage = getattr(record, "stage", None)
        if stage:
            entry["stage"] = stage
        return json.dumps(entry, sort_keys=True)


def setup_logging(quiet=False, json_logs=False):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(JsonFormatter() if json_logs else logging.Formatter("%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.WARNING if quiet else logging.INFO)
    log.propagate = False


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _table(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _hyperparams(args) -> Hyperparams:
    extra = {}
    if getattr(args, "hyperparams", None):
        with open(args.hyperparams, encoding="utf-8") as fh:
            extra = json.load(fh)
        unknown = sorted(set(extra) - set(Hyperparams.__dataclass_fields__))
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {unknown}")
    return Hyperparams.from_dict({**extra, "seed": args.seed})


def cmd_ingest(args):
    if args.inp == "-":
        conversations = parse_corpus(sys.stdin)
    else:
        conversations = read_corpus(args.inp)
    _write(args.out, dump_corpus(conversations))
    log.info("%d conversations, %d posts", len(conversations), sum(len(c) for c in conversations))


def cmd_graph(args):
    graphs = [build_graph(c) for c in read_corpus(args.inp)]
    _write(args.out, dump_graphs(graphs))
    log.info("%d graphs, %d attack edges", len(graphs), sum(len(g.attack_edges) for g in graphs))


def cmd_centrality(args):
    scores = {g.conversation_id: centralities(g) for g in read_graphs(args.inp)}
    _write(args.out, centrality_csv(scores))


def cmd_features(args):
    graphs = read_graphs(args.graphs)
    scores = read_centrality_csv(args.centrality)
    vectors = []
    for g in graphs:
        if g.conversation_id not in scores:
            raise ValueError(f"no centrality rows for conversation {g.conversation_id!r}")
        vectors.extend(aggregate_features(g, scores[g.conversation_id]).values())
    _write(args.out, features_csv(vectors))


def cmd_label(args):
    posts = [p for c in read_corpus(args.posts) for p in c.posts]
    top = flag_top_users(cumulative_approval(posts), args.fraction)
    vectors = [v for v, _ in read_features_csv(args.features)]
    examples = label_examples(vectors, top)
    _write(args.out, labeled_csv(examples))
    log.info("%d of %d users flagged as top", len(top), len({p.author_id for p in posts}))


def cmd_balance(args):
    data = read_labeled_csv(args.inp)
    size = args.size if args.size is not None else max_balanced_size(data.examples)
    balanced = balance_dataset(data.examples, size, args.seed)
    _write(args.out, labeled_csv(balanced.examples))


def cmd_train(args):
    data = read_labeled_csv(args.inp, as_selector(args.features))
    model = train(args.kind, data, _hyperparams(args))
    _write(args.out, model.dumps())
    if model.kind == "random_forest":
        log.info("out-of-bag accuracy %.4f", model.parameters["oob_accuracy"])


def cmd_eval(args):
    model = TrainedModel.load(args.model)
    data = read_labeled_csv(args.inp, model.selector, provenance="validation")
    report = evaluate(model, data)
    _write(args.report, dumps_json(report.to_json()))
    if args.table:
        c = report.to_json()["confusion"]
        _write(args.table, _table([[k, c[k]] for k in ("tp", "fp", "fn", "tn")]
                                  + [[k, getattr(report, k)] for k in
                                     ("accuracy", "precision", "recall", "f1", "flagged_fraction")],
                                  ["metric", "value"]))
    if args.predictions:
        vectors = [e.features for e in data.examples]
        score = model.positive_proba(data.X)
        _write(args.predictions, flagged_csv(vectors, score, score > 0.5, data.y, only_flagged=False))


def cmd_cv(args):
    data = read_labeled_csv(args.inp, as_selector(args.features))
    report = cross_validate(args.kind, data, _hyperparams(args), args.k, args.seed)
    _write(args.report, dumps_json(report.to_json()))
    if args.table:
        rows = [[i, f["accuracy"], f["precision"], f["recall"], f["f1"]]
                for i, f in enumerate(report.folds)]
        _write(args.table, _table(rows, ["fold", "accuracy", "precision", "recall", "f1"]))


def cmd_pca(args):
    data = read_labeled_csv(args.inp, as_selector(args.features))
    result = pca(data, args.k or len(data.selector), seed=args.seed)
    _write(args.report, dumps_json(result.to_json()))
    if args.figure:
        from .plotting import scree_plot
        scree_plot(result.explained_variance_ratio, args.figure)


def cmd_rfe(args):
    data = read_labeled_csv(args.inp, as_selector(args.features))
    result = rfe(data, _hyperparams(args), args.k_folds, args.seed)
    _write(args.report, dumps_json(result.to_json()))
    if args.table:
        _write(args.table, _table([[len(s), a, " ".join(s)] for s, a in
                                   zip(result.subsets, result.accuracies)],
                                  ["n_features", "cv_accuracy", "features"]))
    if args.figure:
        from .plotting import rfe_curve
        rfe_curve([len(s) for s in result.subsets], result.accuracies, args.figure)


def cmd_ablation(args):
    data = read_labeled_csv(args.inp)
    rows = ablation_study(data, _hyperparams(args), args.seed, args.k,
                          tuple(dict.fromkeys(canonical_kind(k) for k in args.kinds)))
    _write(args.report, dumps_json({"seed": args.seed, "k": args.k,
                                    "rows": [{"regime": r, "kind": k, "accuracy": a}
                                             for r, k, a in rows]}))
    if args.table:
        _write(args.table, _table(rows, ["regime", "kind", "accuracy"]))
    if args.figure:
        from .plotting import ablation_bars
        ablation_bars(rows, args.figure)


def cmd_synth(args):
    config = load_config(args.config) if args.config else SynthConfig()
    if args.seed is not None:
        config = SynthConfig.from_dict({**config.to_dict(), "seed": args.seed})
    corpus = generate(config)
    _write(args.out, dump_corpus(corpus.conversations))
    if args.truth:
        _write(args.truth, dumps_json(corpus.truth_json()))
    log.info("%d conversations, %d planted top users", len(corpus.conversations),
             len(corpus.ground_truth_top))


def cmd_run(args):
    config = RunConfig.load(args.config)
    result = run_detect(config)
    summary = {**result.report.to_json(), **result.extra, "manifest_sha256": result.manifest_hash}
    if not args.quiet:
        sys.stdout.write(dumps_json(summary))


def cmd_detect(args):
    model = TrainedModel.load(args.model)
    vectors, score, flagged = detect(model, read_corpus(args.inp))
    _write(args.out, flagged_csv(vectors, score, flagged, only_flagged=not args.all))
    log.info("flagged %d of %d (conversation, user) pairs", int(flagged.sum()), len(vectors))


def _add_common(p, default=False):
    # subcommands repeat these flags with SUPPRESS so they never reset the top-level value
    p.add_argument("--quiet", action="store_true", default=default,
                   help="only log warnings and errors")
    p.add_argument("--json-logs", action="store_true", default=default,
                   help="log one JSON object per line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="convoarg", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _add_common(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    kinds = ["nb", "cit", "rf", "svm", "gaussian_nb", "cond_tree", "random_forest", "linear_svm"]

    def command(name, fn, help):
        p = sub.add_parser(name, help=help)
        _add_common(p, argparse.SUPPRESS)
        p.set_defaults(fn=fn)
        return p

    p = command("ingest", cmd_ingest, "normalize a JSONL dump into canonical order")
    p.add_argument("--in", dest="inp", required=True, help="path or - for stdin")
    p.add_argument("--out", default="-")

    p = command("graph", cmd_graph, "build attack/defence graphs")
    p.add_argument("--in", dest="inp", required=True, help="canonical JSONL")
    p.add_argument("--out", default="-")

    p = command("centrality", cmd_centrality, "centrality scores per post")
    p.add_argument("--in", dest="inp", required=True, help="graphs JSONL")
    p.add_argument("--out", default="-")

    p = command("features", cmd_features, "per-user feature vectors")
    p.add_argument("--graphs", required=True)
    p.add_argument("--centrality", required=True)
    p.add_argument("--out", default="-")

    p = command("label", cmd_label, "flag top users and add the is_top column")
    p.add_argument("--posts", required=True, help="canonical JSONL of the same corpus")
    p.add_argument("--features", required=True)
    p.add_argument("--fraction", type=float, default=0.05)
    p.add_argument("--out", default="-")

    p = command("balance", cmd_balance, "seeded 50/50 sample of a labeled CSV")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--size", type=int, help="even total size (default: largest possible)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")

    p = command("train", cmd_train, "train a classifier")
    p.add_argument("--kind", choices=kinds, required=True)
    p.add_argument("--features", default="full", help="minimal, reduced, full")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hyperparams", help="JSON file of hyperparameter overrides")
    p.add_argument("--out", default="-")

    p = command("eval", cmd_eval, "evaluate a model on a labeled CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--report", default="-")
    p.add_argument("--table", help="optional CSV of the metrics")
    p.add_argument("--predictions", help="optional CSV of per-example scores")

    p = command("cv", cmd_cv, "stratified k-fold cross-validation")
    p.add_argument("--kind", choices=kinds, required=True)
    p.add_argument("--features", default="full")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hyperparams")
    p.add_argument("--report", default="-")
    p.add_argument("--table", help="optional per-fold CSV")

    p = command("analyze", None, "PCA, recursive feature elimination, ablation")
    asub = p.add_subparsers(dest="analysis", required=True)
    for name, fn, help in (("pca", cmd_pca, "principal components of the features"),
                           ("rfe", cmd_rfe, "recursive feature elimination"),
                           ("ablation", cmd_ablation, "accuracy with and without graph features")):
        q = asub.add_parser(name, help=help)
        _add_common(q, argparse.SUPPRESS)
        q.set_defaults(fn=fn)
        q.add_argument("--in", dest="inp", required=True)
        q.add_argument("--seed", type=int, default=0)
        q.add_argument("--report", default="-")
        q.add_argument("--figure", help="optional PNG path")
        if name != "ablation":
            q.add_argument("--features", default="full")
        if name == "pca":
            q.add_argument("--k", type=int, help="number of components (default: all)")
        else:
            q.add_argument("--hyperparams")
            q.add_argument("--table", help="optional CSV table")
        if name == "rfe":
            q.add_argument("--k-folds", type=int, default=5)
        if name == "ablation":
            q.add_argument("--k", type=int, default=10)
            q.add_argument("--kinds", nargs="+", default=list(ABLATION_KINDS), choices=kinds)

    p = command("synth", cmd_synth, "generate a synthetic corpus with planted top users")
    p.add_argument("--config", help="JSON of generator settings (default settings otherwise)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", default="-")
    p.add_argument("--truth", help="where to write the planted ground truth")

    p = command("run", cmd_run, "run every stage from a config file")
    p.add_argument("--config", required=True)

    p = command("detect", cmd_detect, "flag likely top users in new conversations")
    p.add_argument("--model", required=True)
    p.add_argument("--in", dest="inp", required=True, help="JSONL of posts")
    p.add_argument("--out", default="-")
    p.add_argument("--all", action="store_true", help="write every user, not just flagged ones")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.quiet, args.json_logs)
    try:
        args.fn(args)
    except StageError as e:
        log.error("%s", e, extra={"stage": e.stage})
        return EXIT_STAGE
    except ConfigError as e:
        log.error("%s", e, extra={"stage": e.stage})
        return EXIT_INVALID
    except (ValueError, KeyError, OSError) as e:
        log.error("%s: %s", type(e).__name__, e)
        return EXIT_INVALID
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
