"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 stage failure, 3 verification mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .debruijn import build_debruijn, parse_graph, serialize_graph
from .evaluation import BenchmarkError, EvalReport, make_split_plan
from .hypa import (
    DEFAULT_THETA,
    FREQUENCY,
    HYPA,
    ZSCORE,
    EnsembleError,
    parse_scored,
    prune_underrepresented,
    prune_zero,
    serialize_scored,
)
from .ingest import (
    FormatError,
    parse_classes,
    parse_paths,
    parse_temporal_edges,
    serialize_classes,
    serialize_paths,
)
from .metrics import balanced_accuracy, macro_metrics
from .neural import GraphInputs, TrainingDiverged, correct_graphs, forward, train
from .paths import PathExtractionConfig, extract_paths
from .pipeline import (
    RunConfig,
    StageError,
    default_out_dir,
    emit_figure_data,
    first_order_graph,
    load_dataset,
    pipeline_run,
    score_graph,
    verify,
)
from .synthgen import SynthConfig, generate_dataset_pair

EXIT_OK, EXIT_INPUT, EXIT_STAGE, EXIT_VERIFY = 0, 1, 2, 3

logger = logging.getLogger("hypadbgnn")


def _read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def _write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


# -- subcommands ----------------------------------------------------------------------


def cmd_paths_extract(args) -> int:
    edges = parse_temporal_edges(_read(args.edges))
    paths = extract_paths(edges, PathExtractionConfig(args.delta, args.k))
    _write(args.out, serialize_paths(paths))
    print(f"{len(paths.entries)} distinct paths, total frequency {paths.total}")
    return EXIT_OK


def cmd_debruijn_build(args) -> int:
    paths = parse_paths(_read(args.paths))
    graph = build_debruijn(paths, args.k)
    _write(args.out, serialize_graph(graph))
    print(f"order {graph.k}: {graph.num_nodes} nodes, {graph.num_edges} edges")
    return EXIT_OK


def cmd_hypa_score(args) -> int:
    graph = parse_graph(_read(args.graph))
    sub = parse_graph(_read(args.subgraph)) if args.subgraph else None
    if sub is not None and sub.names != graph.names:
        # the text format numbers nodes by first appearance; re-align by name
        raise FormatError("graph and subgraph must list base nodes in the same order")
    scored = score_graph(graph, args.kind, sub)
    if args.kind == HYPA and args.theta > 0:
        scored = prune_underrepresented(scored, args.theta)
    elif args.kind == ZSCORE and args.prune:
        scored = prune_zero(scored)
    _write(args.out, serialize_scored(scored))
    print(f"{scored.graph.num_edges} edges scored ({scored.kind}), {scored.removed} removed")
    return EXIT_OK


def cmd_hypa_stats(args) -> int:
    scored = [parse_scored(_read(p)) for p in args.scored]
    classes = parse_classes(_read(args.classes))
    by_order = {}
    for s in scored:
        by_order[s.graph.k] = s
    # each scored file carries its own name table, so tables are emitted per file
    parts = []
    for order, s in sorted(by_order.items()):
        labels = classes.label_array(s.graph.names)
        text = emit_figure_data({order: s}, labels, args.class_rule, classes.num_classes)
        parts.append(text if not parts else text.split("\n", 1)[1])
    _write(args.out, "".join(parts))
    return EXIT_OK


def cmd_synth_generate(args) -> int:
    sizes = args.nodes_per_class * 2 if len(args.nodes_per_class) == 1 else args.nodes_per_class
    config = SynthConfig(tuple(sizes), args.bias, args.paths, args.k, args.seed,
                         args.same_class_rule)
    pair = generate_dataset_pair(config)
    prefix = Path(args.out_prefix)
    prefix.mkdir(parents=True, exist_ok=True)
    _write(prefix / "unweighted.paths.tsv", serialize_paths(pair.unweighted))
    _write(prefix / "weighted.paths.tsv", serialize_paths(pair.weighted))
    _write(prefix / "classes.tsv", serialize_classes(pair.classes))
    _write(prefix / "report.txt", pair.report())
    print(f"wrote synthetic pair to {prefix}")
    return EXIT_OK


def _overrides(args, keys) -> dict:
    out = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


RUN_KEYS = ("variants", "seed", "lr", "max_epochs", "patience", "grid", "repetitions", "theta",
            "dropout", "sample_std")


def cmd_train(args) -> int:
    overrides = _overrides(args, RUN_KEYS + ("edges", "paths", "classes"))
    for key in ("edges", "paths", "classes"):
        if key in overrides:
            overrides[key] = str(Path(overrides[key]).resolve())
    config = RunConfig.from_file(args.config, overrides)
    dataset = load_dataset(config)
    g1 = first_order_graph(dataset)
    gk = build_debruijn(dataset.paths)
    labels = dataset.classes.label_array(g1.names)
    plan = make_split_plan(labels, config.seed, config.repetitions)
    rep = plan.repetitions[args.repetition]
    tr, va, te = rep.masks(len(labels))
    model_config = config.model_config().replace(variant=args.variant, h0=args.h0, h1=args.h1)
    inputs = GraphInputs.build(correct_graphs(g1, gk, args.variant, config.theta), args.variant)
    state, trace = train(model_config, inputs, labels, tr, va, dataset.classes.num_classes)
    state.names = g1.names
    state.higher_nodes = gk.nodes
    state.class_names = dataset.classes.class_names
    pred = forward(state, inputs).argmax(axis=1)
    f1, prec, rec = macro_metrics(labels[te], pred[te])
    metrics = {"config_hash": config.digest(), "repetition": args.repetition,
               "best_epoch": trace.best_epoch, "val_balanced_accuracy": trace.best_val,
               "balanced_accuracy": balanced_accuracy(labels[te], pred[te]),
               "f1_macro": f1, "precision_macro": prec, "recall_macro": rec}
    model_path, trace_path = args.out.split(",")
    Path(model_path).parent.mkdir(parents=True, exist_ok=True)
    state.save(model_path)
    _write(trace_path, trace.to_csv())
    print(json.dumps(metrics, sort_keys=True))
    return EXIT_OK


def cmd_bench_run(args) -> int:
    rows, configs, meta = [], {}, {}
    sample_std = False
    for cfg in args.dataset.split(","):
        config = RunConfig.from_file(cfg, _overrides(args, RUN_KEYS))
        out_dir = Path(args.work_dir) / config.name if args.work_dir else None
        result = pipeline_run(config, out_dir, force=args.force, threads=args.threads)
        report = result.report
        rows += report.rows
        configs[config.name] = report.config
        meta[config.name] = report.meta
        sample_std = report.sample_std
        print(f"{config.name}: ran {result.executed or 'nothing'}, skipped {result.skipped or 'nothing'}")
    combined = EvalReport(rows, configs, sample_std, meta)
    for target in args.out.split(","):
        if target.endswith(".json"):
            _write(target, combined.to_json())
        elif target.endswith(".csv"):
            _write(target, combined.to_csv())
        else:
            raise FormatError(f"output {target!r} must end in .json or .csv")
    sys.stdout.write(combined.to_csv())
    return EXIT_OK


def cmd_run(args) -> int:
    config = RunConfig.from_file(args.config, _overrides(args, RUN_KEYS))
    result = pipeline_run(config, args.out_dir, force=args.force, threads=args.threads,
                          train=not args.no_train)
    print(f"output: {result.out_dir}")
    print(f"executed: {', '.join(result.executed) or '-'}; skipped: {', '.join(result.skipped) or '-'}")
    if result.report is not None:
        sys.stdout.write(result.report.to_csv())
    return EXIT_OK


def cmd_verify(args) -> int:
    problems = verify(args.dir)
    for p in problems:
        print(p)
    if problems:
        return EXIT_VERIFY
    print("all artifacts match the manifest")
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def _add_run_overrides(p) -> None:
    p.add_argument("--variants")
    p.add_argument("--seed", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--max-epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--grid", help="comma-separated hidden sizes, e.g. 16,32")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--sample-std", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypadbgnn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--threads", type=int, default=1, help="worker cap for parallel stages")
    sub = parser.add_subparsers(dest="group", required=True)

    paths = sub.add_parser("paths").add_subparsers(dest="action", required=True)
    p = paths.add_parser("extract", help="time-respecting paths from a temporal edge list")
    p.add_argument("--edges", required=True)
    p.add_argument("--delta", type=int, required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_paths_extract)

    dbg = sub.add_parser("debruijn").add_subparsers(dest="action", required=True)
    p = dbg.add_parser("build", help="De Bruijn graph from a path file")
    p.add_argument("--paths", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_debruijn_build)

    hypa = sub.add_parser("hypa").add_subparsers(dest="action", required=True)
    p = hypa.add_parser("score", help="score every edge against the configuration ensemble")
    p.add_argument("--graph", required=True)
    p.add_argument("--subgraph", help="order k-1 graph whose path counts give the expected degrees")
    p.add_argument("--kind", choices=(HYPA, ZSCORE, FREQUENCY), default=HYPA)
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)
    p.add_argument("--prune", action="store_true", help="drop edges with transformed Z = 0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hypa_score)
    p = hypa.add_parser("stats", help="per-class quartiles of node-mean scores (CSV)")
    p.add_argument("--scored", required=True, action="append")
    p.add_argument("--classes", required=True)
    p.add_argument("--class-rule", choices=("first", "last"), default="last")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hypa_stats)

    synth = sub.add_parser("synth").add_subparsers(dest="action", required=True)
    p = synth.add_parser("generate", help="seed-paired unweighted/weighted synthetic datasets")
    p.add_argument("--nodes-per-class", type=int, nargs="+", default=[10])
    p.add_argument("--bias", type=float, default=0.05)
    p.add_argument("--paths", type=int, default=2**16)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--same-class-rule", choices=("all", "last_k"), default="all")
    p.add_argument("--out-prefix", required=True)
    p.set_defaults(func=cmd_synth_generate)

    p = sub.add_parser("train", help="train one model on one repetition of the split plan")
    p.add_argument("--config", required=True, help="dataset configuration file")
    p.add_argument("--edges")
    p.add_argument("--paths")
    p.add_argument("--classes")
    p.add_argument("--variant", default="hypa")
    p.add_argument("--h0", type=int, default=16)
    p.add_argument("--h1", type=int, default=16)
    p.add_argument("--repetition", type=int, default=0)
    p.add_argument("--out", default="model.npz,trace.csv", help="model file and trace CSV")
    _add_run_overrides(p)
    p.set_defaults(func=cmd_train)

    bench = sub.add_parser("bench").add_subparsers(dest="action", required=True)
    p = bench.add_parser("run", help="nested cross-validation benchmark")
    p.add_argument("--dataset", required=True, help="comma-separated dataset configuration files")
    p.add_argument("--out", default="report.json,report.csv")
    p.add_argument("--work-dir", help=f"artifact directory (default ${{{'HYPADBGNN_OUT'}}}/<name>)")
    p.add_argument("--force", action="store_true")
    _add_run_overrides(p)
    p.set_defaults(func=cmd_bench_run)

    p = sub.add_parser("run", help="all stages for one dataset configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir")
    p.add_argument("--force", action="store_true")
    p.add_argument("--no-train", action="store_true")
    _add_run_overrides(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("verify", help="re-hash run artifacts against the manifest")
    p.add_argument("--dir", default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "dir", "unset") is None:
        args.dir = str(default_out_dir())
    try:
        return args.func(args)
    except (FormatError, FileNotFoundError, KeyError, EnsembleError) as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except (StageError, TrainingDiverged, BenchmarkError) as err:
        print(f"stage failure: {err}", file=sys.stderr)
        return EXIT_STAGE
    except ValueError as err:
        print(f"input error: {err}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
