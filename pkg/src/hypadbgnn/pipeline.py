"""End-to-end runs: paths -> De Bruijn graphs -> scores -> benchmark.

A run is described by a flat ``key = value`` configuration. Every stage
writes its artifacts into the output directory and records them in
``manifest.json`` together with a digest of everything the stage read, so
an unchanged re-run skips the stage. ``verify`` re-hashes the artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .debruijn import DeBruijnGraph, build_debruijn, edge_frequencies, project_suborder, serialize_graph
from .evaluation import EvalReport, make_split_plan, run_benchmark
from .hypa import (
    FREQUENCY,
    HYPA,
    ZSCORE,
    ScoredGraph,
    build_xi,
    frequency_scores,
    node_mean_hypa,
    score_hypa,
    serialize_scored,
    suborder_degrees,
    z_transform,
)
from .ingest import (
    FormatError,
    NodeClassMap,
    PathMultiset,
    dumps,
    loads,
    parse_classes,
    parse_paths,
    parse_temporal_edges,
    serialize_classes,
    serialize_paths,
)
from .neural import VARIANTS, GraphInputs, ModelConfig, correct_graphs
from .paths import PathExtractionConfig, extract_paths
from .synthgen import SynthConfig, generate_dataset_pair

logger = logging.getLogger(__name__)

OUT_DIR_ENV = "HYPADBGNN_OUT"
MANIFEST = "manifest.json"


class StageError(RuntimeError):
    def __init__(self, stage: str, digest: str, cause: Exception):
        self.stage = stage
        self.digest = digest
        super().__init__(f"stage {stage!r} failed (inputs {digest[:12]}): {cause}")


# -- configuration -------------------------------------------------------------------


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    """Everything one run depends on. File paths are resolved to absolute paths."""

    name: str = "dataset"
    edges: str = ""
    paths: str = ""
    classes: str = ""
    # synthetic source: "", "weighted" or "unweighted"
    synth: str = ""
    synth_nodes_per_class: int = 10
    synth_bias: float = 0.05
    synth_paths: int = 2**16
    synth_seed: int = 0
    delta: int = 1
    k: int = 2
    theta: float = 0.01
    subgraph_degrees: bool = False
    class_rule: str = "last"
    variants: str = "hypa,minus,edge,z"
    seed: int = 0
    repetitions: int = 10
    grid: str = "4,8,16,32"
    h2: int = 16
    lr: float = 0.001
    dropout: float = 0.4
    max_epochs: int = 5000
    patience: int = 0
    class_weights: bool = True
    merge_dropout: bool = False
    sample_std: bool = False

    def __post_init__(self):
        if self.synth not in ("", "weighted", "unweighted"):
            raise ValueError(f"synth must be empty, 'weighted' or 'unweighted', not {self.synth!r}")
        if not self.synth and not (self.edges or self.paths):
            raise ValueError("a dataset needs 'edges', 'paths' or 'synth'")
        if not self.synth and not self.classes:
            raise ValueError("a dataset needs a 'classes' file")
        unknown = set(self.variant_list) - set(VARIANTS)
        if unknown:
            raise ValueError(f"unknown variants {sorted(unknown)}")
        if self.k < 1 or self.delta < 1:
            raise ValueError("k and delta must be positive")
        if self.class_rule not in ("first", "last"):
            raise ValueError("class_rule must be 'first' or 'last'")

    @property
    def variant_list(self) -> list[str]:
        return [v.strip() for v in self.variants.split(",") if v.strip()]

    @property
    def grid_cells(self) -> list[tuple[int, int]]:
        sizes = [int(x) for x in self.grid.split(",") if x.strip()]
        return [(a, b) for a in sizes for b in sizes]

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            k=self.k, h2=self.h2, lr=self.lr, dropout=self.dropout, max_epochs=self.max_epochs,
            class_weights=self.class_weights, merge_dropout=self.merge_dropout,
            patience=self.patience or None, seed=self.seed,
        )

    @classmethod
    def from_mapping(cls, values: dict[str, str | object], base_dir: str | Path | None = None) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in types:
                raise ValueError(f"unknown configuration key {key!r}")
            if raw is None:
                continue
            kind = types[key]
            if not isinstance(raw, str):
                kw[key] = raw
            elif kind == "bool":
                kw[key] = _parse_bool(raw)
            elif kind == "int":
                kw[key] = int(raw)
            elif kind == "float":
                kw[key] = float(raw)
            else:
                kw[key] = raw.strip()
        for key in ("edges", "paths", "classes"):
            if kw.get(key) and base_dir is not None:
                kw[key] = str((Path(base_dir) / kw[key]).resolve())
        return cls(**kw)

    @classmethod
    def from_text(cls, text: str, base_dir: str | Path | None = None,
                  overrides: dict | None = None) -> "RunConfig":
        return cls.from_mapping({**parse_flat(text), **(overrides or {})}, base_dir)

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), path.parent, overrides)

    def to_text(self) -> str:
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    def digest(self) -> str:
        """Hash of the configuration plus the content of every input file.

        Input files enter by content, not location, so moving a dataset keeps
        the hash.
        """
        values = asdict(self)
        for key in ("edges", "paths", "classes"):
            if values[key]:
                values[key] = file_digest(values[key])
        return hashlib.sha256(json.dumps(values, sort_keys=True).encode()).hexdigest()


def parse_flat(text: str) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError("expected 'key = value'", number)
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def default_out_dir() -> Path:
    return Path(os.environ.get(OUT_DIR_ENV, "runs"))


# -- loading --------------------------------------------------------------------------


@dataclass
class Dataset:
    name: str
    paths: PathMultiset
    classes: NodeClassMap
    first_order: PathMultiset | None = None


def load_dataset(config: RunConfig) -> Dataset:
    """Paths (extracted, read, or generated) and the class map of one dataset."""
    if config.synth:
        pair = generate_dataset_pair(SynthConfig(
            (config.synth_nodes_per_class,) * 2, config.synth_bias, config.synth_paths,
            config.k, config.synth_seed))
        paths = pair.weighted if config.synth == "weighted" else pair.unweighted
        return Dataset(config.name, paths, pair.classes)
    first = None
    if config.edges:
        with open(config.edges, encoding="utf-8") as fh:
            edges = parse_temporal_edges(fh)
        paths = extract_paths(edges, PathExtractionConfig(config.delta, config.k))
        first = edge_frequencies(edges)
        names = edges.names
    else:
        with open(config.paths, encoding="utf-8") as fh:
            paths = parse_paths(fh)
        names = paths.names
    with open(config.classes, encoding="utf-8") as fh:
        classes = parse_classes(fh, names)
    missing = [n for n in names if n not in classes.labels]
    if missing:
        raise FormatError(f"{len(missing)} nodes have no class, e.g. {missing[:3]}")
    return Dataset(config.name, paths, classes, first)


def first_order_graph(dataset: Dataset) -> DeBruijnGraph:
    """Order-1 graph over all base nodes.

    With a temporal edge list this counts interactions; for path-only data it
    counts edge traversals of the paths.
    """
    multiset = dataset.first_order
    if multiset is None:
        multiset = dataset.paths
        while multiset.k > 1:
            multiset = project_suborder(multiset)
    everyone = [(i,) for i in range(len(multiset.names))]
    return build_debruijn(multiset, 1, extra_nodes=everyone)


def score_graph(graph: DeBruijnGraph, kind: str, subgraph: DeBruijnGraph | None = None) -> ScoredGraph:
    if kind == FREQUENCY:
        return frequency_scores(graph)
    degrees = None
    if subgraph is not None and graph.k >= 2:
        d = suborder_degrees(graph, subgraph)
        degrees = (d, d)
    xi = build_xi(graph, degrees)
    return score_hypa(graph, xi) if kind == HYPA else z_transform(graph, xi)


def kinds_for(variants) -> list[str]:
    need = {"hypa": HYPA, "edge": HYPA, "z": ZSCORE, "minus": FREQUENCY}
    return sorted({need[v] for v in variants})


# -- figure data ----------------------------------------------------------------------


def emit_figure_data(scored: dict[int, ScoredGraph], labels, rule: str = "last",
                     num_classes: int | None = None) -> str:
    """Per-order, per-class box-plot statistics of node-mean incoming scores as CSV."""
    labels = np.asarray(labels)
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["order", "class", "count", "min", "q1", "median", "q3", "max", "mean"])
    for order in sorted(scored):
        table = node_mean_hypa(scored[order], labels, rule, num_classes)
        for row in table.class_summary():
            w.writerow([order, row["cls"], row["count"]] +
                       [repr(float(row[key])) for key in ("min", "q1", "median", "q3", "max", "mean")])
    return out.getvalue()


# -- staged run ------------------------------------------------------------------------


@dataclass
class StageRecord:
    inputs: str
    outputs: dict[str, str]


@dataclass
class RunResult:
    out_dir: Path
    report: EvalReport | None
    executed: list[str] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


class _Runner:
    def __init__(self, out_dir: Path, force: bool):
        self.out_dir = out_dir
        self.force = force
        self.manifest_path = out_dir / MANIFEST
        self.manifest: dict = {"stages": {}}
        if self.manifest_path.exists():
            self.manifest = json.loads(self.manifest_path.read_text(encoding="utf-8"))
        self.executed: list[str] = []
        self.skipped: list[str] = []

    def up_to_date(self, stage: str, digest: str) -> bool:
        rec = self.manifest["stages"].get(stage)
        if self.force or rec is None or rec["inputs"] != digest:
            return False
        for name, h in rec["outputs"].items():
            p = self.out_dir / name
            if not p.exists() or file_digest(p) != h:
                return False
        return True

    def run(self, stage: str, digest: str, produce) -> dict[str, str]:
        """Run ``produce() -> {filename: text}`` unless the stage is current."""
        if self.up_to_date(stage, digest):
            self.skipped.append(stage)
            logger.info("stage %s up to date", stage)
            return {name: (self.out_dir / name).read_text(encoding="utf-8")
                    for name in self.manifest["stages"][stage]["outputs"]}
        try:
            files = produce()
        except (FormatError, FileNotFoundError):
            raise
        except Exception as err:
            raise StageError(stage, digest, err) from err
        outputs = {}
        for name, text in files.items():
            p = self.out_dir / name
            p.write_text(text, encoding="utf-8")
            outputs[name] = file_digest(p)
        self.manifest["stages"][stage] = {"inputs": digest, "outputs": outputs}
        self.save()
        self.executed.append(stage)
        return files

    def save(self):
        self.manifest_path.write_text(json.dumps(self.manifest, indent=2, sort_keys=True) + "\n",
                                      encoding="utf-8")


def _chain(*parts: str) -> str:
    return hashlib.sha256("\n".join(parts).encode()).hexdigest()


def pipeline_run(config: RunConfig, out_dir: str | Path | None = None, force: bool = False,
                 threads: int = 1, train: bool = True) -> RunResult:
    """Run every stage for one dataset, skipping stages whose inputs are unchanged."""
    out_dir = Path(out_dir) if out_dir is not None else default_out_dir() / config.name
    out_dir.mkdir(parents=True, exist_ok=True)
    runner = _Runner(out_dir, force)
    chash = config.digest()
    runner.manifest["config_hash"] = chash
    (out_dir / "run.cfg").write_text(config.to_text(), encoding="utf-8")
    runner.save()

    def paths_stage():
        ds = load_dataset(config)
        files = {"paths.tsv": serialize_paths(ds.paths), "classes.tsv": serialize_classes(ds.classes),
                 "paths.json": dumps(ds.paths), "classes.json": dumps(ds.classes)}
        if ds.first_order is not None:
            files["first_order.json"] = dumps(ds.first_order)
        return files

    d_paths = _chain("paths", chash)
    files = runner.run("paths", d_paths, paths_stage)
    dataset = Dataset(config.name, loads(files["paths.json"]), loads(files["classes.json"]),
                      loads(files["first_order.json"]) if "first_order.json" in files else None)

    def graph_stage():
        g1 = first_order_graph(dataset)
        gk = build_debruijn(dataset.paths)
        return {"order1.dbg": serialize_graph(g1), f"order{config.k}.dbg": serialize_graph(gk),
                "order1.json": dumps(g1), "orderk.json": dumps(gk)}

    d_graph = _chain("debruijn", d_paths)
    files = runner.run("debruijn", d_graph, graph_stage)
    g1, gk = loads(files["order1.json"]), loads(files["orderk.json"])

    kinds = kinds_for(config.variant_list)
    if config.variant_list and HYPA not in kinds:
        kinds.append(HYPA)  # figure data always uses HYPA scores

    def score_stage():
        sub = None
        if config.subgraph_degrees and config.k >= 2:
            sub = build_debruijn(project_suborder(dataset.paths))
        out = {}
        for kind in kinds:
            s1, sk = score_graph(g1, kind), score_graph(gk, kind, sub)
            out[f"scored_{kind}_order1.tsv"] = serialize_scored(s1)
            out[f"scored_{kind}_order{config.k}.tsv"] = serialize_scored(sk)
            out[f"scored_{kind}.json"] = json.dumps([json.loads(dumps(s1)), json.loads(dumps(sk))],
                                                    sort_keys=True)
        labels = dataset.classes.label_array(g1.names)
        h1, hk = (ScoredGraph.from_container(c) for c in json.loads(out[f"scored_{HYPA}.json"]))
        out["boxstats.csv"] = emit_figure_data({1: h1, config.k: hk}, labels, config.class_rule,
                                               dataset.classes.num_classes)
        return out

    d_score = _chain("hypa", d_graph, str(config.subgraph_degrees), ",".join(kinds), config.class_rule)
    files = runner.run("hypa", d_score, score_stage)
    cache = {}
    for kind in kinds:
        a, b = json.loads(files[f"scored_{kind}.json"])
        cache[kind] = (ScoredGraph.from_container(a), ScoredGraph.from_container(b))

    report = None
    if train and config.variant_list:
        def bench_stage():
            rep = benchmark_dataset(config, g1, gk, dataset.classes, cache, threads)
            rep.meta["config_hash"] = chash
            return {"report.json": rep.to_json(), "report.csv": rep.to_csv(),
                    "repetitions.csv": rep.rows_csv()}

        d_bench = _chain("bench", d_score, chash)
        files = runner.run("bench", d_bench, bench_stage)
        report = EvalReport.from_json(files["report.json"])
    return RunResult(out_dir, report, runner.executed, runner.skipped)


def benchmark_dataset(config: RunConfig, g1: DeBruijnGraph, gk: DeBruijnGraph,
                      classes: NodeClassMap, cache: dict | None = None, threads: int = 1) -> EvalReport:
    cache = {} if cache is None else cache
    labels = classes.label_array(g1.names)
    inputs = {}
    for variant in config.variant_list:
        graphs = correct_graphs(g1, gk, variant, config.theta, cache)
        inputs[variant] = GraphInputs.build(graphs, variant)
    plan = make_split_plan(labels, config.seed, config.repetitions)
    report = run_benchmark({config.name: inputs}, labels, plan, config.variant_list,
                           config.grid_cells, config.model_config(), threads, config.sample_std)
    report.config["run"] = asdict(config)
    for key in ("edges", "paths", "classes"):
        # absolute locations differ between machines; the digest covers content
        report.config["run"][key] = Path(getattr(config, key)).name if getattr(config, key) else ""
    return report


def verify(out_dir: str | Path) -> list[str]:
    """Mismatches between the manifest and the files on disk (empty when all agree)."""
    out_dir = Path(out_dir)
    manifest_path = out_dir / MANIFEST
    if not manifest_path.exists():
        return [f"{manifest_path} missing"]
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    problems = []
    cfg_path = out_dir / "run.cfg"
    if cfg_path.exists():
        try:
            config = RunConfig.from_text(cfg_path.read_text(encoding="utf-8"))
            if config.digest() != manifest.get("config_hash"):
                problems.append("config hash differs from manifest")
        except (ValueError, FileNotFoundError) as err:
            problems.append(f"run.cfg unusable: {err}")
    else:
        problems.append("run.cfg missing")
    for stage, rec in manifest.get("stages", {}).items():
        for name, h in rec["outputs"].items():
            p = out_dir / name
            if not p.exists():
                problems.append(f"{stage}: {name} missing")
            elif file_digest(p) != h:
                problems.append(f"{stage}: {name} checksum mismatch")
    report = out_dir / "report.json"
    if report.exists():
        meta = json.loads(report.read_text(encoding="utf-8")).get("meta", {})
        if meta.get("config_hash") != manifest.get("config_hash"):
            problems.append("report.json config hash differs from manifest")
    return problems
