"""Nested cross-validation: split plans, the benchmark loop and its report.

A plan has ``N`` repetitions over ``N`` stratified folds; repetition ``r``
tests on fold ``r`` and splits the remaining nodes 80/20 (stratified) into
training and validation. The same plan is shared by every variant so that
methods see byte-identical masks.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .metrics import balanced_accuracy, macro_metrics
from .neural import HIDDEN_GRID, GraphInputs, ModelConfig, forward, train

__all__ = [
    "SplitPlan",
    "Repetition",
    "make_split_plan",
    "largest_remainder",
    "balanced_accuracy",
    "macro_metrics",
    "BenchmarkError",
    "EvalReport",
    "run_benchmark",
    "cell_seed",
]

logger = logging.getLogger(__name__)

METRICS = ("balanced_accuracy", "f1_macro", "precision_macro", "recall_macro")


def largest_remainder(quotas: np.ndarray, total: int) -> np.ndarray:
    """Integer apportionment of ``total`` following real-valued ``quotas``.

    Floors first, then hands the leftover units to the largest fractional
    parts (ties go to the lower index).
    """
    quotas = np.asarray(quotas, dtype=float)
    base = np.floor(quotas).astype(np.int64)
    left = int(total - base.sum())
    if left < 0 or left > len(quotas):
        raise ValueError("quotas inconsistent with total")
    order = np.lexsort((np.arange(len(quotas)), -(quotas - base)))
    base[order[:left]] += 1
    return base


@dataclass(frozen=True)
class Repetition:
    index: int
    seed: int
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray

    def masks(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        out = []
        for idx in (self.train, self.val, self.test):
            m = np.zeros(n, dtype=bool)
            m[idx] = True
            out.append(m)
        return tuple(out)


@dataclass(frozen=True)
class SplitPlan:
    master_seed: int
    labels: np.ndarray
    repetitions: tuple[Repetition, ...]
    val_fraction: float = 0.2
    warnings: tuple[str, ...] = ()

    @property
    def num_nodes(self) -> int:
        return len(self.labels)

    def to_dict(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "val_fraction": self.val_fraction,
            "warnings": list(self.warnings),
            "repetitions": [
                {"index": r.index, "seed": r.seed, "train": r.train.tolist(),
                 "val": r.val.tolist(), "test": r.test.tolist()}
                for r in self.repetitions
            ],
        }


def _stratified_folds(labels: np.ndarray, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    classes = np.unique(labels)
    members = [rng.permutation(np.flatnonzero(labels == c)) for c in classes]
    assigned: list[list[int]] = [[] for _ in range(folds)]
    offset = 0
    for idx in members:
        # every fold has the same quota, so the remainder goes round-robin,
        # continuing where the previous class stopped to keep fold sizes level
        counts = np.full(folds, len(idx) // folds)
        extra = len(idx) % folds
        for j in range(extra):
            counts[(offset + j) % folds] += 1
        offset = (offset + extra) % folds
        start = 0
        for f in range(folds):
            assigned[f].extend(idx[start:start + counts[f]].tolist())
            start += counts[f]
    return [np.sort(np.array(a, dtype=np.int64)) for a in assigned]


def _stratified_holdout(nodes: np.ndarray, labels: np.ndarray, fraction: float,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    classes = np.unique(labels[nodes])
    per_class = [rng.permutation(nodes[labels[nodes] == c]) for c in classes]
    sizes = np.array([len(p) for p in per_class])
    total = int(np.floor(fraction * len(nodes) + 0.5))
    held = largest_remainder(fraction * sizes, total)
    val = np.concatenate([p[:h] for p, h in zip(per_class, held)])
    rest = np.concatenate([p[h:] for p, h in zip(per_class, held)])
    return np.sort(rest).astype(np.int64), np.sort(val).astype(np.int64)


def make_split_plan(labels, master_seed: int, repetitions: int = 10,
                    val_fraction: float = 0.2) -> SplitPlan:
    """Deterministic nested split plan for integer ``labels``."""
    labels = np.asarray(labels, dtype=np.int64)
    if repetitions < 2:
        raise ValueError("need at least two folds")
    warnings = []
    for c, size in zip(*np.unique(labels, return_counts=True)):
        if size < repetitions:
            msg = f"class {int(c)} has {int(size)} members, fewer than {repetitions} folds"
            logger.warning(msg)
            warnings.append(msg)
    seeds = np.random.SeedSequence(master_seed).spawn(repetitions + 1)
    folds = _stratified_folds(labels, repetitions, np.random.default_rng(seeds[0]))
    reps = []
    for r in range(repetitions):
        test = folds[r]
        others = np.setdiff1d(np.arange(len(labels)), test)
        rep_seed = int(seeds[r + 1].generate_state(1)[0])
        tr, va = _stratified_holdout(others, labels, val_fraction, np.random.default_rng(rep_seed))
        reps.append(Repetition(r, rep_seed, tr, va, test))
    return SplitPlan(int(master_seed), labels.copy(), tuple(reps), val_fraction, tuple(warnings))


def cell_seed(master_seed: int, h0: int, h1: int) -> int:
    """Initialisation seed of a grid cell; shared by all repetitions."""
    return int(np.random.SeedSequence([master_seed, h0, h1]).generate_state(1)[0])


class BenchmarkError(RuntimeError):
    def __init__(self, dataset: str, variant: str, repetition: int, cell: tuple[int, int],
                 cause: Exception):
        self.coordinates = (dataset, variant, repetition, cell)
        super().__init__(
            f"{dataset}/{variant} repetition {repetition} cell h0={cell[0]} h1={cell[1]}: {cause}")


@dataclass
class EvalReport:
    """Per-repetition rows and their mean/std aggregates."""

    rows: list[dict]
    config: dict
    sample_std: bool = False
    meta: dict = field(default_factory=dict)

    def aggregate(self) -> list[dict]:
        groups: dict[tuple[str, str], list[dict]] = {}
        for row in self.rows:
            groups.setdefault((row["dataset"], row["variant"]), []).append(row)
        out = []
        ddof = 1 if self.sample_std else 0
        for (dataset, variant), rows in groups.items():
            entry = {"dataset": dataset, "variant": variant, "repetitions": len(rows)}
            for metric in METRICS:
                values = np.array([r[metric] for r in rows])
                entry[f"{metric}_mean"] = float(values.mean())
                entry[f"{metric}_std"] = float(values.std(ddof=ddof)) if len(values) > ddof else 0.0
            out.append(entry)
        return out

    def mean(self, variant: str, dataset: str | None = None,
             metric: str = "balanced_accuracy") -> float:
        for entry in self.aggregate():
            if entry["variant"] == variant and (dataset is None or entry["dataset"] == dataset):
                return entry[f"{metric}_mean"]
        raise KeyError((dataset, variant))

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "sample_std": self.sample_std,
            "meta": self.meta,
            "rows": self.rows,
            "aggregate": self.aggregate(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        data = json.loads(text)
        return cls(data["rows"], data["config"], data["sample_std"], data.get("meta", {}))

    def to_csv(self) -> str:
        """One line per dataset, variant and metric with ``mean`` and ``std``."""
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["dataset", "variant", "metric", "mean", "std", "formatted"])
        for entry in self.aggregate():
            for metric in METRICS:
                m, s = entry[f"{metric}_mean"], entry[f"{metric}_std"]
                w.writerow([entry["dataset"], entry["variant"], metric, repr(m), repr(s),
                            f"{100 * m:.2f} ± {100 * s:.2f}"])
        return out.getvalue()

    def rows_csv(self) -> str:
        out = io.StringIO()
        if not self.rows:
            return ""
        keys = list(self.rows[0])
        w = csv.DictWriter(out, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return out.getvalue()


def _run_cell(inputs: GraphInputs, labels: np.ndarray, num_classes: int, rep: Repetition,
              config: ModelConfig):
    train_mask, val_mask, _ = rep.masks(len(labels))
    state, trace = train(config, inputs, labels, train_mask, val_mask, num_classes)
    return state, trace


def run_benchmark(datasets: dict[str, dict[str, GraphInputs]], labels, plan: SplitPlan,
                  variants=("hypa",), grid=None, base: ModelConfig | None = None,
                  threads: int = 1, sample_std: bool = False) -> EvalReport:
    """Grid search per repetition, selection on validation balanced accuracy.

    ``datasets`` maps a dataset name to ``{variant: GraphInputs}``. ``grid``
    is a sequence of ``(h0, h1)`` pairs (default: the full 4 x 4 grid). The
    first cell wins ties. Each cell's initialisation seed comes from the
    master seed and the cell coordinates only, so repetitions share it.
    """
    labels = np.asarray(labels, dtype=np.int64)
    base = ModelConfig() if base is None else base
    grid = [(a, b) for a in HIDDEN_GRID for b in HIDDEN_GRID] if grid is None else list(grid)
    num_classes = int(labels.max()) + 1

    jobs = []
    for dataset, per_variant in datasets.items():
        for variant in variants:
            for rep in plan.repetitions:
                for cell in grid:
                    jobs.append((dataset, variant, rep, cell))

    def run(job):
        dataset, variant, rep, (h0, h1) = job
        config = base.replace(variant=variant, h0=h0, h1=h1, seed=cell_seed(plan.master_seed, h0, h1))
        try:
            return _run_cell(datasets[dataset][variant], labels, num_classes, rep, config)
        except Exception as err:  # re-raised with coordinates
            raise BenchmarkError(dataset, variant, rep.index, (h0, h1), err) from err

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    best: dict[tuple, tuple] = {}
    for job, (state, trace) in zip(jobs, results):
        key = (job[0], job[1], job[2].index)
        if key not in best or trace.best_val > best[key][2].best_val:
            best[key] = (job, state, trace)

    rows = []
    for (dataset, variant, r), (job, state, trace) in best.items():
        rep = job[2]
        probs = forward(state, datasets[dataset][variant])
        pred = probs.argmax(axis=1)
        y, p = labels[rep.test], pred[rep.test]
        f1, prec, rec = macro_metrics(y, p)
        rows.append({
            "dataset": dataset,
            "variant": variant,
            "repetition": r,
            "h0": job[3][0],
            "h1": job[3][1],
            "init_seed": state.config.seed,
            "best_epoch": trace.best_epoch,
            "val_balanced_accuracy": float(trace.best_val),
            "balanced_accuracy": balanced_accuracy(y, p),
            "f1_macro": f1,
            "precision_macro": prec,
            "recall_macro": rec,
        })
    config = {"base": asdict(base), "grid": [list(c) for c in grid], "variants": list(variants),
              "master_seed": plan.master_seed, "repetitions": len(plan.repetitions)}
    meta = {"zero_division": 0.0, "selection": "validation balanced accuracy, earliest epoch on ties",
            "plan_warnings": list(plan.warnings)}
    return EvalReport(rows, config, sample_std, meta)
