"""Synthetic path data with an implanted class-assortative sequential pattern.

Part one fixes a heterogeneous first-order topology: every node gets a
weight from U[0, 1], in- and out-stub counts are drawn from independent
multinomials (``n`` trials, probabilities proportional to the weights) and
stubs are paired uniformly at random. Each resulting first-order multi-edge
``<v0 v1>`` becomes a second-order node whose weighted in- and out-degree
equal the multi-edge frequency.

Part two consumes those higher-order stubs: out-stubs are taken in uniformly
random order (i.e. proportional to the remaining out-degree) and each is
matched to an overlapping in-stub ``<v1 v2>`` drawn proportional to its
remaining count, inflated by ``1 + bias`` when ``v0, v1, v2`` share a class.

Running part two twice on one part-one draw, with ``bias = 0`` and with the
configured bias, yields the *Unweighted* and *Weighted Sampling* datasets.
"""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .ingest import NodeClassMap, PathMultiset

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    nodes_per_class: tuple[int, int] = (10, 10)
    bias: float = 0.05
    num_paths: int = 2**16
    k: int = 2
    seed: int = 0
    # "all": every node of the candidate path shares a class; "last_k": only
    # the k nodes of the in-stub tuple are compared
    same_class_rule: str = "all"

    def __post_init__(self):
        if isinstance(self.nodes_per_class, int):
            object.__setattr__(self, "nodes_per_class", (self.nodes_per_class,) * 2)
        if len(self.nodes_per_class) != 2 or min(self.nodes_per_class) < 1:
            raise ValueError("need two classes with at least one node each")
        if self.bias < 0:
            raise ValueError("bias must be non-negative")
        if self.num_paths < 1:
            raise ValueError("num_paths must be positive")
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if self.same_class_rule not in ("all", "last_k"):
            raise ValueError(f"unknown same-class rule {self.same_class_rule!r}")

    @property
    def num_nodes(self) -> int:
        return sum(self.nodes_per_class)

    def labels(self) -> np.ndarray:
        a, b = self.nodes_per_class
        return np.array([0] * a + [1] * b, dtype=np.int64)

    def names(self) -> tuple[str, ...]:
        return tuple(f"v{i}" for i in range(self.num_nodes))


@dataclass
class FirstOrder:
    """Output of part one.

    ``weights`` are the node weights; ``out_stubs``/``in_stubs`` the
    multinomial counts; ``higher_nodes`` maps each (k-1)-step walk (for
    k = 2 simply a first-order multi-edge) to its frequency, which is both
    its in- and out-degree in the order-k graph.
    """

    weights: np.ndarray
    out_stubs: np.ndarray
    in_stubs: np.ndarray
    higher_nodes: dict[tuple[int, ...], int]


def _pair_stubs(out_counts: np.ndarray, in_counts: np.ndarray,
                rng: np.random.Generator) -> list[tuple[int, int]]:
    outs = np.repeat(np.arange(len(out_counts)), out_counts)
    ins = np.repeat(np.arange(len(in_counts)), in_counts)
    ins = rng.permutation(ins)
    return list(zip(outs.tolist(), ins.tolist()))


def generate_first_order(config: SynthConfig, rng: np.random.Generator | None = None) -> FirstOrder:
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n, N = config.num_paths, config.num_nodes
    weights = rng.uniform(0.0, 1.0, size=N)
    p = weights / weights.sum()
    out_stubs = rng.multinomial(n, p)
    in_stubs = rng.multinomial(n, p)
    pairs = _pair_stubs(out_stubs, in_stubs, rng)
    nodes = dict(Counter(pairs))
    # for k > 2 the order-k nodes are unbiased (k-1)-step walks built level by level
    for level in range(2, config.k):
        walks = _sample_edges(nodes, level, rng, None, 0.0)
        nodes = dict(walks[0])
    return FirstOrder(weights, out_stubs, in_stubs, dict(nodes))


@dataclass
class PathsResult:
    paths: PathMultiset
    discarded: int


def _sample_edges(higher_nodes: dict[tuple[int, ...], int], k: int, rng: np.random.Generator,
                  labels: np.ndarray | None, bias: float,
                  same_all: bool = True) -> tuple[Counter, int]:
    nodes = sorted(higher_nodes)
    counts = np.array([higher_nodes[v] for v in nodes], dtype=np.int64)

    # candidate in-stubs grouped by their (k-1)-prefix
    groups: dict[tuple[int, ...], list[int]] = {}
    for i, v in enumerate(nodes):
        groups.setdefault(v[:-1], []).append(i)
    group_idx = {key: np.array(val) for key, val in groups.items()}
    in_remaining = counts.astype(float)

    def boost(out_node: tuple[int, ...], cand: np.ndarray) -> np.ndarray:
        if bias == 0.0:
            return np.ones(len(cand))
        shared = out_node if same_all else out_node[1:]
        c0 = labels[shared[0]]
        if not np.all(labels[list(shared)] == c0):
            return np.ones(len(cand))
        tails = np.array([nodes[j][-1] for j in cand])
        return np.where(labels[tails] == c0, 1.0 + bias, 1.0)

    # a uniform permutation of the out-stubs is the same as drawing them one
    # by one proportional to the remaining out-degree
    out_order = rng.permutation(np.repeat(np.arange(len(nodes)), counts))
    boosts: dict[int, np.ndarray] = {}
    result: Counter[tuple[int, ...]] = Counter()
    discarded = 0
    for i in out_order.tolist():
        u = nodes[i]
        cand = group_idx.get(u[1:])
        if cand is None:
            discarded += 1
            continue
        b = boosts.get(i)
        if b is None:
            b = boosts[i] = boost(u, cand)
        w = in_remaining[cand] * b
        total = w.sum()
        if total <= 0:
            discarded += 1
            continue
        cum = np.cumsum(w)
        pos = min(int(np.searchsorted(cum, rng.random() * total, side="right")), len(cand) - 1)
        j = cand[pos]
        if in_remaining[j] <= 0:
            # rounding at the top of the cumulative sum; take the last live candidate
            j = cand[np.flatnonzero(in_remaining[cand] > 0)[-1]]
        in_remaining[j] -= 1
        result[u + nodes[j][-1:]] += 1
    return result, discarded


def generate_paths(config: SynthConfig, first: FirstOrder,
                   rng: np.random.Generator | None = None, bias: float | None = None) -> PathsResult:
    """Sample order-k edges from the higher-order stubs of part one.

    Out-stubs whose overlap set is empty are discarded and counted, so
    ``paths.total + discarded == num_paths``.
    """
    rng = np.random.default_rng(config.seed) if rng is None else rng
    bias = config.bias if bias is None else bias
    result, discarded = _sample_edges(
        first.higher_nodes, config.k, rng, config.labels(), bias, config.same_class_rule == "all")
    if discarded:
        logger.info("discarded %d out-stubs without a valid in-stub", discarded)
    return PathsResult(PathMultiset(config.k, result, config.names()), discarded)


@dataclass
class SyntheticPair:
    unweighted: PathMultiset
    weighted: PathMultiset
    classes: NodeClassMap
    first: FirstOrder
    discarded: tuple[int, int]
    config: SynthConfig

    def report(self) -> str:
        lines = [
            f"seed\t{self.config.seed}",
            f"bias\t{self.config.bias}",
            f"num_paths\t{self.config.num_paths}",
            f"nodes_per_class\t{self.config.nodes_per_class[0]},{self.config.nodes_per_class[1]}",
            f"higher_order_nodes\t{len(self.first.higher_nodes)}",
            f"discarded_unweighted\t{self.discarded[0]}",
            f"discarded_weighted\t{self.discarded[1]}",
            f"total_unweighted\t{self.unweighted.total}",
            f"total_weighted\t{self.weighted.total}",
            f"same_class_fraction_unweighted\t{same_class_fraction(self.unweighted, self.config.labels())!r}",
            f"same_class_fraction_weighted\t{same_class_fraction(self.weighted, self.config.labels())!r}",
        ]
        names = self.config.names()
        lines += [f"weight\t{names[i]}\t{w!r}" for i, w in enumerate(self.first.weights)]
        return "\n".join(lines) + "\n"


def generate_dataset_pair(config: SynthConfig) -> SyntheticPair:
    """Shared part one, then part two with ``bias = 0`` and with ``config.bias``."""
    seeds = np.random.SeedSequence(config.seed).spawn(3)
    first = generate_first_order(config, np.random.default_rng(seeds[0]))
    unweighted = generate_paths(config, first, np.random.default_rng(seeds[1]), bias=0.0)
    weighted = generate_paths(config, first, np.random.default_rng(seeds[2]))
    names = config.names()
    labels = config.labels()
    classes = NodeClassMap({names[i]: int(labels[i]) for i in range(config.num_nodes)}, ("A", "B"))
    return SyntheticPair(
        unweighted.paths, weighted.paths, classes, first,
        (unweighted.discarded, weighted.discarded), config,
    )


def same_class_fraction(paths: PathMultiset, labels: np.ndarray) -> float:
    same = sum(f for seq, f in paths.entries.items() if len({int(labels[v]) for v in seq}) == 1)
    return same / paths.total if paths.total else float("nan")
