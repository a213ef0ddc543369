"""Extraction of time-respecting walks from temporal edge lists."""

from __future__ import annotations

import bisect
from collections import Counter, defaultdict
from dataclasses import dataclass

import numpy as np

from .ingest import PathMultiset, TemporalEdgeList


@dataclass(frozen=True)
class PathExtractionConfig:
    """Maximum inter-event gap ``delta`` and walk length ``k`` (in edges)."""

    delta: int
    k: int

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.k < 1:
            raise ValueError("k must be >= 1")


def extract_paths(edges: TemporalEdgeList, config: PathExtractionConfig) -> PathMultiset:
    """Count time-respecting walks of ``config.k`` edges.

    Consecutive events ``(u, v, t1)``, ``(v, w, t2)`` chain iff
    ``0 < t2 - t1 <= delta``. Every distinct chain of timestamped events is
    counted, so the same node sequence realised by two different timestamp
    chains contributes 2.

    Works as a dynamic program over time-sorted events: for each event we
    keep the multiset of node sequences of every length ``< k`` that end with
    it, and extend those through the events arriving at its source node.
    """
    k, delta = config.k, config.delta
    order = np.argsort(edges.time, kind="stable")
    src = edges.source[order].tolist()
    dst = edges.target[order].tolist()
    ts = edges.time[order].tolist()

    # events grouped by their target node, in time order
    arrivals_t: dict[int, list[int]] = defaultdict(list)
    arrivals_e: dict[int, list[int]] = defaultdict(list)

    # ending[j][e]: Counter of node sequences of j+1 edges ending at event e
    ending: list[list[Counter | None]] = [[None] * len(src) for _ in range(k)]
    result: Counter[tuple[int, ...]] = Counter()

    for e, (u, v, t) in enumerate(zip(src, dst, ts)):
        ending[0][e] = Counter({(u, v): 1})
        if k > 1:
            times = arrivals_t.get(u)
            if times:
                lo = bisect.bisect_left(times, t - delta)
                hi = bisect.bisect_left(times, t)  # strict: t' < t
                preds = arrivals_e[u][lo:hi]
                for j in range(1, k):
                    acc: Counter = Counter()
                    for p in preds:
                        prev = ending[j - 1][p]
                        if prev:
                            for seq, c in prev.items():
                                acc[seq + (v,)] += c
                    ending[j][e] = acc
        final = ending[k - 1][e]
        if final:
            result.update(final)
        arrivals_t[v].append(t)
        arrivals_e[v].append(e)

    return PathMultiset(k, result, edges.names)

