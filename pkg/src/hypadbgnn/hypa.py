"""Hypergeometric ensembles over De Bruijn graphs and the scores derived from them.

The null model is the soft configuration model: ``Xi[u, v] = d_out(u) * d_in(v)``
placements per cell, ``M = sum(Xi)`` placements overall, ``m`` edges drawn
without replacement. For order ``k >= 2`` cells that would join tuples which
do not overlap are impossible; their mass is moved proportionally onto the
valid cells of the same row, so every out-stub total survives.
"""

from __future__ import annotations

import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import IO, Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .debruijn import DeBruijnGraph, Node, is_debruijn_pair
from .hypergeom import hypergeom_cdf
from .ingest import FormatError, _lines

logger = logging.getLogger(__name__)

HYPA = "hypa"
ZSCORE = "z"
FREQUENCY = "frequency"
DEFAULT_THETA = 0.01


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class XiMatrix:
    """Sparse urn composition over node pairs of one De Bruijn graph.

    ``row``/``col`` index ``nodes``; ``value`` holds the (real) number of
    placements per cell. ``dropped_rows`` counts rows whose mass sat
    entirely on invalid cells and was discarded.
    """

    nodes: tuple[Node, ...]
    row: np.ndarray
    col: np.ndarray
    value: np.ndarray
    m: int
    dropped_rows: int = 0

    @property
    def M(self) -> float:
        return float(self.value.sum())

    def matrix(self, values: np.ndarray | None = None) -> sp.csr_matrix:
        n = len(self.nodes)
        v = self.value if values is None else values
        return sp.csr_matrix((v, (self.row, self.col)), shape=(n, n))

    def rounded(self) -> tuple[sp.csr_matrix, int]:
        """Cells rounded half-to-even, and the integer total recomputed from them."""
        vals = np.rint(self.value)
        return self.matrix(vals), int(vals.sum())

    def lookup(self, src: np.ndarray, dst: np.ndarray, rounded: bool = False) -> np.ndarray:
        mat = self.rounded()[0] if rounded else self.matrix()
        if len(src) == 0:
            return np.zeros(0)
        return np.asarray(mat[src, dst]).ravel()

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.row, weights=self.value, minlength=len(self.nodes))

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.col, weights=self.value, minlength=len(self.nodes))


def raw_xi(out_degree: np.ndarray, in_degree: np.ndarray) -> sp.coo_matrix:
    """Outer product of degrees restricted to cells with a positive product."""
    out_degree = np.asarray(out_degree, dtype=float)
    in_degree = np.asarray(in_degree, dtype=float)
    r = np.flatnonzero(out_degree > 0)
    c = np.flatnonzero(in_degree > 0)
    rr, cc = np.meshgrid(r, c, indexing="ij")
    vals = np.outer(out_degree[r], in_degree[c])
    n = len(out_degree)
    return sp.coo_matrix((vals.ravel(), (rr.ravel(), cc.ravel())), shape=(n, n))


def redistribute_invalid(
    raw: sp.spmatrix,
    nodes: Sequence[Node],
    m: int,
    valid: Callable[[Node, Node], bool] = is_debruijn_pair,
) -> XiMatrix:
    """Zero impossible cells and rescale each row's valid cells to keep its total.

    A row whose positive cells are all invalid is dropped with a warning.
    """
    raw = sp.coo_matrix(raw)
    rows = defaultdict(list)
    for i, j, v in zip(raw.row.tolist(), raw.col.tolist(), raw.data.tolist()):
        if v != 0:
            rows[i].append((j, v))
    out_r, out_c, out_v = [], [], []
    dropped = 0
    for i in sorted(rows):
        cells = rows[i]
        total = math.fsum(v for _, v in cells)
        keep = [(j, v) for j, v in cells if valid(nodes[i], nodes[j])]
        kept = math.fsum(v for _, v in keep)
        if kept == 0:
            if total > 0:
                dropped += 1
            continue
        scale = total / kept
        for j, v in sorted(keep):
            out_r.append(i)
            out_c.append(j)
            out_v.append(v * scale)
    if dropped:
        logger.warning("%d Xi rows had no valid cell and were dropped", dropped)
    return XiMatrix(
        tuple(nodes), np.array(out_r, dtype=np.int64), np.array(out_c, dtype=np.int64),
        np.array(out_v, dtype=float), m, dropped,
    )


def suborder_degrees(graph: DeBruijnGraph, subgraph: DeBruijnGraph) -> np.ndarray:
    """Expected degrees of order-k nodes from order-(k-1) path frequencies.

    Order-k node ``u`` is the length-(k-1) path ``u``; its frequency in
    ``subgraph`` is rescaled so the degrees sum to ``graph.m``.
    """
    if subgraph.k != graph.k - 1:
        raise ValueError("subgraph must have order k-1")
    freq = {}
    for a, b, w in subgraph.edges():
        freq[a + b[-1:]] = w
    d = np.array([freq.get(u, 0) for u in graph.nodes], dtype=float)
    names_ok = graph.names == subgraph.names
    if not names_ok:
        raise ValueError("graph and subgraph must share the base node table")
    if d.sum() == 0:
        raise EnsembleError("subgraph has no weight on the order-k nodes")
    return d * (graph.m / d.sum())


def build_xi(
    graph: DeBruijnGraph,
    degrees: tuple[np.ndarray, np.ndarray] | None = None,
) -> XiMatrix:
    """Urn composition for ``graph``.

    By default the weighted in/out degrees of the graph itself are used;
    ``degrees`` overrides them (e.g. with :func:`suborder_degrees`). For
    ``k >= 2`` only overlap-valid cells carry mass; this computes the same
    result as ``redistribute_invalid(raw_xi(...))`` without materialising
    the invalid cells.
    """
    m = graph.m
    if m == 0:
        raise EnsembleError("graph has no edge weight (m = 0)")
    if degrees is None:
        dout, din = graph.out_degree.astype(float), graph.in_degree.astype(float)
    else:
        dout, din = (np.asarray(d, dtype=float) for d in degrees)
    nodes = graph.nodes
    if graph.k == 1:
        raw = raw_xi(dout, din)
        return XiMatrix(nodes, raw.row.astype(np.int64), raw.col.astype(np.int64), raw.data, m)

    total_in = math.fsum(din.tolist())
    by_prefix: dict[Node, list[int]] = defaultdict(list)
    for j, v in enumerate(nodes):
        if din[j] > 0:
            by_prefix[v[:-1]].append(j)
    out_r, out_c, out_v = [], [], []
    dropped = 0
    for i, u in enumerate(nodes):
        if dout[i] <= 0:
            continue
        succ = by_prefix.get(u[1:], [])
        kept = math.fsum(din[j] for j in succ)
        if kept == 0:
            dropped += 1
            continue
        scale = dout[i] * total_in / kept
        for j in succ:
            out_r.append(i)
            out_c.append(j)
            out_v.append(din[j] * scale)
    if dropped:
        logger.warning("%d Xi rows had no valid cell and were dropped", dropped)
    return XiMatrix(
        nodes, np.array(out_r, dtype=np.int64), np.array(out_c, dtype=np.int64),
        np.array(out_v, dtype=float), m, dropped,
    )


@dataclass(frozen=True, eq=False)
class ScoredGraph:
    """A De Bruijn graph with one score per edge.

    ``kind`` is ``"hypa"`` (scores in [0, 1]), ``"z"`` (transformed Z, >= 0)
    or ``"frequency"`` (raw weights). ``removed`` counts edges pruned so far.
    """

    graph: DeBruijnGraph
    scores: np.ndarray
    kind: str = HYPA
    theta: float | None = None
    removed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=float)
        if s.shape != (self.graph.num_edges,):
            raise ValueError("one score per edge is required")
        if self.kind == HYPA and len(s) and (s.min() < 0 or s.max() > 1):
            raise ValueError("HYPA scores must lie in [0, 1]")
        if self.kind == ZSCORE and len(s) and s.min() < 0:
            raise ValueError("transformed Z scores must be non-negative")
        s.setflags(write=False)
        object.__setattr__(self, "scores", s)

    def score_dict(self) -> dict[tuple[Node, Node], float]:
        return {
            (u, v): float(s) for (u, v, _), s in zip(self.graph.edges(), self.scores)
        }

    def to_container(self) -> dict:
        return {
            "type": "ScoredGraph",
            "graph": self.graph.to_container(),
            "scores": self.scores.tolist(),
            "kind": self.kind,
            "theta": self.theta,
            "removed": self.removed,
            "meta": self.meta,
        }

    @classmethod
    def from_container(cls, data: dict) -> "ScoredGraph":
        return cls(
            DeBruijnGraph.from_container(data["graph"]), np.array(data["scores"], dtype=float),
            data["kind"], data["theta"], data["removed"], dict(data.get("meta", {})),
        )


def score_hypa(graph: DeBruijnGraph, xi: XiMatrix | None = None) -> ScoredGraph:
    """``P(X_uv <= f(u, v))`` for every observed edge."""
    if xi is None:
        xi = build_xi(graph)
    cells, M = xi.rounded()
    m = graph.m
    if M < m:
        raise EnsembleError(f"M = {M} < m = {m}: cannot draw m placements")
    xis = np.asarray(cells[graph.src, graph.dst]).ravel().astype(np.int64) if graph.num_edges else []
    cache: dict[tuple[int, int], float] = {}
    scores = np.empty(graph.num_edges)
    for e, (x, f) in enumerate(zip(np.asarray(xis).tolist(), graph.weight.tolist())):
        key = (x, f)
        s = cache.get(key)
        if s is None:
            s = cache[key] = hypergeom_cdf(M, m, x, f)
        scores[e] = s
    return ScoredGraph(graph, scores, HYPA, meta={"M": M, "m": m, "dropped_rows": xi.dropped_rows})


def z_moments(M: float, m: int, xi: np.ndarray, exact_variance: bool = False):
    """Ensemble mean and variance of a cell count.

    The default variance is ``m (M-m)/(M-1) xi/M``; ``exact_variance`` adds
    the hypergeometric factor ``(1 - xi/M)``.
    """
    xi = np.asarray(xi, dtype=float)
    mean = m * xi / M
    var = m * (M - m) / (M - 1) * xi / M
    if exact_variance:
        var = var * (1 - xi / M)
    return mean, var


def z_transform(graph: DeBruijnGraph, xi: XiMatrix | None = None,
                exact_variance: bool = False) -> ScoredGraph:
    """Transformed Z score ``z' = log z`` if ``z >= 1`` else 0, per edge."""
    if xi is None:
        xi = build_xi(graph)
    cells, M = xi.rounded()
    m = graph.m
    if M < 2:
        raise EnsembleError("Z scores need M >= 2")
    if M < m:
        raise EnsembleError(f"M = {M} < m = {m}: cannot draw m placements")
    x = np.asarray(cells[graph.src, graph.dst]).ravel() if graph.num_edges else np.zeros(0)
    mean, var = z_moments(M, m, x, exact_variance)
    f = graph.weight.astype(float)
    zero_var = var <= 0
    if np.any(zero_var & (x > 0) & (M > m)):
        logger.warning("%d edges with zero variance scored 0", int(np.sum(zero_var & (x > 0))))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(zero_var, 0.0, (f - mean) / np.sqrt(np.where(zero_var, 1.0, var)))
        zp = np.where(z >= 1.0, np.log(np.maximum(z, 1.0)), 0.0)
    return ScoredGraph(graph, zp, ZSCORE, meta={"M": M, "m": m, "under_represented": int(np.sum(zp == 0))})


def frequency_scores(graph: DeBruijnGraph) -> ScoredGraph:
    """Raw edge weights as scores (the statistics-free baseline)."""
    return ScoredGraph(graph, graph.weight.astype(float), FREQUENCY)


def prune_underrepresented(scored: ScoredGraph, theta: float = DEFAULT_THETA) -> ScoredGraph:
    """Drop edges whose HYPA score is below ``theta``; node set is unchanged."""
    if scored.kind != HYPA:
        raise ValueError("pruning by threshold needs HYPA scores")
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    keep = scored.scores >= theta
    return ScoredGraph(
        scored.graph.subgraph(keep), scored.scores[keep], HYPA, theta,
        scored.removed + int((~keep).sum()), dict(scored.meta),
    )


def prune_zero(scored: ScoredGraph) -> ScoredGraph:
    """Drop edges with score exactly 0 (under-represented in the Z variant)."""
    keep = scored.scores > 0
    return ScoredGraph(
        scored.graph.subgraph(keep), scored.scores[keep], scored.kind, 0.0,
        scored.removed + int((~keep).sum()), dict(scored.meta),
    )


# -- per-node statistics --------------------------------------------------------


def node_class(node: Node, base_labels: Mapping[int, int] | np.ndarray, rule: str = "last") -> int:
    if rule == "last":
        return int(base_labels[node[-1]])
    if rule == "first":
        return int(base_labels[node[0]])
    raise ValueError(f"unknown class rule {rule!r}")


@dataclass
class NodeMeanTable:
    node: list[str]
    node_class: np.ndarray
    mean: np.ndarray
    count: np.ndarray
    num_classes: int
    excluded: int = 0

    def class_summary(self) -> list[dict]:
        """Box-plot statistics per class; empty classes yield a row with count 0."""
        rows = []
        for c in range(self.num_classes):
            vals = self.mean[self.node_class == c]
            if len(vals):
                q = np.percentile(vals, [0, 25, 50, 75, 100])
                rows.append(dict(cls=c, count=len(vals), min=q[0], q1=q[1], median=q[2],
                                 q3=q[3], max=q[4], mean=float(vals.mean())))
            else:
                nan = float("nan")
                rows.append(dict(cls=c, count=0, min=nan, q1=nan, median=nan, q3=nan,
                                 max=nan, mean=nan))
        return rows


def node_mean_hypa(
    scored: ScoredGraph, base_labels: Sequence[int] | np.ndarray, rule: str = "last",
    num_classes: int | None = None,
) -> NodeMeanTable:
    """Mean score over the incoming edges of each node that has any.

    ``base_labels`` gives the class of every base node (aligned with
    ``graph.names``); higher-order nodes take the class of their last (or
    first) element.
    """
    g = scored.graph
    base_labels = np.asarray(base_labels)
    sums = np.bincount(g.dst, weights=scored.scores, minlength=g.num_nodes)
    counts = np.bincount(g.dst, minlength=g.num_nodes)
    has = np.flatnonzero(counts > 0)
    excluded = g.num_nodes - len(has)
    if excluded:
        logger.info("%d nodes without incoming edges left out of the mean table", excluded)
    cls = np.array([node_class(g.nodes[i], base_labels, rule) for i in has], dtype=np.int64)
    if num_classes is None:
        num_classes = int(base_labels.max()) + 1
    return NodeMeanTable(
        [g.node_label(i) for i in has], cls, sums[has] / counts[has], counts[has],
        num_classes, excluded,
    )


# -- text format ----------------------------------------------------------------


def serialize_scored(scored: ScoredGraph) -> str:
    """TSV with a ``#`` header line and rows ``u, v, frequency, score``."""
    g = scored.graph
    out = io.StringIO()
    theta = "" if scored.theta is None else repr(float(scored.theta))
    out.write(f"#k={g.k}\tkind={scored.kind}\ttheta={theta}\tremoved={scored.removed}\n")
    out.write("#names\t" + "\t".join(g.names) + "\n")
    for i in range(g.num_nodes):
        out.write(f"#node\t{g.node_label(i)}\n")
    for i, j, w, s in zip(g.src.tolist(), g.dst.tolist(), g.weight.tolist(), scored.scores.tolist()):
        out.write(f"{g.node_label(i)}\t{g.node_label(j)}\t{w}\t{s!r}\n")
    return out.getvalue()


def parse_scored(stream: str | IO[str]) -> ScoredGraph:
    from .debruijn import _from_edge_counts
    from .ingest import NodeIndex

    header = None
    index = NodeIndex()
    nodes, weights, scores = [], {}, {}
    for row, line in _lines(stream):
        parts = line.split("\t")
        if header is None:
            if not parts[0].startswith("#k="):
                raise FormatError("missing scored-graph header", row)
            header = dict(p.lstrip("#").split("=", 1) for p in parts)
            k = int(header["k"])
            continue
        tup = lambda s: tuple(index.add(x) for x in s.split(","))  # noqa: E731
        if parts[0] == "#names":
            for name in parts[1:]:
                index.add(name)
            continue
        if parts[0] == "#node":
            nodes.append(tup(parts[1]))
            continue
        if len(parts) != 4:
            raise FormatError("expected 4 fields", row)
        u, v = tup(parts[0]), tup(parts[1])
        if len(u) != k or len(v) != k:
            raise FormatError(f"node is not a {k}-tuple", row)
        weights[(u, v)] = int(parts[2])
        scores[(u, v)] = float(parts[3])
    if header is None:
        raise FormatError("empty scored-graph file")
    g = _from_edge_counts(k, index.names, weights, nodes)
    s = np.array([scores[(u, v)] for u, v, _ in g.edges()])
    theta = float(header["theta"]) if header.get("theta") else None
    return ScoredGraph(g, s, header["kind"], theta, int(header.get("removed", 0)))
