"""Order-k De Bruijn graphs built from path multisets."""

from __future__ import annotations

import io
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .ingest import FormatError, NodeIndex, PathMultiset, TemporalEdgeList, _lines

Node = tuple[int, ...]


def _ro(a, dtype) -> np.ndarray:
    a = np.asarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DeBruijnGraph:
    """Weighted directed graph on k-tuples of base nodes.

    ``nodes`` is a sorted tuple of k-tuples of base ids; edges are stored as
    parallel arrays of node indices (``src``, ``dst``) and integer weights.
    Nodes are kept even if isolated.
    """

    k: int
    names: tuple[str, ...]
    nodes: tuple[Node, ...]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    index: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "src", _ro(self.src, np.int64))
        object.__setattr__(self, "dst", _ro(self.dst, np.int64))
        object.__setattr__(self, "weight", _ro(self.weight, np.int64))
        object.__setattr__(self, "index", {v: i for i, v in enumerate(self.nodes)})
        if len(self.index) != len(self.nodes):
            raise ValueError("duplicate higher-order node")
        if any(len(v) != self.k for v in self.nodes):
            raise ValueError(f"all nodes must be {self.k}-tuples")

    # -- sizes and degrees ------------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.src)

    @property
    def m(self) -> int:
        """Total edge weight (the number of observed paths)."""
        return int(self.weight.sum())

    @property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.weight, minlength=self.num_nodes).astype(np.int64)

    @property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, weights=self.weight, minlength=self.num_nodes).astype(np.int64)

    def edges(self) -> Iterable[tuple[Node, Node, int]]:
        for i, j, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            yield self.nodes[i], self.nodes[j], w

    def edge_dict(self) -> dict[tuple[Node, Node], int]:
        return {(u, v): w for u, v, w in self.edges()}

    def is_valid_pair(self, u: Node, v: Node) -> bool:
        return is_debruijn_pair(u, v)

    def node_label(self, i: int) -> str:
        return ",".join(self.names[x] for x in self.nodes[i])

    def adjacency(self, values: np.ndarray | None = None) -> sp.csr_matrix:
        """Sparse ``n x n`` matrix with ``values`` (default: weights) at (src, dst)."""
        vals = self.weight if values is None else values
        n = self.num_nodes
        return sp.csr_matrix((np.asarray(vals, dtype=float), (self.src, self.dst)), shape=(n, n))

    def subgraph(self, keep: np.ndarray) -> "DeBruijnGraph":
        """Same node set, only edges where ``keep`` is true."""
        keep = np.asarray(keep, dtype=bool)
        return DeBruijnGraph(
            self.k, self.names, self.nodes, self.src[keep], self.dst[keep], self.weight[keep]
        )

    def relabel(self, perm: Sequence[int]) -> "DeBruijnGraph":
        """Rename base node ``i`` to ``perm[i]`` (used for equivariance checks)."""
        perm = list(perm)
        names = [None] * len(self.names)
        for old, new in enumerate(perm):
            names[new] = self.names[old]
        edges = {
            (tuple(perm[x] for x in u), tuple(perm[x] for x in v)): w for u, v, w in self.edges()
        }
        nodes = [tuple(perm[x] for x in u) for u in self.nodes]
        return _from_edge_counts(self.k, tuple(names), edges, nodes)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DeBruijnGraph):
            return NotImplemented

        def named(g):
            lab = lambda u: tuple(g.names[x] for x in u)  # noqa: E731
            return (
                g.k,
                frozenset(lab(u) for u in g.nodes),
                frozenset((lab(u), lab(v), w) for u, v, w in g.edges()),
            )

        return named(self) == named(other)

    __hash__ = None

    # -- persistence --------------------------------------------------------------

    def to_container(self) -> dict:
        return {
            "type": "DeBruijnGraph",
            "k": self.k,
            "names": list(self.names),
            "nodes": [list(v) for v in self.nodes],
            "edges": [[int(i), int(j), int(w)] for i, j, w in zip(self.src, self.dst, self.weight)],
        }

    @classmethod
    def from_container(cls, data: dict) -> "DeBruijnGraph":
        e = np.array(data["edges"], dtype=np.int64).reshape(-1, 3)
        return cls(
            data["k"], tuple(data["names"]), tuple(tuple(v) for v in data["nodes"]),
            e[:, 0], e[:, 1], e[:, 2],
        )


def is_debruijn_pair(u: Node, v: Node) -> bool:
    """True iff the last k-1 entries of ``u`` equal the first k-1 of ``v``."""
    return u[1:] == v[:-1]


def _from_edge_counts(
    k: int,
    names: tuple[str, ...],
    counts: dict[tuple[Node, Node], int],
    extra_nodes: Iterable[Node] = (),
) -> DeBruijnGraph:
    nodes = set(extra_nodes)
    for u, v in counts:
        nodes.add(u)
        nodes.add(v)
    nodes = tuple(sorted(nodes))
    index = {v: i for i, v in enumerate(nodes)}
    keys = sorted(counts, key=lambda e: (index[e[0]], index[e[1]]))
    src = [index[u] for u, _ in keys]
    dst = [index[v] for _, v in keys]
    w = [counts[e] for e in keys]
    return DeBruijnGraph(k, names, nodes, src, dst, w)


def build_debruijn(paths: PathMultiset, k: int | None = None,
                   extra_nodes: Iterable[Node] = ()) -> DeBruijnGraph:
    """One order-k edge per distinct path, weighted by its frequency.

    The edge for path ``(v0, ..., vk)`` joins ``(v0..v_{k-1})`` to ``(v1..vk)``.
    """
    k = paths.k if k is None else k
    if paths.k != k:
        raise ValueError(f"path multiset has order {paths.k}, expected {k}")
    counts = {(seq[:-1], seq[1:]): f for seq, f in paths.entries.items()}
    return _from_edge_counts(k, paths.names, counts, extra_nodes)


def project_suborder(paths: PathMultiset) -> PathMultiset:
    """Window counts of length k-1 implied by a length-k multiset.

    Each path of frequency f adds f to both of its length-(k-1) sub-paths
    (prefix and suffix).
    """
    if paths.k < 2:
        raise ValueError("project_suborder needs k >= 2")
    out: Counter[Node] = Counter()
    for seq, f in paths.entries.items():
        out[seq[:-1]] += f
        out[seq[1:]] += f
    return PathMultiset(paths.k - 1, out, paths.names)


def edge_frequencies(edges: TemporalEdgeList) -> PathMultiset:
    """First-order multiset: how often each (source, target) pair interacts."""
    counts = Counter(zip(edges.source.tolist(), edges.target.tolist()))
    return PathMultiset(1, counts, edges.names)


def binary_adjacency(n: int, pairs: Iterable[tuple[int, int]]) -> sp.csr_matrix:
    pairs = set(pairs)
    if not pairs:
        return sp.csr_matrix((n, n), dtype=np.int64)
    r, c = zip(*pairs)
    return sp.csr_matrix((np.ones(len(r), dtype=np.int64), (r, c)), shape=(n, n))


def first_order_adjacency(graph: DeBruijnGraph) -> sp.csr_matrix:
    """Binary adjacency on base nodes implied by the transitions in ``graph``."""
    pairs = set()
    for u, v, _ in graph.edges():
        seq = u + v[-1:]
        pairs.update(zip(seq, seq[1:]))
    return binary_adjacency(len(graph.names), pairs)


def walk_count(adjacency: sp.spmatrix, k: int) -> int:
    """``sum_ij (A^k)_ij`` for a binary adjacency ``A``, in exact integers."""
    # Python ints: the count grows like |V|^(k+1) and must not overflow
    a = sp.csr_matrix(adjacency)
    succ = [a.indices[a.indptr[i]:a.indptr[i + 1]].tolist() for i in range(a.shape[0])]
    v = [1] * a.shape[0]
    for _ in range(k):
        v = [sum(v[j] for j in row) for row in succ]
    return sum(v)


def walk_count_bound(graph: DeBruijnGraph, adjacency: sp.spmatrix) -> bool:
    """Check that the order-k edge count does not exceed the number of k-walks."""
    return graph.num_edges <= walk_count(adjacency, graph.k)


# -- text format ----------------------------------------------------------------


def serialize_graph(graph: DeBruijnGraph) -> str:
    """Plain-text graph: header, one ``node`` row per tuple, then ``edge`` rows."""
    out = io.StringIO()
    out.write(f"k\t{graph.k}\n")
    out.write("names\t" + "\t".join(graph.names) + "\n")
    for i in range(graph.num_nodes):
        out.write(f"node\t{graph.node_label(i)}\n")
    for i, j, w in zip(graph.src.tolist(), graph.dst.tolist(), graph.weight.tolist()):
        out.write(f"edge\t{graph.node_label(i)}\t{graph.node_label(j)}\t{w}\n")
    return out.getvalue()


def parse_graph(stream: str | IO[str]) -> DeBruijnGraph:
    index = NodeIndex()
    k = None
    nodes: list[Node] = []
    counts: dict[tuple[Node, Node], int] = {}

    def tup(label: str, row: int) -> Node:
        t = tuple(index.add(x) for x in label.split(","))
        if len(t) != k:
            raise FormatError(f"node {label!r} is not a {k}-tuple", row)
        return t

    for row, line in _lines(stream):
        parts = line.split("\t")
        if parts[0] == "k":
            k = int(parts[1])
        elif parts[0] == "names" and not index.names:
            for name in parts[1:]:
                index.add(name)
        elif k is None:
            raise FormatError("missing k header", row)
        elif parts[0] == "node" and len(parts) == 2:
            nodes.append(tup(parts[1], row))
        elif parts[0] == "edge" and len(parts) == 4:
            u, v = tup(parts[1], row), tup(parts[2], row)
            if not is_debruijn_pair(u, v):
                raise FormatError(f"edge {parts[1]} -> {parts[2]} violates the overlap rule", row)
            counts[(u, v)] = int(parts[3])
        else:
            raise FormatError(f"unrecognised record {parts[0]!r}", row)
    if k is None:
        raise FormatError("empty graph file")
    return _from_edge_counts(k, index.names, counts, nodes)
