"""Message-passing operators: score-weighted convolution, edge-encoded
convolution and the two bipartite transfer maps between orders."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ..debruijn import DeBruijnGraph
from .autodiff import Tensor, add, linear, outer, relu, sparse_linear, spmm


def propagation_matrix(graph: DeBruijnGraph, scores: np.ndarray) -> sp.csr_matrix:
    """Normalised score-weighted adjacency ``P`` with ``(P h)_v`` equal to

        sum_{u in N_in(v) + {v}} s(u, v) h_u / sqrt(H(v) H(u))

    where ``H(x)`` sums the scores entering ``x`` including its self term.
    The self term is 1 unless ``graph`` contains the explicit edge (v, v).
    """
    n = graph.num_nodes
    scores = np.asarray(scores, dtype=float)
    self_w = np.ones(n)
    loops = graph.src == graph.dst
    self_w[graph.src[loops]] = scores[loops]
    src = np.concatenate([graph.src[~loops], np.arange(n)])
    dst = np.concatenate([graph.dst[~loops], np.arange(n)])
    w = np.concatenate([scores[~loops], self_w])
    H = np.bincount(dst, weights=w, minlength=n)
    with np.errstate(divide="ignore"):
        inv = np.where(H > 0, 1.0 / np.sqrt(H), 0.0)
    vals = w * inv[dst] * inv[src]
    return sp.csr_matrix((vals, (dst, src)), shape=(n, n))


def hypa_convolution(h: Tensor, prop: sp.spmatrix, w: Tensor, activate: bool = True) -> Tensor:
    """``sigma(P h W^T)`` with ``P`` from :func:`propagation_matrix`."""
    out = linear(spmm(prop, h), w)
    return relu(out) if activate else out


def edge_normalisation(graph: DeBruijnGraph, scores: np.ndarray):
    """Structural ``1/c_ij`` matrix and the per-node edge-attribute sum.

    ``c_ij = sqrt(deg(i) deg(j))`` with in-degrees counted on the unweighted
    graph plus a self loop. Returns ``(A_hat, s)`` where
    ``s_i = sum_j e_ij / c_ij`` (self loops carry attribute 0 unless the
    graph has the explicit edge).
    """
    n = graph.num_nodes
    loops = graph.src == graph.dst
    src = np.concatenate([graph.src[~loops], np.arange(n)])
    dst = np.concatenate([graph.dst[~loops], np.arange(n)])
    self_attr = np.zeros(n)
    self_attr[graph.src[loops]] = np.asarray(scores)[loops]
    attr = np.concatenate([np.asarray(scores, dtype=float)[~loops], self_attr])
    deg = np.bincount(dst, minlength=n).astype(float)
    inv = 1.0 / np.sqrt(deg)
    c_inv = inv[dst] * inv[src]
    a_hat = sp.csr_matrix((c_inv, (dst, src)), shape=(n, n))
    s = np.bincount(dst, weights=attr * c_inv, minlength=n)
    return a_hat, s


def edge_encoded_convolution(h: Tensor, a_hat: sp.spmatrix, edge_sum: np.ndarray,
                             w: Tensor, w_edge: Tensor, activate: bool = True) -> Tensor:
    """``sigma(sum_j (h_j W^T + e_ij W_e^T) / c_ij)``.

    ``w_edge`` has shape ``(out, 1)``.
    """
    out = add(linear(spmm(a_hat, h), w), outer(edge_sum, w_edge))
    return relu(out) if activate else out


@dataclass(frozen=True)
class BipartiteMaps:
    """Maps between first-order nodes and order-k tuples.

    ``map_in`` (n_k x n_1) averages the sources of each tuple (its first
    element); ``map_out`` (n_1 x n_k) averages, for each base node, the tuples
    ending in it. ``has_out`` marks base nodes with at least one such tuple.
    """

    map_in: sp.csr_matrix
    map_out: sp.csr_matrix
    has_out: np.ndarray

    @classmethod
    def from_graph(cls, graph: DeBruijnGraph, num_base: int | None = None) -> "BipartiteMaps":
        n1 = len(graph.names) if num_base is None else num_base
        nk = graph.num_nodes
        first = np.array([v[0] for v in graph.nodes], dtype=np.int64)
        last = np.array([v[-1] for v in graph.nodes], dtype=np.int64)
        ones = np.ones(nk)
        map_in = sp.csr_matrix((ones, (np.arange(nk), first)), shape=(nk, n1))
        cnt = np.bincount(last, minlength=n1).astype(float)
        map_out = sp.csr_matrix((1.0 / cnt[last], (last, np.arange(nk))), shape=(n1, nk))
        return cls(map_in, map_out, cnt > 0)


def bipartite_in(h_first: Tensor, maps: BipartiteMaps, w: Tensor) -> Tensor:
    """``sigma(W mean{h_u : u is the first element of v})`` per tuple ``v``."""
    return relu(linear(spmm(maps.map_in, h_first), w))


def bipartite_in_onehot(maps: BipartiteMaps, w: Tensor) -> Tensor:
    """:func:`bipartite_in` for identity input features, without forming them."""
    return relu(sparse_linear(maps.map_in, w))


def bipartite_out(h_higher: Tensor, h_first: Tensor, maps: BipartiteMaps, w: Tensor) -> Tensor:
    """``sigma(W mean{h_u + h_v : u ends in v})``; ``sigma(W h_v)`` if no tuple ends in ``v``."""
    if h_higher.shape[1] != h_first.shape[1]:
        raise ValueError(
            f"dimension mismatch: higher-order width {h_higher.shape[1]} "
            f"vs first-order width {h_first.shape[1]}"
        )
    merged = add(spmm(maps.map_out, h_higher), h_first)
    return relu(linear(merged, w))
