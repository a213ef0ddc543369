"""The two-branch multi-order network and its four variants.

Layout (identity one-hot input on base nodes)::

    first order:   conv(h0) -> dropout -> conv(h1) ------------------+
    higher order:  bipartite_in -> conv(h0) -> dropout -> conv(h1) --+-> bipartite_out(h2) -> linear -> softmax

Variants differ only in the edge weights fed to the convolutions:

* ``hypa``  -- HYPA scores, edges below ``theta`` pruned
* ``minus`` -- raw edge frequencies, nothing pruned
* ``z``     -- transformed Z scores, edges with score 0 pruned
* ``edge``  -- first convolutions use scores as learned edge attributes on the
  HYPA-pruned graph; later convolutions are unweighted
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
import scipy.sparse as sp

from ..debruijn import DeBruijnGraph
from ..hypa import (
    DEFAULT_THETA,
    ScoredGraph,
    build_xi,
    frequency_scores,
    prune_underrepresented,
    prune_zero,
    score_hypa,
    z_transform,
)
from .autodiff import (
    Tensor,
    add,
    check_finite,
    linear,
    log_softmax,
    outer,
    parameter,
    relu,
    scale,
    sparse_linear,
    spmm,
    weighted_nll,
)
from .layers import BipartiteMaps, edge_normalisation, propagation_matrix

VARIANTS = ("hypa", "minus", "edge", "z")
HIDDEN_GRID = (4, 8, 16, 32)


@dataclass(frozen=True)
class ModelConfig:
    variant: str = "hypa"
    k: int = 2
    h0: int = 16
    h1: int = 16
    h2: int = 16
    lr: float = 0.001
    dropout: float = 0.4
    max_epochs: int = 5000
    class_weights: bool = True
    seed: int = 0
    merge_dropout: bool = False
    patience: int | None = None
    benchmark: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.benchmark:
            if self.h0 not in HIDDEN_GRID or self.h1 not in HIDDEN_GRID:
                raise ValueError(f"h0, h1 must be in {HIDDEN_GRID} in benchmark mode")
            if self.h2 != 16:
                raise ValueError("h2 is fixed to 16 in benchmark mode")

    def replace(self, **kw) -> "ModelConfig":
        d = asdict(self)
        d.update(kw)
        return ModelConfig(**d)


@dataclass(frozen=True)
class CorrectedGraphs:
    """Scored (and possibly pruned) first-order and order-k graphs for one variant."""

    first: ScoredGraph
    higher: ScoredGraph


def correct_graphs(first: DeBruijnGraph, higher: DeBruijnGraph, variant: str,
                   theta: float = DEFAULT_THETA, cache: dict | None = None) -> CorrectedGraphs:
    """Score and prune both graphs as ``variant`` requires.

    ``cache`` (keyed by kind) lets several variants share one scoring pass.
    """
    cache = {} if cache is None else cache

    def scored(kind: str) -> tuple[ScoredGraph, ScoredGraph]:
        if kind not in cache:
            if kind == "hypa":
                cache[kind] = (score_hypa(first, build_xi(first)), score_hypa(higher, build_xi(higher)))
            elif kind == "z":
                cache[kind] = (z_transform(first, build_xi(first)), z_transform(higher, build_xi(higher)))
            else:
                cache[kind] = (frequency_scores(first), frequency_scores(higher))
        return cache[kind]

    if variant == "minus":
        a, b = scored("frequency")
        return CorrectedGraphs(a, b)
    if variant == "z":
        a, b = scored("z")
        return CorrectedGraphs(prune_zero(a), prune_zero(b))
    if variant in ("hypa", "edge"):
        a, b = scored("hypa")
        return CorrectedGraphs(prune_underrepresented(a, theta), prune_underrepresented(b, theta))
    raise ValueError(f"unknown variant {variant!r}")


@dataclass
class GraphInputs:
    """Constant operators for one variant on one dataset."""

    n_first: int
    n_higher: int
    first_a: sp.csr_matrix
    first_b: sp.csr_matrix
    higher_a: sp.csr_matrix
    higher_b: sp.csr_matrix
    maps: BipartiteMaps
    edge_first: np.ndarray | None = None
    edge_higher: np.ndarray | None = None

    @classmethod
    def build(cls, graphs: CorrectedGraphs, variant: str) -> "GraphInputs":
        g1, gk = graphs.first.graph, graphs.higher.graph
        maps = BipartiteMaps.from_graph(gk, len(g1.names))
        if len(g1.names) != g1.num_nodes:
            raise ValueError("first-order graph must contain every base node")
        if variant == "edge":
            a1, s1 = edge_normalisation(g1, graphs.first.scores)
            ak, sk = edge_normalisation(gk, graphs.higher.scores)
            return cls(g1.num_nodes, gk.num_nodes, a1, a1, ak, ak, maps, s1, sk)
        p1 = propagation_matrix(g1, graphs.first.scores)
        pk = propagation_matrix(gk, graphs.higher.scores)
        return cls(g1.num_nodes, gk.num_nodes, p1, p1, pk, pk, maps)

    def permuted(self, perm_first: np.ndarray, perm_higher: np.ndarray) -> "GraphInputs":
        """Operators after renumbering nodes (``new = perm[old]``); for tests."""
        def pm(perm):
            n = len(perm)
            return sp.csr_matrix((np.ones(n), (perm, np.arange(n))), shape=(n, n))

        q1, qk = pm(perm_first), pm(perm_higher)
        conj1 = lambda a: (q1 @ a @ q1.T).tocsr()  # noqa: E731
        conjk = lambda a: (qk @ a @ qk.T).tocsr()  # noqa: E731
        maps = BipartiteMaps(
            (qk @ self.maps.map_in @ q1.T).tocsr(),
            (q1 @ self.maps.map_out @ qk.T).tocsr(),
            self.maps.has_out[np.argsort(perm_first)],
        )
        ef = None if self.edge_first is None else q1 @ self.edge_first
        eh = None if self.edge_higher is None else qk @ self.edge_higher
        return GraphInputs(
            self.n_first, self.n_higher, conj1(self.first_a), conj1(self.first_b),
            conjk(self.higher_a), conjk(self.higher_b), maps, ef, eh,
        )


PARAM_ORDER = ("first_a", "first_b", "bip_in", "higher_a", "higher_b", "bip_out", "classifier",
               "edge_first", "edge_higher")


def parameter_shapes(config: ModelConfig, n_first: int, num_classes: int) -> dict[str, tuple[int, int]]:
    shapes = {
        "first_a": (config.h0, n_first),
        "first_b": (config.h1, config.h0),
        "bip_in": (n_first, n_first),
        "higher_a": (config.h0, n_first),
        "higher_b": (config.h1, config.h0),
        "bip_out": (config.h2, config.h1),
        "classifier": (num_classes, config.h2),
    }
    if config.variant == "edge":
        shapes["edge_first"] = (config.h0, 1)
        shapes["edge_higher"] = (config.h0, 1)
    return shapes


@dataclass
class ModelState:
    """All trainable matrices plus the configuration and bookkeeping."""

    config: ModelConfig
    weights: dict[str, np.ndarray]
    num_classes: int
    epoch: int = 0
    rng_state: dict | None = None
    names: tuple[str, ...] = ()
    higher_nodes: tuple[tuple[int, ...], ...] = ()
    class_names: tuple[str, ...] = ()

    @classmethod
    def initialise(cls, config: ModelConfig, n_first: int, num_classes: int,
                   rng: np.random.Generator | None = None) -> "ModelState":
        """Glorot-uniform weights drawn in a fixed parameter order."""
        rng = np.random.default_rng(config.seed) if rng is None else rng
        weights = {}
        for name, (fan_out, fan_in) in parameter_shapes(config, n_first, num_classes).items():
            bound = np.sqrt(6.0 / (fan_in + fan_out))
            weights[name] = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        return cls(config, weights, num_classes, rng_state=rng.bit_generator.state)

    def copy(self) -> "ModelState":
        return ModelState(
            self.config, {k: v.copy() for k, v in self.weights.items()}, self.num_classes,
            self.epoch, self.rng_state, self.names, self.higher_nodes, self.class_names,
        )

    def zeros_like(self) -> "ModelState":
        s = self.copy()
        s.weights = {k: np.zeros_like(v) for k, v in self.weights.items()}
        return s

    # -- persistence ----------------------------------------------------------------

    def save(self, path_or_file) -> None:
        meta = {
            "config": asdict(self.config),
            "num_classes": self.num_classes,
            "epoch": self.epoch,
            "rng_state": self.rng_state,
            "names": list(self.names),
            "higher_nodes": [list(v) for v in self.higher_nodes],
            "class_names": list(self.class_names),
        }
        arrays = {f"w_{k}": v for k, v in self.weights.items()}
        np.savez(path_or_file, meta=np.array(json.dumps(meta)), **arrays)

    @classmethod
    def load(cls, path_or_file) -> "ModelState":
        with np.load(path_or_file, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            weights = {k[2:]: data[k].copy() for k in data.files if k.startswith("w_")}
        return cls(
            ModelConfig(**meta["config"]), weights, meta["num_classes"], meta["epoch"],
            meta["rng_state"], tuple(meta["names"]),
            tuple(tuple(v) for v in meta["higher_nodes"]), tuple(meta["class_names"]),
        )

    def equals(self, other: "ModelState") -> bool:
        return (
            self.config == other.config
            and self.weights.keys() == other.weights.keys()
            and all(np.array_equal(self.weights[k], other.weights[k]) for k in self.weights)
        )


def _dropout(x: Tensor, rate: float, rng: np.random.Generator | None, where: str) -> Tensor:
    if rng is None or rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return scale(x, mask)


def forward_logp(params: dict[str, Tensor], config: ModelConfig, inputs: GraphInputs,
                 rng: np.random.Generator | None = None) -> Tensor:
    """Log class probabilities for every base node.

    Dropout is applied only when ``rng`` is given.
    """
    edge = config.variant == "edge"

    # first-order branch; input features are the identity so P X W^T = P W^T
    if edge:
        h = add(sparse_linear(inputs.first_a, params["first_a"]),
                outer(inputs.edge_first, params["edge_first"]))
    else:
        h = sparse_linear(inputs.first_a, params["first_a"])
    h = check_finite(relu(h), "first-order conv 1")
    h = _dropout(h, config.dropout, rng, "first")
    h1 = check_finite(relu(linear(spmm(inputs.first_b, h), params["first_b"])), "first-order conv 2")

    # higher-order branch
    hk = check_finite(relu(sparse_linear(inputs.maps.map_in, params["bip_in"])), "bipartite in")
    if edge:
        g = add(linear(spmm(inputs.higher_a, hk), params["higher_a"]),
                outer(inputs.edge_higher, params["edge_higher"]))
    else:
        g = linear(spmm(inputs.higher_a, hk), params["higher_a"])
    g = check_finite(relu(g), "higher-order conv 1")
    g = _dropout(g, config.dropout, rng, "higher")
    g = check_finite(relu(linear(spmm(inputs.higher_b, g), params["higher_b"])), "higher-order conv 2")

    merged = add(spmm(inputs.maps.map_out, g), h1)
    hb = check_finite(relu(linear(merged, params["bip_out"])), "bipartite out")
    if config.merge_dropout:
        hb = _dropout(hb, config.dropout, rng, "merge")
    logits = check_finite(linear(hb, params["classifier"]), "classifier")
    return log_softmax(logits)


def as_params(state: ModelState) -> dict[str, Tensor]:
    return {k: parameter(v, name=k) for k, v in state.weights.items()}


def forward(state: ModelState, inputs: GraphInputs,
            rng: np.random.Generator | None = None) -> np.ndarray:
    """Class-probability matrix (rows sum to one)."""
    params = {k: Tensor(v) for k, v in state.weights.items()}
    return np.exp(forward_logp(params, state.config, inputs, rng).value)


def class_weight_vector(labels: np.ndarray, mask: np.ndarray, num_classes: int,
                        use: bool = True) -> np.ndarray:
    """``n_train / (C * n_train_c)`` per class (1 for absent classes or if disabled)."""
    w = np.ones(num_classes)
    if not use:
        return w
    counts = np.bincount(labels[mask], minlength=num_classes)
    n = counts.sum()
    present = counts > 0
    w[present] = n / (num_classes * counts[present])
    return w


def loss_weighted_cross_entropy(probabilities: np.ndarray, labels: np.ndarray,
                                class_weights: np.ndarray, mask: np.ndarray) -> float:
    """``-sum_{v in mask} w_c(v) log p_v[c(v)] / sum_{v in mask} w_c(v)``."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty mask")
    w = class_weights[labels[mask]]
    p = probabilities[mask, labels[mask]]
    with np.errstate(divide="ignore"):
        return float(-np.sum(w * np.log(p)) / np.sum(w))


def loss_and_grads(state: ModelState, inputs: GraphInputs, labels: np.ndarray,
                   mask: np.ndarray, class_weights: np.ndarray,
                   rng: np.random.Generator | None = None) -> tuple[float, dict[str, np.ndarray]]:
    params = as_params(state)
    logp = forward_logp(params, state.config, inputs, rng)
    sample_w = np.where(mask, class_weights[labels], 0.0)
    loss = weighted_nll(logp, labels, sample_w)
    loss.backward()
    grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.value)) for k, p in params.items()}
    return float(loss.value), grads
