from collections import Counter

import numpy as np
import pytest
from scipy import stats

from hypadbgnn.debruijn import build_debruijn
from hypadbgnn.synthgen import (
    FirstOrder,
    SynthConfig,
    _sample_edges,
    generate_dataset_pair,
    generate_first_order,
    generate_paths,
    same_class_fraction,
)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(nodes_per_class=(0, 3))
    with pytest.raises(ValueError):
        SynthConfig(bias=-0.1)
    with pytest.raises(ValueError):
        SynthConfig(k=1)
    with pytest.raises(ValueError):
        SynthConfig(same_class_rule="any")
    assert SynthConfig(nodes_per_class=4).nodes_per_class == (4, 4)


def test_single_path_is_one_multi_edge():
    first = generate_first_order(SynthConfig(nodes_per_class=(2, 2), num_paths=1))
    assert sum(first.higher_nodes.values()) == 1
    assert len(first.higher_nodes) == 1


def test_stub_totals():
    cfg = SynthConfig(num_paths=500, seed=3)
    first = generate_first_order(cfg)
    assert first.out_stubs.sum() == first.in_stubs.sum() == 500
    assert sum(first.higher_nodes.values()) == 500
    out = Counter()
    inn = Counter()
    for (a, b), f in first.higher_nodes.items():
        out[a] += f
        inn[b] += f
    assert [out[i] for i in range(cfg.num_nodes)] == first.out_stubs.tolist()
    assert [inn[i] for i in range(cfg.num_nodes)] == first.in_stubs.tolist()


def test_stub_share_follows_weights():
    # two nodes: out-stubs of node 0 are Binomial(n, w0 / (w0 + w1))
    n = 10_000
    for seed in range(5):
        first = generate_first_order(SynthConfig(nodes_per_class=(1, 1), num_paths=n, seed=seed))
        p = first.weights[0] / first.weights.sum()
        sigma = np.sqrt(n * p * (1 - p))
        assert abs(first.out_stubs[0] - n * p) <= 3 * sigma + 1


def test_conservation():
    pair = generate_dataset_pair(SynthConfig(num_paths=4000, seed=1))
    assert pair.unweighted.total + pair.discarded[0] == 4000
    assert pair.weighted.total + pair.discarded[1] == 4000
    for paths in (pair.unweighted, pair.weighted):
        out = Counter()
        for seq, f in paths.entries.items():
            out[seq[:2]] += f
        assert all(out[v] <= f for v, f in pair.first.higher_nodes.items())
        inn = Counter()
        for seq, f in paths.entries.items():
            inn[seq[1:]] += f
        assert all(inn[v] <= pair.first.higher_nodes.get(v, 0) for v in inn)


def test_deterministic():
    a = generate_dataset_pair(SynthConfig(num_paths=3000, seed=9))
    b = generate_dataset_pair(SynthConfig(num_paths=3000, seed=9))
    assert a.weighted == b.weighted and a.unweighted == b.unweighted
    assert a.report() == b.report()
    c = generate_dataset_pair(SynthConfig(num_paths=3000, seed=10))
    assert c.weighted != a.weighted


def test_pair_shares_order2_nodes():
    pair = generate_dataset_pair(SynthConfig(num_paths=4000, seed=2))
    gu, gw = build_debruijn(pair.unweighted), build_debruijn(pair.weighted)
    support = set(pair.first.higher_nodes)
    assert set(gu.nodes) <= support and set(gw.nodes) <= support
    assert pair.discarded[0] == pair.discarded[1]
    assert gu.m == gw.m


def test_unbiased_sampling_matches_expected_counts():
    """Without bias, the expected count of <a b> -> <b c> is d_ab c_bc / max(O_b, D_b),
    where O_b and D_b are the out- and in-stub totals of the overlap group b."""
    nodes = {(0, 1): 3, (2, 1): 1, (1, 0): 2, (1, 2): 1, (0, 0): 1, (0, 2): 2}
    out_tot, in_tot = Counter(), Counter()
    for (a, b), f in nodes.items():
        out_tot[b] += f
        in_tot[a] += f
    cells = [(u, w) for u in nodes for w in nodes if u[1] == w[0]]
    expected = np.array([
        nodes[u] * nodes[w] / max(out_tot[u[1]], in_tot[u[1]]) for u, w in cells])
    rng = np.random.default_rng(123)
    R = 20_000
    draws = np.zeros((R, len(cells)))
    for r in range(R):
        got, _ = _sample_edges(nodes, 2, rng, None, 0.0)
        draws[r] = [got.get(u + w[1:], 0) for u, w in cells]
    mean = draws.mean(axis=0)
    se = draws.std(axis=0, ddof=1) / np.sqrt(R)
    z = (mean - expected) / se
    # Bonferroni over cells at the 1% level
    assert np.all(np.abs(z) < stats.norm.ppf(1 - 0.005 / len(cells))), list(zip(cells, mean, expected))


def _fraction(cfg, first, bias, seed):
    res = generate_paths(cfg, first, np.random.default_rng(seed), bias=bias)
    return same_class_fraction(res.paths, cfg.labels())


def test_bias_is_monotone():
    means = []
    for bias in (0.0, 0.05, 0.5):
        vals = []
        for seed in range(10):
            cfg = SynthConfig(num_paths=2**14, seed=seed)
            first = generate_first_order(cfg)
            vals.append(_fraction(cfg, first, bias, 1000 + seed))
        means.append(np.mean(vals))
    assert means[0] < means[1] < means[2]


def test_default_bias_raises_same_class_fraction():
    diffs = []
    for seed in range(20):
        pair = generate_dataset_pair(SynthConfig(num_paths=2**14, seed=seed))
        labels = pair.config.labels()
        diffs.append(same_class_fraction(pair.weighted, labels)
                     - same_class_fraction(pair.unweighted, labels))
    res = stats.ttest_1samp(diffs, 0.0, alternative="greater")
    assert res.pvalue < 0.01


def test_single_node_per_class():
    pair = generate_dataset_pair(SynthConfig(nodes_per_class=(1, 1), num_paths=200, seed=4))
    assert pair.unweighted.total + pair.discarded[0] == 200
    assert set(pair.classes.labels) == {"v0", "v1"}


def test_last_k_rule_only_checks_tuple():
    # v2 is class B, so under "all" no path starting at v2 is ever boosted;
    # under "last_k" only the in-stub tuple (v0, tail) is compared; few
    # out-stubs leave room for the boost to show
    first = FirstOrder(np.ones(4), np.zeros(4), np.zeros(4),
                       {(2, 0): 10, (0, 1): 25, (0, 2): 25})
    cfg = SynthConfig(nodes_per_class=(2, 2), num_paths=50, bias=50.0)
    strict = generate_paths(cfg, first, np.random.default_rng(0))
    unbiased = generate_paths(cfg, first, np.random.default_rng(0), bias=0.0)
    assert strict.paths.entries == unbiased.paths.entries
    loose = generate_paths(SynthConfig(nodes_per_class=(2, 2), num_paths=50, bias=50.0,
                                       same_class_rule="last_k"), first, np.random.default_rng(0))
    e = loose.paths.entries
    assert e.get((2, 0, 1), 0) > e.get((2, 0, 2), 0)


def test_higher_k_nodes_are_walks():
    first = generate_first_order(SynthConfig(num_paths=2000, k=3, seed=5))
    assert all(len(v) == 3 for v in first.higher_nodes)
    res = generate_paths(SynthConfig(num_paths=2000, k=3, seed=5), first)
    assert res.paths.k == 3
    assert res.paths.total + res.discarded == sum(first.higher_nodes.values())
