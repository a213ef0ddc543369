import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn import metrics as skm

from hypadbgnn.debruijn import build_debruijn, project_suborder
from hypadbgnn.evaluation import (
    METRICS,
    EvalReport,
    balanced_accuracy,
    cell_seed,
    largest_remainder,
    macro_metrics,
    make_split_plan,
    run_benchmark,
)
from hypadbgnn.ingest import PathMultiset
from hypadbgnn.neural import GraphInputs, ModelConfig, ModelState, correct_graphs, forward
from oracles import confusion_metrics

# -- metrics --------------------------------------------------------------------------


def test_metric_example():
    y, p = [0, 0, 1, 1], [0, 1, 1, 1]
    assert balanced_accuracy(y, p) == pytest.approx(0.75)
    f1, prec, rec = macro_metrics(y, p)
    assert prec == pytest.approx(5 / 6)
    assert f1 == pytest.approx(11 / 15)
    assert rec == pytest.approx(0.75)


def test_constant_predictor():
    y = np.array([0, 1, 2, 0, 1, 2, 2])
    assert balanced_accuracy(y, np.zeros_like(y)) == pytest.approx(1 / 3)
    f1, prec, _ = macro_metrics(y, np.zeros_like(y))
    assert prec == pytest.approx((2 / 7) / 3)


def test_metric_errors():
    with pytest.raises(ValueError):
        balanced_accuracy([0, 1], [0])
    with pytest.raises(ValueError):
        balanced_accuracy([], [])
    with pytest.raises(ValueError):
        balanced_accuracy([0, 0], [0, 1], classes=[0, 1])


label_pairs = st.integers(1, 40).flatmap(lambda n: st.tuples(
    st.lists(st.integers(0, 3), min_size=n, max_size=n),
    st.lists(st.integers(0, 3), min_size=n, max_size=n)))


@settings(max_examples=200, deadline=None)
@given(label_pairs)
def test_metrics_match_confusion_oracle(pair):
    y, p = pair
    bacc, (f1, prec, rec) = confusion_metrics(y, p)
    assert balanced_accuracy(y, p) == pytest.approx(bacc, abs=1e-12)
    got = macro_metrics(y, p)
    assert got == pytest.approx((f1, prec, rec), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(label_pairs)
def test_metrics_match_sklearn(pair):
    y, p = pair
    labels = sorted(set(y))
    assert balanced_accuracy(y, p) == pytest.approx(
        skm.recall_score(y, p, labels=labels, average="macro", zero_division=0), abs=1e-12)
    f1, prec, _ = macro_metrics(y, p)
    assert prec == pytest.approx(
        skm.precision_score(y, p, labels=labels, average="macro", zero_division=0), abs=1e-12)
    assert f1 == pytest.approx(
        skm.f1_score(y, p, labels=labels, average="macro", zero_division=0), abs=1e-12)


# -- split plans ------------------------------------------------------------------------


def test_largest_remainder():
    assert largest_remainder([1.5, 1.5, 1.0], 4).tolist() == [2, 1, 1]
    assert largest_remainder([0.2, 0.7, 2.1], 3).tolist() == [0, 1, 2]
    with pytest.raises(ValueError):
        largest_remainder([1.0, 1.0], 5)


@st.composite
def class_sizes(draw):
    return draw(st.lists(st.integers(1, 40), min_size=2, max_size=5))


@settings(max_examples=60, deadline=None)
@given(class_sizes(), st.integers(0, 2**32 - 1))
def test_plan_partitions_and_stratifies(sizes, seed):
    labels = np.repeat(np.arange(len(sizes)), sizes)
    n = len(labels)
    plan = make_split_plan(labels, seed)
    tests = np.concatenate([r.test for r in plan.repetitions])
    assert sorted(tests.tolist()) == list(range(n))  # folds partition the nodes
    for rep in plan.repetitions:
        tr, va, te = rep.masks(n)
        assert not np.any(tr & va) and not np.any(tr & te) and not np.any(va & te)
        assert np.all(tr | va | te)
        for c, size in enumerate(sizes):
            in_fold = np.sum(labels[rep.test] == c)
            assert abs(in_fold - size / 10) < 1
            rest = size - in_fold
            in_val = np.sum(labels[rep.val] == c)
            assert abs(in_val - 0.2 * rest) <= 1
    sizes_per_fold = [len(r.test) for r in plan.repetitions]
    assert max(sizes_per_fold) - min(sizes_per_fold) <= len(sizes)
    if min(sizes) < 10:
        assert plan.warnings


def test_balanced_hundred_nodes():
    labels = np.repeat([0, 1], 50)
    plan = make_split_plan(labels, 0)
    for rep in plan.repetitions:
        assert np.bincount(labels[rep.test]).tolist() == [5, 5]
        assert len(rep.val) == 18 and len(rep.train) == 72
    assert not plan.warnings


def test_plan_deterministic():
    labels = np.repeat([0, 1, 2], [13, 7, 21])
    a, b = make_split_plan(labels, 42), make_split_plan(labels, 42)
    assert a.to_dict() == b.to_dict()
    assert a.to_dict() != make_split_plan(labels, 43).to_dict()


def test_cell_seed_depends_on_cell_only():
    assert cell_seed(0, 4, 8) == cell_seed(0, 4, 8)
    assert len({cell_seed(0, a, b) for a in (4, 8, 16, 32) for b in (4, 8, 16, 32)}) == 16
    assert cell_seed(0, 4, 8) != cell_seed(1, 4, 8)


# -- reports ------------------------------------------------------------------------------


def _report(sample_std=False):
    rng = np.random.default_rng(0)
    rows = []
    for variant in ("hypa", "minus"):
        for r in range(5):
            row = {"dataset": "d", "variant": variant, "repetition": r}
            row.update({m: float(rng.random()) for m in METRICS})
            rows.append(row)
    return EvalReport(rows, {"x": 1}, sample_std)


@pytest.mark.parametrize("sample_std", [False, True])
def test_aggregate_recomputed(sample_std):
    rep = _report(sample_std)
    for entry in rep.aggregate():
        vals = [r["f1_macro"] for r in rep.rows if r["variant"] == entry["variant"]]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / (len(vals) - (1 if sample_std else 0))
        assert entry["f1_macro_mean"] == pytest.approx(mean, abs=1e-12)
        assert entry["f1_macro_std"] == pytest.approx(var ** 0.5, abs=1e-12)
    assert rep.mean("minus", metric="f1_macro") == next(
        e["f1_macro_mean"] for e in rep.aggregate() if e["variant"] == "minus")


def test_report_round_trip_and_csv():
    rep = _report()
    again = EvalReport.from_json(rep.to_json())
    assert again.to_json() == rep.to_json()
    lines = rep.to_csv().splitlines()
    assert lines[0] == "dataset,variant,metric,mean,std,formatted"
    assert len(lines) == 1 + 2 * len(METRICS)
    assert "±" in lines[1]
    assert rep.rows_csv().count("\n") == 11


# -- benchmark loop ---------------------------------------------------------------------


def _dataset(n=20, seed=0):
    rng = np.random.default_rng(seed)
    entries = {}
    for _ in range(120):
        seq = tuple(int(x) for x in rng.integers(0, n, 3))
        entries[seq] = entries.get(seq, 0) + 1
    paths = PathMultiset(2, entries, tuple(f"v{i}" for i in range(n)))
    first = build_debruijn(project_suborder(paths), extra_nodes=[(i,) for i in range(n)])
    higher = build_debruijn(paths)
    cache = {}
    return {v: GraphInputs.build(correct_graphs(first, higher, v, cache=cache), v)
            for v in ("hypa", "minus")}


def test_zero_lr_reproduces_untrained_model():
    inputs = _dataset()
    labels = np.arange(20) % 2
    plan = make_split_plan(labels, 5, repetitions=4)
    base = ModelConfig(lr=0.0, max_epochs=3, h2=16)
    rep = run_benchmark({"toy": inputs}, labels, plan, ("hypa", "minus"), [(8, 4)], base)
    seed = cell_seed(5, 8, 4)
    for row in rep.rows:
        cfg = base.replace(variant=row["variant"], h0=8, h1=4, seed=seed)
        state = ModelState.initialise(cfg, 20, 2, np.random.default_rng(seed))
        pred = forward(state, inputs[row["variant"]]).argmax(axis=1)
        test = plan.repetitions[row["repetition"]].test
        assert row["balanced_accuracy"] == balanced_accuracy(labels[test], pred[test])
        assert row["best_epoch"] == 0
        assert row["init_seed"] == seed
    assert len(rep.rows) == 8


def test_benchmark_deterministic_and_thread_independent():
    inputs = _dataset(seed=1)
    labels = np.arange(20) % 2
    plan = make_split_plan(labels, 3, repetitions=3)
    base = ModelConfig(lr=0.05, max_epochs=15)
    grid = [(4, 4), (8, 8)]
    a = run_benchmark({"toy": inputs}, labels, plan, ("hypa", "minus"), grid, base)
    b = run_benchmark({"toy": inputs}, labels, plan, ("hypa", "minus"), grid, base, threads=3)
    assert a.to_json() == b.to_json()
    for row in a.rows:
        assert (row["h0"], row["h1"]) in grid
