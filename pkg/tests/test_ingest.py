import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypadbgnn.ingest import (
    FormatError,
    NodeClassMap,
    NodeIndex,
    PathMultiset,
    TemporalEdgeList,
    dumps,
    loads,
    parse_classes,
    parse_paths,
    parse_temporal_edges,
    serialize_classes,
    serialize_paths,
    serialize_temporal_edges,
)

names = st.text(alphabet="abcdefgh123", min_size=1, max_size=4)


def test_parse_two_edges():
    edges = parse_temporal_edges("a\tb\t1\nb\tc\t2\n")
    assert edges.num_nodes == 3
    assert edges.num_edges == 2
    assert edges.names == ("a", "b", "c")
    assert edges.triples() == [(0, 1, 1), (1, 2, 2)]


def test_bad_timestamp_reports_row():
    with pytest.raises(FormatError) as err:
        parse_temporal_edges("a\tb\tx\n")
    assert err.value.row == 1


def test_wrong_field_count_reports_row():
    with pytest.raises(FormatError) as err:
        parse_temporal_edges("a\tb\t1\n\nb\tc\n")
    assert err.value.row == 3


def test_empty_edge_list_rejected():
    with pytest.raises(FormatError):
        parse_temporal_edges("\n\n")


def test_multi_edges_kept():
    edges = parse_temporal_edges("a\tb\t1\na\tb\t1\n")
    assert edges.num_edges == 2


def test_edge_arrays_are_read_only():
    edges = parse_temporal_edges("a\tb\t1\n")
    with pytest.raises(ValueError):
        edges.time[0] = 5


def test_classes_renumbered_by_first_appearance():
    classes = parse_classes("a\t7\nb\t3\nc\t7\n")
    assert classes.labels == {"a": 0, "b": 1, "c": 0}
    assert classes.class_names == ("7", "3")
    assert classes.class_sizes() == [2, 1]


def test_duplicate_class_rejected():
    with pytest.raises(FormatError):
        parse_classes("a\t0\na\t1\n")


def test_unknown_node_kept_with_warning(caplog):
    classes = parse_classes("a\t0\nz\t1\n", known_nodes=["a"])
    assert "z" in classes.labels
    assert "absent" in caplog.text


def test_single_class_rejected():
    with pytest.raises(ValueError):
        NodeClassMap({"a": 0, "b": 0})


def test_label_array_missing_node():
    classes = NodeClassMap({"a": 0, "b": 1})
    assert classes.label_array(["b", "a"]).tolist() == [1, 0]
    with pytest.raises(KeyError):
        classes.label_array(["c"])


def test_paths_round_trip_example():
    p = PathMultiset(2, {(0, 1, 2): 3}, ("a", "b", "c"))
    text = serialize_paths(p)
    assert text == "a,b,c\t3\n"
    assert parse_paths(text) == p


def test_ragged_paths_rejected():
    with pytest.raises(FormatError):
        parse_paths("a,b\t1\na,b,c\t1\n")


@pytest.mark.parametrize("freq", ["0", "-2", "x"])
def test_bad_frequency_rejected(freq):
    with pytest.raises(FormatError):
        parse_paths(f"a,b\t{freq}\n")


def test_repeated_path_rows_sum():
    p = parse_paths("a,b\t2\na,b\t3\n")
    assert p.named() == {("a", "b"): 5}


def test_multiset_validation():
    with pytest.raises(ValueError):
        PathMultiset(2, {(0, 1): 1}, ("a", "b"))
    with pytest.raises(ValueError):
        PathMultiset(1, {(0, 1): 0}, ("a", "b"))


def test_equality_ignores_id_assignment():
    a = PathMultiset(1, {(0, 1): 2}, ("x", "y"))
    b = PathMultiset(1, {(1, 0): 2}, ("y", "x"))
    assert a == b


def test_node_index_bijection():
    idx = NodeIndex(["q", "r", "q", "s"])
    assert idx.names == ("q", "r", "s")
    assert [idx.add(n) for n in idx.names] == [0, 1, 2]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(names, names, st.integers(-50, 50)), min_size=1, max_size=30))
def test_edge_round_trip(triples):
    edges = TemporalEdgeList.from_triples(triples)
    assert parse_temporal_edges(serialize_temporal_edges(edges)) == edges
    assert loads(dumps(edges)) == edges


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 3), st.data())
def test_path_round_trip(k, data):
    pool = data.draw(st.lists(names, min_size=1, max_size=6, unique=True))
    seqs = data.draw(st.dictionaries(
        st.tuples(*[st.integers(0, len(pool) - 1)] * (k + 1)), st.integers(1, 100),
        min_size=1, max_size=20))
    p = PathMultiset(k, seqs, tuple(pool))
    assert parse_paths(serialize_paths(p)) == p
    assert loads(dumps(p)) == p


@settings(max_examples=40, deadline=None)
@given(st.dictionaries(names, st.integers(0, 3), min_size=2, max_size=10).filter(
    lambda d: len(set(d.values())) >= 2))
def test_class_round_trip(labels):
    classes = parse_classes(io.StringIO("".join(f"{n}\t{c}\n" for n, c in labels.items())))
    again = parse_classes(serialize_classes(classes))
    assert again.labels == classes.labels
    assert loads(dumps(classes)).labels == classes.labels
    # grouping is preserved even though labels are renumbered
    groups = lambda m: sorted(sorted(n for n in m if m[n] == c) for c in set(m.values()))  # noqa: E731
    assert groups(classes.labels) == groups(labels)


def test_unknown_container_type():
    with pytest.raises(FormatError):
        loads('{"type": "Nope"}')


def test_label_array_dtype():
    assert NodeClassMap({"a": 0, "b": 1}).label_array(["a"]).dtype == np.int64
