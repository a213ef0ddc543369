"""Readers and writers for temporal edge lists, class maps and path multisets.

All on-disk formats are header-less, tab-separated UTF-8 text:

* ``edges.tsv``   -- ``source<TAB>target<TAB>timestamp``
* ``classes.tsv`` -- ``node<TAB>class``
* ``paths.tsv``   -- ``v0,v1,...,vk<TAB>frequency``

Node names are opaque strings. Internally every node is a dense integer id;
the id -> name table travels with each object so that derived artifacts can
always be reported with the original names.
"""

from __future__ import annotations

import io
import json
import logging
from collections import Counter
from dataclasses import dataclass
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class FormatError(ValueError):
    """Raised when an input file does not follow the expected layout."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


def _lines(stream: str | IO[str]) -> Iterable[tuple[int, str]]:
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    for number, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        yield number, line


class NodeIndex:
    """Bijection between node names and dense ids ``0..n-1``."""

    def __init__(self, names: Iterable[str] = ()):
        self._names: list[str] = []
        self._ids: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        idx = self._ids.get(name)
        if idx is None:
            idx = len(self._names)
            self._names.append(name)
            self._ids[name] = idx
        return idx

    def id(self, name: str) -> int:
        return self._ids[name]

    def name(self, idx: int) -> str:
        return self._names[idx]

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self._names)


def _readonly(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TemporalEdgeList:
    """Time-stamped directed interactions ``(source, target, t)``.

    Multi-edges (repeated triples) are legal and kept.
    """

    names: tuple[str, ...]
    source: np.ndarray
    target: np.ndarray
    time: np.ndarray

    def __post_init__(self):
        n = len(self.names)
        for attr in ("source", "target", "time"):
            arr = np.asarray(getattr(self, attr), dtype=np.int64)
            object.__setattr__(self, attr, _readonly(arr))
        if not (len(self.source) == len(self.target) == len(self.time)):
            raise ValueError("edge arrays must have equal length")
        if len(self.source) and (
            min(self.source.min(), self.target.min()) < 0
            or max(self.source.max(), self.target.max()) >= n
        ):
            raise ValueError("edge endpoint outside the node set")

    @classmethod
    def from_triples(cls, triples: Iterable[tuple[str, str, int]]) -> "TemporalEdgeList":
        index = NodeIndex()
        src, dst, ts = [], [], []
        for s, d, t in triples:
            src.append(index.add(str(s)))
            dst.append(index.add(str(d)))
            ts.append(int(t))
        return cls(index.names, np.array(src), np.array(dst), np.array(ts))

    @property
    def num_nodes(self) -> int:
        return len(self.names)

    @property
    def num_edges(self) -> int:
        return len(self.source)

    def triples(self) -> list[tuple[int, int, int]]:
        return list(zip(self.source.tolist(), self.target.tolist(), self.time.tolist()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TemporalEdgeList):
            return NotImplemented
        return (
            self.names == other.names
            and np.array_equal(self.source, other.source)
            and np.array_equal(self.target, other.target)
            and np.array_equal(self.time, other.time)
        )

    def __hash__(self):
        return hash((self.names, self.source.tobytes(), self.target.tobytes(), self.time.tobytes()))


@dataclass(frozen=True)
class NodeClassMap:
    """Class label (``0..C-1``) per node name."""

    labels: Mapping[str, int]
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "labels", dict(self.labels))
        if len(set(self.labels.values())) < 2:
            raise ValueError("at least two distinct classes are required")

    @property
    def num_classes(self) -> int:
        return max(self.labels.values()) + 1

    def label_array(self, names: Sequence[str]) -> np.ndarray:
        """Labels aligned with ``names``; raises ``KeyError`` on a missing node."""
        missing = [n for n in names if n not in self.labels]
        if missing:
            raise KeyError(f"no class for nodes {missing[:5]}")
        return np.array([self.labels[n] for n in names], dtype=np.int64)

    def class_sizes(self) -> list[int]:
        counts = Counter(self.labels.values())
        return [counts.get(c, 0) for c in range(self.num_classes)]


@dataclass(frozen=True, eq=False)
class PathMultiset:
    """Multiset of node sequences of length ``k + 1`` with positive frequencies.

    ``entries`` maps tuples of dense node ids to counts; ``names`` resolves
    ids. Equality compares the name-level content, so two multisets built
    with different id assignments but the same paths are equal.
    """

    k: int
    entries: Mapping[tuple[int, ...], int]
    names: tuple[str, ...]

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("path order k must be positive")
        entries = dict(self.entries)
        n = len(self.names)
        for seq, freq in entries.items():
            if len(seq) != self.k + 1:
                raise ValueError(f"sequence {seq} does not have length {self.k + 1}")
            if freq < 1:
                raise ValueError(f"non-positive frequency {freq} for {seq}")
            if min(seq) < 0 or max(seq) >= n:
                raise ValueError(f"sequence {seq} references an unknown node")
        object.__setattr__(self, "entries", entries)

    @property
    def total(self) -> int:
        return sum(self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)

    def named(self) -> dict[tuple[str, ...], int]:
        return {tuple(self.names[i] for i in seq): f for seq, f in self.entries.items()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PathMultiset):
            return NotImplemented
        return self.k == other.k and self.named() == other.named()

    def __hash__(self):
        return hash((self.k, frozenset(self.named().items())))


# -- edges ---------------------------------------------------------------------


def parse_temporal_edges(stream: str | IO[str], delimiter: str = "\t") -> TemporalEdgeList:
    """Parse ``source<TAB>target<TAB>timestamp`` rows.

    Node ids are assigned densely in first-appearance order.
    """
    triples = []
    for row, line in _lines(stream):
        parts = line.split(delimiter)
        if len(parts) != 3:
            raise FormatError(f"expected 3 fields, found {len(parts)}", row)
        s, d, t = (p.strip() for p in parts)
        if not s or not d:
            raise FormatError("empty node name", row)
        try:
            ts = int(t)
        except ValueError:
            raise FormatError(f"timestamp {t!r} is not an integer", row) from None
        triples.append((s, d, ts))
    if not triples:
        raise FormatError("empty edge list")
    return TemporalEdgeList.from_triples(triples)


def serialize_temporal_edges(edges: TemporalEdgeList) -> str:
    out = io.StringIO()
    for s, d, t in edges.triples():
        out.write(f"{edges.names[s]}\t{edges.names[d]}\t{t}\n")
    return out.getvalue()


# -- classes -------------------------------------------------------------------


def parse_classes(
    stream: str | IO[str], known_nodes: Iterable[str] | None = None
) -> NodeClassMap:
    """Parse ``node<TAB>class`` rows.

    Class labels are renumbered ``0..C-1`` in order of first appearance;
    the original label strings are kept as ``class_names``. Nodes not in
    ``known_nodes`` are kept with a warning.
    """
    labels: dict[str, int] = {}
    raw: dict[str, str] = {}
    classes = NodeIndex()
    for row, line in _lines(stream):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"expected 2 fields, found {len(parts)}", row)
        node, cls = (p.strip() for p in parts)
        if node in raw and raw[node] != cls:
            raise FormatError(f"node {node!r} has two classes ({raw[node]!r}, {cls!r})", row)
        raw[node] = cls
        labels[node] = classes.add(cls)
    if known_nodes is not None:
        known = set(known_nodes)
        unknown = [n for n in labels if n not in known]
        if unknown:
            logger.warning("%d class rows name nodes absent from the edge list", len(unknown))
    return NodeClassMap(labels, classes.names)


def serialize_classes(classes: NodeClassMap) -> str:
    out = io.StringIO()
    for node, c in classes.labels.items():
        name = classes.class_names[c] if classes.class_names else str(c)
        out.write(f"{node}\t{name}\n")
    return out.getvalue()


# -- paths ---------------------------------------------------------------------


def parse_paths(stream: str | IO[str], names: Sequence[str] | None = None) -> PathMultiset:
    """Parse ``v0,v1,...,vk<TAB>frequency`` rows into a :class:`PathMultiset`.

    If ``names`` is given, those ids are reused and new names are appended.
    Repeated sequences are summed.
    """
    index = NodeIndex(names or ())
    entries: Counter[tuple[int, ...]] = Counter()
    length = None
    for row, line in _lines(stream):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(f"expected 2 fields, found {len(parts)}", row)
        seq = [s.strip() for s in parts[0].split(",")]
        if len(seq) < 2 or not all(seq):
            raise FormatError("a path needs at least two non-empty nodes", row)
        if length is None:
            length = len(seq)
        elif len(seq) != length:
            raise FormatError(f"ragged path length {len(seq)} (expected {length})", row)
        try:
            freq = int(parts[1])
        except ValueError:
            raise FormatError(f"frequency {parts[1]!r} is not an integer", row) from None
        if freq < 1:
            raise FormatError(f"non-positive frequency {freq}", row)
        entries[tuple(index.add(s) for s in seq)] += freq
    if length is None:
        raise FormatError("empty path file")
    return PathMultiset(length - 1, entries, index.names)


def serialize_paths(paths: PathMultiset) -> str:
    out = io.StringIO()
    for seq in sorted(paths.entries):
        out.write(",".join(paths.names[i] for i in seq))
        out.write(f"\t{paths.entries[seq]}\n")
    return out.getvalue()


# -- structured container --------------------------------------------------------


def to_container(obj) -> dict:
    """Convert an artifact to a JSON-ready dict with a ``type`` tag."""
    if isinstance(obj, TemporalEdgeList):
        return {
            "type": "TemporalEdgeList",
            "names": list(obj.names),
            "edges": [list(e) for e in obj.triples()],
        }
    if isinstance(obj, NodeClassMap):
        return {
            "type": "NodeClassMap",
            "labels": dict(obj.labels),
            "class_names": list(obj.class_names),
        }
    if isinstance(obj, PathMultiset):
        return {
            "type": "PathMultiset",
            "k": obj.k,
            "names": list(obj.names),
            "entries": [[list(seq), f] for seq, f in sorted(obj.entries.items())],
        }
    if hasattr(obj, "to_container"):
        return obj.to_container()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def from_container(data: dict):
    kind = data.get("type")
    if kind == "TemporalEdgeList":
        e = np.array(data["edges"], dtype=np.int64).reshape(-1, 3)
        return TemporalEdgeList(tuple(data["names"]), e[:, 0], e[:, 1], e[:, 2])
    if kind == "NodeClassMap":
        return NodeClassMap(data["labels"], tuple(data["class_names"]))
    if kind == "PathMultiset":
        entries = {tuple(seq): f for seq, f in data["entries"]}
        return PathMultiset(data["k"], entries, tuple(data["names"]))
    if kind == "DeBruijnGraph":
        from .debruijn import DeBruijnGraph

        return DeBruijnGraph.from_container(data)
    if kind == "ScoredGraph":
        from .hypa import ScoredGraph

        return ScoredGraph.from_container(data)
    raise FormatError(f"unknown container type {kind!r}")


def dumps(obj) -> str:
    return json.dumps(to_container(obj), sort_keys=True)


def loads(text: str):
    return from_container(json.loads(text))
