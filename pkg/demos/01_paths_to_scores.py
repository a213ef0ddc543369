"""From timestamped interactions to scored second-order transitions.

A handful of events between five people are chained into time-respecting
paths, the paths become a second-order De Bruijn graph, and every transition
is scored against the degree-preserving random ensemble.
"""

from hypadbgnn.debruijn import build_debruijn, serialize_graph
from hypadbgnn.hypa import prune_underrepresented, score_hypa, z_transform
from hypadbgnn.ingest import TemporalEdgeList
from hypadbgnn.paths import PathExtractionConfig, extract_paths

events = [
    ("ana", "ben", 1), ("ben", "cai", 2), ("ana", "ben", 3), ("ben", "cai", 4),
    ("dan", "ben", 5), ("ben", "eve", 6), ("ana", "ben", 7), ("ben", "cai", 8),
    ("dan", "ben", 9), ("ben", "eve", 10), ("cai", "ana", 11), ("eve", "dan", 12),
]
edges = TemporalEdgeList.from_triples(events)

# a path may only continue if the next event follows within one time unit
paths = extract_paths(edges, PathExtractionConfig(delta=1, k=2))
print("observed paths of length two:")
for seq, count in sorted(paths.named().items()):
    print("  ", " -> ".join(seq), count)

graph = build_debruijn(paths)
print()
print(serialize_graph(graph))

scored = score_hypa(graph)
z = z_transform(graph)
print("transition                 count   HYPA    log-z")
for (u, v, w), s, zs in zip(graph.edges(), scored.scores, z.scores):
    lab = lambda t: ",".join(graph.names[x] for x in t)  # noqa: E731
    print(f"{lab(u):>8} -> {lab(v):<10} {w:>7} {s:7.3f} {zs:8.3f}")

# ana always continues to cai and dan always to eve: those transitions score high.
# Pruning drops whatever the ensemble deems under-represented.
kept = prune_underrepresented(scored, 0.01)
print(f"\nkept {kept.graph.num_edges} of {graph.num_edges} transitions at theta = 0.01")
