"""Multi-relational similarity graph: per node and per signal, keep only the top-k edges.

An undirected edge (u, v) of relation r survives iff v is among u's top-k partners by
r-score or u is among v's (union semantics), so every node's own strongest candidates
are always present even though stored degree may exceed k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from joinscope.similarity import ALL_SIGNALS, SignalType, SimilarityRecord


@dataclass
class SimilarityGraph:
    n_nodes: int
    edges: dict[SignalType, dict[tuple[int, int], float]] = field(default_factory=dict)
    adjacency: dict[SignalType, list[list[int]]] = field(default_factory=dict)

    def neighbors(self, node: int, relation: SignalType) -> list[tuple[int, float]]:
        """Neighbors of `node` under `relation`, ascending node id."""
        out = []
        for j in self.adjacency[relation][node]:
            key = (node, j) if node < j else (j, node)
            out.append((j, self.edges[relation][key]))
        return out

    def degree(self, node: int) -> int:
        return sum(len(self.adjacency[r][node]) for r in ALL_SIGNALS)


def build_graph(records: list[SimilarityRecord], k: int, n_nodes: int | None = None) -> SimilarityGraph:
    """Union of each endpoint's top-k positive-score partners, per relation."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n_nodes is None:
        n_nodes = max((max(r.node_a, r.node_b) for r in records), default=-1) + 1

    graph = SimilarityGraph(n_nodes=n_nodes)
    for rel in ALL_SIGNALS:
        candidates: list[list[tuple[float, int]]] = [[] for _ in range(n_nodes)]
        for rec in records:
            s = rec.scores[rel]
            if s > 0:
                candidates[rec.node_a].append((s, rec.node_b))
                candidates[rec.node_b].append((s, rec.node_a))

        kept: dict[tuple[int, int], float] = {}
        for i in range(n_nodes):
            candidates[i].sort(key=lambda sc: (-sc[0], sc[1]))
            for score, j in candidates[i][:k]:
                key = (i, j) if i < j else (j, i)
                kept[key] = score

        adj: list[list[int]] = [[] for _ in range(n_nodes)]
        for (u, v) in kept:
            adj[u].append(v)
            adj[v].append(u)
        for lst in adj:
            lst.sort()
        graph.edges[rel] = kept
        graph.adjacency[rel] = adj
    return graph


def neighbors(g: SimilarityGraph, node: int, relation: SignalType) -> list[tuple[int, float]]:
    return g.neighbors(node, relation)


def dump_edges(g: SimilarityGraph, path: str | Path) -> None:
    """JSON-lines dump, one record per edge."""
    with open(path, "w", encoding="utf-8") as f:
        for rel in ALL_SIGNALS:
            for (u, v), score in sorted(g.edges[rel].items()):
                f.write(json.dumps({"u": u, "v": v, "relation": rel.value, "score": score}) + "\n")
