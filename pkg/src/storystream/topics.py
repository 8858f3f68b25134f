"""Per-batch similarity graphs and Louvain community detection.

A batch of same-language articles becomes an undirected graph: nodes are
article positions, edge weights are the learned pairwise similarity clamped
to zero (community detection needs non-negative weights) and pruned below a
configurable epsilon. Louvain then maximizes weighted modularity

    Q = (1/2m) * sum_ij [A_ij - resolution * k_i * k_j / (2m)] * delta(c_i, c_j)

with the classic two phases: greedy local moves until no positive gain
remains, then aggregation of communities into super-nodes, repeated to a
fixed point. Node visiting order is shuffled by the seed; when several moves
tie on gain the first one encountered wins, so a fixed seed reproduces runs
exactly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .errors import UndefinedModularityError, ValidationError
from .similarity import WeightVector, pair_similarity


class SimilarityGraph:
    """Undirected weighted graph without self-loops."""

    def __init__(self, nodes: Sequence[int] = ()):
        self.adjacency = {int(n): {} for n in nodes}
        self.total_weight = 0.0  # sum over undirected edges, each counted once

    def add_node(self, node: int) -> None:
        self.adjacency.setdefault(int(node), {})

    def add_edge(self, u: int, v: int, weight: float) -> None:
        if u == v:
            raise ValidationError("self-loops are not allowed")
        if not (weight >= 0.0) or weight != weight or weight == float("inf"):
            raise ValidationError(f"edge weight must be finite and non-negative, got {weight}")
        self.add_node(u)
        self.add_node(v)
        previous = self.adjacency[u].get(v, 0.0)
        self.adjacency[u][v] = weight
        self.adjacency[v][u] = weight
        self.total_weight += weight - previous

    def nodes(self) -> list:
        return sorted(self.adjacency)

    def degree(self, node: int) -> float:
        return sum(self.adjacency[node].values())

    def edges(self):
        for u in self.nodes():
            for v, w in self.adjacency[u].items():
                if u < v:
                    yield u, v, w

    def dump_edges(self, handle) -> None:
        """Debug dump, one "i j weight" line per edge."""
        for u, v, w in self.edges():
            handle.write(f"{u} {v} {w!r}\n")


@dataclass(frozen=True)
class Topic:
    language: str
    batch_index: int
    members: tuple  # document ids, unique, at least one


def build_graph(
    feature_sets: Sequence, weights: WeightVector, prune_epsilon: float = 0.0
) -> SimilarityGraph:
    """Evaluate all pairs and keep edges whose clamped similarity clears epsilon."""
    if prune_epsilon < 0:
        raise ValidationError("prune epsilon must be non-negative")
    n = len(feature_sets)
    graph = SimilarityGraph(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            sim = max(pair_similarity(feature_sets[i], feature_sets[j], weights), 0.0)
            if sim > prune_epsilon:
                graph.add_edge(i, j, sim)
    return graph


def modularity(graph: SimilarityGraph, partition: dict, resolution: float = 1.0) -> float:
    """Weighted modularity of a partition; needs positive total edge weight."""
    nodes = graph.nodes()
    missing = [n for n in nodes if n not in partition]
    if missing:
        raise ValidationError(f"partition does not cover nodes {missing[:5]}")
    m2 = 2.0 * graph.total_weight
    if m2 <= 0.0:
        raise UndefinedModularityError("graph has zero total edge weight")
    internal = {}
    total = {}
    for u in nodes:
        cu = partition[u]
        ku = graph.degree(u)
        total[cu] = total.get(cu, 0.0) + ku
        acc = 0.0
        for v, w in graph.adjacency[u].items():
            if partition[v] == cu:
                acc += w
        internal[cu] = internal.get(cu, 0.0) + acc
    q = 0.0
    for c in internal:
        q += internal[c] / m2 - resolution * (total[c] / m2) ** 2
    return q


def louvain(
    graph: SimilarityGraph,
    resolution: float = 1.0,
    seed: int = 0,
    history: list | None = None,
) -> dict:
    """Two-phase Louvain; returns node -> community with ids dense in 0..C-1.

    When `history` is given, the modularity of the flattened partition is
    appended after initialization and after every level's local-moving pass;
    the sequence is non-decreasing. Graphs without edges yield singleton
    communities; an empty graph yields an empty partition.
    """
    if resolution <= 0:
        raise ValidationError("resolution must be positive")
    nodes = graph.nodes()
    if not nodes:
        return {}
    assignment = {v: v for v in nodes}
    m2 = 2.0 * graph.total_weight
    if m2 <= 0.0:
        return _renumber(assignment, nodes)

    rng = random.Random(seed)
    adjacency = {v: dict(graph.adjacency[v]) for v in nodes}
    loops = {v: 0.0 for v in nodes}
    if history is not None:
        history.append(modularity(graph, assignment, resolution))

    while True:
        communities, moved = _move_nodes(adjacency, loops, m2, resolution, rng)
        if not moved:
            break
        assignment = {v: communities[assignment[v]] for v in nodes}
        if history is not None:
            history.append(modularity(graph, assignment, resolution))
        adjacency, loops = _aggregate(adjacency, loops, communities)
    return _renumber(assignment, nodes)


def _move_nodes(adjacency, loops, m2, resolution, rng):
    """Phase one: greedily move nodes between communities while gain is positive."""
    order = sorted(adjacency)
    rng.shuffle(order)
    community = {v: v for v in adjacency}
    degree = {v: sum(adjacency[v].values()) + 2.0 * loops[v] for v in adjacency}
    community_total = dict(degree)
    moved_any = False
    improved = True
    while improved:
        improved = False
        for v in order:
            cv = community[v]
            neighbor_weight = {}
            for u, w in adjacency[v].items():
                cu = community[u]
                neighbor_weight[cu] = neighbor_weight.get(cu, 0.0) + w
            community_total[cv] -= degree[v]
            scale = resolution * degree[v] / m2
            best_c = cv
            best_gain = neighbor_weight.get(cv, 0.0) - scale * community_total[cv]
            for c, k_vc in neighbor_weight.items():
                if c == cv:
                    continue
                gain = k_vc - scale * community_total[c]
                if gain > best_gain:
                    best_c, best_gain = c, gain
            community_total[best_c] += degree[v]
            if best_c != cv:
                community[v] = best_c
                improved = True
                moved_any = True
    return community, moved_any


def _aggregate(adjacency, loops, community):
    """Phase two: contract each community into a single node."""
    new_adjacency = {}
    new_loops = {}
    for v in sorted(adjacency):
        c = community[v]
        new_adjacency.setdefault(c, {})
        new_loops[c] = new_loops.get(c, 0.0) + loops[v]
    for v in sorted(adjacency):
        cv = community[v]
        for u, w in adjacency[v].items():
            cu = community[u]
            if cu == cv:
                if v < u:
                    new_loops[cv] += w
            else:
                new_adjacency[cv][cu] = new_adjacency[cv].get(cu, 0.0) + w
    return new_adjacency, new_loops


def _renumber(assignment, nodes):
    ids = {}
    result = {}
    for v in nodes:
        c = assignment[v]
        if c not in ids:
            ids[c] = len(ids)
        result[v] = ids[c]
    return result


def detect_topics(
    docs_with_features: Sequence,
    language: str,
    batch_index: int,
    weights: WeightVector,
    resolution: float = 1.0,
    prune_epsilon: float = 0.0,
    seed: int = 0,
) -> list:
    """Cluster one language's (new + replayed) batch documents into topics.

    Input is a sequence of (document id, feature set) pairs; every document
    lands in exactly one returned topic.
    """
    if not docs_with_features:
        return []
    ids = [doc_id for doc_id, _ in docs_with_features]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate document ids in a batch")
    features = [fs for _, fs in docs_with_features]
    graph = build_graph(features, weights, prune_epsilon)
    partition = louvain(graph, resolution, seed)
    grouped = {}
    for position, doc_id in enumerate(ids):
        grouped.setdefault(partition[position], []).append(doc_id)
    return [
        Topic(language, batch_index, tuple(grouped[c])) for c in sorted(grouped)
    ]
