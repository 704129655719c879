"""Summary graph over network samples, its Laplacian, and conductance."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph


@dataclass(frozen=True)
class SummaryGraph:
    """Weighted undirected graph on dense node ids ``0..node_count-1``.

    Attributes
    ----------
    node_count : int
    edges : ndarray of shape (n_edges, 2)
        Unordered pairs stored with ``src < dst``, sorted lexicographically.
    weights : ndarray of shape (n_edges,)
        Edge weights in (0, 1].
    node_names : tuple
        Original node identifier for every dense id.
    """

    node_count: int
    edges: np.ndarray
    weights: np.ndarray
    node_names: tuple = field(default=())

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        weights = np.asarray(self.weights, dtype=np.float64).reshape(-1)
        if edges.shape[0] != weights.shape[0]:
            raise ValueError("edges and weights differ in length")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loop not allowed")
        if edges.size and (edges.min() < 0 or edges.max() >= self.node_count):
            raise ValueError("edge endpoint outside 0..node_count-1")
        edges = np.sort(edges, axis=1)
        order = np.lexsort((edges[:, 1], edges[:, 0]))
        edges, weights = edges[order], weights[order]
        if len(edges) > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
            raise ValueError("duplicate edge")
        edges.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "weights", weights)
        if not self.node_names:
            object.__setattr__(self, "node_names", tuple(range(self.node_count)))
        elif len(self.node_names) != self.node_count:
            raise ValueError("node_names must name every node")

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def adjacency(self) -> np.ndarray:
        W = np.zeros((self.node_count, self.node_count))
        W[self.edges[:, 0], self.edges[:, 1]] = self.weights
        W[self.edges[:, 1], self.edges[:, 0]] = self.weights
        return W

    @property
    def degree(self) -> np.ndarray:
        deg = np.zeros(self.node_count)
        np.add.at(deg, self.edges[:, 0], self.weights)
        np.add.at(deg, self.edges[:, 1], self.weights)
        return deg

    @property
    def laplacian(self) -> np.ndarray:
        return laplacian_matrix(self)

    def neighbors(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.node_count)]
        for p, q in self.edges:
            adj[p].append(int(q))
            adj[q].append(int(p))
        for nbrs in adj:
            nbrs.sort()
        return adj


def build_summary_graph(
    edge_sets: Sequence[Iterable[tuple[Hashable, Hashable]]],
    nodes: Iterable[Hashable] | None = None,
) -> SummaryGraph:
    """Aggregate per-sample edge sets into a summary graph.

    Every edge gets weight ``count / n_samples`` where ``count`` is the number
    of samples containing it. Node ids are remapped to dense integers; sorted
    original ids keep their relative order.

    Parameters
    ----------
    edge_sets : sequence of iterables of node pairs
        One entry per network sample.
    nodes : iterable, optional
        Extra node ids to include even if they carry no edge in any sample.
    """
    n = len(edge_sets)
    if n == 0:
        raise ValueError("empty dataset")
    counts: Counter = Counter()
    names: set = set(nodes) if nodes is not None else set()
    for sample in edge_sets:
        seen = set()
        for p, q in sample:
            if p == q:
                raise ValueError("self-loop not allowed")
            names.update((p, q))
            key = (p, q) if _sort_key(p) <= _sort_key(q) else (q, p)
            seen.add(key)
        counts.update(seen)
    ordered = tuple(sorted(names, key=_sort_key))
    index = {name: i for i, name in enumerate(ordered)}
    pairs = [(index[p], index[q]) for p, q in counts]
    weights = [c / n for c in counts.values()]
    return SummaryGraph(len(ordered), np.array(pairs, dtype=np.int64).reshape(-1, 2),
                        np.array(weights), node_names=ordered)


def _sort_key(name):
    return (0, name, "") if isinstance(name, (int, np.integer)) else (1, 0, str(name))


def laplacian_matrix(graph: SummaryGraph) -> np.ndarray:
    """Combinatorial Laplacian ``D - W``."""
    W = graph.adjacency
    return np.diag(W.sum(axis=1)) - W


def geometric_graph_from_points(points, tau: float) -> SummaryGraph:
    """Unit-weight graph joining points closer than ``tau`` (strictly)."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    points = np.asarray(points, dtype=np.float64)
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    p, q = np.nonzero(np.triu(dist < tau, k=1))
    edges = np.column_stack([p, q])
    return SummaryGraph(len(points), edges, np.ones(len(edges)))


def generate_geometric_graph(n: int, tau: float, seed: int | np.random.SeedSequence = 0,
                             return_points: bool = False):
    """Random geometric graph on ``n`` uniform points in the unit square.

    Returns the graph, or ``(graph, points)`` if ``return_points``.
    """
    if n < 2:
        raise ValueError("need at least 2 nodes")
    if tau <= 0:
        raise ValueError("tau must be positive")
    rng = np.random.default_rng(seed)
    points = rng.random((n, 2))
    graph = geometric_graph_from_points(points, tau)
    return (graph, points) if return_points else graph


def cut_and_volumes(graph: SummaryGraph, node_set) -> tuple[float, float, float]:
    mask = np.zeros(graph.node_count, dtype=bool)
    mask[list(node_set)] = True
    crossing = mask[graph.edges[:, 0]] != mask[graph.edges[:, 1]]
    deg = graph.degree
    return float(graph.weights[crossing].sum()), float(deg[mask].sum()), float(deg[~mask].sum())


def conductance(graph: SummaryGraph, node_set) -> float:
    """``cut(S) / min(vol(S), vol(V \\ S))`` with weighted degrees as volume."""
    selected = {int(v) for v in node_set}
    if not selected or len(selected) >= graph.node_count:
        raise ValueError("conductance undefined for empty or full node set")
    if min(selected) < 0 or max(selected) >= graph.node_count:
        raise ValueError("node id out of range")
    cut, vol_in, vol_out = cut_and_volumes(graph, selected)
    denom = min(vol_in, vol_out)
    if denom <= 0:
        raise ValueError("conductance undefined: zero volume side")
    return cut / denom


def connected_components(graph: SummaryGraph, nodes=None) -> list[list[int]]:
    """Components of the subgraph induced by ``nodes`` (all nodes by default)."""
    keep = np.arange(graph.node_count) if nodes is None else np.array(sorted({int(v) for v in nodes}))
    if keep.size == 0:
        return []
    sub = sparse.csr_matrix(graph.adjacency[np.ix_(keep, keep)])
    _, labels = csgraph.connected_components(sub, directed=False)
    comps: dict[int, list[int]] = {}
    for node, lab in zip(keep, labels):
        comps.setdefault(int(lab), []).append(int(node))
    return sorted(comps.values())
