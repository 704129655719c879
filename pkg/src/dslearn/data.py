"""Network samples, data matrices, the synthetic generator and stratified folds."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold

from .graph import SummaryGraph, build_summary_graph, connected_components, generate_geometric_graph


@dataclass(frozen=True)
class NetworkSample:
    """One graph signal with its global label and optional edge set."""

    values: np.ndarray
    label: int
    edge_presence: frozenset | None = None

    def __post_init__(self):
        if self.label not in (-1, 1):
            raise ValueError("label must be -1 or +1")
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64).reshape(-1))


@dataclass(frozen=True)
class Dataset:
    """Data matrix ``X`` (m features x n samples), labels and summary graph."""

    X: np.ndarray
    y: np.ndarray
    graph: SummaryGraph

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y).astype(np.int64).reshape(-1)
        if X.ndim != 2:
            raise ValueError("X must be 2-D")
        if X.shape[1] != y.shape[0]:
            raise ValueError(f"X has {X.shape[1]} sample columns but y has {y.shape[0]} labels")
        if X.shape[0] != self.graph.node_count:
            raise ValueError(f"X has {X.shape[0]} feature rows but graph has {self.graph.node_count} nodes")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("label must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def n_features(self) -> int:
        return self.X.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[:, idx], self.y[idx], self.graph)


@dataclass(frozen=True)
class SyntheticConfig:
    n_nodes: int = 100
    tau: float = 0.2
    gt_size: int = 15
    n_samples: int = 300
    sigma: float = math.sqrt(40.0)
    pos_range: tuple[float, float] = (50.0, 100.0)
    neg_range: tuple[float, float] = (-100.0, -50.0)
    seed: int = 0

    def __post_init__(self):
        if self.gt_size < 1 or self.gt_size >= self.n_nodes:
            raise ValueError("gt_size must be in [1, n_nodes)")
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        for lo, hi in (self.pos_range, self.neg_range):
            if not lo < hi:
                raise ValueError("value ranges must be nonempty intervals")


def assemble_data_matrix(samples: Sequence[NetworkSample], graph: SummaryGraph | None = None) -> Dataset:
    """Stack sample values as columns; build the summary graph from edge sets
    unless one is given."""
    if len(samples) < 2:
        raise ValueError("need at least 2 samples")
    m = samples[0].values.shape[0]
    for i, s in enumerate(samples):
        if s.values.shape[0] != m:
            raise ValueError(f"sample {i} has {s.values.shape[0]} values, expected {m}")
    if graph is None:
        graph = build_summary_graph([s.edge_presence or () for s in samples], nodes=range(m))
    X = np.column_stack([s.values for s in samples])
    return Dataset(X, np.array([s.label for s in samples]), graph)


def choose_gt_nodes(graph: SummaryGraph, size: int, rng: np.random.Generator,
                    max_tries: int = 1000) -> list[int]:
    """BFS ball around a random seed node, truncated to ``size`` nodes."""
    largest = max(len(c) for c in connected_components(graph))
    if size > largest:
        raise ValueError(f"gt_size {size} exceeds largest connected component ({largest})")
    adj = graph.neighbors()
    for _ in range(max_tries):
        start = int(rng.integers(graph.node_count))
        order, seen, queue = [], {start}, deque([start])
        while queue and len(order) < size:
            v = queue.popleft()
            order.append(v)
            for u in adj[v]:
                if u not in seen:
                    seen.add(u)
                    queue.append(u)
        if len(order) == size:
            return sorted(order)
    raise RuntimeError("could not place a connected ground-truth subgraph")


def generate_synthetic(config: SyntheticConfig) -> tuple[Dataset, list[int]]:
    """Synthetic instance with a planted discriminative subgraph.

    Ground-truth nodes take uniform values from ``pos_range`` in positive
    samples and ``neg_range`` in negative ones. Every other node is drawn from
    ``Normal(mu_i, sigma^2)`` where ``mu_i`` is the mean of the ground-truth
    values in sample ``i``.
    """
    root = np.random.SeedSequence(config.seed)
    graph_seed, gt_seed, label_seed, inst_root = root.spawn(4)
    graph = generate_geometric_graph(config.n_nodes, config.tau, graph_seed)
    gt = choose_gt_nodes(graph, config.gt_size, np.random.default_rng(gt_seed))
    n = config.n_samples
    y = np.array([1] * math.ceil(n / 2) + [-1] * (n // 2))
    y = np.random.default_rng(label_seed).permutation(y)
    gt_mask = np.zeros(config.n_nodes, dtype=bool)
    gt_mask[gt] = True
    X = np.empty((config.n_nodes, n))
    for i, child in enumerate(inst_root.spawn(n)):
        rng = np.random.default_rng(child)
        lo, hi = config.pos_range if y[i] > 0 else config.neg_range
        gt_vals = rng.uniform(lo, hi, size=len(gt))
        mu = gt_vals.mean()
        X[gt_mask, i] = gt_vals
        X[~gt_mask, i] = mu + config.sigma * rng.standard_normal(config.n_nodes - len(gt))
    return Dataset(X, y, graph), gt


def stratified_folds(y, k: int, seed: int = 0) -> list[np.ndarray]:
    """``k`` disjoint test-index sets covering ``0..n-1`` with balanced classes."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("need at least 2 folds")
    _, counts = np.unique(y, return_counts=True)
    if counts.min() < k:
        raise ValueError(f"a class has {counts.min()} members, fewer than k={k}")
    skf = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    return [np.sort(test) for _, test in skf.split(np.zeros(len(y)), y)]


# --- file I/O ---------------------------------------------------------------

def _read_rows(path: Path):
    with open(path, newline="") as fh:
        yield from enumerate(csv.reader(fh), start=1)


def _parse_float(cell: str, path: Path, line: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ValueError(f"{path}:{line}: non-numeric value {cell!r}") from None


def _node_name(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        return text


def read_edges(path, nodes: Sequence | None = None) -> SummaryGraph:
    """Edge list CSV ``src,dst,weight`` with a header row."""
    path = Path(path)
    raw = []
    for line, row in _read_rows(path):
        if line == 1 or not row:
            continue
        if len(row) != 3:
            raise ValueError(f"{path}:{line}: expected src,dst,weight")
        raw.append((_node_name(row[0]), _node_name(row[1]), _parse_float(row[2], path, line)))
    names = list(nodes) if nodes is not None else sorted(
        {p for p, _, _ in raw} | {q for _, q, _ in raw}, key=lambda v: (isinstance(v, str), v))
    index = {name: i for i, name in enumerate(names)}
    pairs, weights = [], []
    for p, q, wgt in raw:
        if p not in index or q not in index:
            raise ValueError(f"{path}: edge ({p},{q}) references an unknown node")
        pairs.append((index[p], index[q]))
        weights.append(wgt)
    return SummaryGraph(len(names), np.array(pairs, dtype=np.int64).reshape(-1, 2),
                        np.array(weights), node_names=tuple(names))


def write_edges(graph: SummaryGraph, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["src", "dst", "weight"])
        for (p, q), wgt in zip(graph.edges, graph.weights):
            out.writerow([graph.node_names[p], graph.node_names[q], repr(float(wgt))])


def read_labels(path) -> np.ndarray:
    path = Path(path)
    labels = []
    for line, row in _read_rows(path):
        if not row or not row[0].strip():
            continue
        try:
            val = int(float(row[0]))
        except ValueError:
            if line == 1:
                continue  # header
            raise ValueError(f"{path}:{line}: non-numeric label {row[0]!r}") from None
        if val not in (-1, 1) or float(row[0]) != val:
            raise ValueError(f"{path}:{line}: label must be -1 or +1")
        labels.append(val)
    return np.array(labels, dtype=np.int64)


def read_matrix(path) -> tuple[np.ndarray, list]:
    """Dense CSV, one sample per row, header naming node ids. Returns
    ``(X, node_names)`` with ``X`` shaped features x samples."""
    path = Path(path)
    header, rows = None, []
    for line, row in _read_rows(path):
        if line == 1:
            header = [_node_name(c) for c in row]
            continue
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{line}: {len(row)} columns, header has {len(header)}")
        rows.append([_parse_float(c, path, line) for c in row])
    if header is None:
        raise ValueError(f"{path}: empty file")
    return np.array(rows, dtype=np.float64).reshape(-1, len(header)).T, header


def load_dataset(matrix_path, labels_path, edges_path) -> Dataset:
    X, names = read_matrix(matrix_path)
    y = read_labels(labels_path)
    if X.shape[1] != y.shape[0]:
        raise ValueError(f"{matrix_path} has {X.shape[1]} sample rows but "
                         f"{labels_path} has {y.shape[0]} labels")
    graph = read_edges(edges_path, nodes=names)
    return Dataset(X, y, graph)


def save_dataset(dataset: Dataset, directory, gt_nodes: Sequence[int] | None = None) -> dict:
    """Write ``data.csv``, ``labels.csv``, ``edges.csv`` (and ``gt_nodes.csv``)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    names = dataset.graph.node_names
    paths = {"data": d / "data.csv", "labels": d / "labels.csv", "edges": d / "edges.csv"}
    with open(paths["data"], "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(names)
        for col in dataset.X.T:
            out.writerow([repr(float(v)) for v in col])
    with open(paths["labels"], "w") as fh:
        fh.writelines(f"{int(v)}\n" for v in dataset.y)
    write_edges(dataset.graph, paths["edges"])
    if gt_nodes is not None:
        paths["gt_nodes"] = d / "gt_nodes.csv"
        with open(paths["gt_nodes"], "w") as fh:
            fh.writelines(f"{names[v]}\n" for v in gt_nodes)
    return paths


def read_node_list(path, graph: SummaryGraph) -> list[int]:
    index = {name: i for i, name in enumerate(graph.node_names)}
    out = []
    for line, row in _read_rows(Path(path)):
        if row and row[0].strip():
            name = _node_name(row[0])
            if name not in index:
                raise ValueError(f"{path}:{line}: unknown node {name!r}")
            out.append(index[name])
    return out
