"""Graph data model and dataset ingestion.

A graph is an immutable node/edge store: edges (optionally timestamped),
dense node features, optional edge features and node label rows.  Node ids
in input files are arbitrary strings, compacted to ``[0, num_nodes)`` by
first appearance.  Undirected edges are stored once; adjacency is mirrored.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "Graph",
    "EdgeExample",
    "NodeExample",
    "NeighborhoodSample",
    "load_edge_csv",
    "load_node_features",
    "load_node_labels",
]


@dataclass(frozen=True)
class EdgeExample:
    """One pairwise training/evaluation example."""

    src: int
    dst: int
    label: int
    weight: float = 1.0
    origin: str = "observed"

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError(f"EdgeExample weight must be positive, got {self.weight}")
        if self.origin == "observed" and self.label != 1:
            raise ValueError("observed examples must have label 1")
        if self.origin == "negative_sample" and self.label != 0:
            raise ValueError("negative samples must have label 0")


@dataclass(frozen=True)
class NodeExample:
    """One node-level example with a normalized label distribution."""

    node: int
    label_vector: tuple
    weight: float = 1.0

    def __post_init__(self):
        vec = np.asarray(self.label_vector, dtype=np.float64)
        if (vec < 0).any():
            raise ValueError("label_vector entries must be non-negative")
        if abs(vec.sum() - 1.0) > 1e-9:
            raise ValueError(f"label_vector must sum to 1, got {vec.sum()!r}")
        object.__setattr__(self, "label_vector", tuple(float(x) for x in vec))


@dataclass
class NeighborhoodSample:
    """Sampled neighbor ids around a center node."""

    center: int
    neighbor_ids: list
    include_self: bool = True

    @property
    def is_empty(self) -> bool:
        return len(self.neighbor_ids) == 0


class Graph:
    """Immutable after construction; safe to read-share across threads."""

    def __init__(self, num_nodes: int, edges: Sequence[tuple],
                 node_features: Optional[np.ndarray] = None,
                 edge_features: Optional[np.ndarray] = None,
                 node_labels: Optional[np.ndarray] = None,
                 node_ids: Optional[list] = None):
        self.num_nodes = int(num_nodes)
        srcs, dsts, times = [], [], []
        saw_time = saw_no_time = False
        for e in edges:
            if len(e) == 3 and e[2] is not None:
                saw_time = True
                times.append(float(e[2]))
            else:
                saw_no_time = True
                times.append(0.0)
            srcs.append(int(e[0]))
            dsts.append(int(e[1]))
        if saw_time and saw_no_time:
            raise ValueError("either all edges carry a timestamp or none do")
        self.edge_src = np.asarray(srcs, dtype=np.int64)
        self.edge_dst = np.asarray(dsts, dtype=np.int64)
        self.edge_time = np.asarray(times, dtype=np.float64) if saw_time else None
        if self.num_edges and (
            self.edge_src.min() < 0 or self.edge_src.max() >= num_nodes
            or self.edge_dst.min() < 0 or self.edge_dst.max() >= num_nodes
        ):
            raise ValueError("edge endpoints must lie in [0, num_nodes)")
        if self.edge_time is not None and self.num_edges and self.edge_time.min() < 0:
            raise ValueError("timestamps must be non-negative")

        self.node_features = None if node_features is None else np.asarray(node_features, dtype=np.float64)
        if self.node_features is not None and self.node_features.shape[0] != num_nodes:
            raise ValueError(
                f"node_features has {self.node_features.shape[0]} rows for {num_nodes} nodes")
        self.edge_features = None if edge_features is None else np.asarray(edge_features, dtype=np.float64)
        if self.edge_features is not None and self.edge_features.shape[0] != self.num_edges:
            raise ValueError(
                f"edge_features has {self.edge_features.shape[0]} rows for {self.num_edges} edges")
        self.node_labels = None if node_labels is None else np.asarray(node_labels, dtype=np.float64)
        if self.node_labels is not None:
            if self.node_labels.shape[0] != num_nodes:
                raise ValueError(
                    f"node_labels has {self.node_labels.shape[0]} rows for {num_nodes} nodes")
            if (self.node_labels < 0).any():
                raise ValueError("node_labels rows must be non-negative")
        self.node_ids = node_ids

        self._adj = None
        self._pair_set = None

    @property
    def num_edges(self) -> int:
        return int(self.edge_src.shape[0])

    @property
    def has_timestamps(self) -> bool:
        return self.edge_time is not None

    @property
    def edges(self) -> list:
        """Edge list view as (src, dst[, timestamp]) tuples."""
        if self.edge_time is None:
            return list(zip(self.edge_src.tolist(), self.edge_dst.tolist()))
        return list(zip(self.edge_src.tolist(), self.edge_dst.tolist(), self.edge_time.tolist()))

    def with_features(self, node_features=None, node_labels=None, node_ids=None) -> "Graph":
        """Copy of this graph with the given attachments replaced."""
        return Graph(
            self.num_nodes,
            self.edges,
            node_features=self.node_features if node_features is None else node_features,
            edge_features=self.edge_features,
            node_labels=self.node_labels if node_labels is None else node_labels,
            node_ids=self.node_ids if node_ids is None else node_ids,
        )

    # Mirrored CSR adjacency, built once on first use.
    def _adjacency(self):
        if self._adj is None:
            n, m = self.num_nodes, self.num_edges
            deg = np.zeros(n + 1, dtype=np.int64)
            np.add.at(deg, self.edge_src + 1, 1)
            np.add.at(deg, self.edge_dst + 1, 1)
            indptr = np.cumsum(deg)
            indices = np.empty(2 * m, dtype=np.int64)
            times = np.empty(2 * m, dtype=np.float64)
            cursor = indptr[:-1].copy()
            et = self.edge_time if self.edge_time is not None else np.zeros(m)
            for u, v, t in zip(self.edge_src, self.edge_dst, et):
                indices[cursor[u]] = v
                times[cursor[u]] = t
                cursor[u] += 1
                indices[cursor[v]] = u
                times[cursor[v]] = t
                cursor[v] += 1
            self._adj = (indptr, indices, times)
        return self._adj

    def neighbors(self, node: int, time_cutoff: Optional[float] = None) -> np.ndarray:
        """Adjacent node ids; with a cutoff, only via edges strictly earlier."""
        if not 0 <= node < self.num_nodes:
            raise ValueError(f"node {node} out of range [0, {self.num_nodes})")
        indptr, indices, times = self._adjacency()
        lo, hi = indptr[node], indptr[node + 1]
        nbrs = indices[lo:hi]
        if time_cutoff is None:
            return nbrs
        return nbrs[times[lo:hi] < time_cutoff]

    def degree(self, node: int) -> int:
        return int(self.neighbors(node).shape[0])

    def observed_pairs(self) -> frozenset:
        """Undirected (min, max) endpoint pairs of all observed edges."""
        if self._pair_set is None:
            lo = np.minimum(self.edge_src, self.edge_dst)
            hi = np.maximum(self.edge_src, self.edge_dst)
            self._pair_set = frozenset(zip(lo.tolist(), hi.tolist()))
        return self._pair_set


def _split_csv_line(line: str) -> list:
    return [f.strip() for f in line.split(",")]


def load_edge_csv(path, has_timestamps: bool = False) -> Graph:
    """Parse rows ``src,dst[,timestamp]`` into a graph skeleton.

    Node ids are arbitrary strings, remapped to dense integers by first
    appearance.  Duplicate edges are kept (interaction data is a
    multigraph).  A first line naming the columns (``src,dst[,timestamp]``)
    is treated as a header.
    """
    path = Path(path)
    expected = 3 if has_timestamps else 2
    id_map: dict = {}
    edges = []
    node_ids: list = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = _split_csv_line(line)
            if lineno == 1 and [f.lower() for f in fields[:2]] == ["src", "dst"]:
                continue
            if len(fields) != expected:
                raise ValueError(
                    f"{path}:{lineno}: expected {expected} fields 'src,dst"
                    + (",timestamp'" if has_timestamps else "'")
                    + f", got {len(fields)}"
                )
            ends = []
            for name in fields[:2]:
                if name not in id_map:
                    id_map[name] = len(id_map)
                    node_ids.append(name)
                ends.append(id_map[name])
            if has_timestamps:
                try:
                    ts = float(fields[2])
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: timestamp {fields[2]!r} is not a number") from None
                if ts < 0:
                    raise ValueError(f"{path}:{lineno}: negative timestamp {ts}")
                edges.append((ends[0], ends[1], ts))
            else:
                edges.append((ends[0], ends[1]))
    return Graph(len(id_map), edges, node_ids=node_ids)


def _feature_rows_from_csv(path: Path):
    rows = {}
    dim = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = _split_csv_line(line)
            if lineno == 1 and fields[0].lower() in ("node_id", "node"):
                continue
            key = fields[0]
            try:
                vec = [float(x) for x in fields[1:]]
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric feature value") from None
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise ValueError(
                    f"{path}:{lineno}: feature dimension {len(vec)} differs from {dim}")
            if key in rows:
                raise ValueError(f"{path}:{lineno}: duplicate node id {key!r}")
            rows[key] = vec
    return rows


def _feature_rows_from_json(path: Path):
    with path.open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError(f"{path}: JSON feature file must be a map node_id -> array")
    rows = {}
    dim = None
    for key, vec in data.items():
        vec = [float(x) for x in vec]
        if dim is None:
            dim = len(vec)
        elif len(vec) != dim:
            raise ValueError(f"{path}: feature dimension {len(vec)} for {key!r} differs from {dim}")
        rows[str(key)] = vec
    return rows


def _resolve_feature_matrix(rows: dict, graph: Graph, path) -> np.ndarray:
    if len(rows) != graph.num_nodes:
        raise ValueError(
            f"{path}: {len(rows)} feature rows for {graph.num_nodes} nodes")
    ids = graph.node_ids if graph.node_ids is not None else [str(i) for i in range(graph.num_nodes)]
    matrix = []
    for nid in ids:
        if nid not in rows:
            raise ValueError(f"{path}: missing feature row for node id {nid!r}")
        matrix.append(rows[nid])
    return np.asarray(matrix, dtype=np.float64)


def load_node_features(path, graph: Graph, allow_zero: bool = False) -> Graph:
    """Attach a feature matrix: CSV ``node_id,f0,f1,...`` or a JSON map."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        rows = _feature_rows_from_json(path)
    else:
        rows = _feature_rows_from_csv(path)
    matrix = _resolve_feature_matrix(rows, graph, path)
    if not allow_zero:
        norms = np.linalg.norm(matrix, axis=1)
        if (norms == 0).any():
            bad = int(np.argmax(norms == 0))
            raise ValueError(f"{path}: all-zero feature row for node index {bad}"
                             " (pass allow_zero=True to accept)")
    return graph.with_features(node_features=matrix)


def load_node_labels(path, graph: Graph) -> Graph:
    """Attach node label rows (normalized to sum 1), same file formats as features."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        rows = _feature_rows_from_json(path)
    else:
        rows = _feature_rows_from_csv(path)
    matrix = _resolve_feature_matrix(rows, graph, path)
    if (matrix < 0).any():
        raise ValueError(f"{path}: label entries must be non-negative")
    sums = matrix.sum(axis=1)
    if (sums == 0).any():
        raise ValueError(f"{path}: label rows must not be all-zero")
    return graph.with_features(node_labels=matrix / sums[:, None])
