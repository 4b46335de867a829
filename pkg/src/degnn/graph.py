"""Immutable CSR graph storage and basic structural operations.

Graphs are simple and undirected: construction symmetrizes the edge list,
drops self-loops and removes duplicates. Neighbor lists are kept sorted so
that downstream kernels have a fixed, reproducible iteration order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import as_index_array, check_positive_int

__all__ = [
    "Graph",
    "GraphError",
    "LabelVector",
    "Subgraph",
    "build_graph",
    "homophily_ratio",
    "extract_ego_subgraph",
    "permute_nodes",
    "bfs_distances",
]


class GraphError(ValueError):
    """Raised for malformed graph input or invalid graph queries."""


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.flags.writeable = False


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph in CSR form.

    ``col_indices[row_offsets[v]:row_offsets[v+1]]`` is the sorted neighbor
    list of ``v``. Arrays are marked read-only; instances are safe to share
    across threads/processes.
    """

    num_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    degrees: np.ndarray

    @property
    def num_edges(self) -> int:
        """Number of undirected edges (each counted once)."""
        return self.col_indices.size // 2

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def validate(self) -> "Graph":
        """Assert the CSR invariants: consistent degrees, sorted loop-free
        neighbor lists, symmetric adjacency."""
        if not np.array_equal(np.diff(self.row_offsets), self.degrees):
            raise GraphError("degrees do not match row offsets")
        rows = np.repeat(np.arange(self.num_nodes), self.degrees)
        if np.any(rows == self.col_indices):
            raise GraphError("self-loop present")
        inner = np.diff(self.col_indices) <= 0
        boundary = np.zeros(max(self.col_indices.size - 1, 0), dtype=bool)
        ends = self.row_offsets[1:-1] - 1
        boundary[ends[(ends >= 0) & (ends < boundary.size)]] = True
        if np.any(inner & ~boundary):
            raise GraphError("neighbor lists not strictly ascending")
        forward_keys = rows * self.num_nodes + self.col_indices
        backward_keys = self.col_indices * self.num_nodes + rows
        if not np.array_equal(np.sort(forward_keys), np.sort(backward_keys)):
            raise GraphError("adjacency is not symmetric")
        return self


@dataclass(frozen=True)
class LabelVector:
    """Per-node class ids in ``[0, num_classes)``."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = as_index_array(self.labels, "labels")
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), "
                f"got range [{labels.min()}, {labels.max()}]"
            )
        _freeze(labels)
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class Subgraph:
    """An induced subgraph together with its mapping back to the host graph.

    ``node_map[i]`` is the original id of local node ``i`` (ascending);
    ``target_local`` is the local index of the node the subgraph was
    extracted around.
    """

    graph: Graph
    node_map: np.ndarray
    target_local: int


def _csr_from_directed_pairs(src: np.ndarray, dst: np.ndarray, num_nodes: int) -> Graph:
    """Build CSR from already symmetric, deduplicated, loop-free pairs."""
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    degrees = np.bincount(src, minlength=num_nodes).astype(np.int64)
    row_offsets = np.zeros(num_nodes + 1, dtype=np.int64)
    np.cumsum(degrees, out=row_offsets[1:])
    col_indices = dst.astype(np.int64, copy=False)
    _freeze(row_offsets, col_indices, degrees)
    return Graph(num_nodes, row_offsets, col_indices, degrees).validate()


def build_graph(edge_list, num_nodes: int) -> Graph:
    """Construct a canonical undirected graph from a list of node pairs.

    Edges are symmetrized and deduplicated; self-loops are dropped. Raises
    :class:`GraphError` if an endpoint lies outside ``[0, num_nodes)``.
    """
    num_nodes = int(num_nodes)
    if num_nodes < 0:
        raise GraphError(f"num_nodes must be nonnegative, got {num_nodes}")
    edges = np.asarray(edge_list, dtype=np.int64).reshape(-1, 2)
    if edges.size:
        bad = (edges < 0) | (edges >= num_nodes)
        if bad.any():
            i = int(np.flatnonzero(bad.any(axis=1))[0])
            raise GraphError(
                f"edge ({edges[i, 0]}, {edges[i, 1]}) has an endpoint outside "
                f"[0, {num_nodes})"
            )
    keep = edges[:, 0] != edges[:, 1]
    edges = edges[keep]
    if edges.size == 0:
        return _csr_from_directed_pairs(
            np.empty(0, np.int64), np.empty(0, np.int64), num_nodes
        )
    both = np.concatenate([edges, edges[:, ::-1]])
    both = np.unique(both, axis=0)
    return _csr_from_directed_pairs(both[:, 0], both[:, 1], num_nodes)


def homophily_ratio(g: Graph, labels: LabelVector) -> float:
    """Fraction of undirected edges whose endpoints share a label."""
    if g.col_indices.size == 0:
        raise GraphError("homophily ratio is undefined on a graph with no edges")
    if labels.labels.size != g.num_nodes:
        raise GraphError(
            f"label vector has {labels.labels.size} entries for a graph "
            f"with {g.num_nodes} nodes"
        )
    row_of_entry = np.repeat(np.arange(g.num_nodes), g.degrees)
    same = labels.labels[row_of_entry] == labels.labels[g.col_indices]
    # Both counts see each undirected edge twice, so the ratio is unchanged.
    return float(np.count_nonzero(same) / g.col_indices.size)


def bfs_distances(g: Graph, source: int, max_hops: int | None = None) -> np.ndarray:
    """Hop distances from ``source``; unreached nodes get -1."""
    if not 0 <= source < g.num_nodes:
        raise GraphError(f"source {source} outside [0, {g.num_nodes})")
    dist = np.full(g.num_nodes, -1, dtype=np.int64)
    dist[source] = 0
    frontier = np.array([source], dtype=np.int64)
    hop = 0
    limit = g.num_nodes if max_hops is None else max_hops
    while frontier.size and hop < limit:
        hop += 1
        nbrs = _gather_neighbors(g, frontier)
        nbrs = nbrs[dist[nbrs] < 0]
        if nbrs.size == 0:
            break
        frontier = np.unique(nbrs)
        dist[frontier] = hop
    return dist


def _gather_neighbors(g: Graph, nodes: np.ndarray) -> np.ndarray:
    """Concatenated neighbor lists of ``nodes`` (duplicates preserved)."""
    counts = g.degrees[nodes]
    total = int(counts.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    starts = g.row_offsets[nodes]
    shift = np.repeat(np.cumsum(counts) - counts, counts)
    positions = np.repeat(starts, counts) + (np.arange(total) - shift)
    return g.col_indices[positions]


def induced_subgraph_csr(g: Graph, nodes: np.ndarray):
    """CSR of the subgraph induced on sorted ``nodes``, with local ids.

    Returns ``(row_offsets, col_indices, degrees)``; local id ``i``
    corresponds to ``nodes[i]``. Columns stay sorted because ``nodes`` is
    ascending.
    """
    mark = np.full(g.num_nodes, -1, dtype=np.int64)
    mark[nodes] = np.arange(nodes.size)
    nbrs = _gather_neighbors(g, nodes)
    local = mark[nbrs]
    keep = local >= 0
    rows_local = np.repeat(np.arange(nodes.size), g.degrees[nodes])[keep]
    cols_local = local[keep]
    degrees = np.bincount(rows_local, minlength=nodes.size).astype(np.int64)
    row_offsets = np.zeros(nodes.size + 1, dtype=np.int64)
    np.cumsum(degrees, out=row_offsets[1:])
    return row_offsets, cols_local, degrees


def extract_ego_subgraph(g: Graph, target: int, hops: int) -> Subgraph:
    """Induced subgraph on all nodes within ``hops`` of ``target``."""
    if not 0 <= target < g.num_nodes:
        raise GraphError(f"target {target} outside [0, {g.num_nodes})")
    check_positive_int(hops, "hops")
    dist = bfs_distances(g, target, max_hops=hops)
    nodes = np.flatnonzero(dist >= 0).astype(np.int64)
    row_offsets, col_indices, degrees = induced_subgraph_csr(g, nodes)
    _freeze(row_offsets, col_indices, degrees, nodes)
    sub = Graph(int(nodes.size), row_offsets, col_indices, degrees)
    target_local = int(np.searchsorted(nodes, target))
    return Subgraph(graph=sub, node_map=nodes, target_local=target_local)


def permute_nodes(g: Graph, perm) -> Graph:
    """Relabel nodes: new id of node ``v`` is ``perm[v]``."""
    perm = as_index_array(perm, "perm")
    if perm.size != g.num_nodes or not np.array_equal(
        np.sort(perm), np.arange(g.num_nodes)
    ):
        raise GraphError("perm must be a bijection on [0, num_nodes)")
    src = perm[np.repeat(np.arange(g.num_nodes), g.degrees)]
    dst = perm[g.col_indices]
    return _csr_from_directed_pairs(src, dst, g.num_nodes)
