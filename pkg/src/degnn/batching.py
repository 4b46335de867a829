"""Per-target subgraph sampling, feature caching and batch assembly.

Each classification target gets an ego subgraph and structural features
computed once and cached; training then packs many targets into a single
block-diagonal "union" graph so a whole split is one sparse matmul per
layer instead of thousands of tiny ones.

Propagation only ever reads the target row of the final layer, so the
union keeps just the nodes within ``min(num_layers, hops)`` of each
target: nodes further out can influence the target only through
aggregations that are never consumed. Structural features are still
computed on the full ``hops``-ball, exactly as the per-subgraph path does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .features import DEConfig, _spd_onehot_from_distances, rw_landing_probabilities
from .graph import Graph, bfs_distances, induced_subgraph_csr

__all__ = ["FeatureCache", "BatchBuilder", "SubgraphBatch", "DatasetContext"]


@dataclass
class _CacheEntry:
    nodes: np.ndarray      # ball node ids, ascending (int64)
    dists: np.ndarray      # hop distance from target, aligned with nodes
    indptr: np.ndarray     # induced CSR of the ball
    indices: np.ndarray
    deg_log: np.ndarray    # log1p of induced degrees
    target_local: int
    rw: np.ndarray | None = None  # landing probabilities, built on demand


class FeatureCache:
    """Lazy per-target cache of ego balls and structural features.

    Keyed by the extraction radius ``hops`` and walk length ``k`` it was
    created with; entries are immutable once built and shared freely
    across splits, seeds and model configurations.
    """

    def __init__(self, graph: Graph, hops: int, k: int):
        self.graph = graph
        self.hops = int(hops)
        self.k = int(k)
        self._entries: dict[int, _CacheEntry] = {}

    def entry(self, target: int, need_rw: bool = False) -> _CacheEntry:
        e = self._entries.get(target)
        if e is None:
            e = self._build(target)
            self._entries[target] = e
        if need_rw and e.rw is None:
            sub = Graph(e.nodes.size, e.indptr, e.indices, np.diff(e.indptr))
            e.rw = rw_landing_probabilities(sub, e.target_local, self.k)
        return e

    def _build(self, target: int) -> _CacheEntry:
        dist = bfs_distances(self.graph, target, max_hops=self.hops)
        nodes = np.flatnonzero(dist >= 0).astype(np.int64)
        indptr, indices, degrees = induced_subgraph_csr(self.graph, nodes)
        return _CacheEntry(
            nodes=nodes,
            dists=dist[nodes],
            indptr=indptr,
            indices=indices,
            deg_log=np.log1p(degrees.astype(np.float64)),
            target_local=int(np.searchsorted(nodes, target)),
        )


@dataclass
class SubgraphBatch:
    """Disjoint union of per-target subgraphs, ready for layer kernels."""

    num_rows: int
    indptr: np.ndarray
    indices: np.ndarray
    rows_to_node: np.ndarray
    target_rows: np.ndarray
    target_nodes: np.ndarray
    struct: np.ndarray | None
    _abar: sp.csr_matrix | None = field(default=None, repr=False)
    _abar_t: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def num_targets(self) -> int:
        return self.target_rows.size

    def abar(self) -> sp.csr_matrix:
        """Row-normalized union adjacency (mean aggregation operator)."""
        if self._abar is None:
            deg = np.diff(self.indptr).astype(np.float64)
            data = np.repeat(
                np.where(deg > 0, 1.0 / np.maximum(deg, 1.0), 0.0),
                np.diff(self.indptr),
            )
            self._abar = sp.csr_matrix(
                (data, self.indices, self.indptr),
                shape=(self.num_rows, self.num_rows),
            )
        return self._abar

    def abar_t(self) -> sp.csr_matrix:
        if self._abar_t is None:
            self._abar_t = self.abar().T.tocsr()
        return self._abar_t


@dataclass
class _Block:
    nodes: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    struct: np.ndarray | None
    target_local: int


class BatchBuilder:
    """Assembles union batches for one model configuration.

    ``prop_hops`` is the propagation radius (number of SAGE layers, 0 for
    the pure-MLP path); structural columns follow the [DE | degree] order.
    """

    def __init__(
        self,
        cache: FeatureCache,
        prop_hops: int,
        de: DEConfig | None,
        use_degree: bool,
    ):
        if de is not None and de.k != cache.k:
            raise ValueError(f"cache was built for k={cache.k}, config wants k={de.k}")
        self.cache = cache
        self.prop_hops = min(int(prop_hops), cache.hops)
        self.de = de
        self.use_degree = use_degree
        self._blocks: dict[int, _Block] = {}

    def _block(self, target: int) -> _Block:
        blk = self._blocks.get(target)
        if blk is not None:
            return blk
        e = self.cache.entry(target, need_rw=self.de is not None and self.de.variant == "rw")
        if self.prop_hops >= self.cache.hops:
            keep = slice(None)
            nodes = e.nodes
            indptr, indices = e.indptr, e.indices
            target_local = e.target_local
        else:
            keep = e.dists <= self.prop_hops
            nodes = e.nodes[keep]
            indptr, indices, _ = induced_subgraph_csr(self.cache.graph, nodes)
            target_local = int(np.searchsorted(nodes, target))
        cols = []
        if self.de is not None:
            if self.de.variant == "rw":
                cols.append(e.rw[keep])
            else:
                cols.append(_spd_onehot_from_distances(e.dists[keep], self.de.k))
        if self.use_degree:
            cols.append(e.deg_log[keep, None])
        struct = None
        if cols:
            struct = cols[0] if len(cols) == 1 else np.hstack(cols)
        blk = _Block(nodes, indptr, indices, struct, target_local)
        self._blocks[target] = blk
        return blk

    @property
    def struct_width(self) -> int:
        return (self.de.dim if self.de is not None else 0) + (1 if self.use_degree else 0)

    def batch(self, targets) -> SubgraphBatch:
        """Union batch over ``targets``, in the given order."""
        targets = np.asarray(targets, dtype=np.int64).reshape(-1)
        blocks = [self._block(int(t)) for t in targets]
        sizes = np.array([b.nodes.size for b in blocks], dtype=np.int64)
        row_start = np.zeros(len(blocks) + 1, dtype=np.int64)
        np.cumsum(sizes, out=row_start[1:])
        rows_to_node = (
            np.concatenate([b.nodes for b in blocks])
            if blocks
            else np.empty(0, np.int64)
        )
        nnz = np.array([b.indices.size for b in blocks], dtype=np.int64)
        indices = (
            np.concatenate([b.indices for b in blocks])
            if blocks
            else np.empty(0, np.int64)
        )
        indices = indices + np.repeat(row_start[:-1], nnz)
        per_row_nnz = (
            np.concatenate([np.diff(b.indptr) for b in blocks])
            if blocks
            else np.empty(0, np.int64)
        )
        indptr = np.zeros(rows_to_node.size + 1, dtype=np.int64)
        np.cumsum(per_row_nnz, out=indptr[1:])
        width = self.struct_width
        struct = None
        if width:
            if blocks:
                struct = np.vstack([b.struct for b in blocks])
            else:
                struct = np.zeros((0, width))
        target_rows = row_start[:-1] + np.array(
            [b.target_local for b in blocks], dtype=np.int64
        )
        return SubgraphBatch(
            num_rows=int(rows_to_node.size),
            indptr=indptr,
            indices=indices,
            rows_to_node=rows_to_node,
            target_rows=target_rows,
            target_nodes=targets,
            struct=struct,
        )

class DatasetContext:
    """Shared feature caches and batch builders for one graph.

    Benchmarks fit many model configurations and seeds against the same
    dataset; routing every fit through one context means each ego ball
    and each DE matrix is computed exactly once.
    """

    def __init__(self, graph: Graph):
        self.graph = graph
        self._caches: dict[tuple, FeatureCache] = {}
        self._builders: dict[tuple, BatchBuilder] = {}

    def cache(self, hops: int, k: int) -> FeatureCache:
        key = (int(hops), int(k))
        if key not in self._caches:
            self._caches[key] = FeatureCache(self.graph, hops, k)
        return self._caches[key]

    def builder(
        self,
        *,
        hops: int,
        k: int,
        prop_hops: int,
        de: DEConfig | None,
        use_degree: bool,
    ) -> BatchBuilder:
        key = (int(hops), int(k), int(prop_hops), de, bool(use_degree))
        if key not in self._builders:
            self._builders[key] = BatchBuilder(
                self.cache(hops, k), prop_hops, de, use_degree
            )
        return self._builders[key]
