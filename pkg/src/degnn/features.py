"""Structural node features relative to a target node.

Two distance encodings are provided, both derived from the random-walk
matrix W = A D^-1 of the (sub)graph they are computed on:

* ``rw``  — the first k landing probabilities of a walk started at the
  target: row v is [(W)_{v,t}, (W^2)_{v,t}, ..., (W^k)_{v,t}].
* ``spd`` — a one-hot over BFS distance buckets {0, 1, ..., k, beyond},
  where "beyond" also absorbs unreachable nodes.

A log-degree column complements them. Degree-0 columns of W are all zero:
a walk that reaches an isolated node simply loses its mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Graph, Subgraph, bfs_distances
from .validation import check_positive_int

__all__ = [
    "DEConfig",
    "FeatureError",
    "rw_landing_probabilities",
    "spd_onehot",
    "degree_feature",
    "assemble_structural_features",
    "structural_dim",
]

_VARIANTS = ("spd", "rw")


class FeatureError(ValueError):
    """Raised for invalid feature configuration or inputs."""


@dataclass(frozen=True)
class DEConfig:
    """Distance-encoding choice: ``variant`` in {"spd", "rw"}, walk length /
    max distance ``k`` (paper-typical range 2-4)."""

    variant: str
    k: int = 3

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise FeatureError(f"unknown DE variant {self.variant!r}; expected one of {_VARIANTS}")
        check_positive_int(self.k, "k")

    @property
    def dim(self) -> int:
        # one-hot over distances 0..k plus a beyond/unreachable bucket
        return self.k + 2 if self.variant == "spd" else self.k


def structural_dim(de: DEConfig | None, use_degree: bool) -> int:
    return (de.dim if de is not None else 0) + (1 if use_degree else 0)


def _check_target(g: Graph, target: int) -> None:
    if not 0 <= target < g.num_nodes:
        raise FeatureError(f"target {target} outside [0, {g.num_nodes})")


def rw_landing_probabilities(g: Graph, target: int, k: int) -> np.ndarray:
    """Landing probabilities of 1..k step walks from ``target``.

    Row sums per step are computed with correctly-rounded summation
    (``math.fsum``), which makes the result independent of neighbor
    ordering and therefore exactly equivariant under node relabeling.
    """
    _check_target(g, target)
    check_positive_int(k, "k")
    n = g.num_nodes
    out = np.zeros((n, k), dtype=np.float64)
    indptr, cols = g.row_offsets, g.col_indices
    inv_deg = np.zeros(n, dtype=np.float64)
    nz = g.degrees > 0
    inv_deg[nz] = 1.0 / g.degrees[nz]
    x = np.zeros(n, dtype=np.float64)
    x[target] = 1.0
    for step in range(k):
        vals = (x * inv_deg)[cols]
        nxt = np.zeros(n, dtype=np.float64)
        for v in range(n):
            lo, hi = indptr[v], indptr[v + 1]
            if hi > lo:
                nxt[v] = math.fsum(vals[lo:hi].tolist())
        out[:, step] = nxt
        x = nxt
    return out


def spd_onehot(g: Graph, target: int, k: int) -> np.ndarray:
    """One-hot BFS-distance buckets {0..k, beyond}; shape (n, k + 2)."""
    _check_target(g, target)
    check_positive_int(k, "k")
    dist = bfs_distances(g, target)
    return _spd_onehot_from_distances(dist, k)


def _spd_onehot_from_distances(dist: np.ndarray, k: int) -> np.ndarray:
    buckets = np.where((dist < 0) | (dist > k), k + 1, dist)
    out = np.zeros((dist.size, k + 2), dtype=np.float64)
    out[np.arange(dist.size), buckets] = 1.0
    return out


def degree_feature(g: Graph) -> np.ndarray:
    """log(1 + deg(v)) per node; 0 for isolated nodes."""
    return np.log1p(g.degrees.astype(np.float64))


def assemble_structural_features(
    sub: Subgraph, de: DEConfig | None, use_degree: bool
) -> np.ndarray:
    """Structural feature block for a subgraph's nodes, columns [DE | degree].

    Distance encodings are computed on the subgraph's own adjacency,
    relative to its target node.
    """
    if de is None and not use_degree:
        raise FeatureError(
            "no structural features requested: enable a distance encoding "
            "and/or the degree feature, or rely on raw node features"
        )
    blocks = []
    if de is not None:
        if de.variant == "rw":
            blocks.append(rw_landing_probabilities(sub.graph, sub.target_local, de.k))
        else:
            blocks.append(spd_onehot(sub.graph, sub.target_local, de.k))
    if use_degree:
        blocks.append(degree_feature(sub.graph)[:, None])
    return blocks[0] if len(blocks) == 1 else np.hstack(blocks)
