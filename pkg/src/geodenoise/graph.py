"""Nearest-neighbor graph over the patch cloud and geodesic distances.

Geodesic distance between two patches is approximated by the shortest-path
distance in the symmetrized delta-nearest-neighbor graph whose edge weights
are Euclidean patch distances. The production path runs one single-source
shortest-path sweep per vertex over the sparse graph; a dense Floyd-Warshall
implementation is kept as an independent correctness oracle (it is O(V^3),
so keep it to small graphs).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

# Pairwise-distance blocks are limited to roughly this many float64 entries.
_BLOCK_ENTRIES = 1 << 23

# Geodesic matrices at or below this order keep full float64 precision;
# larger ones are stored as float32 to bound memory (10^8 entries at n=100).
FULL_PRECISION_MAX_ORDER = 4096

GEODESIC_METHODS = ("per_source_shortest_path", "floyd")


class DisconnectedGraphError(RuntimeError):
    """Shortest paths requested on a graph that was never stitched connected."""


def patch_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Euclidean distance between two flattened patches."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"patch length mismatch: {u.shape} vs {v.shape}")
    return float(np.linalg.norm(u - v))


@dataclass(frozen=True)
class NeighborGraph:
    """Symmetrized kNN graph over patches, stitched to a single component."""

    vertex_count: int
    delta: int
    adjacency: csr_matrix = field(repr=False)
    stitch_count: int = 0

    def neighbors(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """Return (neighbor indices, edge weights) for vertex ``v``."""
        start, stop = self.adjacency.indptr[v], self.adjacency.indptr[v + 1]
        return self.adjacency.indices[start:stop], self.adjacency.data[start:stop]


def _distance_block(points: np.ndarray, rows: np.ndarray, sq_norms: np.ndarray) -> np.ndarray:
    d2 = sq_norms[rows][:, None] + sq_norms[None, :] - 2.0 * points[rows] @ points.T
    np.maximum(d2, 0.0, out=d2)  # guard tiny negatives from cancellation
    return np.sqrt(d2, out=d2)


def build_knn_graph(patches, delta: int) -> NeighborGraph:
    """Connect each patch to its ``delta`` nearest patches by Euclidean distance.

    Ties are broken toward the lower patch index, the directed edge set is
    symmetrized by union, and any disconnected components are stitched to the
    principal (largest) component by their single minimum-distance edge so
    that geodesics are finite everywhere.
    """
    points = np.asarray(getattr(patches, "patches", patches), dtype=np.float64)
    if points.ndim != 2:
        raise ValueError(f"patch matrix must be 2-D, got shape {points.shape}")
    n = points.shape[0]
    if not 1 <= delta < n:
        raise ValueError(f"neighbor count must satisfy 1 <= delta < {n}, got {delta}")

    sq_norms = np.einsum("ij,ij->i", points, points)
    block = max(1, _BLOCK_ENTRIES // n)
    src = np.empty(n * delta, dtype=np.int64)
    dst = np.empty(n * delta, dtype=np.int64)
    wgt = np.empty(n * delta, dtype=np.float64)
    for lo in range(0, n, block):
        rows = np.arange(lo, min(lo + block, n))
        dist = _distance_block(points, rows, sq_norms)
        dist[np.arange(len(rows)), rows] = np.inf  # exclude self
        order = np.argsort(dist, axis=1, kind="stable")[:, :delta]
        sl = slice(lo * delta, (lo + len(rows)) * delta)
        src[sl] = np.repeat(rows, delta)
        dst[sl] = order.ravel()
        wgt[sl] = np.take_along_axis(dist, order, axis=1).ravel()

    # canonicalize and union the directed edges (duplicates carry equal weights)
    a = np.minimum(src, dst)
    b = np.maximum(src, dst)
    _, first = np.unique(a * n + b, return_index=True)
    a, b, w = a[first], b[first], wgt[first]

    adj = csr_matrix(
        (np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))),
        shape=(n, n),
    )

    ncomp, labels = connected_components(adj, directed=False)
    stitches = 0
    if ncomp > 1:
        sizes = np.bincount(labels)
        principal = int(np.argmax(sizes))  # argmax takes the lowest label on ties
        main_idx = np.where(labels == principal)[0]
        extra_a, extra_b, extra_w = [], [], []
        for comp in range(ncomp):
            if comp == principal:
                continue
            comp_idx = np.where(labels == comp)[0]
            best = (np.inf, -1, -1)
            cblock = max(1, _BLOCK_ENTRIES // max(1, len(main_idx)))
            for lo in range(0, len(comp_idx), cblock):
                ci = comp_idx[lo : lo + cblock]
                d2 = (
                    sq_norms[ci][:, None]
                    + sq_norms[main_idx][None, :]
                    - 2.0 * points[ci] @ points[main_idx].T
                )
                np.maximum(d2, 0.0, out=d2)
                pos = np.unravel_index(np.argmin(d2), d2.shape)
                cand = (float(np.sqrt(d2[pos])), int(ci[pos[0]]), int(main_idx[pos[1]]))
                if cand[0] < best[0]:
                    best = cand
            extra_a.append(best[1])
            extra_b.append(best[2])
            extra_w.append(best[0])
            stitches += 1
        a = np.concatenate([a, extra_a])
        b = np.concatenate([b, extra_b])
        w = np.concatenate([w, extra_w])
        adj = csr_matrix(
            (np.concatenate([w, w]), (np.concatenate([a, b]), np.concatenate([b, a]))),
            shape=(n, n),
        )

    return NeighborGraph(vertex_count=n, delta=delta, adjacency=adj, stitch_count=stitches)


def _floyd_warshall(weights: np.ndarray) -> np.ndarray:
    """All-pairs shortest paths by k-vertex relaxation on a dense weight matrix."""
    dist = weights.copy()
    for k in range(dist.shape[0]):
        np.minimum(dist, dist[:, k : k + 1] + dist[k : k + 1, :], out=dist)
    return dist


def _dense_weights(graph: NeighborGraph) -> np.ndarray:
    n = graph.vertex_count
    w = np.full((n, n), np.inf)
    coo = graph.adjacency.tocoo()
    w[coo.row, coo.col] = coo.data
    np.fill_diagonal(w, 0.0)
    return w


def all_pairs_geodesics(graph: NeighborGraph, method: str = "per_source_shortest_path") -> np.ndarray:
    """Dense symmetric matrix of shortest-path distances between all vertices.

    ``method`` is "per_source_shortest_path" (default; repeated Dijkstra over
    the sparse graph) or "floyd" (dense relaxation oracle). Accumulation is
    float64; matrices above order 4096 are returned as float32 to bound
    memory, smaller ones keep full precision.
    """
    if method in ("per_source_shortest_path", "dijkstra"):
        dist = dijkstra(graph.adjacency, directed=False)
    elif method == "floyd":
        dist = _floyd_warshall(_dense_weights(graph))
    else:
        raise ValueError(f"unknown geodesic method {method!r} (want one of {GEODESIC_METHODS})")
    if np.isinf(dist).any():
        raise DisconnectedGraphError(
            "graph has unreachable vertex pairs; component stitching must precede geodesics"
        )
    dist = np.minimum(dist, dist.T)  # exact symmetry despite summation-order jitter
    np.fill_diagonal(dist, 0.0)
    if graph.vertex_count > FULL_PRECISION_MAX_ORDER:
        return dist.astype(np.float32)
    return dist
