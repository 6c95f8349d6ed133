"""Dijkstra shortest paths and geodesic extraction on weighted graphs.

Weights are nonnegative by construction, so a binary heap with lazy
deletion suffices; relaxation of a popped vertex's neighborhood is
vectorized over its adjacency slice. Unreachable vertices carry +inf.
"""

from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np


class InvalidIndexError(IndexError):
    """A vertex index fell outside the graph."""

    code = "bad-index"


@dataclass
class SsspTree:
    """Single-source distances and predecessor links (-1 = none)."""

    source: int
    distances: np.ndarray
    predecessors: np.ndarray


@dataclass
class GeodesicResult:
    """One source-target query: distance and vertex path.

    The path is empty exactly when the target is unreachable (distance
    +inf); otherwise it runs from source to target along graph edges.
    ``coords`` optionally carries the path's point coordinates.
    """

    source: int
    target: int
    distance: float
    path: np.ndarray
    coords: np.ndarray | None = None


def _check_vertex(wg, v) -> int:
    n = wg.graph.n_vertices
    v = int(v)
    if not 0 <= v < n:
        raise InvalidIndexError(f"vertex {v} outside [0, {n})")
    return v


def sssp(wg, source: int, target=None) -> SsspTree:
    """Dijkstra from ``source``; stops early once ``target`` is final."""
    source = _check_vertex(wg, source)
    if target is not None:
        target = _check_vertex(wg, target)
    indptr, neighbors, weights = wg.adjacency()
    n = wg.graph.n_vertices
    dist = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heappop(heap)
        if d > dist[u]:
            continue
        if target is not None and u == target:
            break
        lo, hi = indptr[u], indptr[u + 1]
        nbr = neighbors[lo:hi]
        cand = d + weights[lo:hi]
        better = cand < dist[nbr]
        if better.any():
            nbr = nbr[better]
            cand = cand[better]
            dist[nbr] = cand
            pred[nbr] = u
            for v, dv in zip(nbr.tolist(), cand.tolist()):
                heappush(heap, (dv, v))
    return SsspTree(source=source, distances=dist, predecessors=pred)


def geodesic(wg, source: int, target: int) -> GeodesicResult:
    """Minimal-cost vertex path between two vertices."""
    source = _check_vertex(wg, source)
    target = _check_vertex(wg, target)
    tree = sssp(wg, source, target=target)
    d = float(tree.distances[target])
    points = wg.graph.points
    if not np.isfinite(d):
        return GeodesicResult(
            source=source,
            target=target,
            distance=np.inf,
            path=np.empty(0, dtype=np.int64),
            coords=np.empty((0, points.shape[1])),
        )
    chain = [target]
    while chain[-1] != source:
        chain.append(int(tree.predecessors[chain[-1]]))
    chain.reverse()
    path = np.asarray(chain, dtype=np.int64)
    return GeodesicResult(
        source=source,
        target=target,
        distance=d,
        path=path,
        coords=points[path],
    )


def all_pairs_distances(wg, subset=None, threads: int = 1) -> np.ndarray:
    """Symmetric distance matrix over ``subset`` (default: all vertices).

    Computed as one SSSP per row; +inf marks cross-component pairs. Rows
    are independent, so ``threads`` > 1 fans them out unchanged.
    """
    n = wg.graph.n_vertices
    if subset is None:
        rows = np.arange(n)
    else:
        rows = np.asarray([_check_vertex(wg, v) for v in subset], dtype=np.int64)
        if len(rows) == 0:
            return np.empty((0, 0))
    out = np.empty((len(rows), len(rows)))

    def fill(i: int) -> None:
        tree = sssp(wg, int(rows[i]))
        out[i] = tree.distances[rows]

    if threads > 1 and len(rows) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(fill, range(len(rows))))
    else:
        for i in range(len(rows)):
            fill(i)
    # the same path accumulates in opposite orders from the two endpoints;
    # take the entrywise min so the matrix is exactly symmetric
    np.minimum(out, out.T, out=out)
    np.fill_diagonal(out, 0.0)
    return out
