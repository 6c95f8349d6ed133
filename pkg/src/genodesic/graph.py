"""Epsilon-graphs on point clouds and their quadrature-weighted form.

Edges connect pairs strictly closer than epsilon (adaptive construction
uses per-vertex k-th neighbor radii instead). Weighting integrates the
conformal factor along each straight edge.
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from . import io as gio
from .density import density_from_spec
from .metric import MetricParams, _reduce_quadrature, _sample_coefficients, conformal_factors

# Brute-force pair search is quadratic; above this size the uniform spatial
# grid takes over (identical edge sets either way).
BRUTE_FORCE_LIMIT = 2000
_ROW_BLOCK = 512


@dataclass
class EpsGraph:
    """Point cloud plus undirected neighborhood edges (i < j, sorted)."""

    points: np.ndarray
    edges: np.ndarray
    epsilon: float | None = None
    min_neighbors: int | None = None
    _components: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.points)

    @property
    def components(self) -> np.ndarray:
        if self._components is None:
            self._components = connected_components(self)
        return self._components


@dataclass
class WeightedEpsGraph:
    """EpsGraph with one nonnegative quadrature weight per edge."""

    graph: EpsGraph
    weights: np.ndarray
    params: MetricParams
    density: object
    _adjacency: tuple | None = field(default=None, repr=False)

    @property
    def points(self) -> np.ndarray:
        return self.graph.points

    @property
    def edges(self) -> np.ndarray:
        return self.graph.edges

    def adjacency(self):
        """CSR-style (indptr, neighbors, weights) with both edge directions."""
        if self._adjacency is None:
            self._adjacency = _build_adjacency(
                self.graph.n_vertices, self.graph.edges, self.weights
            )
        return self._adjacency


def _check_cloud(points) -> np.ndarray:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.size == 0:
        raise ValueError("at least one point required")
    if not np.all(np.isfinite(points)):
        raise ValueError("points must have finite coordinates")
    return points


def _sort_edges(pairs_i, pairs_j):
    if not len(pairs_i):
        return np.empty((0, 2), dtype=np.int32)
    i = np.concatenate(pairs_i)
    j = np.concatenate(pairs_j)
    lo = np.minimum(i, j).astype(np.int32)
    hi = np.maximum(i, j).astype(np.int32)
    order = np.lexsort((hi, lo))
    return np.column_stack((lo[order], hi[order]))


def _edges_brute(points, epsilon):
    n = len(points)
    eps2 = epsilon * epsilon
    acc_i, acc_j = [], []
    for lo in range(0, n, _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, n)
        d2 = cdist(points[lo:hi], points, "sqeuclidean")
        rows, cols = np.nonzero(d2 < eps2)
        rows = rows + lo
        keep = rows < cols
        acc_i.append(rows[keep])
        acc_j.append(cols[keep])
    return _sort_edges(acc_i, acc_j)


def _edges_grid(points, epsilon):
    cells = np.floor(points / epsilon).astype(np.int64)
    order = np.lexsort(cells.T[::-1])
    sorted_cells = cells[order]
    change = np.any(sorted_cells[1:] != sorted_cells[:-1], axis=1)
    starts = np.concatenate(([0], np.nonzero(change)[0] + 1))
    stops = np.concatenate((starts[1:], [len(points)]))
    buckets = {
        tuple(sorted_cells[s]): order[s:e] for s, e in zip(starts, stops)
    }
    dim = points.shape[1]
    forward = [
        off
        for off in itertools.product((-1, 0, 1), repeat=dim)
        if off > tuple([0] * dim)
    ]
    eps2 = epsilon * epsilon
    acc_i, acc_j = [], []
    for key, idx in buckets.items():
        own = points[idx]
        d2 = cdist(own, own, "sqeuclidean")
        rows, cols = np.nonzero(d2 < eps2)
        keep = rows < cols
        acc_i.append(idx[rows[keep]])
        acc_j.append(idx[cols[keep]])
        for off in forward:
            other = buckets.get(tuple(k + o for k, o in zip(key, off)))
            if other is None:
                continue
            d2 = cdist(own, points[other], "sqeuclidean")
            rows, cols = np.nonzero(d2 < eps2)
            acc_i.append(idx[rows])
            acc_j.append(other[cols])
    return _sort_edges(acc_i, acc_j)


def build_eps_graph(points, epsilon: float) -> EpsGraph:
    """Graph with an edge for every pair at distance strictly below epsilon."""
    points = _check_cloud(points)
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if len(points) > BRUTE_FORCE_LIMIT:
        edges = _edges_grid(points, epsilon)
    else:
        edges = _edges_brute(points, epsilon)
    return EpsGraph(points=points, edges=edges, epsilon=float(epsilon))


def build_adaptive_graph(points, min_neighbors: int) -> EpsGraph:
    """Per-vertex radius graph: each radius reaches the k-th neighbor.

    Edges are symmetrized by union, so every vertex ends with degree >= k
    and the result is a superset of the k-nearest-neighbor graph.
    """
    points = _check_cloud(points)
    n = len(points)
    k = int(min_neighbors)
    if k < 1 or k >= n:
        raise ValueError("min_neighbors must satisfy 1 <= k < n")
    radii = np.empty(n)
    for lo in range(0, n, _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, n)
        d = cdist(points[lo:hi], points)
        # row includes the zero self-distance, so the k-th neighbor sits at
        # partition index k
        radii[lo:hi] = np.partition(d, k, axis=1)[:, k]
    acc_i, acc_j = [], []
    for lo in range(0, n, _ROW_BLOCK):
        hi = min(lo + _ROW_BLOCK, n)
        d = cdist(points[lo:hi], points)
        reach = np.maximum(radii[lo:hi][:, None], radii[None, :])
        rows, cols = np.nonzero(d <= reach)
        rows = rows + lo
        keep = rows < cols
        acc_i.append(rows[keep])
        acc_j.append(cols[keep])
    edges = _sort_edges(acc_i, acc_j)
    return EpsGraph(points=points, edges=edges, min_neighbors=k)


def connected_components(graph: EpsGraph) -> np.ndarray:
    """Union-find component labels, numbered by first appearance."""
    n = graph.n_vertices
    parent = np.arange(n)

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in graph.edges.tolist():
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    labels = np.empty(n, dtype=np.int64)
    fresh = 0
    seen = {}
    for v in range(n):
        root = find(v)
        if root not in seen:
            seen[root] = fresh
            fresh += 1
        labels[v] = seen[root]
    return labels


def _weigh_chunk(points, edges, model, params, vertex_factors, coeffs):
    alpha, beta, weights = coeffs
    x = points[edges[:, 0]]
    y = points[edges[:, 1]]
    norms = np.sqrt(((y - x) ** 2).sum(axis=1))
    out = np.zeros(len(edges))
    live = np.nonzero(norms > 0)[0]
    if live.size == 0:
        return out
    ex, ey = edges[live, 0], edges[live, 1]
    n_nodes = len(alpha)
    factors = np.empty((live.size, n_nodes))
    interior = np.nonzero((alpha != 1.0) & (beta != 1.0))[0]
    if interior.size:
        samples = (
            x[live, None, :] * alpha[interior][:, None]
            + y[live, None, :] * beta[interior][:, None]
        )
        dim = points.shape[1]
        factors[:, interior] = conformal_factors(
            model, params, samples.reshape(-1, dim)
        ).reshape(live.size, interior.size)
    factors[:, alpha == 1.0] = vertex_factors[ex][:, None]
    factors[:, beta == 1.0] = vertex_factors[ey][:, None]
    out[live] = norms[live] * _reduce_quadrature(
        factors, weights, params.quad_rule
    )
    return out


def weigh_graph(
    graph: EpsGraph, model, params: MetricParams, threads: int = 1
) -> WeightedEpsGraph:
    """Attach quadrature edge weights; equals segment_length edge by edge.

    Density values at the vertices are computed once and shared by all
    incident edges. Edge chunks are independent, so `threads` > 1 fans them
    out without changing any result.
    """
    points = graph.points
    edges = graph.edges
    vertex_factors = conformal_factors(model, params, points)
    coeffs = _sample_coefficients(params)
    n_nodes = len(coeffs[0])
    chunk = max(1024, (1 << 21) // n_nodes)
    ranges = [
        (lo, min(lo + chunk, len(edges))) for lo in range(0, len(edges), chunk)
    ]
    weights = np.empty(len(edges))
    if threads > 1 and len(ranges) > 1:
        from concurrent.futures import ThreadPoolExecutor

        def run(span):
            lo, hi = span
            return lo, hi, _weigh_chunk(
                points, edges[lo:hi], model, params, vertex_factors, coeffs
            )

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for lo, hi, vals in pool.map(run, ranges):
                weights[lo:hi] = vals
    else:
        for lo, hi in ranges:
            weights[lo:hi] = _weigh_chunk(
                points, edges[lo:hi], model, params, vertex_factors, coeffs
            )
    return WeightedEpsGraph(
        graph=graph, weights=weights, params=params, density=model
    )


def _build_adjacency(n, edges, weights):
    sources = np.concatenate((edges[:, 0], edges[:, 1]))
    targets = np.concatenate((edges[:, 1], edges[:, 0]))
    dup_weights = np.concatenate((weights, weights))
    order = np.argsort(sources, kind="stable")
    degrees = np.bincount(sources, minlength=n)
    indptr = np.concatenate(([0], np.cumsum(degrees)))
    return indptr, targets[order], dup_weights[order]


def graph_to_json(wg: WeightedEpsGraph) -> str:
    """Serialize to the interchange schema with full float precision."""
    fmt = gio.fmt_float
    points = ",".join(
        "[" + ",".join(fmt(c) for c in row) + "]" for row in wg.points
    )
    edges = ",".join(
        f"[{int(i)},{int(j)},{fmt(w)}]"
        for (i, j), w in zip(wg.edges, wg.weights)
    )
    p = wg.params
    parts = [f'"lambda":{fmt(p.lam)}', f'"p0":{fmt(p.p0)}', f'"K":{p.quad_k}']
    if wg.graph.epsilon is not None:
        parts.append(f'"eps":{fmt(wg.graph.epsilon)}')
    else:
        parts.append(f'"knn":{wg.graph.min_neighbors}')
    parts.append(f'"rule":"{p.quad_rule}"')
    density = json.dumps(wg.density.to_spec())
    return (
        f'{{"dim":{wg.points.shape[1]},"points":[{points}],'
        f'"edges":[{edges}],"params":{{{",".join(parts)}}},'
        f'"density":{density}}}'
    )


def save_graph_json(path, wg: WeightedEpsGraph) -> None:
    gio.atomic_write(path, graph_to_json(wg) + "\n")


def load_graph_json(path) -> WeightedEpsGraph:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise gio.MalformedInputError(f"{path}: {exc}") from exc
    try:
        points = np.asarray(doc["points"], dtype=float)
        raw_edges = doc["edges"]
        params_doc = doc["params"]
        params = MetricParams(
            lam=params_doc["lambda"],
            p0=params_doc["p0"],
            quad_k=params_doc["K"],
            quad_rule=params_doc.get("rule", "trapezoid"),
        )
        density = density_from_spec(doc["density"])
        if points.ndim != 2 or points.shape[1] != doc["dim"]:
            raise ValueError("dim does not match points")
        if raw_edges:
            arr = np.asarray(raw_edges, dtype=float)
            edges = arr[:, :2].astype(np.int32)
            weights = arr[:, 2].copy()
        else:
            edges = np.empty((0, 2), dtype=np.int32)
            weights = np.empty(0)
        n = len(points)
        if len(edges) and (
            edges.min() < 0 or edges.max() >= n or np.any(weights < 0)
        ):
            raise ValueError("edge indices or weights out of range")
        graph = EpsGraph(
            points=points,
            edges=edges,
            epsilon=params_doc.get("eps"),
            min_neighbors=params_doc.get("knn"),
        )
        return WeightedEpsGraph(
            graph=graph, weights=weights, params=params, density=density
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise gio.MalformedInputError(f"{path}: {exc}") from exc
