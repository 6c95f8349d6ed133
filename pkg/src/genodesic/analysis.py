"""Affinity matrices, spectral clustering, and partition scoring.

The affinity kernel maps geodesic distances to [0, 1]; disconnected pairs
(+inf distance) land at 0, so fully separated components produce an ideal
block structure.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist


class EigenSolverError(RuntimeError):
    """The symmetric eigen-solver failed to converge."""

    code = "eigen-failure"


class DegenerateAffinityWarning(UserWarning):
    """Affinity carries no off-diagonal structure to cluster."""


@dataclass
class AffinityMatrix:
    """Symmetric affinity values in [0, 1] with unit diagonal."""

    values: np.ndarray
    tau: float


@dataclass
class ClusteringResult:
    labels: np.ndarray
    k: int
    nmi: float | None = None


def affinity(distances, tau: float) -> AffinityMatrix:
    """A_ij = exp(-D_ij / tau); +inf distances map to affinity 0."""
    if not tau > 0:
        raise ValueError("tau must be > 0")
    d = np.asarray(distances, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("distance matrix must be square")
    if np.any(np.diagonal(d) != 0):
        raise ValueError("distance matrix must have a zero diagonal")
    if np.any(np.isnan(d)) or np.any(d < 0):
        raise ValueError("distances must be >= 0 or +inf")
    values = np.exp(d / -tau)
    np.fill_diagonal(values, 1.0)
    return AffinityMatrix(values=values, tau=float(tau))


def _kmeans(data, k: int, rng, restarts: int = 20, max_iter: int = 100):
    """Seeded k-means with k-means++ starts; returns labels of best inertia."""
    n = len(data)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = np.empty((k, data.shape[1]))
        centers[0] = data[rng.integers(n)]
        closest = ((data - centers[0]) ** 2).sum(axis=1)
        for c in range(1, k):
            total = closest.sum()
            if total > 0:
                probs = closest / total
                centers[c] = data[rng.choice(n, p=probs)]
            else:
                centers[c] = data[rng.integers(n)]
            closest = np.minimum(
                closest, ((data - centers[c]) ** 2).sum(axis=1)
            )
        labels = np.zeros(n, dtype=np.int64)
        for _ in range(max_iter):
            d2 = cdist(data, centers, "sqeuclidean")
            new_labels = d2.argmin(axis=1)
            for c in range(k):
                mask = new_labels == c
                if mask.any():
                    centers[c] = data[mask].mean(axis=0)
                else:
                    # re-seed an empty cluster at the worst-served point
                    centers[c] = data[d2.min(axis=1).argmax()]
                    new_labels[d2.min(axis=1).argmax()] = c
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        inertia = float(
            cdist(data, centers, "sqeuclidean").min(axis=1).sum()
        )
        if inertia < best_inertia:
            best_inertia, best_labels = inertia, labels.copy()
    return best_labels


def spectral_cluster(A, k: int, seed: int) -> ClusteringResult:
    """Normalized-Laplacian spectral clustering with a seeded k-means.

    Rows with no off-diagonal affinity cannot be placed by the eigen-solve;
    they are pooled into the reserved label k-1 beforehand, and the
    remaining rows are split across the other labels.
    """
    values = A.values if isinstance(A, AffinityMatrix) else np.asarray(A, float)
    n = len(values)
    if not 2 <= k <= n:
        raise ValueError("need 2 <= k <= n")
    off = values.copy()
    np.fill_diagonal(off, 0.0)
    isolated = np.nonzero(off.sum(axis=1) == 0)[0]
    active = np.nonzero(off.sum(axis=1) > 0)[0]
    labels = np.full(n, k - 1, dtype=np.int64)
    if len(active) == 0:
        warnings.warn(
            "affinity has no off-diagonal structure; returning one pool",
            DegenerateAffinityWarning,
        )
        return ClusteringResult(labels=labels, k=k)
    k_active = k - 1 if len(isolated) else k
    k_active = min(k_active, len(active))
    sub = values[np.ix_(active, active)]
    degrees = sub.sum(axis=1)
    inv_root = 1.0 / np.sqrt(degrees)
    lap = -(inv_root[:, None] * sub * inv_root[None, :])
    np.fill_diagonal(lap, lap.diagonal() + 1.0)
    try:
        _, vectors = np.linalg.eigh(lap)
    except np.linalg.LinAlgError as exc:
        raise EigenSolverError(f"eigen-solver failed: {exc}") from exc
    embed = vectors[:, :k_active].copy()
    norms = np.sqrt((embed**2).sum(axis=1))
    norms[norms == 0] = 1.0
    embed /= norms[:, None]
    rng = np.random.default_rng(seed)
    labels[active] = _kmeans(embed, k_active, rng)
    return ClusteringResult(labels=labels, k=k)


def nmi(labels_a, labels_b) -> float:
    """Mutual information over the contingency table, normalized by the
    arithmetic mean of the two label entropies; two constant labelings
    count as identical (1.0)."""
    a = np.asarray(labels_a).ravel()
    b = np.asarray(labels_b).ravel()
    if a.shape != b.shape or len(a) == 0:
        raise ValueError("labelings must be nonempty and equal length")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    n = len(a)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    mask = table > 0
    cells = table[mask]
    outer = np.outer(row, col)[mask]
    mi = float((cells / n) @ np.log(n * cells / outer))
    h_a = float(-(row / n) @ np.log(row / n))
    h_b = float(-(col / n) @ np.log(col / n))
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    return float(np.clip(mi / ((h_a + h_b) / 2.0), 0.0, 1.0))


def tau_sweep(distances, taus, k: int, truth, seed: int) -> np.ndarray:
    """NMI of spectral clustering against ``truth`` for each temperature.

    Returns an array of (tau, nmi) rows ready for CSV export.
    """
    truth = np.asarray(truth).ravel()
    rows = np.empty((len(taus), 2))
    for idx, tau in enumerate(taus):
        result = spectral_cluster(affinity(distances, tau), k, seed)
        rows[idx] = (tau, nmi(result.labels, truth))
    return rows
