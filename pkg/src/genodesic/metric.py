"""Conformal metric layer: factor, quadrature segment lengths, limits.

The metric scales Euclidean lengths by (p0 + lambda) / (p(x) + lambda);
segment lengths integrate that factor along straight segments with an
equispaced quadrature rule.
"""

from dataclasses import dataclass

import numpy as np

TRAPEZOID = "trapezoid"
LEFT_RIEMANN = "left-riemann"

# Edge-sample batches are capped so the (edges x nodes x dim) scratch array
# stays modest even for K=4096 oracle runs.
SAMPLE_CHUNK = 1 << 21


@dataclass(frozen=True)
class MetricParams:
    """Metric parameters: lambda > 0, p0 > 0, K >= 1 quadrature subintervals."""

    lam: float
    p0: float = 1.0
    quad_k: int = 10
    quad_rule: str = TRAPEZOID

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not self.p0 > 0:
            raise ValueError("p0 must be > 0")
        if int(self.quad_k) != self.quad_k or self.quad_k < 1:
            raise ValueError("quad_k must be an integer >= 1")
        if self.quad_rule not in (TRAPEZOID, LEFT_RIEMANN):
            raise ValueError(f"unknown quadrature rule: {self.quad_rule!r}")
        object.__setattr__(self, "quad_k", int(self.quad_k))


def conformal_factor(model, params: MetricParams, x) -> float:
    """Factor (p0 + lambda)/(p(x) + lambda) at one point."""
    return float(conformal_factors(model, params, np.atleast_2d(np.asarray(x, float)))[0])


def conformal_factors(model, params: MetricParams, points):
    """Vectorized conformal factor at many points."""
    p = model.eval_many(points)
    return (params.p0 + params.lam) / (p + params.lam)


def _sample_coefficients(params: MetricParams):
    """Per-node endpoint coefficients (alpha on x, beta on y) and weights.

    Trapezoid coefficients are mirror-symmetric by construction: node i of
    segment (x, y) is bitwise-identical to node K-i of segment (y, x), which
    makes the trapezoid rule exactly symmetric.
    """
    k = params.quad_k
    if params.quad_rule == TRAPEZOID:
        idx = np.arange(k + 1)
        near = np.minimum(idx, k - idx) / k
        first_half = idx <= k - idx
        alpha = np.where(first_half, 1.0 - near, near)
        beta = np.where(first_half, near, 1.0 - near)
        weights = np.full(k + 1, 1.0 / k)
        weights[0] = weights[-1] = 0.5 / k
    else:
        beta = np.arange(k) / k
        alpha = 1.0 - beta
        weights = np.full(k, 1.0 / k)
    return alpha, beta, weights


def _reduce_quadrature(factors, weights, rule):
    """Weighted node reduction; trapezoid pairs mirror nodes so that
    reversing the node order cannot change the result."""
    if rule == TRAPEZOID:
        n = factors.shape[1]
        half = n // 2
        paired = factors[:, :half] + factors[:, : n - half - 1 : -1]
        total = paired @ weights[:half]
        if n % 2:
            total = total + factors[:, half] * weights[half]
        return total
    return factors @ weights


def segment_lengths(model, params: MetricParams, x, y):
    """Quadrature lengths of straight segments x[i] -> y[i].

    Zero-length rows are returned as 0 without evaluating the density.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise ValueError("x and y must have matching shapes")
    m, dim = x.shape
    norms = np.sqrt(((y - x) ** 2).sum(axis=1))
    out = np.zeros(m)
    live = np.nonzero(norms > 0)[0]
    if live.size == 0:
        return out
    alpha, beta, weights = _sample_coefficients(params)
    n_nodes = len(alpha)
    chunk = max(1, SAMPLE_CHUNK // n_nodes)
    for lo in range(0, live.size, chunk):
        idx = live[lo : lo + chunk]
        samples = (
            x[idx, None, :] * alpha[:, None] + y[idx, None, :] * beta[:, None]
        )
        p = model.eval_many(samples.reshape(-1, dim))
        factors = ((params.p0 + params.lam) / (p + params.lam)).reshape(
            len(idx), n_nodes
        )
        out[idx] = norms[idx] * _reduce_quadrature(
            factors, weights, params.quad_rule
        )
    return out


def segment_length(model, params: MetricParams, x, y) -> float:
    """Quadrature length of the straight segment x -> y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be points of equal dimension")
    return float(segment_lengths(model, params, x[None, :], y[None, :])[0])


def euclidean_limit_gap(model, params: MetricParams, segments) -> float:
    """Max over segments of |segment_length - Euclidean length|.

    Diagnostic for the large-lambda limit: the gap shrinks toward 0 as
    lambda grows on any fixed segment set.
    """
    segments = np.asarray(segments, dtype=float)
    if segments.ndim != 3 or segments.shape[1] != 2 or segments.shape[0] == 0:
        raise ValueError("segments must have shape (m, 2, d), m >= 1")
    x, y = segments[:, 0, :], segments[:, 1, :]
    lengths = segment_lengths(model, params, x, y)
    euclid = np.sqrt(((y - x) ** 2).sum(axis=1))
    return float(np.max(np.abs(lengths - euclid)))
