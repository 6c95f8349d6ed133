"""Conformal factor and quadrature segment lengths."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from genodesic import metric
from genodesic.density import GaussianMixtureDensity, RingDensity, UniformDensity
from genodesic.metric import (
    MetricParams,
    conformal_factor,
    conformal_factors,
    euclidean_limit_gap,
    segment_length,
    segment_lengths,
)

# Trapezoid length of the diameter segment (-1,0) -> (1,0) under the ring
# density with lambda=0.01: the K=1e6 value is converged to ~1e-12 (an
# adaptive kink-splitting quadrature agrees to 1.4e-12 relative), and the
# default K=10 sits 1.6% above it.
SEGMENT_CONVERGED = 59.620694052183289
SEGMENT_K10 = 60.574895002171608


@pytest.fixture(scope="module")
def ring():
    return RingDensity()


@pytest.fixture(scope="module")
def gmm():
    rng = np.random.default_rng(12)
    return GaussianMixtureDensity(rng.uniform(-1, 1, (6, 2)), 0.05)


X = np.array([-1.0, 0.0])
Y = np.array([1.0, 0.0])


class TestParams:
    def test_defaults(self):
        p = MetricParams(lam=0.5)
        assert (p.p0, p.quad_k, p.quad_rule) == (1.0, 10, "trapezoid")

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"lam": 0.0},
            {"lam": -1.0},
            {"lam": 0.1, "p0": 0.0},
            {"lam": 0.1, "quad_k": 0},
            {"lam": 0.1, "quad_k": 2.5},
            {"lam": 0.1, "quad_rule": "simpson"},
        ],
    )
    def test_rejects_bad_values(self, kwargs):
        with pytest.raises(ValueError):
            MetricParams(**kwargs)

    def test_frozen(self):
        p = MetricParams(lam=0.1)
        with pytest.raises(Exception):
            p.lam = 0.2


class TestConformalFactor:
    def test_matches_formula(self, ring):
        params = MetricParams(lam=0.01, p0=1.0)
        x = np.array([0.3, -0.4])
        expected = (1.0 + 0.01) / (ring.eval_many(x[None, :])[0] + 0.01)
        assert_allclose(conformal_factor(ring, params, x), expected, rtol=1e-15)

    def test_uniform_at_p0_is_one(self):
        u = UniformDensity(value=2.0)
        params = MetricParams(lam=3.0, p0=2.0)
        pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
        assert_array_equal(conformal_factors(u, params, pts), np.ones(20))

    def test_high_density_contracts(self, ring):
        params = MetricParams(lam=0.01)
        on_ring = conformal_factor(ring, params, [0.75, 0.0])
        off_ring = conformal_factor(ring, params, [0.0, 0.0])
        assert on_ring < 1.0 < off_ring


class TestSegmentLength:
    def test_pinned_k10(self, ring):
        params = MetricParams(lam=0.01, quad_k=10)
        assert_allclose(segment_length(ring, params, X, Y), SEGMENT_K10, rtol=1e-12)

    def test_k10_within_two_percent_of_converged(self, ring):
        params = MetricParams(lam=0.01, quad_k=10)
        rel = abs(segment_length(ring, params, X, Y) - SEGMENT_CONVERGED)
        assert rel / SEGMENT_CONVERGED < 0.02

    def test_large_k_converges(self, ring):
        params = MetricParams(lam=0.01, quad_k=4096)
        assert_allclose(
            segment_length(ring, params, X, Y), SEGMENT_CONVERGED, rtol=1e-6
        )

    def test_trapezoid_symmetry_bitwise(self, ring, gmm):
        rng = np.random.default_rng(4)
        for model in (ring, gmm):
            params = MetricParams(lam=0.01, quad_k=7)
            xs = rng.uniform(-1, 1, (50, 2))
            ys = rng.uniform(-1, 1, (50, 2))
            fwd = segment_lengths(model, params, xs, ys)
            rev = segment_lengths(model, params, ys, xs)
            assert_array_equal(fwd, rev)

    def test_left_riemann_asymmetry_closed_form(self, ring):
        params = MetricParams(lam=0.01, quad_k=9, quad_rule="left-riemann")
        rng = np.random.default_rng(8)
        for _ in range(20):
            x, y = rng.uniform(-1, 1, (2, 2))
            gap = abs(
                segment_length(ring, params, x, y) - segment_length(ring, params, y, x)
            )
            fx = conformal_factor(ring, params, x)
            fy = conformal_factor(ring, params, y)
            expected = np.linalg.norm(y - x) / 9 * abs(fx - fy)
            assert_allclose(gap, expected, rtol=1e-9, atol=1e-15)

    def test_halving_error_ratio_near_four(self, gmm):
        ref = segment_length(gmm, MetricParams(lam=0.01, quad_k=4096), X, Y)
        errs = [
            abs(segment_length(gmm, MetricParams(lam=0.01, quad_k=k), X, Y) - ref)
            for k in (8, 16, 32)
        ]
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        assert all(3.0 < r < 5.0 for r in ratios)

    def test_p0_rescales_exactly(self, ring):
        rng = np.random.default_rng(2)
        xs = rng.uniform(-1, 1, (30, 2))
        ys = rng.uniform(-1, 1, (30, 2))
        lam = 1e-8
        base = segment_lengths(ring, MetricParams(lam=lam, p0=1.0), xs, ys)
        scaled = segment_lengths(ring, MetricParams(lam=lam, p0=7.0), xs, ys)
        assert_allclose(scaled, base * ((7.0 + lam) / (1.0 + lam)), rtol=1e-12)

    def test_large_lambda_recovers_euclidean(self, ring):
        params = MetricParams(lam=1e8)
        rng = np.random.default_rng(6)
        xs = rng.uniform(-1, 1, (20, 2))
        ys = rng.uniform(-1, 1, (20, 2))
        lengths = segment_lengths(ring, params, xs, ys)
        euclid = np.linalg.norm(ys - xs, axis=1)
        assert_allclose(lengths, euclid, rtol=1e-6)

    def test_degenerate_segment_is_zero(self, ring):
        params = MetricParams(lam=0.01)
        assert segment_length(ring, params, X, X) == 0.0

    def test_batch_matches_scalar_bitwise(self, ring):
        params = MetricParams(lam=0.01, quad_k=11)
        rng = np.random.default_rng(5)
        xs = rng.uniform(-1, 1, (15, 2))
        ys = rng.uniform(-1, 1, (15, 2))
        batch = segment_lengths(ring, params, xs, ys)
        singles = [segment_length(ring, params, x, y) for x, y in zip(xs, ys)]
        # BLAS may pick different reduction kernels per batch shape.
        assert_allclose(batch, singles, rtol=1e-14)

    def test_chunked_evaluation_matches(self, ring, monkeypatch):
        params = MetricParams(lam=0.01, quad_k=10)
        rng = np.random.default_rng(13)
        xs = rng.uniform(-1, 1, (40, 2))
        ys = rng.uniform(-1, 1, (40, 2))
        whole = segment_lengths(ring, params, xs, ys)
        monkeypatch.setattr(metric, "SAMPLE_CHUNK", 64)
        chunked = segment_lengths(ring, params, xs, ys)
        assert_array_equal(chunked, whole)

    def test_shape_validation(self, ring):
        params = MetricParams(lam=0.01)
        with pytest.raises(ValueError):
            segment_length(ring, params, np.zeros(2), np.zeros(3))
        with pytest.raises(ValueError):
            segment_length(ring, params, np.zeros((2, 2)), np.zeros((2, 2)))


class TestEuclideanLimitGap:
    def test_uniform_matched_p0_gap_is_rounding_level(self):
        # Factor is exactly 1, so only the quadrature weight sum (1 +- ulp)
        # separates the length from the directly computed Euclidean norm.
        u = UniformDensity(value=1.0)
        rng = np.random.default_rng(3)
        segs = rng.uniform(-1, 1, (25, 2, 2))
        for lam in (1.0, 100.0, 10000.0):
            assert euclidean_limit_gap(u, MetricParams(lam=lam, p0=1.0), segs) < 1e-13

    def test_gap_decreases_with_lambda(self, ring):
        rng = np.random.default_rng(10)
        segs = rng.uniform(-1, 1, (25, 2, 2))
        gaps = [
            euclidean_limit_gap(ring, MetricParams(lam=lam), segs)
            for lam in (1.0, 100.0, 10000.0)
        ]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_rejects_bad_shape(self, ring):
        with pytest.raises(ValueError):
            euclidean_limit_gap(ring, MetricParams(lam=1.0), np.zeros((0, 2, 2)))
        with pytest.raises(ValueError):
            euclidean_limit_gap(ring, MetricParams(lam=1.0), np.zeros((3, 2)))
