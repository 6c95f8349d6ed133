"""Density oracles: uniform, ring, and Gaussian-mixture models.

Every model evaluates a nonnegative density pointwise; that is the only
interface the metric layer needs. Models are immutable after construction
and safe to share across worker threads.
"""

import json
import math

import numpy as np
from scipy.spatial.distance import cdist

# Mixture terms more than LOG_PRUNE_MARGIN below the leading exponent are
# dropped by the bucketed evaluator; e^-50 times <=2^13 components is far
# below one ulp of the dominant term, so results match the dense path to
# double rounding.
LOG_PRUNE_MARGIN = 50.0
DENSE_EVAL_LIMIT = 1 << 22
DEFAULT_NORM_RESOLUTION = 2048


class DimensionMismatchError(ValueError):
    """A point's dimension does not match the model's."""

    code = "dimension-mismatch"


class UnsupportedDomainError(ValueError):
    """Normalization requested outside the supported domain class."""

    code = "unsupported-domain"


def _as_box(domain, dim):
    box = np.asarray(domain, dtype=float)
    if box.shape != (2, dim):
        raise ValueError(f"domain must have shape (2, {dim})")
    if not np.all(np.isfinite(box)) or not np.all(box[0] < box[1]):
        raise ValueError("domain must be a bounded box with lo < hi")
    return box


def _check_points(x, dim):
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != dim:
        raise DimensionMismatchError(
            f"expected dimension {dim}, got {pts.shape[1]}"
        )
    return pts, squeeze


class UniformDensity:
    """Constant density ``value`` (domain used for sampling bounds only)."""

    kind = "uniform"

    def __init__(self, value: float = 1.0, dim: int = 2, domain=None):
        if value < 0 or not math.isfinite(value):
            raise ValueError("value must be finite and >= 0")
        self.value = float(value)
        self.dim = int(dim)
        self.domain = (
            _as_box(domain, self.dim)
            if domain is not None
            else np.array([[-1.0] * self.dim, [1.0] * self.dim])
        )

    def eval_many(self, x):
        pts, squeeze = _check_points(x, self.dim)
        out = np.full(len(pts), self.value)
        return out[0] if squeeze else out

    def density_upper_bound(self) -> float:
        return self.value

    def to_spec(self) -> dict:
        return {
            "kind": "uniform",
            "value": self.value,
            "domain": self.domain.tolist(),
        }


class RingDensity:
    """Ring-shaped density ``scale * exp(-sharpness*|radius - |x||) / Z``.

    Z defaults to a tensor-grid trapezoid estimate of the unnormalized
    integral over the domain box; pass ``z`` to pin it explicitly.
    """

    kind = "ring"

    def __init__(
        self,
        radius: float = 0.75,
        sharpness: float = 10.0,
        scale: float = 1.0,
        domain=None,
        z=None,
        norm_resolution: int = DEFAULT_NORM_RESOLUTION,
    ):
        if radius <= 0 or sharpness <= 0 or scale <= 0:
            raise ValueError("radius, sharpness and scale must be > 0")
        self.radius = float(radius)
        self.sharpness = float(sharpness)
        self.scale = float(scale)
        self.dim = 2
        self.domain = (
            _as_box(domain, 2)
            if domain is not None
            else np.array([[-1.0, -1.0], [1.0, 1.0]])
        )
        if z is None:
            z = estimate_normalization(
                self.unnormalized, self.domain, norm_resolution
            )
        if z <= 0:
            raise ValueError("normalization Z must be > 0")
        self.z = float(z)

    def unnormalized(self, x):
        pts, squeeze = _check_points(x, 2)
        r = np.hypot(pts[:, 0], pts[:, 1])
        out = np.exp(-self.sharpness * np.abs(self.radius - r))
        return out[0] if squeeze else out

    def eval_many(self, x):
        return self.unnormalized(x) * (self.scale / self.z)

    def density_upper_bound(self) -> float:
        return self.scale / self.z

    def to_spec(self) -> dict:
        return {
            "kind": "ring",
            "radius": self.radius,
            "sharpness": self.sharpness,
            "scale": self.scale,
            "z": self.z,
            "domain": self.domain.tolist(),
        }


class GaussianMixtureDensity:
    """Isotropic Gaussian mixture with one shared variance.

    Evaluation accumulates in the log domain with a max shift, so points
    far from every component underflow to exactly 0.0 instead of NaN.
    """

    kind = "gmm"

    def __init__(self, centers, sigma2: float, weights=None, domain=None):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.size == 0:
            raise ValueError("at least one component required")
        if not np.all(np.isfinite(centers)):
            raise ValueError("centers must be finite")
        if sigma2 <= 0 or not math.isfinite(sigma2):
            raise ValueError("sigma2 must be finite and > 0")
        m = len(centers)
        if weights is None:
            weights = np.full(m, 1.0 / m)
        else:
            weights = np.asarray(weights, dtype=float)
            if weights.shape != (m,):
                raise ValueError("weights must match component count")
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-8:
                raise ValueError("weights must be nonnegative and sum to 1")
        self.centers = centers
        self.sigma2 = float(sigma2)
        self.weights = weights
        self.dim = centers.shape[1]
        self.domain = None if domain is None else _as_box(domain, self.dim)
        self._log_weights = np.where(
            weights > 0, np.log(np.where(weights > 0, weights, 1.0)), -np.inf
        )
        self._log_norm = -0.5 * self.dim * math.log(2.0 * math.pi * sigma2)

    def log_eval_many(self, x):
        pts, squeeze = _check_points(x, self.dim)
        n_pts, n_comp = len(pts), len(self.centers)
        if n_pts == 0:
            out = np.empty(0)
            return out[0] if squeeze else out
        if (
            self.dim > 3
            or n_comp <= 64
            or n_pts * n_comp <= DENSE_EVAL_LIMIT
        ):
            out = self._log_eval_dense(pts, np.arange(n_comp))
        else:
            out = self._log_eval_bucketed(pts)
        out += self._log_norm
        return out[0] if squeeze else out

    def eval_many(self, x):
        return np.exp(self.log_eval_many(x))

    def _log_eval_dense(self, pts, comp_idx):
        centers = self.centers[comp_idx]
        logw = self._log_weights[comp_idx]
        out = np.empty(len(pts))
        # cap chunk size so the (rows x components) buffer stays ~64 MB
        chunk = max(1, int(8e6 / max(len(centers), 1)))
        inv = -0.5 / self.sigma2
        for lo in range(0, len(pts), chunk):
            block = pts[lo : lo + chunk]
            e = cdist(block, centers, "sqeuclidean")
            e *= inv
            e += logw
            m = e.max(axis=1)
            np.exp(e - m[:, None], out=e)
            out[lo : lo + chunk] = m + np.log(e.sum(axis=1))
        return out

    def _log_eval_bucketed(self, pts):
        # Sort query points into grid cells, then evaluate each cell against
        # only the components that can influence it at double precision.
        h = math.sqrt(self.sigma2)
        cells = np.floor(pts / h).astype(np.int64)
        order = np.lexsort(cells.T[::-1])
        sorted_cells = cells[order]
        boundaries = np.nonzero(
            np.any(sorted_cells[1:] != sorted_cells[:-1], axis=1)
        )[0]
        starts = np.concatenate(([0], boundaries + 1))
        stops = np.concatenate((boundaries + 1, [len(pts)]))
        out = np.empty(len(pts))
        inv = 0.5 / self.sigma2
        for start, stop in zip(starts, stops):
            idx = order[start:stop]
            block = pts[idx]
            lo, hi = block.min(axis=0), block.max(axis=0)
            near = np.clip(self.centers, lo, hi)
            d_lo2 = ((self.centers - near) ** 2).sum(axis=1)
            far = np.maximum(np.abs(self.centers - lo), np.abs(self.centers - hi))
            d_hi2 = (far**2).sum(axis=1)
            best_floor = np.max(self._log_weights - d_hi2 * inv)
            keep = np.nonzero(
                self._log_weights - d_lo2 * inv >= best_floor - LOG_PRUNE_MARGIN
            )[0]
            out[idx] = self._log_eval_dense(block, keep)
        return out

    def density_upper_bound(self) -> float:
        return math.exp(self._log_norm)

    def to_spec(self) -> dict:
        return {
            "kind": "gmm",
            "sigma2": self.sigma2,
            "centers": self.centers.tolist(),
            "weights": self.weights.tolist(),
        }


def eval_density(model, x) -> float:
    """Evaluate p(x) at a single point."""
    return float(model.eval_many(np.asarray(x, dtype=float)))


def estimate_normalization(unnormalized, domain, resolution: int) -> float:
    """Tensor-product trapezoid estimate of the integral over a box.

    ``resolution`` counts subintervals per axis; the grid has resolution+1
    nodes per axis. Limited to dimension <= 3 because the node count is
    exponential in d.
    """
    domain = np.asarray(domain, dtype=float)
    if domain.ndim != 2 or domain.shape[0] != 2:
        raise ValueError("domain must have shape (2, d)")
    dim = domain.shape[1]
    if dim > 3:
        raise UnsupportedDomainError("grid normalization supports d <= 3 only")
    if not np.all(np.isfinite(domain)):
        raise UnsupportedDomainError("domain must be bounded")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    axes, axis_weights = [], []
    for a in range(dim):
        lo, hi = domain[0, a], domain[1, a]
        nodes = np.linspace(lo, hi, resolution + 1)
        w = np.full(resolution + 1, (hi - lo) / resolution)
        w[0] *= 0.5
        w[-1] *= 0.5
        axes.append(nodes)
        axis_weights.append(w)
    if dim == 1:
        vals = np.asarray(unnormalized(axes[0][:, None]), dtype=float)
        return float(vals @ axis_weights[0])
    tail_nodes = np.stack(
        [g.ravel() for g in np.meshgrid(*axes[1:], indexing="ij")], axis=-1
    )
    tail_weight = axis_weights[1]
    for w in axis_weights[2:]:
        tail_weight = np.multiply.outer(tail_weight, w).reshape(-1)
    per_row = len(tail_nodes)
    rows_per_block = max(1, DENSE_EVAL_LIMIT // per_row)
    n_rows = resolution + 1
    total = 0.0
    for row_lo in range(0, n_rows, rows_per_block):
        row_hi = min(row_lo + rows_per_block, n_rows)
        first = np.repeat(axes[0][row_lo:row_hi], per_row)
        rest = np.tile(tail_nodes, (row_hi - row_lo, 1))
        pts = np.column_stack((first[:, None], rest))
        vals = np.asarray(unnormalized(pts), dtype=float)
        row_sums = vals.reshape(row_hi - row_lo, per_row) @ tail_weight
        total += float(axis_weights[0][row_lo:row_hi] @ row_sums)
    return total


def fit_kde(samples, sigma: float, domain=None) -> GaussianMixtureDensity:
    """Kernel density estimate: one isotropic component per sample.

    Components share variance sigma**2 and carry equal weight 1/n.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    if samples.size == 0:
        raise ValueError("samples must be nonempty")
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    return GaussianMixtureDensity(samples, sigma * sigma, domain=domain)


def density_to_spec(model) -> dict:
    """Serializable dict form of any built-in density model."""
    return model.to_spec()


def density_from_spec(spec: dict):
    """Rebuild a density model from its dict form."""
    try:
        return _density_from_spec(spec)
    except KeyError as exc:
        raise ValueError(f"density spec missing key: {exc}") from exc


def _density_from_spec(spec: dict):
    kind = spec.get("kind")
    if kind == "uniform":
        domain = np.asarray(spec["domain"], dtype=float)
        return UniformDensity(
            spec["value"], dim=domain.shape[1], domain=domain
        )
    if kind == "ring":
        return RingDensity(
            radius=spec["radius"],
            sharpness=spec["sharpness"],
            scale=spec.get("scale", 1.0),
            domain=spec.get("domain"),
            z=spec["z"],
        )
    if kind == "gmm":
        return GaussianMixtureDensity(
            spec["centers"], spec["sigma2"], spec.get("weights")
        )
    raise ValueError(f"unknown density kind: {kind!r}")


def save_gmm_json(path, model: GaussianMixtureDensity) -> None:
    """Write a mixture to JSON with full float precision."""
    from . import io as gio

    spec = model.to_spec()
    gio.atomic_write(path, json.dumps(spec) + "\n")


def load_gmm_json(path) -> GaussianMixtureDensity:
    from . import io as gio

    try:
        with open(path, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise gio.MalformedInputError(f"{path}: {exc}") from exc
    if spec.get("kind") != "gmm":
        raise gio.MalformedInputError(f"{path}: not a gmm spec")
    return density_from_spec(spec)
