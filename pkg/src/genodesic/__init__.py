"""Density-weighted geodesic distances on point-cloud graphs.

A probability density induces a conformal metric that contracts lengths
through high-density regions. This package discretizes that metric on
weighted epsilon-graphs, computes shortest-path distances and geodesics,
and layers clustering and convergence studies on top.
"""

from .analysis import (
    AffinityMatrix,
    ClusteringResult,
    DegenerateAffinityWarning,
    EigenSolverError,
    affinity,
    nmi,
    spectral_cluster,
    tau_sweep,
)
from .density import (
    GaussianMixtureDensity,
    RingDensity,
    UniformDensity,
    density_from_spec,
    density_to_spec,
    estimate_normalization,
    eval_density,
    fit_kde,
    load_gmm_json,
    save_gmm_json,
)
from .experiments import (
    ConvergenceRun,
    DatasetSpec,
    SamplingFailureError,
    convergence_study,
    generate,
    hausdorff,
    reference_geodesic,
    sample_from_density,
)
from .graph import (
    EpsGraph,
    WeightedEpsGraph,
    build_adaptive_graph,
    build_eps_graph,
    connected_components,
    load_graph_json,
    save_graph_json,
    weigh_graph,
)
from .metric import (
    LEFT_RIEMANN,
    TRAPEZOID,
    MetricParams,
    conformal_factor,
    euclidean_limit_gap,
    segment_length,
    segment_lengths,
)
from .shortest_path import (
    GeodesicResult,
    SsspTree,
    all_pairs_distances,
    geodesic,
    sssp,
)

__version__ = "0.1.0"

__all__ = [
    "AffinityMatrix",
    "ClusteringResult",
    "ConvergenceRun",
    "DatasetSpec",
    "DegenerateAffinityWarning",
    "EigenSolverError",
    "EpsGraph",
    "GaussianMixtureDensity",
    "GeodesicResult",
    "LEFT_RIEMANN",
    "MetricParams",
    "RingDensity",
    "SamplingFailureError",
    "SsspTree",
    "TRAPEZOID",
    "UniformDensity",
    "WeightedEpsGraph",
    "affinity",
    "all_pairs_distances",
    "build_adaptive_graph",
    "build_eps_graph",
    "conformal_factor",
    "connected_components",
    "convergence_study",
    "density_from_spec",
    "density_to_spec",
    "estimate_normalization",
    "euclidean_limit_gap",
    "eval_density",
    "fit_kde",
    "generate",
    "geodesic",
    "hausdorff",
    "load_gmm_json",
    "load_graph_json",
    "nmi",
    "reference_geodesic",
    "sample_from_density",
    "save_gmm_json",
    "save_graph_json",
    "segment_length",
    "segment_lengths",
    "spectral_cluster",
    "sssp",
    "tau_sweep",
    "weigh_graph",
]
