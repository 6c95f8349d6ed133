"""Command-line entry point wiring every module together.

Option precedence is flag > config file > built-in default; the config is
a TOML file whose top-level keys apply to every subcommand and whose
``[subcommand]`` tables apply to one. Outputs are written atomically and
all floats carry 17 significant digits so reruns are byte-identical.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import io as gio
from .analysis import affinity, nmi, spectral_cluster, tau_sweep
from .density import (
    RingDensity,
    UniformDensity,
    density_from_spec,
    fit_kde,
)
from .experiments import (
    ConvergenceRun,
    DatasetSpec,
    convergence_study,
    generate,
)
from .graph import (
    build_adaptive_graph,
    build_eps_graph,
    connected_components,
    load_graph_json,
    save_graph_json,
    weigh_graph,
)
from .metric import MetricParams
from .shortest_path import all_pairs_distances, geodesic, sssp


class UsageError(ValueError):
    """Bad flag combination or value; exits with status 2."""

    code = "usage"


_KEY_ALIASES = {"lambda": "lam"}

_DEFAULTS = {
    "gen-data": {
        "kind": None, "n": None, "noise": 0.0, "seed": 0, "domain": None,
        "density": None, "out": None, "labels": None,
    },
    "build-graph": {
        "points": None, "eps": None, "knn": None, "density": "uniform",
        "lam": 0.01, "p0": 1.0, "quad_k": 10, "quad_rule": "trapezoid",
        "threads": None, "out": None,
    },
    "dist": {"graph": None, "source": None, "target": None},
    "path": {"graph": None, "source": None, "target": None, "out": None},
    "dist-matrix": {"graph": None, "out": None, "threads": None},
    "affinity": {"dist": None, "tau": 1.0, "out": None},
    "cluster": {
        "dist": None, "tau": 1.0, "k": 2, "truth": None, "seed": 0,
        "out": None,
    },
    "tau-sweep": {
        "dist": None, "taus": "0.001:1000:log25", "k": 2, "truth": None,
        "seed": 0, "out": None, "plot": False,
    },
    "converge": {
        "density": "ring", "lam": 0.01, "p0": 1.0, "quad_k": 10,
        "quad_rule": "trapezoid", "eps": 0.158, "n": "100:10000:log5",
        "trials": 20, "modes": "uniform,density", "x": "-1,0", "y": "1,0",
        "seed": 0, "ref_resolution": 1024, "hausdorff_step": 0.01,
        "threads": None, "out": None, "plot": False,
    },
    "limits": {
        "points": None, "n": 200, "density": "ring", "eps": 0.3,
        "lambdas": "1,100,10000", "pairs": 10, "p0": 1.0, "quad_k": 10,
        "quad_rule": "trapezoid", "seed": 0, "threads": None, "out": None,
        "plot": False,
    },
}


def _add(sub, name, *flags):
    p = sub.add_parser(name)
    p.add_argument("--config", default=None)
    for flag in flags:
        kwargs = {"default": argparse.SUPPRESS}
        if flag == "--lambda":
            kwargs["dest"] = "lam"
        if flag in ("--seed", "--source", "--target", "--k", "--quad-k",
                    "--knn", "--trials", "--pairs", "--ref-resolution",
                    "--threads"):
            kwargs["type"] = int
        elif flag in ("--noise", "--eps", "--lambda", "--p0", "--tau",
                      "--hausdorff-step"):
            kwargs["type"] = float
        elif flag == "--plot":
            kwargs["action"] = "store_true"
        p.add_argument(flag, **kwargs)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="genodesic",
        description="Density-weighted graph geodesics: build, query, study.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add(sub, "gen-data", "--kind", "--n", "--noise", "--seed", "--domain",
         "--density", "--out", "--labels")
    _add(sub, "build-graph", "--points", "--eps", "--knn", "--density",
         "--lambda", "--p0", "--quad-k", "--quad-rule", "--threads", "--out")
    _add(sub, "dist", "--graph", "--source", "--target")
    _add(sub, "path", "--graph", "--source", "--target", "--out")
    _add(sub, "dist-matrix", "--graph", "--out", "--threads")
    _add(sub, "affinity", "--dist", "--tau", "--out")
    _add(sub, "cluster", "--dist", "--tau", "--k", "--truth", "--seed",
         "--out")
    _add(sub, "tau-sweep", "--dist", "--taus", "--k", "--truth", "--seed",
         "--out", "--plot")
    _add(sub, "converge", "--density", "--lambda", "--p0", "--quad-k",
         "--quad-rule", "--eps", "--n", "--trials", "--modes", "--x", "--y",
         "--seed", "--ref-resolution", "--hausdorff-step", "--threads",
         "--out", "--plot")
    _add(sub, "limits", "--points", "--n", "--density", "--eps", "--lambdas",
         "--pairs", "--p0", "--quad-k", "--quad-rule", "--seed", "--threads",
         "--out", "--plot")
    return parser


def _load_config(path):
    try:
        import tomllib
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise gio.MalformedInputError(f"{path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise gio.MalformedInputError(f"{path}: {exc}") from exc


def _norm_key(key: str) -> str:
    key = key.replace("-", "_")
    return _KEY_ALIASES.get(key, key)


def resolve_options(ns: argparse.Namespace):
    """Merge defaults, config file, and explicit flags for one command."""
    command = ns.command
    merged = dict(_DEFAULTS[command])
    explicit = set()
    if getattr(ns, "config", None):
        cfg = _load_config(ns.config)
        scopes = [
            {k: v for k, v in cfg.items() if not isinstance(v, dict)},
            cfg.get(command, {}),
            cfg.get(command.replace("-", "_"), {}),
        ]
        for scope in scopes:
            for key, value in scope.items():
                key = _norm_key(key)
                if key in merged:
                    merged[key] = value
    for key, value in vars(ns).items():
        if key in ("command", "config"):
            continue
        merged[key] = value
        explicit.add(key)
    merged["_explicit"] = explicit
    return merged


def _require(opts, *keys):
    for key in keys:
        if opts.get(key) is None:
            flag = "--" + key.replace("_", "-")
            raise UsageError(f"missing required option {flag}")


def _threads(opts) -> int:
    if "threads" in opts["_explicit"] and opts["threads"] is not None:
        return max(1, int(opts["threads"]))
    env = os.environ.get("GENODESIC_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise UsageError(f"GENODESIC_THREADS={env!r} is not an integer") from exc
    if opts.get("threads") is not None:
        return max(1, int(opts["threads"]))
    return os.cpu_count() or 1


def _parse_values(text, integer: bool = False):
    """Parse '4', '1,10,100', 'a:b:logN', or 'a:b:linN' into a list."""
    if isinstance(text, (list, tuple, np.ndarray)):
        vals = [float(v) for v in text]
    else:
        text = str(text).strip()
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise UsageError(f"bad range {text!r}, want start:stop:logN")
            lo, hi, spec = float(parts[0]), float(parts[1]), parts[2]
            if spec.startswith("log"):
                count = int(spec[3:])
                if lo <= 0 or hi <= 0:
                    raise UsageError("log ranges need positive bounds")
                vals = list(np.geomspace(lo, hi, count))
            elif spec.startswith("lin"):
                count = int(spec[3:])
                vals = list(np.linspace(lo, hi, count))
            else:
                raise UsageError(f"bad range spec {spec!r}")
        else:
            vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise UsageError("empty value list")
    if integer:
        out = []
        for v in vals:
            r = int(round(v))
            if not out or out[-1] != r:
                out.append(r)
        return out
    return vals


def _parse_point(value) -> np.ndarray:
    if isinstance(value, (list, tuple, np.ndarray)):
        return np.asarray(value, dtype=float)
    return np.asarray([float(v) for v in str(value).split(",")], dtype=float)


def _parse_domain(value):
    if value is None:
        return None
    flat = _parse_point(value)
    if len(flat) % 2 != 0:
        raise UsageError("domain wants lo..,hi.. with an even count")
    d = len(flat) // 2
    return np.vstack((flat[:d], flat[d:]))


def resolve_density(token, points=None, dim=None):
    """Density from a name, a ``kde:SIGMA`` request, or a JSON spec file."""
    if token is None:
        raise UsageError("missing required option --density")
    token = str(token)
    if token == "ring":
        return RingDensity()
    if token == "uniform":
        return UniformDensity(value=1.0, dim=dim if dim else 2)
    if token.startswith("kde:"):
        if points is None:
            raise UsageError("kde densities need a point cloud to fit")
        return fit_kde(points, float(token[4:]))
    try:
        with open(token, "r", encoding="utf-8") as fh:
            spec = json.load(fh)
    except OSError as exc:
        raise UsageError(f"unknown density {token!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise gio.MalformedInputError(f"{token}: {exc}") from exc
    return density_from_spec(spec)


def _metric_params(opts) -> MetricParams:
    return MetricParams(
        lam=float(opts["lam"]),
        p0=float(opts["p0"]),
        quad_k=int(opts["quad_k"]),
        quad_rule=str(opts["quad_rule"]),
    )


def _plot_path(out):
    return os.path.splitext(os.fspath(out))[0] + ".png"


def cmd_gen_data(opts) -> int:
    _require(opts, "kind", "n", "out")
    density = None
    if opts["kind"] == "density-sampled":
        if opts["density"] is None:
            raise UsageError("density-sampled needs --density")
        density = resolve_density(opts["density"])
    spec = DatasetSpec(
        kind=str(opts["kind"]),
        n=int(opts["n"]),
        noise=float(opts["noise"]),
        seed=int(opts["seed"]),
        domain=_parse_domain(opts["domain"]),
        density=density,
    )
    points, labels = generate(spec)
    gio.write_points_csv(opts["out"], points)
    if opts["labels"] is not None:
        gio.write_labels_csv(opts["labels"], labels)
    return 0


def cmd_build_graph(opts) -> int:
    _require(opts, "points", "out")
    points = gio.read_points_csv(opts["points"])
    if (opts["eps"] is None) == (opts["knn"] is None):
        raise UsageError("give exactly one of --eps or --knn")
    if opts["eps"] is not None:
        graph = build_eps_graph(points, float(opts["eps"]))
    else:
        graph = build_adaptive_graph(points, int(opts["knn"]))
    density = resolve_density(
        opts["density"], points=points, dim=points.shape[1]
    )
    wg = weigh_graph(graph, density, _metric_params(opts), threads=_threads(opts))
    save_graph_json(opts["out"], wg)
    return 0


def cmd_dist(opts) -> int:
    _require(opts, "graph", "source", "target")
    wg = load_graph_json(opts["graph"])
    tree = sssp(wg, int(opts["source"]), target=int(opts["target"]))
    print(gio.fmt_float(tree.distances[int(opts["target"])]))
    return 0


def cmd_path(opts) -> int:
    _require(opts, "graph", "source", "target", "out")
    wg = load_graph_json(opts["graph"])
    res = geodesic(wg, int(opts["source"]), int(opts["target"]))
    fmt = gio.fmt_float
    dist = "Infinity" if not np.isfinite(res.distance) else fmt(res.distance)
    indices = ",".join(str(int(i)) for i in res.path)
    coords = ",".join(
        "[" + ",".join(fmt(c) for c in row) + "]" for row in res.coords
    )
    gio.atomic_write(
        opts["out"],
        f'{{"distance":{dist},"indices":[{indices}],"coords":[{coords}]}}\n',
    )
    return 0


def cmd_dist_matrix(opts) -> int:
    _require(opts, "graph", "out")
    wg = load_graph_json(opts["graph"])
    matrix = all_pairs_distances(wg, threads=_threads(opts))
    gio.write_matrix_csv(opts["out"], matrix)
    return 0


def cmd_affinity(opts) -> int:
    _require(opts, "dist", "out")
    distances = gio.read_matrix_csv(opts["dist"])
    result = affinity(distances, float(opts["tau"]))
    gio.write_matrix_csv(opts["out"], result.values)
    return 0


def cmd_cluster(opts) -> int:
    _require(opts, "dist", "out")
    distances = gio.read_matrix_csv(opts["dist"])
    result = spectral_cluster(
        affinity(distances, float(opts["tau"])),
        int(opts["k"]),
        seed=int(opts["seed"]),
    )
    gio.write_labels_csv(opts["out"], result.labels)
    if opts["truth"] is not None:
        truth = gio.read_labels_csv(opts["truth"])
        print(f"nmi={gio.fmt_float(nmi(result.labels, truth))}")
    return 0


def cmd_tau_sweep(opts) -> int:
    _require(opts, "dist", "truth", "out")
    distances = gio.read_matrix_csv(opts["dist"])
    truth = gio.read_labels_csv(opts["truth"])
    taus = np.asarray(_parse_values(opts["taus"]))
    rows = tau_sweep(
        distances, taus, int(opts["k"]), truth, seed=int(opts["seed"])
    )
    gio.write_table_csv(opts["out"], ("tau", "nmi"), rows)
    if opts["plot"]:
        from .figures import plot_tau_sweep

        plot_tau_sweep(rows[:, 0], rows[:, 1], _plot_path(opts["out"]))
    return 0


def cmd_converge(opts) -> int:
    _require(opts, "out")
    density = resolve_density(opts["density"])
    modes = tuple(
        m.strip() for m in str(opts["modes"]).split(",") if m.strip()
    )
    run = ConvergenceRun(
        density=density,
        x=_parse_point(opts["x"]),
        y=_parse_point(opts["y"]),
        n_grid=tuple(_parse_values(opts["n"], integer=True)),
        trials=int(opts["trials"]),
        params=_metric_params(opts),
        epsilon=float(opts["eps"]),
        modes=modes,
        seed=int(opts["seed"]),
        ref_resolution=int(opts["ref_resolution"]),
        hausdorff_step=float(opts["hausdorff_step"]),
    )
    rows, _ = convergence_study(run, threads=_threads(opts))
    header = ("n", "mode", "mean_err", "std_err", "fail_count",
              "mean_hausdorff")
    gio.write_table_csv(opts["out"], header, rows)
    if opts["plot"]:
        from .figures import plot_convergence

        plot_convergence(rows, _plot_path(opts["out"]))
    return 0


def limits_table(points, density, params, epsilon, lambdas, n_pairs, seed,
                 threads: int = 1):
    """Max gap between density geodesics and Euclidean graph distance.

    Gaps are measured over ``n_pairs`` fixed random vertex pairs from the
    largest connected component; rows are (lambda, max_gap, max_rel).
    """
    lambdas = [float(v) for v in lambdas]
    if len(lambdas) < 2 or any(
        b <= a for a, b in zip(lambdas, lambdas[1:])
    ):
        raise UsageError("need >= 2 strictly increasing lambda values")
    graph = build_eps_graph(points, epsilon)
    comp = connected_components(graph)
    largest = np.flatnonzero(comp == np.bincount(comp).argmax())
    if len(largest) < 2:
        raise UsageError("largest component has fewer than 2 vertices")
    rng = np.random.default_rng(seed)
    pairs = [tuple(rng.choice(largest, 2, replace=False))
             for _ in range(n_pairs)]
    # p == p0 makes the conformal factor exactly 1: Euclidean edge weights
    flat = UniformDensity(value=params.p0, dim=points.shape[1])
    euclid = weigh_graph(
        graph, flat,
        MetricParams(lam=1.0, p0=params.p0, quad_k=params.quad_k,
                     quad_rule=params.quad_rule),
        threads=threads,
    )
    base = {}
    for s, t in pairs:
        if s not in base:
            base[s] = sssp(euclid, int(s)).distances
    rows = []
    for lam in lambdas:
        wg = weigh_graph(
            graph, density,
            MetricParams(lam=lam, p0=params.p0, quad_k=params.quad_k,
                         quad_rule=params.quad_rule),
            threads=threads,
        )
        cache = {}
        gap = 0.0
        rel = 0.0
        for s, t in pairs:
            if s not in cache:
                cache[s] = sssp(wg, int(s)).distances
            d_e = base[s][t]
            diff = abs(cache[s][t] - d_e)
            gap = max(gap, diff)
            rel = max(rel, diff / d_e if d_e > 0 else 0.0)
        rows.append((lam, gap, rel))
    return rows


def cmd_limits(opts) -> int:
    _require(opts, "out")
    if opts["points"] is not None:
        points = gio.read_points_csv(opts["points"])
    else:
        rng = np.random.default_rng(int(opts["seed"]))
        points = rng.uniform(-1.0, 1.0, (int(opts["n"]), 2))
    density = resolve_density(
        opts["density"], points=points, dim=points.shape[1]
    )
    params = MetricParams(
        lam=1.0, p0=float(opts["p0"]), quad_k=int(opts["quad_k"]),
        quad_rule=str(opts["quad_rule"]),
    )
    rows = limits_table(
        points, density, params, float(opts["eps"]),
        _parse_values(opts["lambdas"]), int(opts["pairs"]),
        int(opts["seed"]), threads=_threads(opts),
    )
    gio.write_table_csv(opts["out"], ("lambda", "max_gap", "max_rel"), rows)
    if opts["plot"]:
        from .figures import plot_limits

        plot_limits([r[0] for r in rows], [r[1] for r in rows],
                    _plot_path(opts["out"]))
    return 0


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "build-graph": cmd_build_graph,
    "dist": cmd_dist,
    "path": cmd_path,
    "dist-matrix": cmd_dist_matrix,
    "affinity": cmd_affinity,
    "cluster": cmd_cluster,
    "tau-sweep": cmd_tau_sweep,
    "converge": cmd_converge,
    "limits": cmd_limits,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        opts = resolve_options(ns)
        return _COMMANDS[ns.command](opts)
    except UsageError as exc:
        print(f"error:usage: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - map to exit codes at the rim
        code = getattr(exc, "code", None)
        if code is not None:
            print(f"error:{code}: {exc}", file=sys.stderr)
            return 1
        if isinstance(exc, (ValueError, KeyError, IndexError)):
            print(f"error:usage: {exc}", file=sys.stderr)
            return 2
        if isinstance(exc, OSError):
            print(f"error:io: {exc}", file=sys.stderr)
            return 1
        raise
