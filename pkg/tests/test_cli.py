"""Command-line interface: parsing, config precedence, pipelines, exit codes."""

import argparse
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from genodesic import cli
from genodesic.io import read_labels_csv, read_matrix_csv, read_points_csv


class TestParseValues:
    def test_log_range_integers(self):
        assert cli._parse_values("100:10000:log5", integer=True) == [
            100,
            316,
            1000,
            3162,
            10000,
        ]

    def test_log_range_floats(self):
        vals = cli._parse_values("0.001:1000:log7")
        assert_allclose(vals, np.geomspace(0.001, 1000, 7), rtol=1e-12)

    def test_lin_range(self):
        assert_allclose(cli._parse_values("0:1:lin5"), [0, 0.25, 0.5, 0.75, 1.0])

    def test_comma_list_and_scalar(self):
        assert cli._parse_values("1,10,100") == [1.0, 10.0, 100.0]
        assert cli._parse_values("42") == [42.0]

    def test_integer_rounding_dedupes(self):
        assert cli._parse_values("10:12:log5", integer=True) == [10, 11, 12]

    @pytest.mark.parametrize(
        "text", ["1:2", "1:2:3:4", "1:2:geo5", "-1:10:log3", ""]
    )
    def test_rejects_bad_specs(self, text):
        with pytest.raises(cli.UsageError):
            cli._parse_values(text)


class TestParsePointAndDomain:
    def test_point(self):
        assert_array_equal(cli._parse_point("-1,0.5"), [-1.0, 0.5])
        assert_array_equal(cli._parse_point([1, 2]), [1.0, 2.0])

    def test_domain_splits_halves(self):
        assert_array_equal(
            cli._parse_domain("-1,-2,1,2"), [[-1.0, -2.0], [1.0, 2.0]]
        )

    def test_domain_rejects_odd_count(self):
        with pytest.raises(cli.UsageError):
            cli._parse_domain("1,2,3")


class TestResolveOptions:
    def _namespace(self, command="cluster", config=None, **flags):
        ns = argparse.Namespace(command=command, config=config)
        for key, value in flags.items():
            setattr(ns, key, value)
        return ns

    def test_defaults_when_nothing_given(self):
        opts = cli.resolve_options(self._namespace())
        assert opts["tau"] == 1.0
        assert opts["k"] == 2
        assert opts["_explicit"] == set()

    def test_flag_beats_config_beats_default(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('seed = 9\n[cluster]\ntau = 5.0\nk = 4\n')
        opts = cli.resolve_options(
            self._namespace(config=str(cfg), tau=0.25)
        )
        assert opts["tau"] == 0.25
        assert opts["k"] == 4
        assert opts["seed"] == 9
        assert opts["_explicit"] == {"tau"}

    def test_section_beats_top_level(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('tau = 2.0\n[cluster]\ntau = 7.0\n')
        opts = cli.resolve_options(self._namespace(config=str(cfg)))
        assert opts["tau"] == 7.0

    def test_lambda_alias(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('[build-graph]\nlambda = 0.125\n')
        ns = self._namespace(command="build-graph", config=str(cfg))
        assert cli.resolve_options(ns)["lam"] == 0.125

    def test_unknown_config_keys_ignored(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text('volume = 11\n[cluster]\nshape = "round"\n')
        opts = cli.resolve_options(self._namespace(config=str(cfg)))
        assert "volume" not in opts and "shape" not in opts

    def test_malformed_config_rejected(self, tmp_path):
        cfg = tmp_path / "c.toml"
        cfg.write_text("tau = = 1\n")
        with pytest.raises(Exception):
            cli.resolve_options(self._namespace(config=str(cfg)))

    @settings(max_examples=25, deadline=None)
    @given(
        tau_layers=st.tuples(st.booleans(), st.booleans(), st.booleans()),
        k_layers=st.tuples(st.booleans(), st.booleans(), st.booleans()),
        data=st.data(),
    )
    def test_precedence_property(self, tmp_path_factory, tau_layers, k_layers, data):
        # each option independently set at any subset of {top, section, flag};
        # the effective value must come from the strongest populated layer
        taus = {"top": 2.0, "section": 3.0, "flag": 4.0, "default": 1.0}
        ks = {"top": 5, "section": 6, "flag": 7, "default": 2}
        lines, flags = [], {}
        top_t, sec_t, flag_t = tau_layers
        top_k, sec_k, flag_k = k_layers
        if top_t:
            lines.append(f"tau = {taus['top']}")
        if top_k:
            lines.append(f"k = {ks['top']}")
        lines.append("[cluster]")
        if sec_t:
            lines.append(f"tau = {taus['section']}")
        if sec_k:
            lines.append(f"k = {ks['section']}")
        if flag_t:
            flags["tau"] = taus["flag"]
        if flag_k:
            flags["k"] = ks["flag"]
        cfg = tmp_path_factory.mktemp("cfg") / "c.toml"
        cfg.write_text("\n".join(lines) + "\n")
        opts = cli.resolve_options(self._namespace(config=str(cfg), **flags))

        def expect(layer_bits, table):
            top, sec, flag = layer_bits
            if flag:
                return table["flag"]
            if sec:
                return table["section"]
            if top:
                return table["top"]
            return table["default"]

        assert opts["tau"] == expect(tau_layers, taus)
        assert opts["k"] == expect(k_layers, ks)


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """One small end-to-end workspace shared by the read-only CLI tests."""
    root = tmp_path_factory.mktemp("pipeline")
    points = root / "points.csv"
    labels = root / "labels.csv"
    graph = root / "graph.json"
    dmat = root / "D.csv"
    steps = [
        [
            "gen-data", "--kind", "two-circles", "--n", "60", "--seed", "0",
            "--out", str(points), "--labels", str(labels),
        ],
        [
            "build-graph", "--points", str(points), "--eps", "10",
            "--density", "kde:0.05", "--lambda", "1e-8",
            "--out", str(graph),
        ],
        ["dist-matrix", "--graph", str(graph), "--out", str(dmat)],
    ]
    for argv in steps:
        assert cli.main(argv) == 0
    return root


class TestPipeline:
    def test_generated_files(self, pipeline):
        pts = read_points_csv(pipeline / "points.csv")
        labels = read_labels_csv(pipeline / "labels.csv")
        assert pts.shape == (60, 2)
        assert_array_equal(np.bincount(labels), [30, 30])

    def test_distance_matrix_shape(self, pipeline):
        d = read_matrix_csv(pipeline / "D.csv")
        assert d.shape == (60, 60)
        assert_array_equal(d, d.T)
        assert_array_equal(np.diag(d), np.zeros(60))

    def test_dist_prints_float(self, pipeline, capsys):
        assert cli.main(["dist", "--graph", str(pipeline / "graph.json"),
                         "--source", "0", "--target", "30"]) == 0
        out = capsys.readouterr().out.strip()
        d = read_matrix_csv(pipeline / "D.csv")
        assert float(out) <= d[0, 30] * (1 + 1e-12)

    def test_path_json(self, pipeline):
        out = pipeline / "path.json"
        assert cli.main(["path", "--graph", str(pipeline / "graph.json"),
                         "--source", "0", "--target", "30",
                         "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["indices"][0] == 0 and doc["indices"][-1] == 30
        assert len(doc["coords"]) == len(doc["indices"])
        assert doc["distance"] > 0

    def test_path_source_equals_target(self, pipeline):
        out = pipeline / "loop.json"
        assert cli.main(["path", "--graph", str(pipeline / "graph.json"),
                         "--source", "5", "--target", "5",
                         "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["distance"] == 0
        assert doc["indices"] == [5]

    def test_affinity_and_cluster(self, pipeline, capsys):
        amat = pipeline / "A.csv"
        labels_out = pipeline / "pred.csv"
        assert cli.main(["affinity", "--dist", str(pipeline / "D.csv"),
                         "--tau", "10", "--out", str(amat)]) == 0
        a = read_matrix_csv(amat)
        assert np.all((a >= 0) & (a <= 1))
        assert cli.main(["cluster", "--dist", str(pipeline / "D.csv"),
                         "--tau", "10", "--k", "2",
                         "--truth", str(pipeline / "labels.csv"),
                         "--out", str(labels_out)]) == 0
        out = capsys.readouterr().out
        assert "nmi=1" in out.replace(" ", "")
        pred = read_labels_csv(labels_out)
        assert pred.shape == (60,)

    def test_tau_sweep_with_plot(self, pipeline):
        sweep = pipeline / "sweep.csv"
        assert cli.main(["tau-sweep", "--dist", str(pipeline / "D.csv"),
                         "--taus", "1:100:log5", "--k", "2",
                         "--truth", str(pipeline / "labels.csv"),
                         "--seed", "0", "--out", str(sweep), "--plot"]) == 0
        lines = sweep.read_text().splitlines()
        assert lines[0] == "tau,nmi"
        assert len(lines) == 6
        assert (pipeline / "sweep.png").exists()

    def test_rerun_byte_identical(self, pipeline, tmp_path):
        first = (pipeline / "D.csv").read_bytes()
        again = tmp_path / "D2.csv"
        assert cli.main(["dist-matrix", "--graph", str(pipeline / "graph.json"),
                         "--out", str(again)]) == 0
        assert again.read_bytes() == first

    def test_threads_env_does_not_change_output(self, pipeline, tmp_path, monkeypatch):
        monkeypatch.setenv("GENODESIC_THREADS", "3")
        out = tmp_path / "D3.csv"
        assert cli.main(["dist-matrix", "--graph", str(pipeline / "graph.json"),
                         "--out", str(out)]) == 0
        assert out.read_bytes() == (pipeline / "D.csv").read_bytes()


class TestConvergeAndLimits:
    def test_converge_small(self, tmp_path):
        out = tmp_path / "conv.csv"
        argv = [
            "converge", "--density", "uniform", "--lambda", "1",
            "--eps", "0.5", "--n", "40:80:log2", "--trials", "2",
            "--modes", "uniform", "--x=-0.5,0", "--y=0.5,0",
            "--ref-resolution", "64", "--out", str(out), "--plot",
        ]
        assert cli.main(argv) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "n,mode,mean_err,std_err,fail_count,mean_hausdorff"
        assert len(lines) == 3
        assert lines[1].startswith("40,uniform,")
        assert (tmp_path / "conv.png").exists()

    def test_limits_uniform_gap_zero(self, tmp_path, capsys):
        out = tmp_path / "limits.csv"
        argv = [
            "limits", "--n", "40", "--seed", "0", "--density", "uniform",
            "--eps", "0.6", "--lambdas", "1,100", "--pairs", "3",
            "--out", str(out),
        ]
        assert cli.main(argv) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "lambda,max_gap,max_rel"
        gaps = [float(line.split(",")[1]) for line in lines[1:]]
        assert gaps == [0.0, 0.0]

    def test_limits_ring_gap_shrinks(self, tmp_path):
        out = tmp_path / "limits.csv"
        argv = [
            "limits", "--n", "60", "--seed", "0", "--density", "ring",
            "--eps", "0.6", "--lambdas", "1,100,10000", "--pairs", "4",
            "--out", str(out), "--plot",
        ]
        assert cli.main(argv) == 0
        rows = [line.split(",") for line in out.read_text().splitlines()[1:]]
        gaps = [float(r[1]) for r in rows]
        assert gaps[0] > gaps[1] > gaps[2]
        assert (tmp_path / "limits.png").exists()

    def test_limits_rejects_single_lambda(self, tmp_path, capsys):
        argv = [
            "limits", "--n", "30", "--density", "uniform", "--eps", "0.6",
            "--lambdas", "5", "--pairs", "2",
            "--out", str(tmp_path / "x.csv"),
        ]
        assert cli.main(argv) == 2
        assert capsys.readouterr().err.startswith("error:usage:")


class TestExitCodes:
    def test_missing_required_flag(self, capsys):
        assert cli.main(["dist", "--source", "0", "--target", "1"]) == 2
        assert capsys.readouterr().err.startswith("error:usage:")

    def test_unknown_subcommand(self, capsys):
        assert cli.main(["teleport"]) == 2

    def test_malformed_points(self, tmp_path, capsys):
        bad = tmp_path / "pts.csv"
        bad.write_text("1.0,zebra\n")
        assert cli.main(["build-graph", "--points", str(bad), "--eps", "1",
                         "--out", str(tmp_path / "g.json")]) == 1
        assert capsys.readouterr().err.startswith("error:malformed-input:")

    def test_bad_vertex_index(self, pipeline, capsys):
        assert cli.main(["dist", "--graph", str(pipeline / "graph.json"),
                         "--source", "0", "--target", "999"]) == 1
        assert capsys.readouterr().err.startswith("error:bad-index:")

    def test_eps_and_knn_exclusive(self, pipeline, capsys):
        argv = ["build-graph", "--points", str(pipeline / "points.csv"),
                "--eps", "1", "--knn", "3", "--out", "g.json"]
        assert cli.main(argv) == 2
        assert capsys.readouterr().err.startswith("error:usage:")

    def test_unknown_dataset_kind(self, tmp_path, capsys):
        assert cli.main(["gen-data", "--kind", "three-moons", "--n", "10",
                         "--out", str(tmp_path / "p.csv")]) == 2
        assert capsys.readouterr().err.startswith("error:usage:")

    def test_unwritable_output_is_io_error(self, pipeline, tmp_path, capsys):
        blocker = tmp_path / "file.txt"
        blocker.write_text("flat\n")
        target = blocker / "out.csv"
        assert cli.main(["affinity", "--dist", str(pipeline / "D.csv"),
                         "--tau", "1", "--out", str(target)]) == 1
        assert capsys.readouterr().err.startswith("error:io:")

    def test_sampling_failure_code(self, tmp_path, capsys):
        from genodesic.density import GaussianMixtureDensity, save_gmm_json

        spike = GaussianMixtureDensity([[0.0, 0.0]], 1e-8)
        spec = tmp_path / "spike.json"
        save_gmm_json(spec, spike)
        assert cli.main(["gen-data", "--kind", "density-sampled", "--n", "64",
                         "--density", str(spec), "--domain=-1,-1,1,1",
                         "--out", str(tmp_path / "p.csv")]) == 1
        assert capsys.readouterr().err.startswith("error:sampling-failure:")

    def test_density_without_domain_code(self, tmp_path, capsys):
        from genodesic.density import GaussianMixtureDensity, save_gmm_json

        spec = tmp_path / "gmm.json"
        save_gmm_json(spec, GaussianMixtureDensity([[0.0, 0.0]], 0.1))
        assert cli.main(["gen-data", "--kind", "density-sampled", "--n", "16",
                         "--density", str(spec),
                         "--out", str(tmp_path / "p.csv")]) == 1
        assert capsys.readouterr().err.startswith("error:unsupported-domain:")


@pytest.fixture(scope="module")
def split_graph(tmp_path_factory):
    root = tmp_path_factory.mktemp("split")
    pts = root / "pts.csv"
    pts.write_text("0,0\n0.1,0\n5,5\n")
    graph = root / "g.json"
    assert cli.main(["build-graph", "--points", str(pts), "--eps", "0.5",
                     "--density", "uniform", "--out", str(graph)]) == 0
    return graph


class TestDisconnectedOutputs:
    def test_dist_prints_inf(self, split_graph, capsys):
        assert cli.main(["dist", "--graph", str(split_graph),
                         "--source", "0", "--target", "2"]) == 0
        assert capsys.readouterr().out.strip() == "inf"

    def test_path_json_uses_infinity(self, split_graph, tmp_path):
        out = tmp_path / "p.json"
        assert cli.main(["path", "--graph", str(split_graph),
                         "--source", "0", "--target", "2",
                         "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        assert doc["distance"] == float("inf")
        assert doc["indices"] == []
