"""Unit tests for spec loading, grouping, rendering, and manifests."""

import json
import os

import pytest

from plotkit.figures import FigureSpec, MissingColumnError, build_series, load_spec, render

DATA = os.path.join(os.path.dirname(__file__), "data", "sep_sweep.csv")


def make_spec(tmp_path, **kw):
    base = dict(inputs=[DATA], x="px_dbw", y=["sep_mc"],
                out=str(tmp_path / "fig.png"),
                manifest=str(tmp_path / "fig.manifest.txt"),
                group_by=["scheme", "m"],
                yerr={"sep_mc": "sep_mc_stderr"}, y_scale="log")
    base.update(kw)
    return FigureSpec(**base)


def write_csv(tmp_path, text):
    p = tmp_path / "rows.csv"
    p.write_text(text)
    return str(p)


class TestSpecLoading:
    def test_json_round_trip(self, tmp_path):
        raw = {"input": DATA, "x": "px_dbw", "y": "sep_mc",
               "out": "o.png", "manifest": "o.txt",
               "group_by": ["scheme"], "y_scale": "log"}
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(raw))
        spec = load_spec(str(p))
        assert spec.inputs == [DATA]
        assert spec.y == ["sep_mc"]
        assert spec.y_scale == "log"
        assert spec.x_label == "px_dbw"


class TestBuildSeries:
    def test_one_series_per_group(self, tmp_path):
        series = build_series(make_spec(tmp_path))
        keys = [s.key for s in series]
        assert keys == ["scheme=ncds m=16 y=sep_mc", "scheme=ncds m=64 y=sep_mc"]
        assert all(len(s.x_raw) == 3 for s in series)

    def test_two_y_columns(self, tmp_path):
        series = build_series(make_spec(tmp_path, y=["sep_mc", "sep_analytic"]))
        assert len(series) == 4

    def test_missing_column_reported_by_name(self, tmp_path):
        with pytest.raises(MissingColumnError, match="'sep_theory'"):
            build_series(make_spec(tmp_path, y=["sep_theory"]))

    def test_single_row_csv(self, tmp_path):
        path = write_csv(tmp_path, "scheme,x,y\nncds,1.0,0.5\n")
        spec = make_spec(tmp_path, inputs=[path], x="x", y=["y"],
                         group_by=["scheme"], yerr={})
        series = build_series(spec)
        assert len(series) == 1
        assert series[0].x_raw == ["1.0"] and series[0].y_raw == ["0.5"]

    def test_two_schemes_two_series(self, tmp_path):
        path = write_csv(tmp_path,
                         "scheme,x,y\nncds,1,0.1\ncds,1,0.2\nncds,2,0.05\ncds,2,0.1\n")
        spec = make_spec(tmp_path, inputs=[path], x="x", y=["y"],
                         group_by=["scheme"], yerr={})
        series = build_series(spec)
        assert [s.key for s in series] == ["scheme=ncds y=y", "scheme=cds y=y"]

    def test_preserves_file_order_and_values(self, tmp_path):
        path = write_csv(tmp_path, "scheme,x,y\na,3,0.3\na,1,0.1\na,2,0.2\n")
        spec = make_spec(tmp_path, inputs=[path], x="x", y=["y"],
                         group_by=["scheme"], yerr={})
        s = build_series(spec)[0]
        assert s.x_raw == ["3", "1", "2"]  # never reordered


class TestRender:
    def test_creates_figure_and_manifest(self, tmp_path):
        spec = make_spec(tmp_path)
        series = render(spec)
        assert os.path.exists(spec.out)
        assert os.path.exists(spec.manifest)
        text = open(spec.manifest).read()
        assert text.count("series:") == len(series) == 2
        # manifest carries the raw CSV strings
        assert "-22.0" in text

    def test_manifest_regeneration_byte_identical(self, tmp_path):
        spec = make_spec(tmp_path)
        render(spec)
        first = open(spec.manifest, "rb").read()
        render(spec)
        assert open(spec.manifest, "rb").read() == first

    def test_non_finite_rows_still_in_manifest(self, tmp_path):
        path = write_csv(tmp_path, "scheme,x,y\nncds,1,nan\nncds,2,0.5\n")
        spec = make_spec(tmp_path, inputs=[path], x="x", y=["y"],
                         group_by=["scheme"], yerr={})
        render(spec)
        assert "1 nan" in open(spec.manifest).read()


class TestCli:
    def test_plot_subcommand(self, tmp_path, capsys):
        from plotkit.cli import main

        raw = {"input": DATA, "x": "px_dbw", "y": ["sep_mc", "sep_analytic"],
               "yerr": {"sep_mc": "sep_mc_stderr"},
               "group_by": ["scheme", "m"], "y_scale": "log",
               "out": str(tmp_path / "f.png"),
               "manifest": str(tmp_path / "f.txt")}
        p = tmp_path / "spec.json"
        p.write_text(json.dumps(raw))
        assert main(["plot", "--spec", str(p)]) == 0
        assert "rendered 4 series" in capsys.readouterr().out
        assert (tmp_path / "f.png").exists()
