import xml.etree.ElementTree as ET

import numpy as np
import pytest

from tcpr.cli import SUMMARY_FIELDS, read_csv_rows, run_cli, write_report_csv
from tcpr.episodes import EvalReport
from tcpr.feature_bank import load_bank
from tcpr.plotting import emit_plot, line_chart
from tcpr.simulation import SimSpec, run_bias_simulation


def data_lines(path):
    return [line for line in open(path) if not line.startswith("#")]


@pytest.fixture
def banks(tmp_path):
    base, novel = tmp_path / "base.bin", tmp_path / "novel.csv"
    assert run_cli(["gen-synthetic", "--classes", "12", "--per-class", "30", "--dim", "16",
                    "--offset", "3", "--seed", "1", "--out", str(base)]) == 0
    assert run_cli(["gen-synthetic", "--classes", "6", "--per-class", "25", "--dim", "16",
                    "--offset", "3", "--seed", "2", "--out", str(novel)]) == 0
    return base, novel


def make_report(accs):
    from tcpr.episodes import ci95
    mean, half = ci95(accs)
    cfg = dict(transform="l2", centroid="-", k="-", p="-", classifier="ncc", gamma=10.0,
               lr="-", epochs="-", n_way=5, k_shot=1, q=15, episodes=len(accs), seed=0)
    return EvalReport(tuple(accs), tuple(range(len(accs))), 0, mean, half, False, cfg)


class TestSimulate:
    def test_contract(self, tmp_path, capsys):
        out = tmp_path / "curve.csv"
        code = run_cli(["simulate", "--a", "1", "--k-shot", "1", "--tasks", "100",
                        "--seed", "7", "--out", str(out)])
        assert code == 0
        rows = read_csv_rows(out)
        assert 1 <= len(rows) <= 20
        assert set(rows[0]) == {"a", "k_shot", "bin_center", "mean_acc", "std_acc", "count"}
        assert sum(int(r["count"]) for r in rows) == 100
        header = [line for line in open(out) if line.startswith("#")]
        assert "# tasks=100\n" in header and "# seed=7\n" in header

    def test_sweep_and_plot(self, tmp_path):
        out, plot = tmp_path / "s.csv", tmp_path / "s.svg"
        assert run_cli(["simulate", "--k-shot", "1,5", "--tasks", "300", "--out", str(out),
                        "--plot", str(plot)]) == 0
        assert {r["k_shot"] for r in read_csv_rows(out)} == {"1", "5"}
        ET.parse(plot)

    def test_both_axes_rejected(self, tmp_path):
        assert run_cli(["simulate", "--a", "1,2", "--k-shot", "1,5", "--out", str(tmp_path / "x")]) == 1

    def test_invalid_spec(self, tmp_path, capsys):
        assert run_cli(["simulate", "--a", "-1", "--out", str(tmp_path / "x")]) == 1


class TestEvaluate:
    def test_missing_base(self, banks, capsys):
        _, novel = banks
        code = run_cli(["evaluate", "--novel", str(novel), "--transform", "tcpr", "--centroid", "base-knn"])
        assert code == 1
        assert "--base" in capsys.readouterr().err

    def test_cl2n_missing_base(self, banks, capsys):
        _, novel = banks
        assert run_cli(["evaluate", "--novel", str(novel), "--transform", "cl2n"]) == 1
        assert "--base" in capsys.readouterr().err

    def test_bad_flag_value(self, banks, capsys):
        _, novel = banks
        assert run_cli(["evaluate", "--novel", str(novel), "--transform", "pca"]) == 1
        assert "--transform" in capsys.readouterr().err

    def test_unknown_flag(self, capsys):
        assert run_cli(["evaluate", "--novel", "x", "--bogus"]) == 1

    def test_runtime_error_exit_2(self, tmp_path, capsys):
        assert run_cli(["evaluate", "--novel", str(tmp_path / "missing.bin")]) == 2
        assert run_cli(["inspect", str(tmp_path / "missing.bin")]) == 2

    def test_insufficient_classes_exit_2(self, banks):
        _, novel = banks
        assert run_cli(["evaluate", "--novel", str(novel), "--n-way", "9", "--episodes", "2"]) == 2

    def test_deterministic_outputs(self, banks, tmp_path):
        base, novel = banks
        outs = []
        for name in ("a", "b"):
            out = tmp_path / f"{name}.csv"
            code = run_cli(["evaluate", "--novel", str(novel), "--base", str(base), "--transform", "tcpr",
                            "--centroid", "base-knn", "--k-neighbors", "50", "--episodes", "40",
                            "--q", "5", "--seed", "42", "--out", str(out), "--plot", str(out) + ".svg"])
            assert code == 0
            outs.append(out)
        for suffix in ("", ".summary", ".svg"):
            assert open(f"{outs[0]}{suffix}", "rb").read() == open(f"{outs[1]}{suffix}", "rb").read()

    def test_summary_contents(self, banks, tmp_path):
        base, novel = banks
        out = tmp_path / "r.csv"
        assert run_cli(["evaluate", "--novel", str(novel), "--base", str(base), "--transform", "cl2n",
                        "--classifier", "cosine", "--epochs", "5", "--episodes", "10", "--q", "5",
                        "--out", str(out)]) == 0
        [row] = read_csv_rows(f"{out}.summary")
        assert tuple(row) == SUMMARY_FIELDS
        assert row["transform"] == "cl2n" and row["classifier"] == "cosine"
        per_ep = read_csv_rows(out)
        assert len(per_ep) == 10
        assert float(row["mean_acc"]) == pytest.approx(np.mean([float(r["accuracy"]) for r in per_ep]), abs=5e-5)

    def test_sweep_k(self, banks, tmp_path):
        base, novel = banks
        out, plot = tmp_path / "k.csv", tmp_path / "k.svg"
        assert run_cli(["sweep-k", "--novel", str(novel), "--base", str(base), "--transform", "tcpr",
                        "--k-neighbors", "5,50,200", "--episodes", "20", "--q", "5",
                        "--out", str(out), "--plot", str(plot)]) == 0
        assert [r["k"] for r in read_csv_rows(out)] == ["5", "50", "200"]
        assert open(plot).read().count("<circle ") == 3

    def test_sweep_k_requires_base_knn(self, banks):
        base, novel = banks
        assert run_cli(["sweep-k", "--novel", str(novel), "--base", str(base),
                        "--k-neighbors", "5,50"]) == 1


class TestGenAndInspect:
    def test_round_trip(self, banks, capsys):
        base, novel = banks
        b = load_bank(base)
        assert (b.n, b.dim, b.num_classes) == (360, 16, 12)
        assert run_cli(["inspect", str(novel)]) == 0
        out = capsys.readouterr().out
        assert "rows:        150" in out and "classes:     6" in out

    def test_invalid_spec(self, tmp_path):
        assert run_cli(["gen-synthetic", "--classes", "2", "--per-class", "0",
                        "--out", str(tmp_path / "x.bin")]) == 1


class TestReportCsv:
    def test_line_counts(self, tmp_path):
        out = tmp_path / "r.csv"
        write_report_csv(make_report([0.5, 1.0]), out)
        assert len(data_lines(out)) == 3
        assert data_lines(out)[0].strip() == "episode,accuracy"
        assert len(data_lines(f"{out}.summary")) == 2

    def test_four_decimals_and_parse(self, tmp_path):
        out = tmp_path / "r.csv"
        report = make_report([0.8, 0.6, 1.0, 0.6])
        write_report_csv(report, out)
        [row] = read_csv_rows(f"{out}.summary")
        assert row["mean_acc"] == "0.7500"
        assert row["ci95"] == "0.1877"
        assert abs(float(row["mean_acc"]) - report.mean_acc) <= 5e-5

    def test_config_header(self, tmp_path):
        out = tmp_path / "r.csv"
        write_report_csv(make_report([0.5, 1.0]), out)
        comments = [line for line in open(f"{out}.summary") if line.startswith("#")]
        assert "# transform=l2\n" in comments and "# seed=0\n" in comments


class TestPlot:
    def test_single_point(self, tmp_path):
        path = tmp_path / "p.svg"
        emit_plot([(1.0, 0.5)], path)
        root = ET.parse(path).getroot()
        assert len(root.findall(".//{http://www.w3.org/2000/svg}circle")) == 1

    def test_pure(self, tmp_path):
        curve = run_bias_simulation(SimSpec(n_tasks=2000, seed=1))
        emit_plot(curve, tmp_path / "a.svg", comments=["# x=1"])
        emit_plot(curve, tmp_path / "b.svg", comments=["# x=1"])
        assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()

    def test_twenty_bins(self):
        xs = list(np.linspace(0.1, 2.0, 20))
        ys = list(np.linspace(0.5, 0.9, 20))
        svg = line_chart([("acc", xs, ys)], xlabel="distance", ylabel="accuracy")
        root = ET.fromstring(svg)
        ns = "{http://www.w3.org/2000/svg}"
        assert len(root.findall(f".//{ns}circle")) == 20
        [poly] = root.findall(f".//{ns}polyline")
        assert len(poly.get("points").split()) == 20
        assert "distance" in svg and "accuracy" in svg

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            line_chart([("x", [], [])])
