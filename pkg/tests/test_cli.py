import csv
import math
import subprocess
import sys

import numpy as np
import pytest

from qontrol.cli import CONVENTION_NOTE, main

COARSE = ["--dt", "1e-3"]


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array(rows[1:], dtype=float)


def read_manifest(path):
    return dict(
        line.split("=", 1) for line in path.read_text().splitlines() if line and not line.startswith("#")
    )


class TestTraj:
    def test_analytic_peak(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["traj", "--form", "analytic", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["t_over_T", "re_a11", "im_a11", "re_a12", "im_a12", "p1", "p2", "defect"]
        first_half = data[data[:, 0] <= 0.5]
        k = np.argmax(first_half[:, 6])
        assert first_half[k, 6] == pytest.approx(1.0, abs=1e-8)
        # the peak is quartically flat, so rounding spreads the argmax around T/4
        assert first_half[k, 0] == pytest.approx(0.25, abs=1e-3)

    def test_first_order_unitarity_and_manifest(self, tmp_path):
        out = tmp_path / "t.csv"
        assert main(["traj", "--out", str(out), "--stride", "10"]) == 0
        _, data = read_csv(out)
        assert np.max(np.abs(data[:, 5] + data[:, 6] - 1)) <= 1e-9
        assert data[-1, 0] == pytest.approx(1.0, abs=1e-5)
        sidecar = tmp_path / "t.csv.run_manifest.txt"
        manifest = read_manifest(sidecar)
        assert manifest["command"] == "traj"
        assert manifest["stride"] == "10"
        assert manifest["diverged_at_over_T"] == ""
        assert sidecar.read_text().endswith(CONVENTION_NOTE)

    def test_second_order_flags_without_failing(self, tmp_path):
        out = tmp_path / "s.csv"
        args = ["traj", "--form", "second", "--delta-e", "0.5", "--t-end", "0.35",
                "--defect-threshold", "1e-8", "--out", str(out)]
        assert main(args) == 0
        diverged = float(read_manifest(tmp_path / "s.csv.run_manifest.txt")["diverged_at_over_T"])
        assert 0.25 < diverged < 0.35

    def test_second_order_halt_exits_2_without_output(self, tmp_path):
        out = tmp_path / "s.csv"
        args = ["traj", "--form", "second", "--delta-e", "0.5", "--t-end", "0.35",
                "--defect-threshold", "1e-8", "--halt-on-divergence", "--out", str(out)]
        assert main(args) == 2
        assert list(tmp_path.iterdir()) == []


class TestUsage:
    @pytest.mark.parametrize(
        "args",
        [
            [],
            ["bogus"],
            ["traj", "--method", "leapfrog"],
            ["traj", "--dt", "-1"],
            ["traj", "--dt", "abc"],
            ["traj", "--delta-e", "-0.1"],
            ["traj", "--workers", "0"],
            ["sweep"],
            ["sweep", "--delta-e-list", "0.1", "--thresholds", "1.5"],
            ["series", "--order", "10", "--radius"],
            ["figure", "4"],
        ],
    )
    def test_exit_1(self, tmp_path, args, capsys):
        if args and args[0] != "figure":
            args = args + ["--out", str(tmp_path / "x.csv")]
        assert main(args) == 1
        assert "qontrol" in capsys.readouterr().err
        assert not (tmp_path / "x.csv").exists()

    def test_io_failure_exits_3(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert main(["traj", "--form", "analytic", *COARSE, "--out", str(blocker / "t.csv")]) == 3

    def test_series_overflow_exits_2(self, tmp_path):
        assert main(["series", "--coupling", "1e150", "--order", "10", "--out", str(tmp_path / "c.csv")]) == 2


class TestConfig:
    def test_file_then_flag_override(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("# sweep settings\ndelta-e-list = 0.0, 0.7\nthresholds = 0.8\ndt = 1e-4  # coarse\n")
        out = tmp_path / "s.csv"
        assert main(["sweep", "--config", str(cfg), "--thresholds", "0.8,0.95", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["delta_e_over_E", "threshold", "fraction"]
        assert data[:, 1].tolist() == [0.8, 0.8, 0.95, 0.95]
        assert data[:, 0].tolist() == [0.0, 0.7, 0.0, 0.7]
        manifest = read_manifest(tmp_path / "s.csv.run_manifest.txt")
        assert manifest["dt"] == "0.0001"
        assert manifest["thresholds"] == "0.8,0.95"

    @pytest.mark.parametrize("text", ["nonsense line\n", "colour = blue\n", "order = many\n"])
    def test_bad_file(self, tmp_path, text):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(text)
        assert main(["series", "--config", str(cfg), "--out", str(tmp_path / "c.csv")]) == 1


class TestSweep:
    def test_caption_row_and_determinism(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        base = ["sweep", "--delta-e-list", "0.2,0.7", "--thresholds", "0.95,0.8"]
        assert main(base + ["--workers", "1", "--out", str(a)]) == 0
        assert main(base + ["--workers", "4", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        _, data = read_csv(a)
        row = {(d, th): f for d, th, f in data}
        assert row[(0.2, 0.95)] == pytest.approx(0.34, abs=0.05)

    def test_point_failure_names_parameters(self, tmp_path, capsys):
        args = ["sweep", "--delta-e-list", "0.3", "--thresholds", "0.9",
                "--defect-threshold", "1e-300", "--out", str(tmp_path / "s.csv")]
        assert main(args) == 2
        err = capsys.readouterr().err
        assert "0.3" in err and "0.9" in err
        assert not (tmp_path / "s.csv").exists()


class TestEffect:
    def test_zero_splitting(self, tmp_path):
        out = tmp_path / "e.csv"
        assert main(["effect", "--delta-e", "0", "--out", str(out)]) == 0
        header, data = read_csv(out)
        assert header == ["t_over_T", "effect_percent"]
        assert np.all(data[:, 1] == 0)

    def test_fit_block(self, tmp_path, capsys):
        out = tmp_path / "e.csv"
        assert main(["effect", "--delta-e", "0.01", "--fit", "--stride", "100", "--out", str(out)]) == 0
        printed = capsys.readouterr().out.splitlines()
        keys = [line.split("=", 1)[0] for line in printed]
        assert keys == ["c1", "c2", "c3", "residual", "time_unit"]
        assert (tmp_path / "e.csv.fit.txt").read_text().splitlines() == printed
        manifest = read_manifest(tmp_path / "e.csv.run_manifest.txt")
        assert float(manifest["c1"]) > 0


class TestSeries:
    def test_degenerate_radius(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        assert main(["series", "--order", "80", "--radius", "--out", str(out)]) == 0
        line = capsys.readouterr().out.strip()
        assert line.startswith("radius_over_T=")
        assert float(line.split("=")[1]) > 0.25
        header, data = read_csv(out)
        assert header == ["n", "re_alpha", "im_alpha", "re_beta", "im_beta"]
        assert data.shape == (81, 5)

    def test_uncoupled_radius_is_unbounded(self, tmp_path, capsys):
        assert main(["series", "--coupling", "0", "--radius", "--out", str(tmp_path / "c.csv")]) == 0
        assert capsys.readouterr().out.strip() == "radius_over_T=inf"

    def test_split_radius_finite(self, tmp_path, capsys):
        assert main(["series", "--delta-e", "0.5", "--radius", "--out", str(tmp_path / "c.csv")]) == 0
        value = float(capsys.readouterr().out.strip().split("=")[1])
        assert math.isfinite(value) and value > 0


class TestFigures:
    def test_figure1(self, tmp_path):
        assert main(["figure", "1", "--out", str(tmp_path)]) == 0
        names = sorted(p.name for p in tmp_path.iterdir())
        assert names == sorted([
            "figure1_trajectory.csv", "figure1_p1.csv", "figure1_p2.csv",
            "figure1_sum.csv", "figure1.run_manifest.txt",
        ])
        header, data = read_csv(tmp_path / "figure1_sum.csv")
        assert header == ["x", "p1_plus_p2"]
        assert np.max(np.abs(data[:, 1] - 1)) <= 1e-9

    def test_figure2(self, tmp_path):
        assert main(["figure", "2", "--out", str(tmp_path)]) == 0
        _, data = read_csv(tmp_path / "figure2_sweep.csv")
        assert data.shape == (84, 3)
        for th in ("0.95", "0.9", "0.8", "0.7"):
            header, curve = read_csv(tmp_path / f"figure2_threshold_{th}.csv")
            assert header == ["x", "fraction"]
            assert curve.shape == (21, 2)
            assert np.all(np.diff(curve[:, 0]) > 0)

    def test_figure3(self, tmp_path):
        assert main(["figure", "3", "--out", str(tmp_path)]) == 0
        _, effect = read_csv(tmp_path / "figure3_effect.csv")
        _, error = read_csv(tmp_path / "figure3_error.csv")
        assert effect.shape == error.shape
        assert error[:, 1].max() < 1e-3 * effect[:, 1].max()


def test_module_entry_point(tmp_path):
    out = tmp_path / "t.csv"
    proc = subprocess.run(
        [sys.executable, "-m", "qontrol", "traj", "--form", "analytic", *COARSE, "--out", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
