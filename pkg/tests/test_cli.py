import json
import os

import numpy as np
import pytest

from gofd.cli import EXAMPLE_PRESETS, build_parser, main, plot_script, resolve_config
from gofd.spectral_kernel import load_stencil


def run(capsys, *argv):
    code = main(list(argv))
    return code, capsys.readouterr()


class TestKernel:
    def test_laplacian_dump(self, tmp_path, capsys):
        code, out = run(capsys, "kernel", "--s", "1", "--P", "2", "--M", "1024", "--out", str(tmp_path))
        assert code == 0
        T = load_stencil(tmp_path / "stencil_s1.0_P2.bin")
        assert T.center == pytest.approx(4.0, abs=1e-10)
        rows = (tmp_path / "stencil_s1.0_P2.csv").read_text().splitlines()
        grid = np.array([[float(v) for v in r.split(",")[1:]] for r in rows[1:]])
        np.testing.assert_array_equal(grid, grid.T)
        assert grid[2, 1] == pytest.approx(-1.0, abs=1e-10)

    def test_reload_bit_identical(self, tmp_path, capsys):
        run(capsys, "kernel", "--s", "0.5", "--P", "3", "--out", str(tmp_path))
        a = (tmp_path / "stencil_s0.5_P3.bin").read_bytes()
        run(capsys, "kernel", "--s", "0.5", "--P", "3", "--out", str(tmp_path))
        assert (tmp_path / "stencil_s0.5_P3.bin").read_bytes() == a


class TestSolve:
    def test_rings(self, tmp_path, capsys):
        code, out = run(capsys, "solve", "--domain", "disk", "--s", "0.5", "--cloud", "rings", "--size", "20",
                        "--method", "delaunay", "--out", str(tmp_path))
        assert code == 0
        rep = json.loads((tmp_path / "report_delaunay.json").read_text())
        assert rep["final_relative_residual"] <= 1e-10
        assert (tmp_path / "config.ini").exists()

    def test_zero_source(self, tmp_path, capsys):
        code, _ = run(capsys, "solve", "--f", "0", "--size", "8", "--method", "mls", "--out", str(tmp_path))
        assert code == 0
        u = np.loadtxt(tmp_path / "solution_mls.txt")
        assert not np.any(u[:, 2])

    def test_missing_cloud_file(self, tmp_path, capsys):
        code, out = run(capsys, "solve", "--cloud", "file:%s" % (tmp_path / "nope.mesh"), "--out", str(tmp_path))
        assert code == 1
        doc = json.loads(out.out.strip().splitlines()[-1])
        assert doc["kind"] == "ParseError"
        assert json.loads((tmp_path / "error.json").read_text())["kind"] == "ParseError"

    @pytest.mark.parametrize(
        "argv",
        [["solve", "--method", "fem"], ["bogus"], ["solve", "--n", "x"], ["solve", "--domain", "torus"],
         ["solve", "--s", "0.2,0.4"]],
    )
    def test_usage_errors(self, tmp_path, capsys, argv):
        code, _ = run(capsys, *argv, *(["--out", str(tmp_path)] if argv[0] == "solve" else []))
        assert code == 2

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[experiment]\ns = 0.25\nsize = 8\nmethod = mls\n")
        code, _ = run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path / "o"))
        assert code == 0
        assert "s = 0.25" in (tmp_path / "o" / "config.ini").read_text()

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[experiment]\ncolour = red\n")
        assert run(capsys, "solve", "--config", str(cfg), "--out", str(tmp_path))[0] == 2


class TestConvergence:
    def test_disk_ladder_deterministic(self, tmp_path, capsys):
        args = ["convergence", "--ladder", "5,8,12", "--s", "0.5", "--method", "mls"]
        assert run(capsys, *args, "--out", str(tmp_path / "a"))[0] == 0
        assert run(capsys, *args, "--out", str(tmp_path / "b"))[0] == 0
        name = "convergence_disk_rings_mls_s0.5.csv"
        a = (tmp_path / "a" / name).read_text()
        assert a == (tmp_path / "b" / name).read_text()
        assert a.splitlines()[-1].startswith("# fitted_order=")

    def test_envelope(self, tmp_path, capsys):
        code, _ = run(capsys, "convergence", "--ladder", "5,8,12", "--method", "delaunay", "--perturb", "0.4",
                      "--seeds", "2", "--out", str(tmp_path))
        assert code == 0
        files = sorted(os.listdir(tmp_path))
        assert "convergence_disk_rings_delaunay_s0.5_envelope.csv" in files
        assert sum(f.endswith(("_seed0.csv", "_seed1.csv")) for f in files) == 2
        env = (tmp_path / "convergence_disk_rings_delaunay_s0.5_envelope.csv").read_text().splitlines()
        assert env[0] == "N_v,h_bar,min_error,median_error,max_error"
        assert len(env) == 4

    def test_short_ladder(self, tmp_path, capsys):
        assert run(capsys, "convergence", "--ladder", "5,8", "--out", str(tmp_path))[0] == 2

    def test_paper_example_preset(self):
        args = build_parser().parse_args(["convergence", "--paper-example", "2", "--s", "0.5"])
        cfg = resolve_config(args)
        assert cfg["domain"] == "lshape" and cfg["cloud"] == "fixture" and cfg["s"] == "0.5"
        assert set(EXAMPLE_PRESETS) == {"1", "2", "3"}


class TestPlot:
    def _csv(self, path, rows):
        path.write_text("N_v,h_bar,l2_error\n" + "".join("%d,%r,%r\n" % (n, n ** -0.5, e) for n, e in rows))

    def test_one_csv(self, tmp_path):
        csv = tmp_path / "data" / "convergence_disk_rings_mls_s0.5.csv"
        csv.parent.mkdir()
        self._csv(csv, [(100, 0.1), (400, 0.05), (1600, 0.025)])
        text = plot_script([str(csv)], str(tmp_path))
        assert "read('data/convergence_disk_rings_mls_s0.5.csv')" in text
        compile(text, "plot.py", "exec")
        # slope triangle anchored at the first point (half its error) and the last N_v
        assert "[100, 1600, 1600, 100], [0.05, 0.0125," in text

    def test_empty(self, tmp_path):
        text = plot_script([], str(tmp_path))
        assert all(ln.startswith("#") for ln in text.strip().splitlines())

    def test_missing_series_skipped(self, tmp_path, capsys):
        out = tmp_path / "p.py"
        code, res = run(capsys, "plot", str(tmp_path / "gone.csv"), "--out", str(out))
        assert code == 0
        assert "import" not in out.read_text()
