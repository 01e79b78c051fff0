import subprocess
import sys
from pathlib import Path

import pytest

from relayee_plots.figures import (FigureSpec, SchemaMismatch, read_rows,
                                   render, verdict_flip)

DATA = Path(__file__).parent / "data"

REFERENCE = {
    "convergence_stat_h.csv": "convergence",
    "convergence_stat_g.csv": "convergence",
    "gee_vs_snr_rho05.csv": "gee_vs_snr",
    "gee_vs_snr_rho01_09.csv": "gee_vs_snr",
    "beam_scan.csv": "beam_scan",
}


class TestSchema:
    def test_reference_files_parse(self):
        for name, kind in REFERENCE.items():
            rows = read_rows(DATA / name, kind)
            assert rows, name

    def test_wrong_schema_names_columns(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("p_dbw,mystery\n-9,1\n")
        with pytest.raises(SchemaMismatch) as exc:
            read_rows(bad, "beam_scan")
        assert "mystery" in str(exc.value)
        assert "lam1" in str(exc.value)

    def test_ragged_row_rejected(self, tmp_path):
        bad = tmp_path / "ragged.csv"
        header = ("algorithm", "start", "iteration", "gee", "snr_db",
                  "rho", "seed")
        bad.write_text(",".join(header) + "\nperfect,0,1\n")
        with pytest.raises(SchemaMismatch) as exc:
            read_rows(bad, "convergence")
        assert ":2:" in str(exc.value)

    def test_empty_file_rejected(self, tmp_path):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        with pytest.raises(SchemaMismatch):
            read_rows(empty, "convergence")

    def test_unknown_kind_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            FigureSpec(kind="pie", input_csv=tmp_path / "x.csv",
                       output_image=tmp_path / "x.svg")


class TestRender:
    @pytest.mark.parametrize("name,kind", sorted(REFERENCE.items()))
    def test_reference_figures(self, tmp_path, name, kind):
        out = tmp_path / (Path(name).stem + ".svg")
        render(FigureSpec(kind=kind, input_csv=DATA / name, output_image=out))
        assert out.exists() and out.stat().st_size > 0
        assert out.read_text().lstrip().startswith("<?xml")

    def test_empty_but_valid_csv(self, tmp_path):
        src = tmp_path / "empty_rows.csv"
        header = (DATA / "beam_scan.csv").read_text().splitlines()[0]
        src.write_text(header + "\n")
        out = tmp_path / "empty.svg"
        render(FigureSpec(kind="beam_scan", input_csv=src, output_image=out))
        assert out.exists() and out.stat().st_size > 0

    def test_render_is_deterministic(self, tmp_path):
        outs = []
        for i in range(2):
            out = tmp_path / f"scan_{i}.svg"
            render(FigureSpec(kind="beam_scan",
                              input_csv=DATA / "beam_scan.csv",
                              output_image=out))
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_png_output(self, tmp_path):
        out = tmp_path / "scan.png"
        render(FigureSpec(kind="beam_scan", input_csv=DATA / "beam_scan.csv",
                          output_image=out))
        assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


class TestVerdictFlip:
    def test_reference_flip_near_minus_nine(self, tmp_path):
        rows = read_rows(DATA / "beam_scan.csv", "beam_scan")
        flip = verdict_flip(sorted(rows, key=lambda r: float(r["p_dbw"])))
        assert flip is not None
        assert abs(flip - (-9.0)) <= 1.0

    def test_flip_is_midpoint(self):
        rows = [dict(p_dbw="-10", fp_optimal="1"),
                dict(p_dbw="-9", fp_optimal="1"),
                dict(p_dbw="-8", fp_optimal="0")]
        assert verdict_flip(rows) == -8.5

    def test_no_flip_returns_none(self):
        assert verdict_flip([dict(p_dbw="-10", fp_optimal="1")]) is None
        assert verdict_flip([]) is None
        rows = [dict(p_dbw="-10", fp_optimal="0"),
                dict(p_dbw="-9", fp_optimal="0")]
        assert verdict_flip(rows) is None

    def test_threshold_line_drawn_in_svg(self, tmp_path):
        out = tmp_path / "scan.svg"
        render(FigureSpec(kind="beam_scan", input_csv=DATA / "beam_scan.csv",
                          output_image=out))
        assert "optimality threshold" in out.read_text()


class TestCli:
    def _run(self, *args):
        return subprocess.run(
            [sys.executable, "-m", "relayee_plots.cli", *args],
            capture_output=True, text=True)

    def test_render_ok(self, tmp_path):
        out = tmp_path / "fig.svg"
        res = self._run("render", "--kind", "gee_vs_snr",
                        "--in", str(DATA / "gee_vs_snr_rho05.csv"),
                        "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert out.exists()

    def test_schema_mismatch_exit_and_diagnostic(self, tmp_path):
        res = self._run("render", "--kind", "convergence",
                        "--in", str(DATA / "beam_scan.csv"),
                        "--out", str(tmp_path / "fig.svg"))
        assert res.returncode == 2
        assert "iteration" in res.stderr  # names a missing column

    def test_empty_valid_csv_exit_zero(self, tmp_path):
        src = tmp_path / "empty_rows.csv"
        header = (DATA / "gee_vs_snr_rho05.csv").read_text().splitlines()[0]
        src.write_text(header + "\n")
        out = tmp_path / "fig.svg"
        res = self._run("render", "--kind", "gee_vs_snr",
                        "--in", str(src), "--out", str(out))
        assert res.returncode == 0, res.stderr
        assert out.exists()

    def test_missing_input_exit_two(self, tmp_path):
        res = self._run("render", "--kind", "beam_scan",
                        "--in", str(tmp_path / "nope.csv"),
                        "--out", str(tmp_path / "fig.svg"))
        assert res.returncode == 2

    def test_bad_kind_exit_two(self, tmp_path):
        res = self._run("render", "--kind", "pie",
                        "--in", str(DATA / "beam_scan.csv"),
                        "--out", str(tmp_path / "fig.svg"))
        assert res.returncode == 2
