"""Rendering tests: coordinate fidelity, determinism, and CLI behavior.

Pixels are not asserted; the contract under test is the ``.coords.json``
sidecar (exact plotted values), the chi-squared report, error handling,
and that rendering never mutates its input.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np
import pytest

from nngpfig.cli import main
from nngpfig.figures import FigureRequest, render, render_decay, render_overlay
from nngpfig.parser import RESULTS_HEADER, CsvFormatError

DATA = Path(__file__).parent / "data"
DESK_CSV = DATA / "appendix_a_desk.csv"


def write_results(path: Path, rows: list[str], kind: str = "convergence",
                  meta: dict | None = None) -> Path:
    meta_line = json.dumps(meta if meta is not None else {"seed": 7},
                           sort_keys=True, separators=(",", ":"))
    lines = [f"# nngplab {kind}", f"# {meta_line}",
             ",".join(RESULTS_HEADER), *rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_power_law(path: Path, widths=(16, 64, 256, 1024),
                    amplitude: float = 2.0, slope: float = -0.5) -> Path:
    rows = [
        f"{n},w1,{amplitude * n ** slope!r},{0.1 * amplitude * n ** slope!r},1000,4,7"
        for n in widths
    ]
    return write_results(path, rows)


def write_samples(path: Path, values: np.ndarray,
                  meta: dict | None = None) -> Path:
    meta_line = json.dumps(meta if meta is not None else {},
                           sort_keys=True, separators=(",", ":"))
    lines = ["# nngplab limit_samples", f"# {meta_line}", "value",
             *(repr(float(v)) for v in values)]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def gaussian_samples(count: int = 50_000, variance: float = 0.64,
                     seed: int = 123) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, math.sqrt(variance), size=count)


class TestDecay:
    def test_coords_match_csv_floats_exactly(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv")
        out = tmp_path / "fig.png"
        doc = render_decay(FigureRequest(str(csv_path), "decay", str(out)))
        series = doc["series"]["w1"]
        assert series["widths"] == [16, 64, 256, 1024]
        assert series["values"] == [2.0 * n ** -0.5 for n in series["widths"]]
        assert series["stds"] == [0.2 * n ** -0.5 for n in series["widths"]]
        sidecar = json.loads((tmp_path / "fig.png.coords.json").read_text())
        assert sidecar == doc
        assert out.exists() and out.stat().st_size > 0

    def test_series_parallel_to_reference_slope(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv", slope=-0.5)
        doc = render_decay(FigureRequest(str(csv_path), "decay",
                                         str(tmp_path / "fig.png")))
        series = doc["series"]["w1"]
        logs = np.polyfit(np.log(series["widths"]), np.log(series["values"]), 1)
        assert logs[0] == pytest.approx(-0.5, abs=1e-12)
        assert -0.5 in doc["reference_slopes"]
        assert doc["anchor"]["width"] == 16

    def test_sidecar_byte_stable(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv")
        out = tmp_path / "fig.png"
        render_decay(FigureRequest(str(csv_path), "decay", str(out)))
        first = (tmp_path / "fig.png.coords.json").read_bytes()
        render_decay(FigureRequest(str(csv_path), "decay", str(out)))
        assert (tmp_path / "fig.png.coords.json").read_bytes() == first

    def test_input_is_not_mutated(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv")
        before = csv_path.read_bytes()
        render_decay(FigureRequest(str(csv_path), "decay",
                                   str(tmp_path / "fig.svg")))
        assert csv_path.read_bytes() == before

    def test_custom_reference_slopes(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv")
        doc = render_decay(FigureRequest(str(csv_path), "decay",
                                         str(tmp_path / "fig.png"),
                                         reference_slopes=(-1.0,)))
        assert doc["reference_slopes"] == [-1.0]

    def test_desk_fixture_renders_three_series(self, tmp_path):
        doc = render_decay(FigureRequest(str(DESK_CSV), "decay",
                                         str(tmp_path / "desk.png")))
        assert set(doc["series"]) == {"kolmogorov", "w1", "w2"}
        for data in doc["series"].values():
            assert len(data["widths"]) == 7

    def test_empty_table_rejected(self, tmp_path):
        csv_path = write_results(tmp_path / "r.csv", [])
        with pytest.raises(CsvFormatError, match="no data rows"):
            render_decay(FigureRequest(str(csv_path), "decay",
                                       str(tmp_path / "fig.png")))

    def test_single_width_rejected(self, tmp_path):
        csv_path = write_results(tmp_path / "r.csv",
                                 ["16,w1,0.5,0.02,1000,4,7"])
        with pytest.raises(CsvFormatError, match="at least 2"):
            render_decay(FigureRequest(str(csv_path), "decay",
                                       str(tmp_path / "fig.png")))

    def test_non_positive_values_rejected(self, tmp_path):
        csv_path = write_results(tmp_path / "r.csv", [
            "16,w1,0.5,0.02,1000,4,7",
            "32,w1,0.0,0.02,1000,4,7",
        ])
        with pytest.raises(CsvFormatError, match="non-positive"):
            render_decay(FigureRequest(str(csv_path), "decay",
                                       str(tmp_path / "fig.png")))


class TestOverlay:
    def test_matched_gaussian_passes_chi_squared(self, tmp_path, capsys):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(),
                             meta={"limit_variance": 0.64})
        doc = render_overlay(FigureRequest(str(path), "overlay",
                                           str(tmp_path / "fig.png")))
        printed = capsys.readouterr().out
        assert "chi-squared (20 equiprobable bins, 19 dof)" in printed
        assert "p-value=" in printed
        assert doc["p_value"] > 0.01
        assert doc["chi2_dof"] == 19
        assert doc["sample_count"] == 50_000
        assert doc["variance"] == 0.64

    def test_explicit_variance_overrides_metadata(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(),
                             meta={"limit_variance": 123.0})
        doc = render_overlay(FigureRequest(str(path), "overlay",
                                           str(tmp_path / "fig.png"),
                                           variance=0.64))
        assert doc["variance"] == 0.64
        assert doc["p_value"] > 0.01

    def test_wrong_variance_fails_chi_squared(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples())
        doc = render_overlay(FigureRequest(str(path), "overlay",
                                           str(tmp_path / "fig.png"),
                                           variance=2.0))
        assert doc["p_value"] < 1e-6

    def test_sidecar_byte_stable(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(1000),
                             meta={"limit_variance": 0.64})
        out = tmp_path / "fig.png"
        render_overlay(FigureRequest(str(path), "overlay", str(out)))
        first = (tmp_path / "fig.png.coords.json").read_bytes()
        render_overlay(FigureRequest(str(path), "overlay", str(out)))
        assert (tmp_path / "fig.png.coords.json").read_bytes() == first

    def test_missing_variance_everywhere(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(200))
        with pytest.raises(ValueError, match="limit_variance"):
            render_overlay(FigureRequest(str(path), "overlay",
                                         str(tmp_path / "fig.png")))

    def test_non_positive_variance(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(200))
        with pytest.raises(ValueError, match="positive"):
            render_overlay(FigureRequest(str(path), "overlay",
                                         str(tmp_path / "fig.png"),
                                         variance=0.0))

    def test_too_few_samples(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(99),
                             meta={"limit_variance": 0.64})
        with pytest.raises(ValueError, match=">= 100 samples, got 99"):
            render_overlay(FigureRequest(str(path), "overlay",
                                         str(tmp_path / "fig.png")))


class TestRequestValidation:
    def test_unknown_kind(self, tmp_path):
        with pytest.raises(ValueError, match="kind"):
            FigureRequest("in.csv", "scatter", str(tmp_path / "fig.png"))

    def test_unknown_image_extension(self, tmp_path):
        with pytest.raises(ValueError, match="extension"):
            FigureRequest("in.csv", "decay", str(tmp_path / "fig.pdf"))

    def test_svg_output(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv")
        out = tmp_path / "fig.svg"
        render(FigureRequest(str(csv_path), "decay", str(out)))
        assert out.read_bytes().lstrip().startswith(b"<?xml")

    def test_render_dispatches_overlay(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(500),
                             meta={"limit_variance": 0.64})
        doc = render(FigureRequest(str(path), "overlay",
                                   str(tmp_path / "fig.png")))
        assert doc["kind"] == "overlay"


class TestCli:
    def test_decay_roundtrip(self, tmp_path, capsys):
        csv_path = write_power_law(tmp_path / "r.csv")
        out = tmp_path / "fig.png"
        code = main(["decay", "--in", str(csv_path), "--out", str(out)])
        assert code == 0
        assert out.exists()
        assert (tmp_path / "fig.png.coords.json").exists()

    def test_decay_custom_slopes_equals_form(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv")
        out = tmp_path / "fig.png"
        assert main(["decay", "--in", str(csv_path), "--out", str(out),
                     "--slopes=-1.0,-0.5"]) == 0
        sidecar = json.loads((tmp_path / "fig.png.coords.json").read_text())
        assert sidecar["reference_slopes"] == [-1.0, -0.5]

    def test_overlay_prints_p_value(self, tmp_path, capsys):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(2000),
                             meta={"limit_variance": 0.64})
        code = main(["overlay", "--in", str(path),
                     "--out", str(tmp_path / "fig.png")])
        assert code == 0
        assert "p-value=" in capsys.readouterr().out

    def test_overlay_variance_flag(self, tmp_path):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(2000))
        assert main(["overlay", "--in", str(path),
                     "--out", str(tmp_path / "fig.png"),
                     "--variance", "0.64"]) == 0

    def test_malformed_csv_exits_2_with_line(self, tmp_path, capsys):
        csv_path = write_results(tmp_path / "r.csv", [
            "16,w1,0.5,0.02,1000,4,7",
            "32,w1,broken,0.02,1000,4,7",
        ])
        code = main(["decay", "--in", str(csv_path),
                     "--out", str(tmp_path / "fig.png")])
        assert code == 2
        err = capsys.readouterr().err
        assert "line 5" in err

    def test_missing_input_exits_2(self, tmp_path, capsys):
        code = main(["decay", "--in", str(tmp_path / "absent.csv"),
                     "--out", str(tmp_path / "fig.png")])
        assert code == 2
        assert "cannot read" in capsys.readouterr().err

    def test_missing_variance_exits_2(self, tmp_path, capsys):
        path = write_samples(tmp_path / "s.csv", gaussian_samples(200))
        code = main(["overlay", "--in", str(path),
                     "--out", str(tmp_path / "fig.png")])
        assert code == 2
        assert "variance" in capsys.readouterr().err

    def test_unwritable_output_exits_1(self, tmp_path, capsys):
        csv_path = write_power_law(tmp_path / "r.csv")
        code = main(["decay", "--in", str(csv_path),
                     "--out", str(tmp_path / "no_dir" / "fig.png")])
        assert code == 1
        assert "no_dir" in capsys.readouterr().err

    def test_no_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_bad_slope_list_exits_2(self, tmp_path):
        csv_path = write_power_law(tmp_path / "r.csv")
        with pytest.raises(SystemExit) as excinfo:
            main(["decay", "--in", str(csv_path),
                  "--out", str(tmp_path / "fig.png"), "--slopes=abc"])
        assert excinfo.value.code == 2
