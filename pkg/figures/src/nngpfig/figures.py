"""Decay and overlay figures from results CSV files.

Rendering is read-only on its inputs.  Pixel output is not part of the
contract; instead every render writes a ``<image>.coords.json`` sidecar
holding the exact plotted coordinates (the floats parsed from the CSV,
serialized back via their shortest-repr form), which is byte-stable
across reruns of identical inputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

from .parser import CsvFormatError, read_results, read_samples

DEFAULT_REFERENCE_SLOPES = (-0.5, -0.25, -0.125)
FIGURE_KINDS = ("decay", "overlay")
IMAGE_SUFFIXES = (".png", ".svg")
OVERLAY_BINS = 20


@dataclass(frozen=True)
class FigureRequest:
    """One figure to render.

    ``reference_slopes`` applies to decay figures; ``variance`` applies
    to overlay figures (``None`` falls back to the ``limit_variance``
    field of the samples file's metadata).
    """

    input_path: str
    kind: str
    output_path: str
    reference_slopes: tuple[float, ...] = field(default=DEFAULT_REFERENCE_SLOPES)
    variance: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"kind: expected one of {FIGURE_KINDS}, got {self.kind!r}")
        suffix = Path(self.output_path).suffix.lower()
        if suffix not in IMAGE_SUFFIXES:
            raise ValueError(
                f"output_path: image format is chosen by extension, expected one of "
                f"{IMAGE_SUFFIXES}, got {suffix!r}"
            )


def render(request: FigureRequest) -> dict:
    if request.kind == "decay":
        return render_decay(request)
    return render_overlay(request)


def _write_sidecar(request: FigureRequest, doc: dict) -> None:
    sidecar = Path(str(request.output_path) + ".coords.json")
    sidecar.write_text(
        json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def render_decay(request: FigureRequest) -> dict:
    """Log-log distance-vs-width chart with error bars and reference slopes.

    One series per metric present in the CSV; dashed reference lines at
    the requested slopes, anchored at the smallest plotted width.
    """
    table = read_results(request.input_path)
    if not table.rows:
        raise CsvFormatError(f"{request.input_path}: no data rows to plot")
    series = {}
    for metric in table.metrics():
        rows = table.series(metric)
        widths = [row.width for row in rows]
        if len(set(widths)) < 2:
            raise CsvFormatError(
                f"{request.input_path}: metric {metric!r} has {len(set(widths))} "
                f"width(s); a decay chart needs at least 2"
            )
        if any(row.value <= 0.0 for row in rows):
            raise CsvFormatError(
                f"{request.input_path}: metric {metric!r} has non-positive values; "
                f"cannot plot on log axes"
            )
        series[metric] = {
            "widths": widths,
            "values": [row.value for row in rows],
            "stds": [row.std for row in rows],
        }

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    for metric, data in series.items():
        ax.errorbar(data["widths"], data["values"], yerr=data["stds"],
                    marker="o", capsize=3, label=metric)
    anchor_width = min(min(d["widths"]) for d in series.values())
    anchor_value = max(
        d["values"][d["widths"].index(anchor_width)]
        for d in series.values()
        if anchor_width in d["widths"]
    )
    max_width = max(max(d["widths"]) for d in series.values())
    ref_x = np.geomspace(anchor_width, max_width, 64)
    for slope in request.reference_slopes:
        ax.plot(ref_x, anchor_value * (ref_x / anchor_width) ** slope,
                linestyle="--", linewidth=1.0, color="gray")
        ax.annotate(f"$n^{{{slope:g}}}$", (ref_x[-1], anchor_value * (ref_x[-1] / anchor_width) ** slope),
                    fontsize=8, color="gray")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("hidden width $n$")
    ax.set_ylabel("distance to Gaussian limit")
    ax.legend()
    fig.tight_layout()
    fig.savefig(request.output_path)
    plt.close(fig)

    doc = {
        "kind": "decay",
        "input_kind": table.kind,
        "series": series,
        "reference_slopes": list(request.reference_slopes),
        "anchor": {"width": anchor_width, "value": anchor_value},
    }
    _write_sidecar(request, doc)
    return doc


def render_overlay(request: FigureRequest) -> dict:
    """Normalized sample histogram with the N(0, variance) density curve.

    Also runs a chi-squared goodness-of-fit test on 20 equiprobable bins
    of the claimed Gaussian (19 degrees of freedom) and prints the
    p-value.
    """
    samples = read_samples(request.input_path)
    values = samples.values
    if values.size < 100:
        raise ValueError(
            f"samples: overlay needs >= 100 samples, got {values.size}"
        )
    variance = request.variance
    if variance is None:
        variance = samples.metadata.get("limit_variance")
    if variance is None:
        raise ValueError(
            "variance: pass a variance or use a samples file whose metadata "
            "carries limit_variance"
        )
    variance = float(variance)
    if not variance > 0.0:
        raise ValueError(f"variance: must be positive, got {variance}")

    scale = float(np.sqrt(variance))
    interior = stats.norm.ppf(np.arange(1, OVERLAY_BINS) / OVERLAY_BINS, scale=scale)
    observed = np.bincount(np.searchsorted(interior, values), minlength=OVERLAY_BINS)
    expected = values.size / OVERLAY_BINS
    statistic = float(((observed - expected) ** 2 / expected).sum())
    dof = OVERLAY_BINS - 1
    p_value = float(stats.chi2.sf(statistic, dof))
    print(
        f"chi-squared ({OVERLAY_BINS} equiprobable bins, {dof} dof): "
        f"statistic={statistic:.4f} p-value={p_value:.6g}"
    )

    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    density, edges, _ = ax.hist(values, bins=50, density=True, alpha=0.55,
                                label="samples")
    grid = np.linspace(edges[0], edges[-1], 256)
    pdf = np.exp(-0.5 * grid * grid / variance) / np.sqrt(2.0 * np.pi * variance)
    ax.plot(grid, pdf, linewidth=2.0, label=f"N(0, {variance:g})")
    ax.set_xlabel("output value")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(request.output_path)
    plt.close(fig)

    doc = {
        "kind": "overlay",
        "input_kind": samples.kind,
        "sample_count": int(values.size),
        "variance": variance,
        "hist_edges": [float(e) for e in edges],
        "hist_density": [float(d) for d in density],
        "chi2_statistic": statistic,
        "chi2_dof": dof,
        "p_value": p_value,
    }
    _write_sidecar(request, doc)
    return doc
