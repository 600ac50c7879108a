"""Experiment drivers: convergence study, switching ablation, last-layer
check, rate fitting, and result emission.

Seed discipline
---------------
Every driver derives all of its randomness from one master seed.  The
convergence and last-layer drivers key each (width, repetition) cell by

    cell_master = derive_seed(derive_seed(master_seed, width), repetition)

and realization r inside a cell uses ``RandomStream(cell_master, r)``, so
cells own disjoint stream families, results do not depend on evaluation
order, and any table is a pure function of its configuration.

Output contract
---------------
All tables serialize to one CSV schema with columns

    width, metric, value, std, sample_count, repetitions, seed

preceded by '#'-prefixed metadata header lines carrying the canonical
config JSON.  Floats are written with ``repr`` so emission is byte-stable
and lossless.  JSON output is a single document
{config, limit_variance, rows, fits}.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .distributions import RandomStream, derive_seed
from .errors import ConfigError
from .kernel import limit_variance as kernel_limit_variance
from .metrics import (
    METRIC_NAMES,
    DistanceReport,
    compute_distances,
    wasserstein_p_empirical,
)
from .network import (
    NetworkConfig,
    canonical_json,
    config_digest,
    forward_switch_family,
    network_document,
    network_from_document,
    sample_outputs,
    warn_if_outside_smooth_class,
)

__all__ = [
    "OBSERVABLES",
    "StudyConfig",
    "ConvergenceTable",
    "SwitchRow",
    "SwitchDecayTable",
    "LastLayerRow",
    "LastLayerTable",
    "RateFit",
    "run_convergence_study",
    "run_switch_ablation",
    "run_last_layer_check",
    "kernel_consistency_check",
    "fit_rate",
    "emit_results",
    "render_results",
    "load_results",
    "study_from_document",
    "convergence_table_from_document",
]

#: Bounded smooth scalar observables of the first output coordinate.
OBSERVABLES: Mapping[str, Callable[[np.ndarray], float]] = {
    "tanh_first": lambda out: float(np.tanh(out[0])),
    "cos_first": lambda out: float(np.cos(out[0])),
    "tanh_shift_first": lambda out: float(np.tanh(out[0] + 0.5)),
    "one": lambda out: 1.0,
}

CSV_COLUMNS = ("width", "metric", "value", "std", "sample_count", "repetitions", "seed")


@dataclass(frozen=True)
class StudyConfig:
    """Convergence study protocol.

    ``samples_base`` and ``samples_ref_width`` define the per-width sample
    rule M(n) = samples_base * n / samples_ref_width (exact integer
    arithmetic); ``samples_ref_width = None`` means the constant rule
    M(n) = samples_base.
    """

    base: NetworkConfig
    widths_schedule: tuple[int, ...]
    samples_base: int
    samples_ref_width: int | None
    repetitions: int
    master_seed: int
    metrics: tuple[str, ...] = METRIC_NAMES
    input: str = "ones"

    def __post_init__(self) -> None:
        object.__setattr__(self, "widths_schedule", tuple(int(w) for w in self.widths_schedule))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if len(self.widths_schedule) == 0:
            raise ConfigError("widths_schedule: must not be empty")
        if any(b >= a for a, b in zip(self.widths_schedule[1:], self.widths_schedule)):
            raise ConfigError(
                f"widths_schedule: must be strictly increasing, got {self.widths_schedule}"
            )
        if self.repetitions < 1:
            raise ConfigError(f"repetitions: must be >= 1, got {self.repetitions}")
        for metric in self.metrics:
            if metric not in METRIC_NAMES:
                raise ConfigError(
                    f"metrics: unknown metric {metric!r}; expected a subset of {METRIC_NAMES}"
                )
        if self.samples_ref_width is not None and self.samples_ref_width < 1:
            raise ConfigError(
                f"samples_ref_width: must be None or >= 1, got {self.samples_ref_width}"
            )
        for n in self.widths_schedule:
            if self.samples_for_width(n) < 2:
                raise ConfigError(
                    f"samples_base: sample rule gives M({n}) = "
                    f"{self.samples_for_width(n)} < 2"
                )

    def samples_for_width(self, n: int) -> int:
        if self.samples_ref_width is None:
            return self.samples_base
        return self.samples_base * n // self.samples_ref_width

    def document(self) -> dict:
        return {
            "config": network_document(self.base, self.input),
            "widths_schedule": list(self.widths_schedule),
            "samples_base": self.samples_base,
            "samples_ref_width": self.samples_ref_width,
            "repetitions": self.repetitions,
            "master_seed": self.master_seed,
            "metrics": list(self.metrics),
        }


def study_from_document(doc: Mapping) -> StudyConfig:
    known = {"config", "widths_schedule", "samples_base", "samples_ref_width",
             "repetitions", "master_seed", "metrics"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"study: unknown keys {sorted(unknown)}")
    missing = known - set(doc)
    if missing:
        raise ConfigError(f"study: missing keys {sorted(missing)}")
    base, input_spec = network_from_document(doc["config"])
    if not isinstance(input_spec, str):
        raise ConfigError('input: study configs support only the "ones" input token')
    return StudyConfig(
        base=base,
        widths_schedule=tuple(doc["widths_schedule"]),
        samples_base=int(doc["samples_base"]),
        samples_ref_width=(
            None if doc["samples_ref_width"] is None else int(doc["samples_ref_width"])
        ),
        repetitions=int(doc["repetitions"]),
        master_seed=int(doc["master_seed"]),
        metrics=tuple(doc["metrics"]),
        input=input_spec,
    )


@dataclass(frozen=True)
class ConvergenceTable:
    """Per-width distance reports against the infinite-width limit."""

    rows: tuple[tuple[int, DistanceReport], ...]
    limit_variance: float
    config_digest: str
    master_seed: int
    metadata: dict = field(compare=False)
    fits: dict | None = None

    def report(self, width: int) -> DistanceReport:
        for w, rep in self.rows:
            if w == width:
                return rep
        raise KeyError(width)


@dataclass(frozen=True)
class SwitchRow:
    k: int
    width: int
    value: float
    std: float
    sample_count: int


@dataclass(frozen=True)
class SwitchDecayTable:
    """Paired estimates of |E F(switch K) - E F(switch K+1)| per K.

    ``std`` is the Monte Carlo standard error of the paired mean; it is
    positive whenever the paired difference is not identically zero and
    exactly zero in the degenerate same-law switch, where both variants
    share all draws.
    """

    rows: tuple[SwitchRow, ...]
    config_digest: str
    observable: str
    master_seed: int
    metadata: dict = field(compare=False)


@dataclass(frozen=True)
class LastLayerRow:
    width: int
    value: float
    std: float
    sample_count: int


@dataclass(frozen=True)
class LastLayerTable:
    """Empirical W2 between the true and Gaussian-last-layer outputs."""

    rows: tuple[LastLayerRow, ...]
    config_digest: str
    master_seed: int
    metadata: dict = field(compare=False)


@dataclass(frozen=True)
class RateFit:
    """OLS fit of log(value) on log(width)."""

    slope: float
    intercept: float
    stderr: float
    width_range: tuple[int, int]

    def document(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "stderr": self.stderr,
            "width_range": list(self.width_range),
        }


def _cell_master(master_seed: int, width: int, repetition: int) -> int:
    return derive_seed(derive_seed(master_seed, width), repetition)


def _convergence_cell(
    study: StudyConfig, width: int, repetition: int
) -> dict[str, float]:
    config = study.base.with_hidden_widths(width)
    batch = sample_outputs(
        config,
        study.input,
        study.samples_for_width(width),
        [0],
        _cell_master(study.master_seed, width, repetition),
    )
    limit_var = kernel_limit_variance(study.base, study.input)
    return compute_distances(batch.values[:, 0], limit_var, study.metrics)


def run_convergence_study(study: StudyConfig, threads: int = 1) -> ConvergenceTable:
    """Distances to the limit at every scheduled width.

    Each width draws M(n) outputs per repetition; the table reports the
    mean and the across-repetition standard deviation of every requested
    metric.  The result is a pure function of ``study``.
    """
    if study.base.output_dim != 1:
        raise ConfigError(
            f"widths: convergence study needs scalar output, got n_L+1 = "
            f"{study.base.output_dim}"
        )
    if threads < 1:
        raise ConfigError(f"threads: must be >= 1, got {threads}")
    warn_if_outside_smooth_class(study.base.activation, "convergence study")
    limit_var = kernel_limit_variance(study.base, study.input)

    jobs = [(n, r) for n in study.widths_schedule for r in range(study.repetitions)]
    results: dict[tuple[int, int], dict[str, float]] = {}
    if threads == 1:
        for n, r in jobs:
            results[(n, r)] = _convergence_cell(study, n, r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {key: pool.submit(_convergence_cell, study, *key) for key in jobs}
            for key, fut in futures.items():
                results[key] = fut.result()

    rows = []
    for n in study.widths_schedule:
        per_metric = {
            m: np.array([results[(n, r)][m] for r in range(study.repetitions)])
            for m in study.metrics
        }
        values = {m: float(v.mean()) for m, v in per_metric.items()}
        stds = {
            m: (float(v.std(ddof=1)) if study.repetitions > 1 else 0.0)
            for m, v in per_metric.items()
        }
        report = DistanceReport(
            kolmogorov=values.get("kolmogorov"),
            w1=values.get("w1"),
            w2=values.get("w2"),
            kolmogorov_std=stds.get("kolmogorov"),
            w1_std=stds.get("w1"),
            w2_std=stds.get("w2"),
            sample_count=study.samples_for_width(n),
            repetitions=study.repetitions,
        )
        rows.append((n, report))
    return ConvergenceTable(
        rows=tuple(rows),
        limit_variance=limit_var,
        config_digest=config_digest(study.document()),
        master_seed=study.master_seed,
        metadata={"kind": "convergence", **study.document(),
                  "limit_variance": limit_var},
    )


def _resolve_observable(f_spec) -> tuple[str, Callable[[np.ndarray], float]]:
    if callable(f_spec):
        return getattr(f_spec, "__name__", "custom"), f_spec
    if f_spec not in OBSERVABLES:
        raise ConfigError(
            f"f_spec: unknown observable {f_spec!r}; expected one of {tuple(OBSERVABLES)}"
        )
    return f_spec, OBSERVABLES[f_spec]


def run_switch_ablation(
    config: NetworkConfig,
    input,
    k_list: Sequence[int],
    f_spec,
    samples: int,
    master_seed: int,
    paired: bool = True,
) -> SwitchDecayTable:
    """Paired estimates of the per-layer switching differences.

    For each K the compared variants are switch_index K and K + 1; with
    ``paired`` they share every draw except at the newly switched layer
    (common random numbers), which is the variance-reduced estimator.  The
    width column records the fan-in n_{L-K-1} of the switched layer, the
    width the theory's 1/sqrt(n) rate refers to.
    """
    if samples < 2:
        raise ConfigError(f"samples: need >= 2, got {samples}")
    k_values = [int(k) for k in k_list]
    for k in k_values:
        if not -1 <= k <= config.depth - 2:
            raise ConfigError(
                f"k_list: switch index {k} outside [-1, {config.depth - 2}] "
                f"for depth {config.depth}"
            )
    name, fn = _resolve_observable(f_spec)
    warn_if_outside_smooth_class(config.activation, "switch ablation")

    members = sorted({k for k in k_values} | {k + 1 for k in k_values})
    diffs = {k: np.empty(samples) for k in k_values}
    if paired:
        buffers: dict = {}
        for r in range(samples):
            outs = forward_switch_family(
                config, input, members, RandomStream(master_seed, r), _buffers=buffers
            )
            fvals = {m: fn(outs[m]) for m in members}
            for k in k_values:
                diffs[k][r] = fvals[k] - fvals[k + 1]
    else:
        from dataclasses import replace as _replace

        from .network import forward

        for r in range(samples):
            for side, k_off in enumerate((0, 1)):
                stream = RandomStream(master_seed, 2 * r + side)
                for k in k_values:
                    out = forward(_replace(config, switch_index=k + k_off), input, stream)
                    val = fn(out.final)
                    if side == 0:
                        diffs[k][r] = val
                    else:
                        diffs[k][r] -= val

    rows = []
    for k in k_values:
        d = diffs[k]
        rows.append(
            SwitchRow(
                k=k,
                width=config.widths[config.depth - k - 1],
                value=float(abs(d.mean())),
                std=float(d.std(ddof=1) / np.sqrt(samples)),
                sample_count=samples,
            )
        )
    doc = {
        "kind": "switch_decay",
        "config": network_document(config, input),
        "k_list": k_values,
        "observable": name,
        "samples": samples,
        "master_seed": master_seed,
        "paired": paired,
    }
    return SwitchDecayTable(
        rows=tuple(rows),
        config_digest=config_digest(doc),
        observable=name,
        master_seed=master_seed,
        metadata=doc,
    )


def run_last_layer_check(
    config: NetworkConfig,
    input,
    widths: Sequence[int],
    samples: int,
    master_seed: int,
    repetitions: int = 1,
) -> LastLayerTable:
    """Empirical W2 between the output and its Gaussian-last-layer twin.

    Both networks share all draws below the output layer, so each sample
    pair is coupled on an identical z^(L); the two conditional sample
    vectors are compared by the exact sorted-coupling W2.  With
    ``repetitions`` > 1 the reported value is the mean over repetitions
    and ``std`` its standard error.
    """
    if config.output_dim != 1:
        raise ConfigError(
            f"widths: last-layer check needs scalar output, got n_L+1 = {config.output_dim}"
        )
    if samples < 2:
        raise ConfigError(f"samples: need >= 2, got {samples}")
    if repetitions < 1:
        raise ConfigError(f"repetitions: must be >= 1, got {repetitions}")
    width_values = [int(n) for n in widths]
    if any(n < 1 for n in width_values):
        raise ConfigError(f"widths: all entries must be >= 1, got {width_values}")
    warn_if_outside_smooth_class(config.activation, "last-layer check")

    rows = []
    buffers: dict = {}
    for n in width_values:
        config_n = config.with_hidden_widths(n)
        per_rep = np.empty(repetitions)
        for rep in range(repetitions):
            cell = _cell_master(master_seed, n, rep)
            a = np.empty(samples)
            b = np.empty(samples)
            for r in range(samples):
                outs = forward_switch_family(
                    config_n, input, [-1, 0], RandomStream(cell, r), _buffers=buffers
                )
                a[r] = outs[-1][0]
                b[r] = outs[0][0]
            per_rep[rep] = wasserstein_p_empirical(a, b, 2)
        rows.append(
            LastLayerRow(
                width=n,
                value=float(per_rep.mean()),
                std=(
                    float(per_rep.std(ddof=1) / np.sqrt(repetitions))
                    if repetitions > 1
                    else 0.0
                ),
                sample_count=samples,
            )
        )
    doc = {
        "kind": "last_layer",
        "config": network_document(config, input),
        "widths": width_values,
        "samples": samples,
        "repetitions": repetitions,
        "master_seed": master_seed,
    }
    return LastLayerTable(
        rows=tuple(rows),
        config_digest=config_digest(doc),
        master_seed=master_seed,
        metadata=doc,
    )


def kernel_consistency_check(
    config: NetworkConfig, input, width: int, samples: int, master_seed: int
) -> tuple[float, float, float]:
    """Empirical output variance vs. the limit variance.

    Returns (empirical variance, its standard error, limit variance); the
    standard error uses the moment formula se^2 = (m4 - var^2) / n.
    """
    config_n = config.with_hidden_widths(width)
    batch = sample_outputs(config_n, input, samples, [0], master_seed)
    x = batch.values[:, 0]
    var = float(x.var(ddof=1))
    m4 = float(np.mean((x - x.mean()) ** 4))
    se = float(np.sqrt(max(m4 - var * var, 0.0) / samples))
    return var, se, kernel_limit_variance(config, input)


def _fit_pairs(table, metric: str) -> list[tuple[int, float]]:
    if isinstance(table, ConvergenceTable):
        pairs = []
        for width, report in table.rows:
            value = report.value(metric)
            if value is not None:
                pairs.append((width, value))
        return pairs
    if isinstance(table, SwitchDecayTable):
        return [
            (row.width, row.value)
            for row in table.rows
            if metric in (f"delta_ef_k{row.k}", "delta_ef")
        ]
    if isinstance(table, LastLayerTable):
        if metric != "w2_last_layer":
            return []
        return [(row.width, row.value) for row in table.rows]
    # Generic row dicts, e.g. parsed from CSV by load_results.
    return [
        (int(row["width"]), float(row["value"]))
        for row in table
        if row["metric"] == metric
    ]


def fit_rate(table, metric: str, min_width: int = 64) -> RateFit:
    """OLS slope of log(value) on log(width) for one metric.

    Uses rows with width >= min_width and value > 0; needs at least three.
    """
    pairs = [(w, v) for w, v in _fit_pairs(table, metric) if w >= min_width and v > 0.0]
    if len(pairs) < 3:
        raise ConfigError(
            f"min_width: need >= 3 rows with width >= {min_width} and positive "
            f"{metric!r} values, got {len(pairs)}"
        )
    x = np.log(np.array([w for w, _ in pairs], dtype=float))
    y = np.log(np.array([v for _, v in pairs]))
    n = x.size
    xc = x - x.mean()
    slope = float((xc @ y) / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (intercept + slope * x)
    if n > 2:
        s2 = float(resid @ resid) / (n - 2)
    else:
        s2 = 0.0
    stderr = float(np.sqrt(s2 / (xc @ xc)))
    widths_used = [w for w, _ in pairs]
    return RateFit(
        slope=slope,
        intercept=intercept,
        stderr=stderr,
        width_range=(min(widths_used), max(widths_used)),
    )


def _csv_rows(table) -> list[tuple]:
    rows: list[tuple] = []
    if isinstance(table, ConvergenceTable):
        metrics = table.metadata.get("metrics", list(METRIC_NAMES))
        for width, report in table.rows:
            for metric in metrics:
                rows.append(
                    (
                        width,
                        metric,
                        report.value(metric),
                        report.std(metric),
                        report.sample_count,
                        report.repetitions,
                        table.master_seed,
                    )
                )
    elif isinstance(table, SwitchDecayTable):
        for row in table.rows:
            rows.append(
                (
                    row.width,
                    f"delta_ef_k{row.k}",
                    row.value,
                    row.std,
                    row.sample_count,
                    1,
                    table.master_seed,
                )
            )
    elif isinstance(table, LastLayerTable):
        for row in table.rows:
            rows.append(
                (
                    row.width,
                    "w2_last_layer",
                    row.value,
                    row.std,
                    row.sample_count,
                    table.metadata.get("repetitions", 1),
                    table.master_seed,
                )
            )
    else:
        raise ConfigError(f"table: cannot serialize {type(table).__name__}")
    return rows


def _format_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def table_document(table) -> dict:
    """JSON document {config, ..., rows, fits} for any result table."""
    doc = {k: v for k, v in table.metadata.items()}
    doc["rows"] = [
        dict(zip(CSV_COLUMNS, row)) for row in _csv_rows(table)
    ]
    if isinstance(table, ConvergenceTable):
        doc["fits"] = (
            None
            if table.fits is None
            else {m: fit.document() for m, fit in table.fits.items()}
        )
    return doc


def render_results(table, format: str = "csv") -> str:
    """Serialize a table to its byte-stable CSV or JSON text."""
    if format == "json":
        return canonical_json(table_document(table)) + "\n"
    if format != "csv":
        raise ConfigError(f"format: expected 'csv' or 'json', got {format!r}")
    buf = io.StringIO()
    buf.write(f"# nngplab {table.metadata['kind']}\n")
    meta = {k: v for k, v in table.metadata.items() if k != "kind"}
    buf.write("# " + canonical_json(meta) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in _csv_rows(table):
        writer.writerow([_format_cell(v) for v in row])
    return buf.getvalue()


def emit_results(table, format: str = "csv", path=None) -> str:
    """Write a table to ``path`` (or return the text when path is None).

    Identical tables always produce byte-identical output.
    """
    text = render_results(table, format)
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(f"cannot write results to {path}: {exc}") from exc
    return text


@dataclass(frozen=True)
class ResultSet:
    """Parsed results file: kind, metadata document, typed rows."""

    kind: str
    metadata: dict
    rows: tuple[dict, ...]


def _parse_row(line_no: int, record: dict) -> dict:
    try:
        return {
            "width": int(record["width"]),
            "metric": record["metric"],
            "value": float(record["value"]),
            "std": float(record["std"]),
            "sample_count": int(record["sample_count"]),
            "repetitions": int(record["repetitions"]),
            "seed": int(record["seed"]),
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed results row at line {line_no}: {exc}") from exc


def load_results(path) -> ResultSet:
    """Parse a results CSV written by :func:`emit_results`."""
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise OSError(f"cannot read results from {path}: {exc}") from exc
    kind = "unknown"
    metadata: dict = {}
    body: list[str] = []
    body_start = 0
    for i, line in enumerate(lines):
        if line.startswith("#"):
            text = line[1:].strip()
            if text.startswith("nngplab"):
                kind = text.split()[-1]
            elif text.startswith("{"):
                metadata = json.loads(text)
        else:
            body = lines[i:]
            body_start = i
            break
    if not body:
        raise ValueError(f"malformed results file {path}: no CSV header found")
    reader = csv.DictReader(io.StringIO("\n".join(body) + "\n"))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(
            f"malformed results file {path}: header {reader.fieldnames} "
            f"does not match {list(CSV_COLUMNS)}"
        )
    rows = []
    for offset, record in enumerate(reader):
        rows.append(_parse_row(body_start + offset + 2, record))
    return ResultSet(kind=kind, metadata=metadata, rows=tuple(rows))


def convergence_table_from_document(doc: Mapping) -> ConvergenceTable:
    """Reconstruct a ConvergenceTable from its JSON document."""
    metrics = list(doc["metrics"])
    by_width: dict[int, dict] = {}
    order: list[int] = []
    for row in doc["rows"]:
        width = int(row["width"])
        if width not in by_width:
            by_width[width] = {}
            order.append(width)
        by_width[width][row["metric"]] = row
    rows = []
    for width in order:
        cells = by_width[width]
        any_row = next(iter(cells.values()))
        values = {m: (cells[m]["value"] if m in cells else None) for m in METRIC_NAMES}
        stds = {m: (cells[m]["std"] if m in cells else None) for m in METRIC_NAMES}
        rows.append(
            (
                width,
                DistanceReport(
                    kolmogorov=values["kolmogorov"],
                    w1=values["w1"],
                    w2=values["w2"],
                    kolmogorov_std=stds["kolmogorov"],
                    w1_std=stds["w1"],
                    w2_std=stds["w2"],
                    sample_count=int(any_row["sample_count"]),
                    repetitions=int(any_row["repetitions"]),
                ),
            )
        )
    metadata = {k: v for k, v in doc.items() if k not in ("rows", "fits")}
    study_doc = {
        k: doc[k]
        for k in (
            "config",
            "widths_schedule",
            "samples_base",
            "samples_ref_width",
            "repetitions",
            "master_seed",
            "metrics",
        )
    }
    fits = doc.get("fits")
    return ConvergenceTable(
        rows=tuple(rows),
        limit_variance=float(doc["limit_variance"]),
        config_digest=config_digest(study_doc),
        master_seed=int(doc["master_seed"]),
        metadata=metadata,
        fits=(
            None
            if fits is None
            else {
                m: RateFit(
                    slope=f["slope"],
                    intercept=f["intercept"],
                    stderr=f["stderr"],
                    width_range=tuple(f["width_range"]),
                )
                for m, f in fits.items()
            }
        ),
    )
