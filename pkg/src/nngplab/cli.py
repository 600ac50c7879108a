"""Command-line frontend.

Subcommands: kernel, sample, convergence, ablation, last-layer, fit.
Configuration comes from an optional JSON file (--config) plus per-field
flag overrides, with flags taking precedence.  The default seed is the
documented constant 12648430 (0xC0FFEE), never the wall clock, so default
runs are reproducible.  Exit codes: 0 success, 2 configuration or
validation errors (message names the offending key), 1 runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError
from .experiments import (
    OBSERVABLES,
    StudyConfig,
    emit_results,
    fit_rate,
    load_results,
    run_convergence_study,
    run_last_layer_check,
    run_switch_ablation,
    study_from_document,
)
from .kernel import (
    default_rule,
    kernel_cross_sequence,
    kernel_diag_sequence,
    limit_gaussian_sampler,
    limit_variance,
)
from .network import (
    ACTIVATIONS,
    NetworkConfig,
    canonical_json,
    network_document,
    network_from_document,
    sample_outputs,
)

__all__ = ["DEFAULT_SEED", "PRESETS", "build_parser", "parse_and_dispatch", "main"]

#: Documented default master seed (0xC0FFEE); fixed, not wall-clock.
DEFAULT_SEED = 12648430

_DEFAULT_NETWORK = {
    "depth": 3,
    "widths": [4, 16, 16, 16, 1],
    "c_w": 1.0,
    "c_b": 0.0,
    "activation": "sigmoid",
    "hidden_law": "laplace",
    "switch_index": None,
    "input": "ones",
}

#: Embedded study presets; reproduction is one command.
PRESETS = {
    "appendix-a": {
        "config": dict(_DEFAULT_NETWORK),
        "widths_schedule": [16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192],
        "samples_base": 800,
        "samples_ref_width": 16,
        "repetitions": 6,
        "master_seed": DEFAULT_SEED,
        "metrics": ["kolmogorov", "w1", "w2"],
    },
    "appendix-a-desk": {
        "config": dict(_DEFAULT_NETWORK),
        "widths_schedule": [16, 32, 64, 128, 256, 512, 1024],
        "samples_base": 200,
        "samples_ref_width": 16,
        "repetitions": 3,
        "master_seed": DEFAULT_SEED,
        "metrics": ["kolmogorov", "w1", "w2"],
    },
    "smoke": {
        "config": dict(_DEFAULT_NETWORK),
        "widths_schedule": [16, 32, 64],
        "samples_base": 200,
        "samples_ref_width": None,
        "repetitions": 2,
        "master_seed": DEFAULT_SEED,
        "metrics": ["kolmogorov", "w1", "w2"],
    },
}


def _read_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"config: cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc}") from exc


def _add_network_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with network/study fields")
    parser.add_argument("--depth", type=int, help="number of hidden layers L")
    parser.add_argument("--widths", help="comma-separated widths n_0..n_L+1")
    parser.add_argument("--c-w", dest="c_w", type=float, help="weight variance scale C_W")
    parser.add_argument("--c-b", dest="c_b", type=float, help="bias variance c_b")
    parser.add_argument("--activation", choices=sorted(ACTIVATIONS))
    parser.add_argument("--hidden-law", dest="hidden_law",
                        choices=["gaussian", "laplace", "rademacher", "uniform"])
    parser.add_argument("--switch-index", dest="switch_index", type=int,
                        help="switch layers above L - K to Gaussian")
    parser.add_argument("--input", help='input vector as comma floats, or "ones"')


def _parse_widths(text: str, key: str = "widths"):
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated integers, got {text!r}") from exc


def _network_from_args(args) -> tuple[NetworkConfig, str | list]:
    doc = dict(_DEFAULT_NETWORK)
    if getattr(args, "config", None):
        file_doc = _read_json(args.config)
        doc.update(file_doc.get("config", file_doc))
    if args.depth is not None:
        doc["depth"] = args.depth
    if args.widths is not None:
        doc["widths"] = _parse_widths(args.widths)
    if args.c_w is not None:
        doc["c_w"] = args.c_w
    if args.c_b is not None:
        doc["c_b"] = args.c_b
    if args.activation is not None:
        doc["activation"] = args.activation
    if args.hidden_law is not None:
        doc["hidden_law"] = args.hidden_law
    if args.switch_index is not None:
        doc["switch_index"] = args.switch_index
    if args.input is not None:
        doc["input"] = "ones" if args.input == "ones" else [
            float(tok) for tok in args.input.split(",")
        ]
    return network_from_document(doc)


def _write_text(text: str, path) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write output to {path}: {exc}") from exc


def _cmd_kernel(args) -> int:
    config, input_spec = _network_from_args(args)
    rule = default_rule(args.order)
    if args.y is not None:
        y = "ones" if args.y == "ones" else [float(t) for t in args.y.split(",")]
        seq = kernel_cross_sequence(config, input_spec, y, rule)
    else:
        seq = kernel_diag_sequence(config, input_spec, rule)
    text = "".join(canonical_json(rec) + "\n" for rec in seq.records())
    _write_text(text, args.out)
    return 0


def _cmd_sample(args) -> int:
    config, input_spec = _network_from_args(args)
    if args.count < 1:
        raise ConfigError(f"count: must be >= 1, got {args.count}")
    if args.limit:
        variance = limit_variance(config, input_spec)
        batch = limit_gaussian_sampler(variance, 1, args.count, args.seed)
        meta = {
            "kind": "limit_samples",
            "config": network_document(config, input_spec),
            "limit_variance": variance,
            "count": args.count,
            "master_seed": args.seed,
        }
    else:
        batch = sample_outputs(config, input_spec, args.count, [0], args.seed)
        meta = {
            "kind": "network_samples",
            "config": network_document(config, input_spec),
            "count": args.count,
            "master_seed": args.seed,
        }
    lines = [f"# nngplab {meta['kind']}",
             "# " + canonical_json({k: v for k, v in meta.items() if k != 'kind'}),
             "value"]
    lines.extend(repr(float(v)) for v in batch.values[:, 0])
    _write_text("\n".join(lines) + "\n", args.out)
    return 0


def _cmd_convergence(args) -> int:
    if args.preset is not None and args.preset not in PRESETS:
        raise ConfigError(
            f"preset: unknown preset {args.preset!r}; expected one of {sorted(PRESETS)}"
        )
    doc = dict(PRESETS[args.preset]) if args.preset else dict(PRESETS["appendix-a-desk"])
    if args.config:
        file_doc = _read_json(args.config)
        doc.update(file_doc)
    if args.widths is not None:
        doc["widths_schedule"] = _parse_widths(args.widths, "widths_schedule")
    if args.samples_base is not None:
        doc["samples_base"] = args.samples_base
    if args.samples_ref_width is not None:
        doc["samples_ref_width"] = (
            None if args.samples_ref_width <= 0 else args.samples_ref_width
        )
    if args.repetitions is not None:
        doc["repetitions"] = args.repetitions
    if args.seed is not None:
        doc["master_seed"] = args.seed
    if args.metrics is not None:
        doc["metrics"] = [m.strip() for m in args.metrics.split(",") if m.strip()]
    network_overrides = {
        "depth": args.depth, "c_w": args.c_w, "c_b": args.c_b,
        "activation": args.activation, "hidden_law": args.hidden_law,
    }
    cfg_doc = dict(doc["config"])
    for key, value in network_overrides.items():
        if value is not None:
            cfg_doc[key] = value
    doc["config"] = cfg_doc
    study = study_from_document(doc)
    table = run_convergence_study(study, threads=args.threads)
    fits = {}
    for metric in study.metrics:
        try:
            fits[metric] = fit_rate(table, metric, args.min_width)
        except ConfigError:
            pass
    if fits:
        table = type(table)(
            rows=table.rows,
            limit_variance=table.limit_variance,
            config_digest=table.config_digest,
            master_seed=table.master_seed,
            metadata=table.metadata,
            fits=fits,
        )
    text = emit_results(table, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
        return 0
    for metric, fit in sorted(fits.items()):
        sys.stdout.write(
            f"{metric}: slope {fit.slope:.4f} (stderr {fit.stderr:.4f}) "
            f"over widths {fit.width_range[0]}..{fit.width_range[1]}\n"
        )
    return 0


def _cmd_ablation(args) -> int:
    config, input_spec = _network_from_args(args)
    if args.width is not None:
        config = config.with_hidden_widths(args.width)
    k_list = [int(t) for t in args.k_list.split(",")]
    table = run_switch_ablation(
        config, input_spec, k_list, args.observable, args.samples, args.seed,
        paired=not args.unpaired,
    )
    text = emit_results(table, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def _cmd_last_layer(args) -> int:
    config, input_spec = _network_from_args(args)
    widths = _parse_widths(args.layer_widths, "widths")
    table = run_last_layer_check(
        config, input_spec, widths, args.samples, args.seed,
        repetitions=args.repetitions or 1,
    )
    text = emit_results(table, args.format, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return 0


def _cmd_fit(args) -> int:
    results = load_results(args.infile)
    fit = fit_rate(results.rows, args.metric, args.min_width)
    sys.stdout.write(canonical_json(fit.document()) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nngplab",
        description="Random wide networks, their Gaussian limits, and distances between them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_kernel = sub.add_parser("kernel", help="print the limit covariance sequence as JSON")
    _add_network_flags(p_kernel)
    p_kernel.add_argument("--y", help="second input for the cross sequence")
    p_kernel.add_argument("--order", type=int, default=192, help="quadrature order")
    p_kernel.add_argument("--out")
    p_kernel.set_defaults(func=_cmd_kernel)

    p_sample = sub.add_parser("sample", help="draw network or limit outputs to CSV")
    _add_network_flags(p_sample)
    p_sample.add_argument("--count", type=int, default=1000)
    p_sample.add_argument("--limit", action="store_true",
                          help="sample the infinite-width limit instead of the network")
    p_sample.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_sample.add_argument("--out")
    p_sample.set_defaults(func=_cmd_sample)

    p_conv = sub.add_parser("convergence", help="run a width-convergence study")
    _add_network_flags(p_conv)
    p_conv.add_argument("--preset", help="named study preset: " + ", ".join(sorted(PRESETS)))
    p_conv.add_argument("--samples-base", dest="samples_base", type=int)
    p_conv.add_argument("--samples-ref-width", dest="samples_ref_width", type=int,
                        help="reference width in M(n) = base*n/ref; <= 0 means constant")
    p_conv.add_argument("--repetitions", type=int)
    p_conv.add_argument("--metrics", help="comma subset of kolmogorov,w1,w2")
    p_conv.add_argument("--seed", type=int)
    p_conv.add_argument("--threads", type=int, default=1)
    p_conv.add_argument("--format", choices=["csv", "json"], default="csv")
    p_conv.add_argument("--min-width", dest="min_width", type=int, default=64)
    p_conv.add_argument("--out")
    p_conv.set_defaults(func=_cmd_convergence)

    p_abl = sub.add_parser("ablation", help="paired layer-switching differences")
    _add_network_flags(p_abl)
    p_abl.add_argument("--k-list", dest="k_list", default="-1,0,1",
                       help='comma switch indices; leading minus needs "=" '
                            '(e.g. --k-list=-1,0)')
    p_abl.add_argument("--observable", choices=sorted(OBSERVABLES), default="tanh_first")
    p_abl.add_argument("--samples", type=int, default=10000)
    p_abl.add_argument("--width", type=int, help="set all hidden widths")
    p_abl.add_argument("--unpaired", action="store_true",
                       help="independent draws per side (diagnostic)")
    p_abl.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_abl.add_argument("--format", choices=["csv", "json"], default="csv")
    p_abl.add_argument("--out")
    p_abl.set_defaults(func=_cmd_ablation)

    p_last = sub.add_parser("last-layer", help="coupled last-layer W2 check")
    _add_network_flags(p_last)
    p_last.add_argument("--layer-widths", dest="layer_widths", default="64,128,256,512")
    p_last.add_argument("--samples", type=int, default=20000)
    p_last.add_argument("--repetitions", type=int, default=1)
    p_last.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_last.add_argument("--format", choices=["csv", "json"], default="csv")
    p_last.add_argument("--out")
    p_last.set_defaults(func=_cmd_last_layer)

    p_fit = sub.add_parser("fit", help="fit a log-log rate from a results CSV")
    p_fit.add_argument("--in", dest="infile", required=True)
    p_fit.add_argument("--metric", required=True)
    p_fit.add_argument("--min-width", dest="min_width", type=int, default=64)
    p_fit.set_defaults(func=_cmd_fit)

    return parser


def parse_and_dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except Exception as exc:  # runtime failures: I/O, numerical, interrupts
        sys.stderr.write(f"error: {exc}\n")
        return 1


def main() -> None:
    sys.exit(parse_and_dispatch(sys.argv[1:]))
