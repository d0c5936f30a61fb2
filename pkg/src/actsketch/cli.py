"""Command-line pipeline: synth/ingest -> build -> pvalues -> compare/scan ->
evaluate -> bench.

Every command is deterministic given its inputs, flags and --seed; outputs
are written only after inputs validate. Exit codes: 0 success, 2 usage or
configuration error, 3 ingest/schema error, 4 shape mismatch, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import figures
from .activations import (GeneratorSpec, IngestError, inject_anomaly,
                          read_activations, synthesize, write_activations)
from .pvalues import (ShapeError, fit_empirical, fit_kde,
                      pvalue_matrix_from_csv, pvalue_matrix_to_csv,
                      score_matrix)
from .scan import (DEFAULT_ALPHAS, scan_matrix, scan_results_to_csv,
                   scores_from_csv)
from .sketch import (SchemaError, SketchConfig, build_sketch,
                     sketch_from_json, sketch_to_json)
from .stats import auroc, compare_representations, export_distribution

EXIT_USAGE = 2
EXIT_INGEST = 3
EXIT_SHAPE = 4
EXIT_IO = 5


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    env = os.environ.get("ACTSKETCH_THREADS")
    return max(1, int(env)) if env else 1


def _write_text(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as e:
        raise SchemaError(f"{path}: invalid JSON: {e}") from e


def cmd_synth(args) -> int:
    spec = GeneratorSpec.from_dict(_load_json(args.spec))
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.role is not None:
        spec = replace(spec, role=args.role)
    if args.label is not None:
        spec = replace(spec, layer_label=args.label)
    write_activations(synthesize(spec), args.out)
    return 0


def cmd_build(args) -> int:
    background = read_activations(args.background, role="background")
    config = SketchConfig(modal_threshold_fraction=args.modal_threshold,
                          max_bins=args.max_bins)
    sketch = build_sketch(background, config, threads=_threads(args))
    _write_text(args.out, sketch_to_json(sketch))
    return 0


def cmd_pvalues(args) -> int:
    test = read_activations(args.test)
    if args.method == "histogram":
        with open(args.repr, "r", encoding="utf-8") as fh:
            representation = sketch_from_json(fh.read())
    else:
        background = read_activations(args.repr, role="background")
        fit = fit_empirical if args.method == "empirical" else fit_kde
        representation = fit(background)
    pm = score_matrix(representation, test)
    pvalue_matrix_to_csv(pm, args.out)
    return 0


def cmd_inject(args) -> int:
    matrix = read_activations(args.infile, role="clean")
    nodes = _parse_int_list(args.nodes)
    out = inject_anomaly(matrix, nodes, args.shift, args.seed)
    write_activations(out, args.out)
    return 0


def cmd_compare(args) -> int:
    if args.repeats < 1:
        raise ValueError("--repeats must be >= 1")
    reference = pvalue_matrix_from_csv(args.reference)
    candidate = pvalue_matrix_from_csv(args.candidate)
    reports = [compare_representations(reference, candidate, args.seed + r)
               for r in range(args.repeats)]
    doc = reports[0].to_dict()
    if args.repeats > 1:
        doc["mean_statistic"] = float(np.mean([r.mean_statistic for r in reports]))
        doc["mean_p_value"] = float(np.mean([r.mean_p_value for r in reports]))
        for j, entry in enumerate(doc["per_node"]):
            entry["statistic"] = float(np.mean(
                [r.per_node[j].statistic for r in reports]))
            entry["p_value"] = float(np.mean(
                [r.per_node[j].p_value for r in reports]))
    doc["repeats"] = args.repeats
    _write_text(args.out, json.dumps(doc, indent=2) + "\n")
    if args.figures:
        figures.save_comparison(reports[0], _sibling(args.out, "_ks.png"))
    return 0


def cmd_scan(args) -> int:
    pm = pvalue_matrix_from_csv(args.pvalues)
    alphas = _parse_float_list(args.alphas) if args.alphas else DEFAULT_ALPHAS
    results = scan_matrix(pm, alphas, mode=args.mode, seed=args.seed,
                          threads=_threads(args))
    scan_results_to_csv(results, args.out)
    return 0


def cmd_evaluate(args) -> int:
    clean = scores_from_csv(args.clean)
    anomalous = scores_from_csv(args.anomalous)
    value = auroc(clean, anomalous)
    doc = {"auroc": value, "n_clean": int(clean.size),
           "n_anomalous": int(anomalous.size)}
    text = json.dumps(doc, indent=2)
    print(text)
    if args.out:
        _write_text(args.out, text + "\n")
        if args.figures:
            figures.save_score_distributions(clean, anomalous,
                                             _sibling(args.out, "_scores.png"))
            figures.save_roc_curve(clean, anomalous, value,
                                   _sibling(args.out, "_roc.png"))
    return 0


def cmd_export_dist(args) -> int:
    pm = pvalue_matrix_from_csv(args.pvalues)
    nodes = _parse_int_list(args.nodes) if args.nodes else range(pm.n_nodes)
    export_distribution(pm, nodes, args.out, seed=args.seed)
    return 0


def cmd_bench(args) -> int:
    config = _load_json(args.config)
    reports = []
    if "build" in config:
        section = config["build"]
        reports += bench_mod.bench_build(
            methods=section.get("methods", list(bench_mod.BENCH_METHODS)),
            node_counts=section.get("node_counts", [100, 1000, 5000]),
            background=GeneratorSpec.from_dict(section["background"]),
            reps=section.get("repetitions", 3),
            sketch_config=_sketch_config(section),
            threads=section.get("threads", 1))
    if "query" in config:
        section = config["query"]
        background_spec = GeneratorSpec.from_dict(section["background"])
        background = synthesize(background_spec)
        test_spec = replace(background_spec, role="clean",
                            seed=background_spec.seed + 1,
                            n_samples=section.get("n_test_samples", 100))
        reports += bench_mod.bench_query(
            methods=section.get("methods", list(bench_mod.BENCH_METHODS)),
            background_fractions=section.get("fractions", [0.2, 0.5, 1.0]),
            background=background, test=synthesize(test_spec),
            reps=section.get("repetitions", 5),
            seed=section.get("seed", 0),
            sketch_config=_sketch_config(section))
    if not reports:
        raise ValueError("bench config needs a 'build' and/or 'query' section")
    _write_text(args.out, bench_mod.reports_to_json(reports))
    _write_text(_sibling(args.out, ".md"), bench_mod.report_to_markdown(reports))
    if args.figures:
        figures.save_bench_memory(reports, _sibling(args.out, "_memory.png"))
        figures.save_bench_times(reports, _sibling(args.out, "_times.png"))
    return 0


def _sketch_config(section) -> SketchConfig:
    return SketchConfig(
        modal_threshold_fraction=section.get("modal_threshold_fraction", 0.10),
        max_bins=section.get("max_bins", 10))


def _sibling(out_path, suffix: str) -> str:
    p = Path(out_path)
    return str(p.with_name(p.stem + suffix))


def _parse_float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="actsketch",
        description="Histogram sketches and p-value representations of "
                    "neural-network activation spaces.")
    parser.add_argument("--threads", type=int, default=None,
                        help="parallelism bound (default: ACTSKETCH_THREADS or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic activation file")
    p.add_argument("--spec", required=True, help="generator spec JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override spec seed")
    p.add_argument("--role", choices=["background", "clean", "anomalous"],
                   default=None, help="override spec role")
    p.add_argument("--label", default=None, help="override spec layer label")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("build", help="build a histogram sketch from background "
                                     "activations")
    p.add_argument("--background", required=True)
    p.add_argument("--max-bins", type=int, default=10)
    p.add_argument("--modal-threshold", type=float, default=0.10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("inject", help="shift selected nodes of a clean matrix")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--nodes", required=True, help="comma-separated node indices")
    p.add_argument("--shift", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_inject)

    p = sub.add_parser("pvalues", help="score a test matrix against a "
                                       "representation")
    p.add_argument("--repr", required=True,
                   help="sketch JSON (histogram) or background activation file")
    p.add_argument("--test", required=True)
    p.add_argument("--method", choices=["empirical", "kde", "histogram"],
                   required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pvalues)

    p = sub.add_parser("compare", help="KS-compare a candidate p-value CSV "
                                       "against a point reference")
    p.add_argument("--reference", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1,
                   help="average the report over this many draw seeds")
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_compare, figures=True)

    p = sub.add_parser("scan", help="subset-scan a p-value CSV into per-sample "
                                    "scores")
    p.add_argument("--pvalues", required=True)
    p.add_argument("--alphas", default=None,
                   help="comma-separated ascending levels in (0,1); "
                        "default 0.01..0.50 step 0.01")
    p.add_argument("--mode", choices=["pmax", "draw"], default="pmax")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("evaluate", help="AUROC of anomalous vs clean score CSVs")
    p.add_argument("--clean", required=True)
    p.add_argument("--anomalous", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_evaluate, figures=True)

    p = sub.add_parser("export-dist", help="long-form p-value distribution CSV "
                                           "for external plotting")
    p.add_argument("--pvalues", required=True)
    p.add_argument("--nodes", default=None, help="comma-separated node indices "
                                                 "(default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_dist)

    p = sub.add_parser("bench", help="size and runtime benchmarks")
    p.add_argument("--config", required=True, help="bench config JSON")
    p.add_argument("--out", required=True, help="report JSON path (markdown and "
                                                "figures land alongside)")
    p.add_argument("--no-figures", dest="figures", action="store_false")
    p.set_defaults(func=cmd_bench, figures=True)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (IngestError, SchemaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INGEST
    except ShapeError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_SHAPE
    except (ValueError, IndexError, TypeError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
