"""Desk-scale efficiency benchmarks: representation sizes and wall times.

Sizes use a documented byte-accounting rule rather than process RSS so the
numbers are platform-independent; timings use a monotonic clock with a
discarded warm-up run and at least three repetitions.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, replace

import numpy as np

from .activations import ActivationMatrix, GeneratorSpec, synthesize
from .pvalues import fit_empirical, fit_kde, score_matrix
from .sketch import SketchConfig, build_sketch, representation_size_bytes

BENCH_METHODS = ("empirical", "histogram", "kde")

_PER_NODE_OVERHEAD = 32
_KDE_PARAM_BYTES = 16  # bandwidth + background max per node


@dataclass(frozen=True)
class BenchReport:
    method: str
    n_nodes: int
    n_background: int
    repr_bytes: int
    repetitions: int
    build_time_mean: float | None = None
    build_time_std: float | None = None
    query_time_per_sample_mean: float | None = None
    query_time_per_sample_std: float | None = None

    def __post_init__(self):
        if self.method not in BENCH_METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.repetitions < 3:
            raise ValueError("repetitions must be >= 3")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "n_nodes": self.n_nodes,
            "n_background": self.n_background,
            "repr_bytes": self.repr_bytes,
            "repetitions": self.repetitions,
            "build_time_mean": self.build_time_mean,
            "build_time_std": self.build_time_std,
            "query_time_per_sample_mean": self.query_time_per_sample_mean,
            "query_time_per_sample_std": self.query_time_per_sample_std,
        }


def empirical_repr_bytes(n_nodes: int, n_background: int) -> int:
    """8 bytes per retained value plus 32 bytes per-node overhead."""
    return n_nodes * (8 * n_background + _PER_NODE_OVERHEAD)


def kde_repr_bytes(n_nodes: int, n_background: int) -> int:
    """Empirical accounting plus 16 bytes of per-node KDE parameters."""
    return empirical_repr_bytes(n_nodes, n_background) + n_nodes * _KDE_PARAM_BYTES


def _fit(method: str, background: ActivationMatrix, config: SketchConfig,
         threads: int = 1):
    if method == "histogram":
        return build_sketch(background, config, threads=threads)
    if method == "empirical":
        return fit_empirical(background)
    if method == "kde":
        return fit_kde(background)
    raise ValueError(f"unknown method {method!r}")


def _repr_bytes(method: str, representation, n_nodes: int, n_background: int) -> int:
    if method == "histogram":
        return representation_size_bytes(representation)
    if method == "empirical":
        return empirical_repr_bytes(n_nodes, n_background)
    return kde_repr_bytes(n_nodes, n_background)


def _timed(fn, reps: int) -> tuple[float, float]:
    """Mean and ddof-1 std of ``reps`` timed calls, after one warm-up call."""
    fn()
    times = np.empty(reps)
    for r in range(reps):
        start = time.perf_counter()
        fn()
        times[r] = time.perf_counter() - start
    return float(times.mean()), float(times.std(ddof=1))


def bench_build(methods, node_counts, background: GeneratorSpec, reps: int = 3,
                sketch_config: SketchConfig = SketchConfig(),
                threads: int = 1) -> list[BenchReport]:
    """Time representation builds for each method x node count.

    The empirical baseline has no learning step beyond its per-node sort,
    so the sort is what gets timed as its build. Runs single-threaded by
    default to stabilize timings; ``threads > 1`` measures parallel sketch
    builds instead (keep such reports separate from serial ones).
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    reports = []
    for count in node_counts:
        bg = synthesize(replace(background, n_nodes=int(count)))
        for method in methods:
            representation = _fit(method, bg, sketch_config, threads)
            mean, std = _timed(lambda: _fit(method, bg, sketch_config, threads),
                               reps)
            reports.append(BenchReport(
                method=method, n_nodes=bg.n_nodes, n_background=bg.n_samples,
                repr_bytes=_repr_bytes(method, representation, bg.n_nodes,
                                       bg.n_samples),
                repetitions=reps, build_time_mean=mean, build_time_std=std))
    return reports


def bench_query(methods, background_fractions, background: ActivationMatrix,
                test: ActivationMatrix, reps: int = 5, seed: int = 0,
                sketch_config: SketchConfig = SketchConfig()) -> list[BenchReport]:
    """Time per-sample scoring for each method x background fraction.

    Each fraction keeps a seeded, deterministic subsample of background rows;
    representations are built once per (method, fraction) and only the
    scoring pass is timed.
    """
    if reps < 3:
        raise ValueError("reps must be >= 3")
    fractions = [float(f) for f in background_fractions]
    if any(not 0.0 < f <= 1.0 for f in fractions):
        raise ValueError("background fractions must lie in (0, 1]")
    reports = []
    for fraction in fractions:
        n_rows = max(1, int(round(fraction * background.n_samples)))
        rng = np.random.default_rng([seed, int(round(fraction * 1_000_000))])
        rows = np.sort(rng.choice(background.n_samples, size=n_rows, replace=False))
        sub = ActivationMatrix(background.values[rows], background.layer_label,
                               "background")
        for method in methods:
            representation = _fit(method, sub, sketch_config)
            mean, std = _timed(lambda: score_matrix(representation, test), reps)
            reports.append(BenchReport(
                method=method, n_nodes=sub.n_nodes, n_background=sub.n_samples,
                repr_bytes=_repr_bytes(method, representation, sub.n_nodes,
                                       sub.n_samples),
                repetitions=reps,
                query_time_per_sample_mean=mean / test.n_samples,
                query_time_per_sample_std=std / test.n_samples))
    return reports


def _cell(mean: float | None, std: float | None) -> str:
    if mean is None:
        return "n/a"
    return f"{mean:.3e}s +/- {std:.1e}"


def report_to_markdown(reports) -> str:
    """Render reports as a markdown table, one row per report, sorted by
    (n_nodes, n_background, method) for deterministic output."""
    lines = [
        "| method | nodes | background | repr bytes | build time | query time/sample | reps |",
        "|---|---|---|---|---|---|---|",
    ]
    ordered = sorted(reports, key=lambda r: (r.n_nodes, r.n_background, r.method))
    for r in ordered:
        lines.append(
            f"| {r.method} | {r.n_nodes} | {r.n_background} | {r.repr_bytes} | "
            f"{_cell(r.build_time_mean, r.build_time_std)} | "
            f"{_cell(r.query_time_per_sample_mean, r.query_time_per_sample_std)} | "
            f"{r.repetitions} |")
    return "\n".join(lines) + "\n"


def reports_to_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2) + "\n"
