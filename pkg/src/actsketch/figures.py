"""Figure rendering for CLI report paths.

Each helper writes one PNG next to the delimited/JSON output it illustrates.
Uses the Agg backend so the CLI stays headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_score_distributions(clean, anomalous, path) -> None:
    """Overlaid subset-score histograms for clean vs anomalous samples."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    lo = min(float(np.min(clean)), float(np.min(anomalous)))
    hi = max(float(np.max(clean)), float(np.max(anomalous)))
    if lo == hi:
        hi = lo + 1.0
    bins = np.linspace(lo, hi, 40)
    ax.hist(clean, bins=bins, alpha=0.6, label="clean", color="#1f77b4")
    ax.hist(anomalous, bins=bins, alpha=0.6, label="anomalous", color="#d62728")
    ax.set_xlabel("subset score")
    ax.set_ylabel("samples")
    ax.legend()
    _save(fig, path)


def save_roc_curve(clean, anomalous, auroc_value: float, path) -> None:
    """ROC curve of anomalous-vs-clean separation by subset score."""
    scores = np.concatenate([np.asarray(clean, dtype=float),
                             np.asarray(anomalous, dtype=float)])
    labels = np.concatenate([np.zeros(len(clean)), np.ones(len(anomalous))])
    order = np.argsort(-scores, kind="stable")
    tp = np.concatenate([[0.0], np.cumsum(labels[order])])
    fp = np.concatenate([[0.0], np.cumsum(1.0 - labels[order])])
    fig, ax = plt.subplots(figsize=(4.8, 4.8))
    ax.plot(fp / max(fp[-1], 1.0), tp / max(tp[-1], 1.0), color="#1f77b4")
    ax.plot([0, 1], [0, 1], linestyle="--", color="grey", linewidth=1)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.set_title(f"AUROC = {auroc_value:.3f}")
    _save(fig, path)


def save_comparison(report, path) -> None:
    """Per-node KS statistics with the mean marked."""
    stats = [r.statistic for r in report.per_node]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(range(len(stats)), stats, ".", markersize=4, color="#1f77b4")
    ax.axhline(report.mean_statistic, color="#d62728", linewidth=1,
               label=f"mean = {report.mean_statistic:.3f}")
    ax.set_xlabel("node")
    ax.set_ylabel("KS statistic")
    ax.set_ylim(bottom=0)
    ax.legend()
    _save(fig, path)


def _grouped_bars(ax, reports, value, ylabel):
    methods = sorted({r.method for r in reports})
    keys = sorted({(r.n_nodes, r.n_background) for r in reports})
    x = np.arange(len(keys))
    width = 0.8 / max(len(methods), 1)
    for i, method in enumerate(methods):
        by_key = {(r.n_nodes, r.n_background): value(r)
                  for r in reports if r.method == method}
        heights = [by_key.get(k, 0.0) or 0.0 for k in keys]
        ax.bar(x + i * width, heights, width, label=method)
    ax.set_xticks(x + 0.4 - width / 2)
    ax.set_xticklabels([f"{n}n/{b}s" for n, b in keys], fontsize=8)
    ax.set_ylabel(ylabel)
    ax.set_yscale("log")
    ax.legend(fontsize=8)


def save_bench_memory(reports, path) -> None:
    """Representation bytes per method across configurations (log scale)."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    _grouped_bars(ax, reports, lambda r: r.repr_bytes, "representation bytes")
    _save(fig, path)


def save_bench_times(reports, path) -> None:
    """Build and/or query wall times per method across configurations."""
    builds = [r for r in reports if r.build_time_mean is not None]
    queries = [r for r in reports if r.query_time_per_sample_mean is not None]
    panels = [(builds, lambda r: r.build_time_mean, "build time (s)"),
              (queries, lambda r: r.query_time_per_sample_mean,
               "query time per sample (s)")]
    panels = [p for p in panels if p[0]]
    fig, axes = plt.subplots(1, max(len(panels), 1),
                             figsize=(6.4 * max(len(panels), 1), 4.0))
    if len(panels) <= 1:
        axes = [axes]
    for ax, (rows, value, label) in zip(axes, panels):
        _grouped_bars(ax, rows, value, label)
    _save(fig, path)
