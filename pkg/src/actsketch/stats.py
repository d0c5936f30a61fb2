"""Distribution comparison and detection-power metrics.

Two-sample Kolmogorov-Smirnov for judging whether a ranged p-value
representation reproduces its point baseline, rank-based AUROC for
clean-vs-anomalous separation, and a long-form CSV export of p-value
distributions for external plotting tools.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .pvalues import PValueMatrix, ShapeError, draw_matrix


@dataclass(frozen=True)
class KSResult:
    statistic: float
    p_value: float
    n1: int
    n2: int

    def __post_init__(self):
        if not 0.0 <= self.statistic <= 1.0:
            raise ValueError(f"statistic {self.statistic} outside [0, 1]")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class ComparisonReport:
    """Per-node KS results plus their arithmetic means and the draw seed."""

    per_node: tuple[KSResult, ...]
    mean_statistic: float
    mean_p_value: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "mean_statistic": self.mean_statistic,
            "mean_p_value": self.mean_p_value,
            "seed": self.seed,
            "per_node": [
                {"node": j, "statistic": r.statistic, "p_value": r.p_value}
                for j, r in enumerate(self.per_node)
            ],
        }


def _kolmogorov_sf(lam: float) -> float:
    """Survival function of the Kolmogorov distribution.

    Alternating series 2 * sum_r (-1)^(r-1) exp(-2 r^2 lam^2), truncated
    once terms drop below 1e-10; tiny lam short-circuits to 1.
    """
    if lam < 1e-3:
        return 1.0
    total = 0.0
    sign = 1.0
    for r in range(1, 100000):
        term = 2.0 * math.exp(-2.0 * r * r * lam * lam)
        if term < 1e-10:
            break
        total += sign * term
        sign = -sign
    return min(max(total, 0.0), 1.0)


def ks_two_sample(a, b) -> KSResult:
    """Two-sample KS test.

    The statistic is the exact sup distance between the empirical CDFs; the
    p-value uses the asymptotic Kolmogorov distribution at
    sqrt(n1 * n2 / (n1 + n2)) * statistic.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).ravel())
    b = np.sort(np.asarray(b, dtype=np.float64).ravel())
    if a.size == 0 or b.size == 0:
        raise ValueError("both samples must be non-empty")
    grid = np.concatenate([a, b])
    cdf_a = np.searchsorted(a, grid, side="right") / a.size
    cdf_b = np.searchsorted(b, grid, side="right") / b.size
    statistic = float(np.abs(cdf_a - cdf_b).max())
    effective = a.size * b.size / (a.size + b.size)
    p_value = _kolmogorov_sf(math.sqrt(effective) * statistic)
    return KSResult(statistic, p_value, a.size, b.size)


def compare_representations(reference: PValueMatrix, candidate: PValueMatrix,
                            seed: int) -> ComparisonReport:
    """Node-wise KS comparison of a ranged representation against a point one.

    Draws one value per candidate range (uniformly, seeded, row-major order)
    and tests each node's draws against the reference column, then averages
    statistics and p-values across nodes.
    """
    if (reference.n_samples, reference.n_nodes) != (candidate.n_samples,
                                                    candidate.n_nodes):
        raise ShapeError(
            f"shape mismatch: reference {reference.n_samples}x{reference.n_nodes}, "
            f"candidate {candidate.n_samples}x{candidate.n_nodes}")
    if not reference.is_degenerate:
        raise ValueError("reference matrix must hold point p-values")
    rng = np.random.default_rng(seed)
    draws = draw_matrix(candidate, rng)
    results = tuple(ks_two_sample(reference.p_min[:, j], draws[:, j])
                    for j in range(reference.n_nodes))
    return ComparisonReport(
        per_node=results,
        mean_statistic=float(np.mean([r.statistic for r in results])),
        mean_p_value=float(np.mean([r.p_value for r in results])),
        seed=seed,
    )


def auroc(scores_negative, scores_positive) -> float:
    """Mann-Whitney AUROC: (#pairs pos > neg + 0.5 * #ties) / (n_pos * n_neg)."""
    neg = np.sort(np.asarray(scores_negative, dtype=np.float64).ravel())
    pos = np.asarray(scores_positive, dtype=np.float64).ravel()
    if neg.size == 0 or pos.size == 0:
        raise ValueError("both score vectors must be non-empty")
    below = np.searchsorted(neg, pos, side="left")
    ties = np.searchsorted(neg, pos, side="right") - below
    wins = float(below.sum()) + 0.5 * float(ties.sum())
    return wins / (neg.size * pos.size)


def export_distribution(pm: PValueMatrix, node_indices, path, seed: int = 0) -> None:
    """Write long-form per-node p-value rows for external ridge-plot tooling.

    Columns: node, sample, p_min, p_max, drawn_value. Draws are uniform per
    range, seeded; an empty index set yields a header-only file.
    """
    indices = [int(j) for j in node_indices]
    for j in indices:
        if not 0 <= j < pm.n_nodes:
            raise IndexError(f"node index {j} out of range for {pm.n_nodes} nodes")
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["node", "sample", "p_min", "p_max", "drawn_value"])
        for j in indices:
            lo = pm.p_min[:, j]
            hi = pm.p_max[:, j]
            drawn = lo + (hi - lo) * rng.random(pm.n_samples)
            for i in range(pm.n_samples):
                writer.writerow([j, i, repr(float(lo[i])), repr(float(hi[i])),
                                 repr(float(drawn[i]))])
