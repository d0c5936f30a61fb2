"""Subset scanning over node p-values.

For each test sample, find the subset of nodes whose p-values are jointly
most surprising under a Berk-Jones scan statistic. The statistic satisfies
the linear-time subset-scanning property: at a fixed significance level the
optimal subset is a prefix of the nodes sorted by p-value, so the search is
a sort plus a sweep instead of an exponential enumeration.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .pvalues import PValueMatrix, PValueRange
from .sketch import SchemaError

DEFAULT_ALPHAS = tuple(round(0.01 * k, 2) for k in range(1, 51))

SCAN_MODES = ("pmax", "draw")


@dataclass(frozen=True)
class SubsetScanResult:
    """Most anomalous node subset for one sample, with its score and level."""

    node_subset: tuple[int, ...]
    score: float
    alpha_star: float
    sample_index: int

    def __post_init__(self):
        if self.score < 0.0:
            raise ValueError("score must be >= 0")
        if self.score > 0.0 and not self.node_subset:
            raise ValueError("positive score requires a non-empty subset")


def _bernoulli_kl(q, alpha):
    # xlogy handles the 0*log(0) limits at q in {0, 1}
    return xlogy(q, q / alpha) + xlogy(1.0 - q, (1.0 - q) / (1.0 - alpha))


def berk_jones_score(n_alpha: int, n: int, alpha: float) -> float:
    """Berk-Jones statistic n * KL(n_alpha/n || alpha), zero when the
    observed significant fraction does not exceed alpha."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= n_alpha <= n:
        raise ValueError(f"n_alpha must lie in [0, {n}], got {n_alpha}")
    q = n_alpha / n
    if q <= alpha:
        return 0.0
    return float(n * _bernoulli_kl(q, alpha))


def _check_alphas(alphas) -> np.ndarray:
    alphas = np.asarray(alphas, dtype=np.float64)
    if alphas.size == 0:
        raise ValueError("empty alpha grid")
    if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
        raise ValueError("alphas must lie in the open interval (0, 1)")
    if np.any(np.diff(alphas) <= 0.0):
        raise ValueError("alphas must be strictly ascending")
    return alphas


def _representatives(ranges, mode: str, rng: np.random.Generator | None) -> np.ndarray:
    if isinstance(ranges, np.ndarray):
        arr = np.asarray(ranges, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError("array input must have shape (n_nodes, 2)")
        lo, hi = arr[:, 0], arr[:, 1]
    else:
        lo = np.array([r.p_min for r in ranges])
        hi = np.array([r.p_max for r in ranges])
    if lo.size == 0:
        raise ValueError("empty p-value vector")
    if mode == "pmax":
        return hi
    if mode == "draw":
        if rng is None:
            raise ValueError("draw mode requires an rng")
        return lo + (hi - lo) * rng.random(lo.shape)
    raise ValueError(f"unknown mode {mode!r}, expected one of {SCAN_MODES}")


def _scan_vector(reps: np.ndarray, alphas: np.ndarray,
                 sample_index: int) -> SubsetScanResult:
    order = np.argsort(reps, kind="stable")
    sorted_p = reps[order]
    n = sorted_p.size
    ks = np.arange(1, n + 1, dtype=np.float64)
    m_per_alpha = np.searchsorted(sorted_p, alphas, side="right")
    best_score = 0.0
    best_k = 0
    best_alpha = float(alphas[0])
    for alpha, m in zip(alphas, m_per_alpha):
        n_alpha = np.minimum(ks, float(m))
        q = n_alpha / ks
        scores = np.where(q > alpha, ks * _bernoulli_kl(q, alpha), 0.0)
        k_best = int(np.argmax(scores))
        if scores[k_best] > best_score:
            best_score = float(scores[k_best])
            best_k = k_best + 1
            best_alpha = float(alpha)
    if best_score == 0.0:
        return SubsetScanResult((), 0.0, best_alpha, sample_index)
    subset = tuple(sorted(int(j) for j in order[:best_k]))
    return SubsetScanResult(subset, best_score, best_alpha, sample_index)


def ltss_scan(ranges, alphas, mode: str = "pmax",
              rng: np.random.Generator | None = None,
              sample_index: int = 0) -> SubsetScanResult:
    """Scan one sample's per-node p-value ranges for its most anomalous subset.

    ``ranges`` is a sequence of :class:`PValueRange` (or an (n, 2) array of
    [p_min, p_max] rows); each node's representative p-value is p_max
    (``mode="pmax"``) or a uniform draw (``mode="draw"``, seeded via ``rng``).
    Ties across (alpha, prefix) pairs resolve to the earliest alpha, then the
    smallest prefix; a scan where nothing clears any alpha returns the empty
    subset with score 0.
    """
    alphas = _check_alphas(alphas)
    reps = _representatives(ranges, mode, rng)
    return _scan_vector(reps, alphas, sample_index)


def scan_matrix(pm: PValueMatrix, alphas=DEFAULT_ALPHAS, mode: str = "pmax",
                seed: int | None = None,
                threads: int = 1) -> list[SubsetScanResult]:
    """Run the subset scan independently on every test sample of ``pm``.

    Samples are independent, so ``threads > 1`` fans them out; results are
    assembled by sample index and identical to the serial order.
    """
    alphas = _check_alphas(alphas)
    if mode not in SCAN_MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {SCAN_MODES}")
    if mode == "pmax":
        reps = pm.p_max
    else:
        if seed is None:
            raise ValueError("draw mode requires a seed")
        rng = np.random.default_rng(seed)
        reps = pm.p_min + (pm.p_max - pm.p_min) * rng.random(pm.p_min.shape)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda i: _scan_vector(reps[i], alphas, i),
                                 range(pm.n_samples)))
    return [_scan_vector(reps[i], alphas, i) for i in range(pm.n_samples)]


def score_samples(pm: PValueMatrix, alphas=DEFAULT_ALPHAS, mode: str = "pmax",
                  seed: int | None = None) -> np.ndarray:
    """One subset score per test sample."""
    return np.array([r.score for r in scan_matrix(pm, alphas, mode, seed)])


def scan_results_to_csv(results, path) -> None:
    """CSV rows: sample_index, score, alpha_star, subset_size."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_index", "score", "alpha_star", "subset_size"])
        for r in results:
            writer.writerow([r.sample_index, repr(r.score), repr(r.alpha_star),
                             len(r.node_subset)])


def scores_from_csv(path) -> np.ndarray:
    """Read the score column back from :func:`scan_results_to_csv` output."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_index", "score", "alpha_star", "subset_size"]:
            raise SchemaError(f"{path}: unexpected scores CSV header {header}")
        try:
            scores = [float(row[1]) for row in reader if row]
        except (ValueError, IndexError) as e:
            raise SchemaError(f"{path}: malformed score row: {e}") from e
    if not scores:
        raise SchemaError(f"{path}: no data rows")
    return np.array(scores)
