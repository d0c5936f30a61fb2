"""Berk-Jones scoring and linear-time subset scanning."""

import math

import numpy as np
import pytest

from actsketch import (PValueMatrix, PValueRange, berk_jones_score, ltss_scan,
                       scan_matrix, scan_results_to_csv, score_samples,
                       scores_from_csv)
from actsketch import (ActivationMatrix, GeneratorSpec, NodeDistribution,
                       build_sketch, fit_empirical, inject_anomaly,
                       score_matrix, synthesize)

STD_NORMAL = NodeDistribution(means=(0.0,), stds=(1.0,), weights=(1.0,))


def exhaustive_best_score(pvals, alphas):
    """Max Berk-Jones score over every non-empty subset and every alpha."""
    n = len(pvals)
    best = 0.0
    for mask in range(1, 1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        for alpha in alphas:
            n_alpha = sum(1 for i in members if pvals[i] <= alpha)
            best = max(best, berk_jones_score(n_alpha, len(members), alpha))
    return best


def ranges(pvals):
    return [PValueRange(p, p) for p in pvals]


# --- Berk-Jones -----------------------------------------------------------------

def test_bj_zero_at_alpha():
    assert berk_jones_score(1, 10, 0.1) == 0.0  # observed fraction == alpha
    assert berk_jones_score(0, 10, 0.1) == 0.0


def test_bj_all_significant_closed_form():
    assert berk_jones_score(10, 10, 0.1) == pytest.approx(10 * math.log(10),
                                                          rel=1e-12)


def test_bj_half_significant_closed_form():
    expected = 10 * (0.5 * math.log(5.0) + 0.5 * math.log(0.5 / 0.9))
    assert berk_jones_score(5, 10, 0.1) == pytest.approx(expected, rel=1e-12)


def test_bj_validation():
    with pytest.raises(ValueError):
        berk_jones_score(1, 10, 0.0)
    with pytest.raises(ValueError):
        berk_jones_score(1, 10, 1.0)
    with pytest.raises(ValueError):
        berk_jones_score(11, 10, 0.5)
    with pytest.raises(ValueError):
        berk_jones_score(0, 0, 0.5)


# --- LTSS -----------------------------------------------------------------------

def test_scan_nothing_significant():
    result = ltss_scan(ranges([1.0] * 8), [0.01, 0.05, 0.1])
    assert result.score == 0.0
    assert result.node_subset == ()


def test_scan_single_strong_node():
    pvals = [0.9] * 99
    pvals[42] = 0.001
    result = ltss_scan(ranges(pvals), [0.01, 0.05, 0.1, 0.2])
    assert result.node_subset == (42,)
    assert result.score == pytest.approx(
        exhaustive_best_score([0.001], [0.01, 0.05, 0.1, 0.2]))


def test_scan_matches_exhaustive_randomized():
    rng = np.random.default_rng(90)
    alphas = np.round(np.linspace(0.02, 0.5, 13), 4)
    for _ in range(25):
        n = int(rng.integers(1, 12))
        pvals = np.round(rng.uniform(0.001, 1.0, n), 3)
        result = ltss_scan(ranges(pvals), alphas)
        assert result.score == exhaustive_best_score(pvals.tolist(), alphas)


def test_scan_result_score_is_reproducible_from_subset():
    rng = np.random.default_rng(91)
    pvals = rng.uniform(0, 1, 30)
    alphas = np.round(np.linspace(0.01, 0.5, 20), 4)
    result = ltss_scan(ranges(pvals), alphas)
    if result.score > 0:
        n_alpha = sum(1 for i in result.node_subset
                      if pvals[i] <= result.alpha_star)
        assert result.score == berk_jones_score(n_alpha, len(result.node_subset),
                                                result.alpha_star)


def test_scan_alpha_validation():
    with pytest.raises(ValueError):
        ltss_scan(ranges([0.5]), [])
    with pytest.raises(ValueError):
        ltss_scan(ranges([0.5]), [0.2, 0.1])
    with pytest.raises(ValueError):
        ltss_scan(ranges([0.5]), [0.0, 0.5])
    with pytest.raises(ValueError):
        ltss_scan(ranges([]), [0.1])


def test_scan_prefix_selection_order_invariant():
    # any strictly increasing remap that keeps p-values on the same side of
    # every alpha leaves the chosen subset and score untouched
    rng = np.random.default_rng(92)
    alphas = np.round(np.arange(0.05, 0.55, 0.05), 2)
    pvals = rng.uniform(0.001, 0.999, 40)
    grid = np.concatenate([[0.0], alphas, [1.0]])

    def remap(p):
        k = np.searchsorted(grid, p, side="right") - 1
        lo, hi = grid[k], grid[k + 1]
        return lo + (hi - lo) * math.sqrt((p - lo) / (hi - lo))

    mapped = np.array([remap(p) for p in pvals])
    r1 = ltss_scan(ranges(pvals), alphas)
    r2 = ltss_scan(ranges(mapped), alphas)
    assert r1.node_subset == r2.node_subset
    assert r1.alpha_star == r2.alpha_star
    assert r1.score == pytest.approx(r2.score, rel=1e-12)


def test_scan_draw_mode_deterministic():
    rng = np.random.default_rng(93)
    lo = rng.uniform(0, 0.4, (6, 10))
    hi = lo + rng.uniform(0, 0.3, (6, 10))
    pm = PValueMatrix("histogram_range", lo, np.clip(hi, 0, 1))
    a = score_samples(pm, [0.05, 0.1, 0.2], mode="draw", seed=5)
    b = score_samples(pm, [0.05, 0.1, 0.2], mode="draw", seed=5)
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        score_samples(pm, [0.05], mode="draw")  # missing seed


def test_scan_matrix_threads_match_serial():
    rng = np.random.default_rng(99)
    lo = rng.uniform(0, 0.6, (12, 20))
    pm = PValueMatrix("empirical", lo, lo)
    serial = scan_matrix(pm, [0.05, 0.1, 0.3])
    threaded = scan_matrix(pm, [0.05, 0.1, 0.3], threads=4)
    assert [(r.score, r.node_subset, r.alpha_star) for r in serial] == \
           [(r.score, r.node_subset, r.alpha_star) for r in threaded]


def test_scan_matrix_matches_single_scans():
    rng = np.random.default_rng(94)
    lo = rng.uniform(0, 0.5, (7, 9))
    pm = PValueMatrix("empirical", lo, lo)
    alphas = [0.05, 0.1, 0.3]
    results = scan_matrix(pm, alphas)
    for i, r in enumerate(results):
        single = ltss_scan([pm.range_at(i, j) for j in range(9)], alphas,
                           sample_index=i)
        assert r.score == single.score
        assert r.node_subset == single.node_subset
        assert r.alpha_star == single.alpha_star
        assert r.sample_index == i


def test_score_samples_single_row():
    pm = PValueMatrix("empirical", np.array([[0.4]]), np.array([[0.4]]))
    assert score_samples(pm, [0.1, 0.5]).shape == (1,)


def test_scan_separates_injected_anomalies():
    mix = NodeDistribution(means=(-0.5, 0.5), stds=(0.8660254037844386,) * 2,
                           weights=(0.5, 0.5))
    bg = synthesize(GeneratorSpec(n_samples=300, n_nodes=40, seed=95, default=mix))
    clean = synthesize(GeneratorSpec(n_samples=100, n_nodes=40, seed=96,
                                     default=mix, role="clean"))
    anom = inject_anomaly(clean, range(4), 3.0, seed=97)
    sk = build_sketch(bg)
    clean_scores = score_samples(score_matrix(sk, clean))
    anom_scores = score_samples(score_matrix(sk, anom))
    assert anom_scores.mean() > clean_scores.mean()


def test_scores_csv_round_trip(tmp_path):
    rng = np.random.default_rng(98)
    lo = rng.uniform(0, 1, (5, 6))
    pm = PValueMatrix("empirical", lo, lo)
    results = scan_matrix(pm, [0.1, 0.2])
    path = tmp_path / "scores.csv"
    scan_results_to_csv(results, path)
    back = scores_from_csv(path)
    assert np.array_equal(back, np.array([r.score for r in results]))
