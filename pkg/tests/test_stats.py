"""KS comparison, AUROC, distribution export."""

import csv

import numpy as np
import pytest
from scipy.special import kolmogorov

from actsketch import (ActivationMatrix, NodeHistogram, PValueMatrix,
                       ShapeError, SketchConfig, SketchModel, auroc,
                       compare_representations, export_distribution,
                       fit_empirical, ks_two_sample, score_matrix)
from actsketch.stats import _kolmogorov_sf


def brute_ks_statistic(a, b):
    """Sup of |F1(x) - F2(x)| over every observed threshold, O(n*m)."""
    best = 0.0
    for x in list(a) + list(b):
        f1 = sum(1 for v in a if v <= x) / len(a)
        f2 = sum(1 for v in b if v <= x) / len(b)
        best = max(best, abs(f1 - f2))
    return best


def pair_auroc_oracle(neg, pos):
    wins = sum(1 for p in pos for n in neg if p > n)
    ties = sum(1 for p in pos for n in neg if p == n)
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


# --- KS ------------------------------------------------------------------------

def test_ks_identical_samples():
    r = ks_two_sample([0.4, 1.2, 3.3], [0.4, 1.2, 3.3])
    assert r.statistic == 0.0
    assert r.p_value == 1.0


def test_ks_disjoint_supports():
    r = ks_two_sample([0.1, 0.5, 0.9], [2.0, 2.5, 3.0])
    assert r.statistic == 1.0
    assert r.p_value < 0.1


def test_ks_interleaved_fixture_matches_brute_force():
    a = [0.1 * k for k in range(1, 11)]
    b = [0.15 + 0.1 * k for k in range(10)]
    r = ks_two_sample(a, b)
    assert r.statistic == pytest.approx(brute_ks_statistic(a, b), abs=1e-15)


def test_ks_matches_brute_force_randomized():
    rng = np.random.default_rng(50)
    for _ in range(25):
        n1, n2 = rng.integers(2, 200, size=2)
        a = rng.normal(0, 1, n1)
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.5, 2), n2)
        if rng.random() < 0.3:  # inject ties across samples
            b[: n2 // 2] = rng.choice(a, n2 // 2)
        r = ks_two_sample(a, b)
        assert r.statistic == pytest.approx(brute_ks_statistic(a, b), abs=1e-12)
        assert ks_two_sample(b, a).statistic == r.statistic


def test_ks_invariant_under_monotone_transform():
    rng = np.random.default_rng(51)
    a = rng.normal(0, 1, 80)
    b = rng.normal(0.3, 1.2, 60)
    r1 = ks_two_sample(a, b)
    r2 = ks_two_sample(np.exp(a), np.exp(b))
    assert r1.statistic == r2.statistic
    assert r1.p_value == r2.p_value


def test_ks_survival_against_scipy():
    for lam in [0.3, 0.5, 0.8, 1.0, 1.36, 2.0, 3.0]:
        assert _kolmogorov_sf(lam) == pytest.approx(kolmogorov(lam), abs=1e-9)


def test_ks_empty_input():
    with pytest.raises(ValueError):
        ks_two_sample([], [1.0])


# --- compare ---------------------------------------------------------------------

def _degenerate(matrix):
    return PValueMatrix("empirical", matrix, matrix)


def test_compare_identical_degenerate():
    vals = np.random.default_rng(3).uniform(0.1, 1.0, (40, 5))
    report = compare_representations(_degenerate(vals), _degenerate(vals), seed=1)
    assert report.mean_statistic == 0.0
    assert report.mean_p_value == 1.0
    assert len(report.per_node) == 5
    assert report.seed == 1


def test_compare_shape_mismatch():
    a = _degenerate(np.full((4, 2), 0.5))
    b = _degenerate(np.full((4, 3), 0.5))
    with pytest.raises(ShapeError):
        compare_representations(a, b, seed=0)


def test_compare_requires_point_reference():
    ranged = PValueMatrix("histogram_range", np.full((4, 2), 0.2),
                          np.full((4, 2), 0.7))
    with pytest.raises(ValueError, match="point"):
        compare_representations(ranged, ranged, seed=0)


def test_compare_singleton_bin_regression():
    # ranged candidate built from one-value-per-bin histogram: the drawn
    # distribution stays KS-close to the empirical reference
    rng = np.random.default_rng(42)
    bg_vals = rng.standard_normal(500)
    uniq = np.unique(bg_vals)
    h = NodeHistogram(np.append(uniq, np.nextafter(uniq[-1], np.inf)),
                      np.ones(uniq.size, dtype=np.int64), (), 500)
    sk = SketchModel((h,), "", SketchConfig(max_bins=501), 1)
    test = ActivationMatrix(rng.standard_normal((500, 1)), role="clean")
    bg = ActivationMatrix(bg_vals.reshape(-1, 1), role="background")
    report = compare_representations(score_matrix(fit_empirical(bg), test),
                                     score_matrix(sk, test), seed=7)
    assert report.mean_statistic == pytest.approx(0.016, abs=1e-12)
    assert report.mean_p_value >= 0.05
    assert report.mean_statistic <= 0.1


def test_report_means_match_entries():
    rng = np.random.default_rng(8)
    ref = _degenerate(rng.uniform(0.01, 1.0, (60, 4)))
    cand = PValueMatrix("histogram_range",
                        np.clip(ref.p_min - 0.05, 0, 1),
                        np.clip(ref.p_min + 0.05, 0, 1))
    report = compare_representations(ref, cand, seed=2)
    assert report.mean_statistic == pytest.approx(
        np.mean([r.statistic for r in report.per_node]))
    assert report.mean_p_value == pytest.approx(
        np.mean([r.p_value for r in report.per_node]))


# --- AUROC -----------------------------------------------------------------------

def test_auroc_perfect_separation():
    assert auroc([0.0, 0.0, 0.0], [1.0, 1.0]) == 1.0


def test_auroc_identical_scores():
    assert auroc([3.0, 1.0, 2.0], [1.0, 2.0, 3.0]) == 0.5


def test_auroc_tie_fixture():
    assert auroc([1, 2, 3], [2, 3, 4]) == pytest.approx(
        pair_auroc_oracle([1, 2, 3], [2, 3, 4]))
    assert auroc([1, 2, 3], [2, 3, 4]) == pytest.approx(7 / 9)


def test_auroc_matches_pair_oracle_randomized():
    rng = np.random.default_rng(60)
    for _ in range(20):
        neg = rng.integers(0, 6, rng.integers(1, 30)).astype(float)
        pos = rng.integers(0, 6, rng.integers(1, 30)).astype(float)
        assert auroc(neg, pos) == pytest.approx(pair_auroc_oracle(neg, pos))


def test_auroc_complement_and_invariance():
    rng = np.random.default_rng(61)
    neg = rng.normal(0, 1, 50)
    pos = rng.normal(0.5, 1, 40)  # continuous, ties have probability zero
    assert auroc(neg, pos) + auroc(pos, neg) == pytest.approx(1.0)
    assert auroc(np.exp(neg), np.exp(pos)) == pytest.approx(auroc(neg, pos))


def test_auroc_empty():
    with pytest.raises(ValueError):
        auroc([], [1.0])


# --- export ----------------------------------------------------------------------

def _count_rows(path):
    with open(path) as fh:
        return sum(1 for _ in csv.reader(fh))


def test_export_distribution_rows(tmp_path):
    rng = np.random.default_rng(70)
    pm = PValueMatrix("histogram_range", rng.uniform(0, 0.4, (20, 10)),
                      rng.uniform(0.6, 1.0, (20, 10)))
    path = tmp_path / "dist.csv"
    export_distribution(pm, range(10), path, seed=1)
    assert _count_rows(path) == 1 + 10 * 20

    export_distribution(pm, [], path, seed=1)
    assert _count_rows(path) == 1

    export_distribution(pm, [3, 7], path, seed=1)
    assert _count_rows(path) == 1 + 2 * 20
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert {r["node"] for r in rows} == {"3", "7"}
    for r in rows:
        assert float(r["p_min"]) <= float(r["drawn_value"]) <= float(r["p_max"])


def test_export_distribution_bad_index(tmp_path):
    pm = PValueMatrix("empirical", np.full((2, 2), 0.5), np.full((2, 2), 0.5))
    with pytest.raises(IndexError):
        export_distribution(pm, [5], tmp_path / "x.csv")
