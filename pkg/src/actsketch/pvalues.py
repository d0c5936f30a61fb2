"""P-value representations of test activations.

Three interchangeable representations answer "how extreme is activation t
at this node, relative to the background": the raw sorted background
(empirical), a Gaussian KDE tail mass, and the histogram sketch, which
yields an interval [p_min, p_max] bracketing the empirical p-value instead
of a point. All three share the +1 shift, so a value above everything in
the background still gets the non-zero p-value 1 / (n_background + 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .activations import ActivationMatrix
from .sketch import NodeHistogram, SchemaError, SketchModel

METHODS = ("empirical", "kde", "histogram_range")

_KDE_CHUNK = 262144  # cap on scratch elements when scoring a column


class ShapeError(ValueError):
    """Operands disagree on matrix dimensions."""


@dataclass(frozen=True)
class PValueRange:
    """Interval [p_min, p_max] for one test activation."""

    p_min: float
    p_max: float

    def __post_init__(self):
        if not 0.0 <= self.p_min <= self.p_max <= 1.0:
            raise ValueError(f"invalid range [{self.p_min}, {self.p_max}]")


@dataclass(frozen=True)
class PValueMatrix:
    """Per-entry p-value ranges for a scored test matrix.

    ``p_min`` and ``p_max`` are (n_samples, n_nodes) arrays; empirical and
    KDE scoring produce degenerate entries with p_min == p_max.
    """

    method: str
    p_min: np.ndarray
    p_max: np.ndarray

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        lo = np.asarray(self.p_min, dtype=np.float64)
        hi = np.asarray(self.p_max, dtype=np.float64)
        if lo.ndim != 2 or lo.shape != hi.shape:
            raise ShapeError(f"p_min/p_max shapes differ: {lo.shape} vs {hi.shape}")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(lo > hi):
            raise ValueError("entries must satisfy 0 <= p_min <= p_max <= 1")
        lo.flags.writeable = False
        hi.flags.writeable = False
        object.__setattr__(self, "p_min", lo)
        object.__setattr__(self, "p_max", hi)

    @property
    def n_samples(self) -> int:
        return self.p_min.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.p_min.shape[1]

    @property
    def is_degenerate(self) -> bool:
        return bool(np.all(self.p_min == self.p_max))

    def range_at(self, sample: int, node: int) -> PValueRange:
        return PValueRange(float(self.p_min[sample, node]),
                           float(self.p_max[sample, node]))


@dataclass(frozen=True)
class EmpiricalModel:
    """Sorted per-node background columns; queries are binary searches."""

    sorted_values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.sorted_values, dtype=np.float64)
        vals.flags.writeable = False
        object.__setattr__(self, "sorted_values", vals)

    @property
    def n_background(self) -> int:
        return self.sorted_values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.sorted_values.shape[1]


@dataclass(frozen=True)
class KdeModel:
    """Gaussian KDE per node: retained values, bandwidth, background max."""

    values: np.ndarray
    bandwidths: np.ndarray
    omegas: np.ndarray

    def __post_init__(self):
        for name in ("values", "bandwidths", "omegas"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if self.values.ndim != 2:
            raise ValueError("values must be 2-D")
        if self.bandwidths.shape != (self.values.shape[1],) \
                or self.omegas.shape != (self.values.shape[1],):
            raise ShapeError("per-node parameter vectors must match node count")
        if np.any(self.bandwidths <= 0):
            raise ValueError("bandwidths must be > 0")

    @property
    def n_background(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]


def fit_empirical(background: ActivationMatrix) -> EmpiricalModel:
    """The empirical baseline's whole build step: one sort per node."""
    if background.role != "background":
        raise ValueError(f"expected a background matrix, got role {background.role!r}")
    return EmpiricalModel(np.sort(background.values, axis=0))


def fit_kde(background: ActivationMatrix) -> KdeModel:
    """Fit per-node Gaussian KDEs with Silverman's bandwidth.

    h = 0.9 * min(sigma, IQR / 1.34) * n^(-1/5), where sigma is the ddof=1
    sample standard deviation and quartiles interpolate linearly, floored at
    1e-9 * (1 + |mean|) so constant nodes stay queryable.
    """
    if background.role != "background":
        raise ValueError(f"expected a background matrix, got role {background.role!r}")
    vals = background.values
    n = vals.shape[0]
    sigma = vals.std(axis=0, ddof=1) if n > 1 else np.zeros(vals.shape[1])
    q25, q75 = np.percentile(vals, [25.0, 75.0], axis=0)
    spread = np.minimum(sigma, (q75 - q25) / 1.34)
    h = 0.9 * spread * n ** (-0.2)
    floor = 1e-9 * (1.0 + np.abs(vals.mean(axis=0)))
    return KdeModel(vals, np.maximum(h, floor), vals.max(axis=0))


def empirical_pvalue(background_sorted, t: float) -> float:
    """Shifted exceedance proportion (1 + #{a >= t}) / (n + 1).

    ``background_sorted`` must be ascending; the count is a binary search.
    """
    bg = np.asarray(background_sorted, dtype=np.float64)
    if bg.size == 0:
        raise ValueError("empty background")
    n_ge = bg.size - int(np.searchsorted(bg, t, side="left"))
    return (1.0 + n_ge) / (bg.size + 1.0)


def _attributed_counts(h: NodeHistogram, t: float) -> tuple[int, int]:
    """Background mass attributed strictly above / at-or-above t.

    Bins wholly above t's bin count toward both; t's own bin counts toward
    the at-or-above side only; modal bins compare by value (> both, == the
    at-or-above side only).
    """
    boundaries, greater, greater_equal = h.query_tables
    if boundaries.size:
        slot = int(np.searchsorted(boundaries, t, side="right"))
        g, ge = int(greater[slot]), int(greater_equal[slot])
    else:
        g = ge = 0
    for v, c in h.modal_bins:
        if v > t:
            g += c
            ge += c
        elif v == t:
            ge += c
    return g, ge


def histogram_pvalue_range(h: NodeHistogram, t: float) -> PValueRange:
    """P-value range for one test activation against one node's histogram.

    p_min counts only mass attributable strictly above t, p_max everything
    attributable at-or-above, each with the +1 shift, so the bracket always
    contains the empirical p-value of the represented background.
    """
    g, ge = _attributed_counts(h, t)
    n = h.n_background
    return PValueRange((1.0 + g) / (n + 1.0), (1.0 + ge) / (n + 1.0))


def histogram_pvalue_printed(h: NodeHistogram, t: float) -> tuple[float, float]:
    """Compatibility variant using the proportion-below orientation.

    Returns the raw pair ((n - G) / (n + 1), (n - GE + 1) / (n + 1)); the
    first component exceeds the second whenever t's bin is non-empty, so
    this is exposed for comparison only and never feeds downstream scoring.
    """
    g, ge = _attributed_counts(h, t)
    n = h.n_background
    return (n - g) / (n + 1.0), (n - ge + 1.0) / (n + 1.0)


def kde_pvalue(m: KdeModel, node: int, t: float) -> float:
    """Tail mass of the node's KDE from t up to the background max.

    For t at or above the background max, returns 1 / (n + 1); otherwise
    the closed-form integral (1/n) * sum_i [Phi((omega - a_i)/h) -
    Phi((t - a_i)/h)], clamped to [0, 1].
    """
    if not 0 <= node < m.n_nodes:
        raise IndexError(f"node {node} out of range for {m.n_nodes} nodes")
    omega = float(m.omegas[node])
    n = m.n_background
    if t >= omega:
        return 1.0 / (n + 1.0)
    a = m.values[:, node]
    h = float(m.bandwidths[node])
    mass = (float(ndtr((omega - a) / h).sum()) - float(ndtr((t - a) / h).sum())) / n
    return min(max(mass, 0.0), 1.0)


def _score_empirical_column(bg_sorted: np.ndarray, t: np.ndarray) -> np.ndarray:
    n = bg_sorted.size
    idx = np.searchsorted(bg_sorted, t, side="left")
    return (n + 1.0 - idx) / (n + 1.0)


def _score_histogram_column(h: NodeHistogram, t: np.ndarray):
    boundaries, greater, greater_equal = h.query_tables
    if boundaries.size:
        slot = np.searchsorted(boundaries, t, side="right")
        g = greater[slot]
        ge = greater_equal[slot]
    else:
        g = np.zeros(t.shape, dtype=np.int64)
        ge = np.zeros(t.shape, dtype=np.int64)
    if h.modal_bins:
        g = g.copy()
        ge = ge.copy()
        for v, c in h.modal_bins:
            above = v > t
            g += c * above
            ge += c * (above | (v == t))
    # divide (not multiply by a reciprocal) so counts equal to the raw
    # background's reproduce the empirical p-value bitwise
    n1 = h.n_background + 1.0
    return (1.0 + g) / n1, (1.0 + ge) / n1


def _score_kde_column(m: KdeModel, node: int, t: np.ndarray) -> np.ndarray:
    a = m.values[:, node]
    h = float(m.bandwidths[node])
    omega = float(m.omegas[node])
    n = a.size
    total_mass = float(ndtr((omega - a) / h).sum())
    out = np.empty(t.shape)
    step = max(1, _KDE_CHUNK // n)
    for start in range(0, t.size, step):
        chunk = t[start:start + step]
        below = ndtr((chunk[:, None] - a[None, :]) / h).sum(axis=1)
        out[start:start + step] = (total_mass - below) / n
    np.clip(out, 0.0, 1.0, out=out)
    out[t >= omega] = 1.0 / (n + 1.0)
    return out


def score_matrix(representation, test: ActivationMatrix) -> PValueMatrix:
    """Score every test activation against the matching per-node representation.

    ``representation`` may be a SketchModel, EmpiricalModel, or KdeModel;
    empirical and KDE entries come back as degenerate ranges.
    """
    if isinstance(representation, SketchModel):
        n_nodes, method = representation.n_nodes, "histogram_range"
    elif isinstance(representation, EmpiricalModel):
        n_nodes, method = representation.n_nodes, "empirical"
    elif isinstance(representation, KdeModel):
        n_nodes, method = representation.n_nodes, "kde"
    else:
        raise TypeError(f"unsupported representation type "
                        f"{type(representation).__name__}")
    if test.n_nodes != n_nodes:
        raise ShapeError(f"test matrix has {test.n_nodes} nodes, "
                         f"representation has {n_nodes}")
    lo = np.empty((test.n_samples, n_nodes))
    if method == "histogram_range":
        hi = np.empty_like(lo)
        for j, h in enumerate(representation.histograms):
            lo[:, j], hi[:, j] = _score_histogram_column(h, test.values[:, j])
    elif method == "empirical":
        for j in range(n_nodes):
            lo[:, j] = _score_empirical_column(representation.sorted_values[:, j],
                                               test.values[:, j])
        hi = lo
    else:
        for j in range(n_nodes):
            lo[:, j] = _score_kde_column(representation, j, test.values[:, j])
        hi = lo
    return PValueMatrix(method, lo, hi)


def draw_from_range(r: PValueRange, rng: np.random.Generator) -> float:
    """One uniform draw from [p_min, p_max]; degenerate ranges return p_min."""
    return float(rng.uniform(r.p_min, r.p_max))


def draw_matrix(pm: PValueMatrix, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw per entry, consuming the stream in row-major order
    (matches element-wise ``draw_from_range`` calls in that order)."""
    return pm.p_min + (pm.p_max - pm.p_min) * rng.random(pm.p_min.shape)


def pvalue_matrix_to_csv(pm: PValueMatrix, path) -> None:
    """Long-form CSV: sample_index, node_index, p_min, p_max, method."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["sample_index", "node_index", "p_min", "p_max", "method"])
        for i in range(pm.n_samples):
            lo_row = pm.p_min[i].tolist()
            hi_row = pm.p_max[i].tolist()
            for j in range(pm.n_nodes):
                writer.writerow([i, j, repr(lo_row[j]), repr(hi_row[j]), pm.method])


def pvalue_matrix_from_csv(path) -> PValueMatrix:
    """Parse and validate the CSV produced by :func:`pvalue_matrix_to_csv`."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_index", "node_index", "p_min", "p_max", "method"]:
            raise SchemaError(f"{path}: unexpected p-value CSV header {header}")
        try:
            rows = [(int(r[0]), int(r[1]), float(r[2]), float(r[3]), r[4])
                    for r in reader if r]
        except (ValueError, IndexError) as e:
            raise SchemaError(f"{path}: malformed p-value row: {e}") from e
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    methods = {r[4] for r in rows}
    if len(methods) != 1 or methods - set(METHODS):
        raise SchemaError(f"{path}: inconsistent or unknown method column {methods}")
    if any(r[0] < 0 or r[1] < 0 for r in rows):
        raise SchemaError(f"{path}: negative sample or node index")
    n_samples = max(r[0] for r in rows) + 1
    n_nodes = max(r[1] for r in rows) + 1
    lo = np.full((n_samples, n_nodes), np.nan)
    hi = np.full((n_samples, n_nodes), np.nan)
    for i, j, pmin, pmax, _ in rows:
        lo[i, j] = pmin
        hi[i, j] = pmax
    if np.any(np.isnan(lo)) or np.any(np.isnan(hi)):
        raise SchemaError(f"{path}: incomplete sample x node grid")
    try:
        return PValueMatrix(methods.pop(), lo, hi)
    except ValueError as e:
        raise SchemaError(f"{path}: {e}") from e
