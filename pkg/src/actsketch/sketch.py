"""Node-specific histogram sketches of the background activation distribution.

Each node is summarized by ascending bin edges with per-bin counts, plus
dedicated modal bins for exactly repeated values that exceed a frequency
threshold. Bin count is the larger of the Freedman-Diaconis and Sturges
estimates, capped at a configurable maximum, so the sketch stays compact
regardless of how much background data was seen.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .activations import ActivationMatrix

SKETCH_SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """A serialized artifact violates its documented schema."""


@dataclass(frozen=True)
class SketchConfig:
    modal_threshold_fraction: float = 0.10
    max_bins: int = 10

    def __post_init__(self):
        if not 0.0 < self.modal_threshold_fraction <= 1.0:
            raise ValueError("modal_threshold_fraction must lie in (0, 1]")
        if self.max_bins < 1:
            raise ValueError("max_bins must be >= 1")


@dataclass(frozen=True)
class NodeHistogram:
    """One node's sketch: bin edges, bin counts, modal bins, background size.

    Bins are right-open except the last, which is closed. ``modal_bins``
    holds (value, count) pairs for values that were split out before
    binning; binned counts plus modal counts always equal ``n_background``.
    """

    bin_edges: np.ndarray
    counts: np.ndarray
    modal_bins: tuple[tuple[float, int], ...]
    n_background: int

    def __post_init__(self):
        edges = np.asarray(self.bin_edges, dtype=np.float64)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.ndim != 1:
            raise ValueError("bin_edges and counts must be 1-D")
        if edges.size == 0:
            if counts.size != 0:
                raise ValueError("counts must be empty when bin_edges is empty")
        else:
            if edges.size < 2:
                raise ValueError("need at least 2 bin edges")
            if counts.size != edges.size - 1:
                raise ValueError(f"{counts.size} counts for {edges.size} edges")
            if not np.all(np.diff(edges) > 0):
                raise ValueError("bin_edges must be strictly increasing")
        if np.any(counts < 0):
            raise ValueError("bin counts must be non-negative")
        modal = tuple((float(v), int(c)) for v, c in self.modal_bins)
        if any(c <= 0 for _, c in modal):
            raise ValueError("modal counts must be positive")
        total = int(counts.sum()) + sum(c for _, c in modal)
        if total != self.n_background:
            raise ValueError(f"counts sum to {total}, expected n_background="
                             f"{self.n_background}")
        edges.flags.writeable = False
        counts.flags.writeable = False
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "modal_bins", modal)

    @property
    def n_bins(self) -> int:
        return len(self.counts)

    @cached_property
    def query_tables(self):
        """Lookup tables mapping a query to background mass above it.

        Returns ``(boundaries, greater, greater_equal)``. ``boundaries`` is
        the edge vector with the last edge nudged one ulp up, so that
        ``searchsorted(boundaries, t, side="right")`` lands in slot 0 when t
        is below all bins, slot i+1 when t falls in bin i (right-open, last
        bin closed), and slot B+1 when t is above all bins. ``greater[s]`` /
        ``greater_equal[s]`` give the binned mass strictly above /
        at-or-above a query in slot s; modal bins are not included.
        """
        b = self.n_bins
        if b == 0:
            empty = np.empty(0)
            zeros = np.zeros(1, dtype=np.int64)
            return empty, zeros, zeros
        boundaries = self.bin_edges.copy()
        boundaries[-1] = np.nextafter(boundaries[-1], np.inf)
        # suffix[i] = mass of bins i..B-1
        suffix = np.append(np.cumsum(self.counts[::-1])[::-1], 0)
        greater = np.concatenate(([suffix[0]], suffix[1:], [0]))
        greater_equal = np.concatenate(([suffix[0]], suffix[:b], [0]))
        return boundaries, greater, greater_equal


@dataclass(frozen=True)
class SketchModel:
    """Per-node histograms for one layer, all built from the same background."""

    histograms: tuple[NodeHistogram, ...]
    layer_label: str
    build_config: SketchConfig
    n_nodes: int

    def __post_init__(self):
        object.__setattr__(self, "histograms", tuple(self.histograms))
        if len(self.histograms) != self.n_nodes or self.n_nodes < 1:
            raise ValueError(f"expected {self.n_nodes} histograms, got "
                             f"{len(self.histograms)}")
        sizes = {h.n_background for h in self.histograms}
        if len(sizes) != 1:
            raise ValueError(f"histograms disagree on n_background: {sorted(sizes)}")
        over = [h.n_bins for h in self.histograms
                if h.n_bins > self.build_config.max_bins]
        if over:
            raise ValueError(f"histogram exceeds max_bins={self.build_config.max_bins}")

    @property
    def n_background(self) -> int:
        return self.histograms[0].n_background


def freedman_diaconis_width(values) -> float:
    """Freedman-Diaconis bin width 2 * IQR / n^(1/3).

    Quartiles use linear interpolation between order statistics. A zero IQR
    yields width 0.0; callers fall back to Sturges in that case.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty input")
    q25, q75 = np.percentile(values, [25.0, 75.0])
    return 2.0 * (q75 - q25) / values.size ** (1.0 / 3.0)


def sturges_bins(n: int) -> int:
    """Sturges bin-count estimate ceil(log2(n) + 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.ceil(math.log2(n) + 1.0)


def detect_modes(values, threshold_fraction: float) -> list[tuple[float, int]]:
    """Exactly repeated values whose multiplicity exceeds threshold_fraction * n.

    Repetition is bitwise float equality; returns (value, count) pairs in
    ascending value order, empty if nothing crosses the threshold.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty input")
    uniques, counts = np.unique(values, return_counts=True)
    cutoff = threshold_fraction * values.size
    # a mode must be an actual repeat, not a lone value clearing a tiny n
    keep = (counts > cutoff) & (counts >= 2)
    return [(float(v), int(c)) for v, c in zip(uniques[keep], counts[keep])]


def build_node_histogram(values, config: SketchConfig = SketchConfig()) -> NodeHistogram:
    """Build one node's histogram.

    Modal values are split out first; the remainder is binned over
    [min, max] with ``min(max_bins, max(FD-implied count, Sturges))`` bins.
    The FD width is converted to a count via ceil(range / width); a zero FD
    width falls back to Sturges alone. If every value is modal the edge and
    count vectors are empty. A degenerate remainder (single distinct value)
    gets a single one-ulp-wide bin so edges stay strictly increasing.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise ValueError("empty input")
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite values")
    modes = detect_modes(values, config.modal_threshold_fraction)
    if modes:
        remaining = values[~np.isin(values, [v for v, _ in modes])]
    else:
        remaining = values
    if remaining.size == 0:
        return NodeHistogram(np.empty(0), np.empty(0, dtype=np.int64),
                             tuple(modes), values.size)
    lo, hi = float(remaining.min()), float(remaining.max())
    if lo == hi:
        edges = np.array([lo, np.nextafter(lo, np.inf)])
        counts = np.array([remaining.size], dtype=np.int64)
    else:
        n_bins = sturges_bins(remaining.size)
        width = freedman_diaconis_width(remaining)
        if width > 0.0:
            n_bins = max(n_bins, math.ceil((hi - lo) / width))
        n_bins = min(n_bins, config.max_bins)
        counts, edges = np.histogram(remaining, bins=n_bins, range=(lo, hi))
    return NodeHistogram(edges, counts, tuple(modes), values.size)


def build_sketch(background: ActivationMatrix,
                 config: SketchConfig = SketchConfig(),
                 threads: int = 1) -> SketchModel:
    """Build one histogram per node from a background matrix."""
    if background.role != "background":
        raise ValueError(f"sketch must be built from a background matrix, "
                         f"got role {background.role!r}")

    def build_one(j: int) -> NodeHistogram:
        try:
            return build_node_histogram(background.values[:, j], config)
        except ValueError as e:
            raise ValueError(f"node {j}: {e}") from e

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            hists = list(pool.map(build_one, range(background.n_nodes)))
    else:
        hists = [build_one(j) for j in range(background.n_nodes)]
    return SketchModel(tuple(hists), background.layer_label, config,
                       background.n_nodes)


def sketch_to_json(s: SketchModel) -> str:
    doc = {
        "version": SKETCH_SCHEMA_VERSION,
        "layer_label": s.layer_label,
        "n_background": s.n_background,
        "config": {
            "modal_threshold_fraction": s.build_config.modal_threshold_fraction,
            "max_bins": s.build_config.max_bins,
        },
        "nodes": [
            {
                "bin_edges": h.bin_edges.tolist(),
                "counts": h.counts.tolist(),
                "modal_bins": [{"value": v, "count": c} for v, c in h.modal_bins],
            }
            for h in s.histograms
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def sketch_from_json(text: str) -> SketchModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise SchemaError("top-level value must be an object")
    for key in ("version", "layer_label", "n_background", "config", "nodes"):
        if key not in doc:
            raise SchemaError(f"missing key {key!r}")
    if doc["version"] != SKETCH_SCHEMA_VERSION:
        raise SchemaError(f"unsupported sketch version {doc['version']!r}")
    cfg = doc["config"]
    for key in ("modal_threshold_fraction", "max_bins"):
        if key not in cfg:
            raise SchemaError(f"config missing key {key!r}")
    try:
        config = SketchConfig(float(cfg["modal_threshold_fraction"]),
                              int(cfg["max_bins"]))
    except (TypeError, ValueError) as e:
        raise SchemaError(f"bad config: {e}") from e
    nodes = doc["nodes"]
    if not isinstance(nodes, list) or not nodes:
        raise SchemaError("nodes must be a non-empty array")
    hists = []
    for j, node in enumerate(nodes):
        for key in ("bin_edges", "counts", "modal_bins"):
            if key not in node:
                raise SchemaError(f"node {j}: missing key {key!r}")
        try:
            modal = tuple((float(mb["value"]), int(mb["count"]))
                          for mb in node["modal_bins"])
            hists.append(NodeHistogram(np.asarray(node["bin_edges"], dtype=np.float64),
                                       np.asarray(node["counts"], dtype=np.int64),
                                       modal, int(doc["n_background"])))
        except (TypeError, KeyError, ValueError) as e:
            raise SchemaError(f"node {j}: {e}") from e
    try:
        return SketchModel(tuple(hists), str(doc["layer_label"]), config, len(hists))
    except ValueError as e:
        raise SchemaError(str(e)) from e


def representation_size_bytes(s: SketchModel) -> int:
    """Deterministic size accounting: per node, 8 bytes per edge and per
    count, 16 per modal bin, plus a fixed 32-byte overhead."""
    total = 0
    for h in s.histograms:
        total += 8 * len(h.bin_edges) + 8 * len(h.counts) + 16 * len(h.modal_bins) + 32
    return total
