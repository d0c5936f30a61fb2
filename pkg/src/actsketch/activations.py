"""Activation matrices: file ingestion, synthetic generation, anomaly injection.

The on-disk contract is a small self-describing binary format (magic
``ACTV``) with a CSV fallback; both are parsed by :func:`read_activations`.
Synthetic matrices come from :class:`GeneratorSpec` (per-node Gaussian
mixtures plus an optional exact-valued point mass), so the rest of the
toolkit can be exercised without any real model in the loop.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

ROLES = ("background", "clean", "anomalous")

_MAGIC = b"ACTV"
_FORMAT_VERSION = 1
_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}
_ROLE_CODES = {"background": 0, "clean": 1, "anomalous": 2}
_CODE_ROLES = {v: k for k, v in _ROLE_CODES.items()}
# version u16, dtype u8, role u8, n_samples u64, n_nodes u64, label length u16
_HEADER = struct.Struct("<HBBQQH")


class IngestError(ValueError):
    """An activation file failed structural or value validation."""


@dataclass(frozen=True)
class ActivationMatrix:
    """Samples x nodes matrix of finite activations with a provenance role.

    Values are widened to float64 and frozen on construction; instances are
    safe to share read-only across threads.
    """

    values: np.ndarray
    layer_label: str = ""
    role: str = "clean"

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if vals.ndim != 2:
            raise ValueError(f"activation matrix must be 2-D, got shape {vals.shape}")
        if vals.shape[0] < 1 or vals.shape[1] < 1:
            raise ValueError(f"need at least 1 sample and 1 node, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            i, j = np.argwhere(~np.isfinite(vals))[0]
            raise ValueError(f"non-finite activation at sample {i}, node {j}")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}, expected one of {ROLES}")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]


def write_activations(m: ActivationMatrix, path, fmt: str | None = None) -> None:
    """Write ``m`` to ``path``.

    ``fmt`` is ``"binary"`` or ``"csv"``; by default paths ending in ``.csv``
    get CSV, everything else the binary format. Binary round-trips are
    bit-exact; CSV stores shortest round-trip decimal representations.
    """
    if not str(path):
        raise OSError("empty output path")
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "binary"
    if fmt == "binary":
        label = m.layer_label.encode("utf-8")
        if len(label) > 0xFFFF:
            raise ValueError("layer label longer than 65535 UTF-8 bytes")
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write(_HEADER.pack(_FORMAT_VERSION, 2, _ROLE_CODES[m.role],
                                  m.n_samples, m.n_nodes, len(label)))
            fh.write(label)
            fh.write(np.ascontiguousarray(m.values, dtype="<f8").tobytes())
    elif fmt == "csv":
        lines = [",".join(f"node_{j}" for j in range(m.n_nodes))]
        for row in m.values:
            lines.append(",".join(repr(v) for v in row.tolist()))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def read_activations(path, role: str | None = None,
                     layer_label: str | None = None) -> ActivationMatrix:
    """Read a binary or CSV activation file.

    The format is sniffed from the leading magic bytes. Binary headers carry
    role and layer label; for CSV the ``role`` / ``layer_label`` arguments
    apply (defaults ``"clean"`` / ``""``).
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] == _MAGIC:
        return _parse_binary(blob, path)
    return _parse_csv(blob, path, role or "clean", layer_label or "")


def _parse_binary(blob: bytes, path) -> ActivationMatrix:
    if len(blob) < 4 + _HEADER.size:
        raise IngestError(f"{path}: truncated header")
    version, dtype_code, role_code, n_samples, n_nodes, label_len = \
        _HEADER.unpack_from(blob, 4)
    if version != _FORMAT_VERSION:
        raise IngestError(f"{path}: unsupported format version {version}")
    if dtype_code not in _DTYPE_CODES:
        raise IngestError(f"{path}: unknown dtype code {dtype_code}")
    if role_code not in _CODE_ROLES:
        raise IngestError(f"{path}: unknown role code {role_code}")
    if n_samples < 1 or n_nodes < 1:
        raise IngestError(f"{path}: header declares empty matrix "
                          f"({n_samples} x {n_nodes})")
    offset = 4 + _HEADER.size
    try:
        label = blob[offset:offset + label_len].decode("utf-8")
    except UnicodeDecodeError as e:
        raise IngestError(f"{path}: undecodable layer label") from e
    offset += label_len
    dtype = _DTYPE_CODES[dtype_code]
    declared = n_samples * n_nodes
    available, extra = divmod(len(blob) - offset, dtype.itemsize)
    if available != declared or extra:
        raise IngestError(
            f"{path}: header declares {declared} values "
            f"({n_samples} x {n_nodes}), file holds "
            f"{available + extra / dtype.itemsize:g}")
    values = np.frombuffer(blob, dtype=dtype, count=declared, offset=offset)
    values = values.astype(np.float64).reshape(n_samples, n_nodes)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        i, j = bad[0]
        raise IngestError(f"{path}: non-finite value at sample {i}, node {j}")
    return ActivationMatrix(values, label, _CODE_ROLES[role_code])


def _parse_csv(blob: bytes, path, role: str, layer_label: str) -> ActivationMatrix:
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as e:
        raise IngestError(f"{path}: neither binary activation data nor UTF-8 CSV") from e
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise IngestError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    expected = [f"node_{j}" for j in range(len(header))]
    if header != expected:
        raise IngestError(f"{path}: malformed header, expected "
                          f"node_0..node_{len(header) - 1}")
    n_nodes = len(header)
    if len(lines) < 2:
        raise IngestError(f"{path}: no sample rows")
    rows = np.empty((len(lines) - 1, n_nodes))
    for i, line in enumerate(lines[1:]):
        cells = line.split(",")
        if len(cells) != n_nodes:
            raise IngestError(f"{path}: row {i} has {len(cells)} cells, "
                              f"expected {n_nodes}")
        for j, cell in enumerate(cells):
            try:
                v = float(cell)
            except ValueError as e:
                raise IngestError(f"{path}: unparsable value at sample {i}, "
                                  f"node {j}: {cell!r}") from e
            if not np.isfinite(v):
                raise IngestError(f"{path}: non-finite value at sample {i}, node {j}")
            rows[i, j] = v
    return ActivationMatrix(rows, layer_label, role)


@dataclass(frozen=True)
class NodeDistribution:
    """Gaussian mixture plus an optional exact-repeated point mass for one node."""

    means: tuple[float, ...]
    stds: tuple[float, ...]
    weights: tuple[float, ...]
    point_mass_value: float = 0.0
    point_mass_fraction: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "means", tuple(float(x) for x in self.means))
        object.__setattr__(self, "stds", tuple(float(x) for x in self.stds))
        object.__setattr__(self, "weights", tuple(float(x) for x in self.weights))
        if not len(self.means) == len(self.stds) == len(self.weights):
            raise ValueError("means, stds and weights must have equal length")
        if any(s <= 0 for s in self.stds):
            raise ValueError("all mixture std-devs must be > 0")
        if any(w < 0 for w in self.weights):
            raise ValueError("mixture weights must be non-negative")
        if not 0.0 <= self.point_mass_fraction < 1.0:
            raise ValueError("point-mass fraction must lie in [0, 1)")
        total = sum(self.weights) + self.point_mass_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights plus point-mass fraction must "
                             f"sum to 1, got {total}")

    @classmethod
    def from_dict(cls, d: dict) -> "NodeDistribution":
        comps = d.get("components", [])
        pm = d.get("point_mass") or {}
        return cls(means=tuple(c["mean"] for c in comps),
                   stds=tuple(c["std"] for c in comps),
                   weights=tuple(c["weight"] for c in comps),
                   point_mass_value=float(pm.get("value", 0.0)),
                   point_mass_fraction=float(pm.get("fraction", 0.0)))

    def to_dict(self) -> dict:
        d = {"components": [{"mean": m, "std": s, "weight": w}
                            for m, s, w in zip(self.means, self.stds, self.weights)]}
        if self.point_mass_fraction > 0:
            d["point_mass"] = {"value": self.point_mass_value,
                               "fraction": self.point_mass_fraction}
        return d


@dataclass(frozen=True)
class GeneratorSpec:
    """Deterministic recipe for a synthetic activation matrix."""

    n_samples: int
    n_nodes: int
    seed: int
    default: NodeDistribution
    overrides: dict[int, NodeDistribution] = field(default_factory=dict)
    role: str = "background"
    layer_label: str = ""

    def __post_init__(self):
        if self.n_samples < 1 or self.n_nodes < 1:
            raise ValueError("n_samples and n_nodes must be >= 1")
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        for j in self.overrides:
            if not 0 <= j < self.n_nodes:
                raise ValueError(f"override for node {j} outside [0, {self.n_nodes})")

    def distribution_for(self, node: int) -> NodeDistribution:
        return self.overrides.get(node, self.default)

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorSpec":
        overrides = {int(k): NodeDistribution.from_dict(v)
                     for k, v in d.get("nodes", {}).items()}
        return cls(n_samples=int(d["n_samples"]), n_nodes=int(d["n_nodes"]),
                   seed=int(d["seed"]),
                   default=NodeDistribution.from_dict(d["default"]),
                   overrides=overrides,
                   role=d.get("role", "background"),
                   layer_label=d.get("layer_label", ""))

    def to_dict(self) -> dict:
        d = {"n_samples": self.n_samples, "n_nodes": self.n_nodes,
             "seed": self.seed, "role": self.role,
             "layer_label": self.layer_label,
             "default": self.default.to_dict()}
        if self.overrides:
            d["nodes"] = {str(k): v.to_dict() for k, v in sorted(self.overrides.items())}
        return d


def synthesize(spec: GeneratorSpec) -> ActivationMatrix:
    """Draw a matrix from ``spec``; a pure function of the spec (seed included).

    Point-mass draws reproduce the modal value bit-exactly, so downstream
    mode detection sees genuine ties.
    """
    rng = np.random.default_rng(spec.seed)
    values = np.empty((spec.n_samples, spec.n_nodes))
    for j in range(spec.n_nodes):
        d = spec.distribution_for(j)
        # point mass modeled as an extra zero-width component
        means = np.array(d.means + (d.point_mass_value,))
        stds = np.array(d.stds + (0.0,))
        probs = np.array(d.weights + (d.point_mass_fraction,))
        probs = probs / probs.sum()
        comp = rng.choice(len(probs), size=spec.n_samples, p=probs)
        noise = rng.standard_normal(spec.n_samples)
        values[:, j] = means[comp] + stds[comp] * noise
    return ActivationMatrix(values, spec.layer_label, spec.role)


def inject_anomaly(m: ActivationMatrix, node_indices, shift: float,
                   seed: int) -> ActivationMatrix:
    """Return a copy of ``m`` with selected nodes shifted by ``shift`` plus
    seeded Gaussian noise (std = |shift| / 4); other nodes are untouched
    bit-exactly and the result is tagged anomalous.
    """
    if m.role != "clean":
        raise ValueError(f"anomaly injection expects a clean matrix, got role {m.role!r}")
    idx = sorted({int(i) for i in node_indices})
    for i in idx:
        if not 0 <= i < m.n_nodes:
            raise IndexError(f"node index {i} out of range for {m.n_nodes} nodes")
    rng = np.random.default_rng(seed)
    values = m.values.copy()
    if idx:
        noise = rng.normal(0.0, abs(shift) / 4.0, size=(m.n_samples, len(idx)))
        values[:, idx] += shift + noise
    return ActivationMatrix(values, m.layer_label, "anomalous")
