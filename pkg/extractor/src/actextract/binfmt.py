"""Writer for the actsketch binary activation file format.

The format is the toolkit's public file interface (little-endian): magic
``ACTV``, version u16 = 1, dtype code u8 (2 = float64), role code u8
(0 background, 1 clean, 2 anomalous), n_samples u64, n_nodes u64, layer
label as u16 length + UTF-8 bytes, then values row-major.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"ACTV"
VERSION = 1
ROLE_CODES = {"background": 0, "clean": 1, "anomalous": 2}
HEADER = struct.Struct("<HBBQQH")


def write_activation_file(values: np.ndarray, layer_label: str, role: str,
                          path) -> None:
    values = np.ascontiguousarray(values, dtype="<f8")
    if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
        raise ValueError(f"need a non-empty 2-D matrix, got shape {values.shape}")
    if not np.all(np.isfinite(values)):
        raise ValueError("refusing to write non-finite activations")
    if role not in ROLE_CODES:
        raise ValueError(f"unknown role {role!r}, expected one of "
                         f"{tuple(ROLE_CODES)}")
    label = layer_label.encode("utf-8")
    if len(label) > 0xFFFF:
        raise ValueError("layer label longer than 65535 UTF-8 bytes")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(HEADER.pack(VERSION, 2, ROLE_CODES[role],
                             values.shape[0], values.shape[1], len(label)))
        fh.write(label)
        fh.write(values.tobytes())
