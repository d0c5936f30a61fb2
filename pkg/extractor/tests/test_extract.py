"""Extractor adapter: shapes, determinism, flattening order, file validity."""

import struct
import subprocess
import sys

import numpy as np
import pytest
import torch

from actextract import (ExtractionSpec, LayerNotFoundError, extract,
                        list_layers, load_model, resolve_layer)
from actextract.toys import ShapedHead, TinyMLP


@pytest.fixture
def mlp_path(tmp_path):
    path = tmp_path / "mlp.pt"
    torch.save(TinyMLP(), path)
    return path


@pytest.fixture
def shaped_path(tmp_path):
    path = tmp_path / "shaped.pt"
    torch.save(ShapedHead(), path)
    return path


@pytest.fixture
def data_path(tmp_path):
    rng = np.random.default_rng(7)
    path = tmp_path / "samples.npy"
    np.save(path, rng.normal(0, 1, (10, 6)).astype(np.float32))
    return path


def read_binary(path):
    blob = path.read_bytes()
    assert blob[:4] == b"ACTV"
    version, dtype, role, n_samples, n_nodes, label_len = struct.unpack_from(
        "<HBBQQH", blob, 4)
    offset = 4 + struct.calcsize("<HBBQQH")
    label = blob[offset:offset + label_len].decode("utf-8")
    values = np.frombuffer(blob, dtype="<f8", offset=offset + label_len)
    return {"version": version, "dtype": dtype, "role": role, "label": label,
            "values": values.reshape(n_samples, n_nodes)}


def test_extract_mlp_shape(mlp_path, data_path, tmp_path):
    out = tmp_path / "acts.actv"
    extract(ExtractionSpec(str(mlp_path), "fc1", str(data_path),
                           role="background", batch_size=4, out_path=str(out)))
    doc = read_binary(out)
    assert doc["values"].shape == (10, 16)
    assert doc["label"] == "fc1"
    assert doc["role"] == 0
    assert doc["dtype"] == 2


def test_extract_deterministic(mlp_path, data_path, tmp_path):
    a, b = tmp_path / "a.actv", tmp_path / "b.actv"
    for out in (a, b):
        extract(ExtractionSpec(str(mlp_path), "fc1", str(data_path),
                               batch_size=3, out_path=str(out)))
    assert a.read_bytes() == b.read_bytes()


def test_extract_batch_size_irrelevant(mlp_path, data_path, tmp_path):
    a, b = tmp_path / "a.actv", tmp_path / "b.actv"
    extract(ExtractionSpec(str(mlp_path), "fc1", str(data_path),
                           batch_size=1, out_path=str(a)))
    extract(ExtractionSpec(str(mlp_path), "fc1", str(data_path),
                           batch_size=10, out_path=str(b)))
    assert np.allclose(read_binary(a)["values"], read_binary(b)["values"],
                       atol=1e-6)


def test_missing_layer_lists_candidates(mlp_path, data_path, tmp_path):
    with pytest.raises(LayerNotFoundError) as err:
        extract(ExtractionSpec(str(mlp_path), "nope", str(data_path),
                               out_path=str(tmp_path / "x.actv")))
    message = str(err.value)
    assert "fc1" in message and "fc2" in message


def test_flattening_order_row_major(shaped_path, tmp_path):
    # the grid layer emits (batch, 2, 3); with identity weights the flattened
    # columns must be the input features in order
    data = tmp_path / "grid.npy"
    np.save(data, np.array([[1, 2, 3, 4, 5, 6],
                            [10, 20, 30, 40, 50, 60]], dtype=np.float32))
    out = tmp_path / "grid.actv"
    extract(ExtractionSpec(str(shaped_path), "grid", str(data),
                           role="clean", out_path=str(out)))
    doc = read_binary(out)
    assert doc["role"] == 1
    assert np.allclose(doc["values"],
                       [[1, 2, 3, 4, 5, 6], [10, 20, 30, 40, 50, 60]],
                       atol=1e-5)


def test_list_layers(mlp_path, data_path):
    model = load_model(mlp_path)
    listing = list_layers(model)
    assert listing == list_layers(model)  # stable across calls
    names = [line.split(":")[0] for line in listing.strip().splitlines()]
    assert "fc1" in names and "fc2" in names and len(names) >= 2
    probed = list_layers(model, np.load(data_path))
    assert "fc1: Linear out=(16,)" in probed


def test_resolve_layer_root(mlp_path):
    model = load_model(mlp_path)
    assert resolve_layer(model, "") is model


def test_load_model_bad_file(tmp_path):
    bad = tmp_path / "bad.pt"
    bad.write_bytes(b"not a checkpoint")
    with pytest.raises(ValueError, match="loadable torch module"):
        load_model(bad)


def test_output_passes_primary_validation(mlp_path, data_path, tmp_path):
    """The written file must ingest cleanly through the actsketch CLI."""
    out = tmp_path / "bg.actv"
    extract(ExtractionSpec(str(mlp_path), "fc1", str(data_path),
                           role="background", out_path=str(out)))
    sketch = tmp_path / "sketch.json"
    proc = subprocess.run(
        [sys.executable, "-m", "actsketch.cli", "build",
         "--background", str(out), "--out", str(sketch)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert sketch.exists()


def test_cli_round_trip(mlp_path, data_path, tmp_path):
    from actextract.cli import main

    out = tmp_path / "cli.actv"
    assert main(["extract", "--model", str(mlp_path), "--layer", "fc1",
                 "--data", str(data_path), "--role", "background",
                 "--batch-size", "4", "--out", str(out)]) == 0
    assert read_binary(out)["values"].shape == (10, 16)
    assert main(["layers", "--model", str(mlp_path)]) == 0
    assert main(["extract", "--model", str(mlp_path), "--layer", "ghost",
                 "--data", str(data_path), "--out", str(out)]) == 3
