"""Capture a named layer's activations from a pre-trained torch model.

Samples are pushed through the model in evaluation mode; a forward hook on
the requested layer records its output per batch. Each sample's output
tensor is flattened row-major (C order), so node index == flattened
position, and the rows are written to the actsketch binary format.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch

from .binfmt import ROLE_CODES, write_activation_file


class LayerNotFoundError(ValueError):
    """Requested layer name does not resolve to a module."""


@dataclass(frozen=True)
class ExtractionSpec:
    model_path: str
    layer_name: str
    data_path: str
    role: str = "background"
    batch_size: int = 64
    out_path: str = "activations.actv"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.role not in ROLE_CODES:
            raise ValueError(f"unknown role {self.role!r}")


def load_model(path) -> torch.nn.Module:
    """Load a checkpoint: a torch.save'd module or a TorchScript archive.

    Note TorchScript submodule hooks do not fire during scripted execution,
    so inner-layer extraction needs an eager (pickled) module.
    """
    try:
        model = torch.load(path, map_location="cpu", weights_only=False)
    except Exception:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DeprecationWarning)
                model = torch.jit.load(path, map_location="cpu")
        except Exception as e:
            raise ValueError(f"{path}: not a loadable torch module "
                             f"({e})") from e
    if not isinstance(model, torch.nn.Module):
        raise ValueError(f"{path}: checkpoint holds {type(model).__name__}, "
                         f"expected a torch module")
    return model


def load_samples(path) -> np.ndarray:
    """Sample matrix from a .npy file or a plain numeric CSV (rows=samples)."""
    text = str(path)
    if text.endswith(".npy"):
        data = np.load(path)
    else:
        data = np.loadtxt(path, delimiter=",", ndmin=2)
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    if data.shape[0] < 1:
        raise ValueError(f"{path}: no samples")
    return data


def resolve_layer(model: torch.nn.Module, name: str) -> torch.nn.Module:
    modules = dict(model.named_modules())
    if name in modules:
        return modules[name]
    available = ", ".join(sorted(n for n in modules if n)) or "<root only>"
    raise LayerNotFoundError(
        f"layer {name!r} not found; available layers: {available}")


def list_layers(model: torch.nn.Module, probe: np.ndarray | None = None) -> str:
    """One line per named module; output shapes included when a probe batch
    is supplied (shapes are per sample, batch dimension dropped)."""
    shapes = {}
    if probe is not None:
        hooks = []

        def grab(name):
            def hook(module, inputs, output):
                if isinstance(output, torch.Tensor):
                    shapes[name] = tuple(output.shape[1:])
            return hook

        for name, module in model.named_modules():
            hooks.append(module.register_forward_hook(grab(name)))
        model.eval()
        with torch.no_grad():
            model(torch.as_tensor(probe[:1]))
        for h in hooks:
            h.remove()
    lines = []
    for name, module in model.named_modules():
        shown = name or "<root>"
        line = f"{shown}: {type(module).__name__}"
        if name in shapes:
            line += f" out={shapes[name]}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def extract(spec: ExtractionSpec) -> None:
    """Run samples through the model and write the layer's activations.

    One output row per sample, one column per node of the flattened layer
    output; deterministic for fixed weights (eval mode, no grad).
    """
    model = load_model(spec.model_path)
    layer = resolve_layer(model, spec.layer_name)
    samples = load_samples(spec.data_path)
    model.eval()

    captured: list[torch.Tensor] = []
    hook = layer.register_forward_hook(
        lambda module, inputs, output: captured.append(output.detach()))
    try:
        with torch.no_grad():
            for start in range(0, samples.shape[0], spec.batch_size):
                model(torch.as_tensor(samples[start:start + spec.batch_size]))
    finally:
        hook.remove()

    rows = [t.reshape(t.shape[0], -1).cpu().numpy().astype(np.float64)
            for t in captured]
    widths = {r.shape[1] for r in rows}
    if len(widths) != 1:
        raise ValueError(f"layer output width varies across batches: "
                         f"{sorted(widths)}")
    values = np.concatenate(rows, axis=0)
    if values.shape[0] != samples.shape[0]:
        raise ValueError(f"captured {values.shape[0]} rows for "
                         f"{samples.shape[0]} samples")
    write_activation_file(values, spec.layer_name, spec.role, spec.out_path)
