"""Small fixed-weight models for smoke tests and demos.

Weights are filled deterministically so extraction output is reproducible
and checkable by hand.
"""

from __future__ import annotations

import torch
import torch.nn as nn


def _fill_deterministic(module: nn.Module) -> None:
    with torch.no_grad():
        for i, p in enumerate(module.parameters()):
            vals = torch.arange(p.numel(), dtype=torch.float64)
            p.copy_(((vals * 0.37 + i) % 1.9 - 0.95).reshape(p.shape).float())


class TinyMLP(nn.Module):
    """6 -> 16 -> 6 MLP; hook fc1 for a 16-node activation space."""

    def __init__(self):
        super().__init__()
        self.fc1 = nn.Linear(6, 16)
        self.act = nn.ReLU()
        self.fc2 = nn.Linear(16, 6)
        _fill_deterministic(self)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class Passthrough(nn.Module):
    """Identity with a name, so reshaped outputs can be hooked."""

    def forward(self, x):
        return x


class ShapedHead(nn.Module):
    """Identity 6 -> 6 whose ``grid`` layer emits a (batch, 2, 3) tensor.

    Row-major flattening of the grid output must reproduce the 6 input
    features in order, which pins down the node-index convention.
    """

    def __init__(self):
        super().__init__()
        self.fc = nn.Linear(6, 6, bias=True)
        with torch.no_grad():
            self.fc.weight.copy_(torch.eye(6))
            self.fc.bias.zero_()
        self.grid = Passthrough()

    def forward(self, x):
        return self.grid(self.fc(x).reshape(-1, 2, 3))
