"""Seeded parameter initialization.

Torch's built-in init uses the global torch RNG; to keep every run
reproducible from a single integer seed, parameters are filled from a
numpy Generator instead, in module definition order.
"""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn


def init_parameters(module: nn.Module, rng: np.random.Generator) -> None:
    """Fill all parameters of ``module`` (already float64) from ``rng``."""
    for m in module.modules():
        if isinstance(m, (nn.Linear, nn.Conv2d)):
            fan_in = m.weight.shape[1:].numel()
            bound = 1.0 / math.sqrt(fan_in)
            m.weight.data = torch.from_numpy(
                rng.uniform(-bound, bound, size=tuple(m.weight.shape))
            )
            if m.bias is not None:
                m.bias.data = torch.from_numpy(
                    rng.uniform(-bound, bound, size=tuple(m.bias.shape))
                )
        elif isinstance(m, nn.Embedding):
            m.weight.data = torch.from_numpy(
                rng.normal(0.0, 0.1, size=tuple(m.weight.shape))
            )
        elif isinstance(m, (nn.BatchNorm2d, nn.LayerNorm)):
            if m.weight is not None:
                m.weight.data = torch.ones_like(m.weight)
            if m.bias is not None:
                m.bias.data = torch.zeros_like(m.bias)


def zero_biases(module: nn.Module) -> None:
    """Zero every bias-like parameter (used by tests and diagnostics)."""
    for name, p in module.named_parameters():
        if name.endswith("bias"):
            p.data = torch.zeros_like(p)
