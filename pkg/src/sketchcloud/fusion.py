"""Sketch-text fusion producing geometry and appearance conditions.

Two cascaded multi-head attention blocks turn the sketch embedding S and
optional text embedding T into a condition vector: the first attends from
S into T to get an intermediate feature I, the second self-attends over
I + S with S as values. When no text is given the switch sets I = 0, so
the condition is a function of the sketch alone. Geometry and appearance
conditions use the same architecture with separate parameters.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from .errors import ConfigurationError

COND_KINDS = ("geometry", "appearance")


class MultiHeadAttention(nn.Module):
    """Scaled dot-product attention with per-head subspaces.

    Queries/keys/values are (L, dim) or (B, L, dim); attention weights are
    a softmax over keys within each head, so they sum to 1.
    """

    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ConfigurationError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(
        self,
        q: torch.Tensor,
        k: torch.Tensor,
        v: torch.Tensor,
        key_mask: torch.Tensor | None = None,
    ) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (output, weights); weights has shape (..., heads, L_q, L_k)."""
        squeeze = q.dim() == 2
        if squeeze:
            q, k, v = q.unsqueeze(0), k.unsqueeze(0), v.unsqueeze(0)
            if key_mask is not None:
                key_mask = key_mask.unsqueeze(0)
        if q.shape[-1] != self.dim or k.shape[-1] != self.dim or v.shape[-1] != self.dim:
            raise ConfigurationError(
                f"attention inputs must have width {self.dim}, "
                f"got {q.shape[-1]}/{k.shape[-1]}/{v.shape[-1]}"
            )
        b, lq, _ = q.shape
        lk = k.shape[1]

        def split(x: torch.Tensor, length: int) -> torch.Tensor:
            return x.view(b, length, self.heads, self.head_dim).transpose(1, 2)

        qh = split(self.q_proj(q), lq)
        kh = split(self.k_proj(k), lk)
        vh = split(self.v_proj(v), lk)
        scores = qh @ kh.transpose(-1, -2) / math.sqrt(self.head_dim)
        if key_mask is not None:
            # finfo.min instead of -inf: exp underflows to exactly 0 for
            # masked keys, and fully-masked rows stay finite (their output
            # is discarded by the caller's pooling mask).
            scores = scores.masked_fill(
                ~key_mask[:, None, None, :], torch.finfo(scores.dtype).min
            )
        weights = torch.softmax(scores, dim=-1)
        out = weights @ vh
        out = out.transpose(1, 2).reshape(b, lq, self.dim)
        out = self.out_proj(out)
        if squeeze:
            return out.squeeze(0), weights.squeeze(0)
        return out, weights


class ConditionFusion(nn.Module):
    """One fusion head (geometry or appearance)."""

    def __init__(self, kind: str, dim: int = 128, heads: int = 4):
        super().__init__()
        if kind not in COND_KINDS:
            raise ConfigurationError(f"kind must be one of {COND_KINDS}, got {kind!r}")
        self.kind = kind
        self.dim = dim
        self.text_attention = MultiHeadAttention(dim, heads)
        self.self_attention = MultiHeadAttention(dim, heads)

    def forward(self, s: torch.Tensor, t: torch.Tensor | None) -> torch.Tensor:
        """Condition vector from sketch embedding ``s`` (dim,) and optional text ``t``."""
        s1 = s.view(1, self.dim)
        if t is None:
            inter = torch.zeros_like(s1)
        else:
            inter, _ = self.text_attention(s1, t.view(1, self.dim), t.view(1, self.dim))
        mixed = inter + s1
        out, _ = self.self_attention(mixed, mixed, s1)
        return out.view(self.dim)


def fuse_condition(
    fusion: ConditionFusion, s: torch.Tensor, t: torch.Tensor | None
) -> torch.Tensor:
    """Functional wrapper over :class:`ConditionFusion`."""
    return fusion(s, t)
