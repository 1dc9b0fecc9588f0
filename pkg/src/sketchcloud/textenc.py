"""From-scratch text encoder over the closed prompt vocabulary.

Token embeddings plus sinusoidal positions run through two pre-norm
self-attention blocks; a masked mean pool and a linear projection produce
a vector with the same width as the sketch embedding. Padding positions
are masked out of both attention and pooling, so the output is exactly
invariant to padding length.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data.prompts import VOCABULARY, TextPrompt
from .errors import ConfigurationError, VocabularyError
from .fusion import MultiHeadAttention

L_MAX = 16


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple[int, ...]
    length: int

    def padded(self, l_max: int = L_MAX) -> tuple[np.ndarray, np.ndarray]:
        """(ids, mask) arrays of length ``l_max``; mask True marks real tokens."""
        if self.length > l_max:
            raise ConfigurationError(f"prompt of {self.length} tokens exceeds L_max={l_max}")
        ids = np.zeros(l_max, dtype=np.int64)
        ids[: self.length] = self.ids
        mask = np.zeros(l_max, dtype=bool)
        mask[: self.length] = True
        return ids, mask


_WORD_TO_ID = {w: i for i, w in enumerate(VOCABULARY)}


def tokenize(prompt: TextPrompt | str) -> TokenSeq:
    """Whitespace-split, lowercase, closed-vocabulary lookup."""
    text = prompt.text if isinstance(prompt, TextPrompt) else prompt
    words = text.lower().split()
    ids = []
    for w in words:
        if w not in _WORD_TO_ID:
            raise VocabularyError(f"word {w!r} is not in the closed vocabulary")
        ids.append(_WORD_TO_ID[w])
    return TokenSeq(ids=tuple(ids), length=len(ids))


def write_vocabulary(path: Path | str) -> None:
    """One token per line; the index of a token is its line number."""
    Path(path).write_text("\n".join(VOCABULARY) + "\n", encoding="utf-8")


def read_vocabulary(path: Path | str) -> tuple[str, ...]:
    return tuple(Path(path).read_text(encoding="utf-8").splitlines())


def _sinusoidal_table(length: int, dim: int) -> torch.Tensor:
    pos = np.arange(length)[:, None]
    i = np.arange(dim // 2)[None, :]
    angles = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angles)
    table[:, 1::2] = np.cos(angles)
    return torch.from_numpy(table)


class _Block(nn.Module):
    def __init__(self, dim: int, heads: int, hidden: int):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = MultiHeadAttention(dim, heads)
        self.norm2 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(nn.Linear(dim, hidden), nn.SiLU(), nn.Linear(hidden, dim))

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        h = self.norm1(x)
        attn_out, _ = self.attn(h, h, h, key_mask=mask)
        x = x + attn_out
        return x + self.ff(self.norm2(x))


class TextEncoder(nn.Module):
    def __init__(
        self,
        vocab_size: int = len(VOCABULARY),
        d_model: int = 64,
        heads: int = 4,
        blocks: int = 2,
        ff_hidden: int = 128,
        out_dim: int = 128,
        l_max: int = L_MAX,
    ):
        super().__init__()
        self.l_max = l_max
        self.out_dim = out_dim
        self.embed = nn.Embedding(vocab_size, d_model)
        self.register_buffer("positions", _sinusoidal_table(l_max, d_model))
        self.blocks = nn.ModuleList(_Block(d_model, heads, ff_hidden) for _ in range(blocks))
        self.proj = nn.Linear(d_model, out_dim)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """(B, L) ids and boolean mask -> (B, out_dim) embeddings."""
        if ids.dim() == 1:
            return self.forward(ids.unsqueeze(0), mask.unsqueeze(0)).squeeze(0)
        x = self.embed(ids) + self.positions[: ids.shape[1]]
        lengths = mask.sum(dim=1)
        if int(lengths.max()) == 0:
            pooled = x.new_zeros(x.shape[0], x.shape[-1])
            return self.proj(pooled)
        for block in self.blocks:
            x = block(x, mask)
        m = mask.unsqueeze(-1).to(x.dtype)
        pooled = (x * m).sum(dim=1) / lengths.clamp_min(1).unsqueeze(-1).to(x.dtype)
        return self.proj(pooled)


def encode_text(encoder: TextEncoder, prompt: TextPrompt | str | TokenSeq) -> torch.Tensor:
    """Embedding vector (out_dim,) for one prompt."""
    tokens = prompt if isinstance(prompt, TokenSeq) else tokenize(prompt)
    ids, mask = tokens.padded(encoder.l_max)
    return encoder(torch.from_numpy(ids), torch.from_numpy(mask))
