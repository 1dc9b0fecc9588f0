"""Sparse sketch encoding with attention-routed capsules.

Pipeline: a strided CNN produces a feature map grouped into capsule
channels, a 1x1 grouped convolution (+ batch norm, ReLU, max pool) forms
primary capsules, and iterative routing with attention weights aggregates
them into output capsules whose squashed vectors are pooled and flattened
into the sketch embedding. Sketches are mostly background, so attention
learns to concentrate routing on the few informative capsules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data.sketch import SketchImage
from .errors import ConfigurationError


def squash(v: torch.Tensor, dim: int = -1) -> torch.Tensor:
    """Map a capsule vector to norm < 1 preserving direction.

    squash(v) = (|v|^2 / (1 + |v|^2)) * v / |v|, with squash(0) = 0.
    """
    sq = (v * v).sum(dim=dim, keepdim=True)
    norm = sq.clamp_min(1e-300).sqrt()
    return v * (norm / (1.0 + sq))


@dataclass
class CapsuleStack:
    """Capsule maps plus the routing/attention coefficients that built them.

    caps:      (B, N, D, h, w) squashed output capsules
    routing:   (B, N_in, N_out, h, w) coefficients, softmax over N_out
    attention: (B, N_in, N_out, D) weights in (0, 1), broadcast spatially
    """

    caps: torch.Tensor
    routing: torch.Tensor
    attention: torch.Tensor


class SketchCNN(nn.Module):
    """Three stride-2 conv stages; 64x64 in -> (n_caps * d_input) x 8 x 8 out.

    Replicate padding keeps constant inputs constant, so an all-background
    sketch maps to a spatially uniform bias response.
    """

    def __init__(self, n_caps: int = 8, d_input: int = 16):
        super().__init__()
        self.n_caps = n_caps
        self.d_input = d_input
        out = n_caps * d_input
        self.stages = nn.Sequential(
            nn.Conv2d(1, 32, 3, stride=2, padding=1, padding_mode="replicate"),
            nn.ReLU(),
            nn.Conv2d(32, 64, 3, stride=2, padding=1, padding_mode="replicate"),
            nn.ReLU(),
            nn.Conv2d(64, out, 3, stride=2, padding=1, padding_mode="replicate"),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        fmap = self.stages(x)
        b, _, h, w = fmap.shape
        return fmap.view(b, self.n_caps, self.d_input, h, w)


class PrimaryCapsules(nn.Module):
    """Per-capsule 1x1 affine, batch norm, ReLU, 2x2 max pool."""

    def __init__(self, n_caps: int = 8, d_input: int = 16, d_caps: int = 16):
        super().__init__()
        self.n_caps = n_caps
        self.d_caps = d_caps
        self.conv = nn.Conv2d(n_caps * d_input, n_caps * d_caps, 1, groups=n_caps)
        self.norm = nn.BatchNorm2d(n_caps * d_caps, eps=1e-5, momentum=0.1)
        self.act = nn.ReLU()
        self.pool = nn.MaxPool2d(2)

    def forward(self, fmap: torch.Tensor) -> torch.Tensor:
        b, n, d, h, w = fmap.shape
        x = fmap.reshape(b, n * d, h, w)
        x = self.pool(self.act(self.norm(self.conv(x))))
        return x.view(b, self.n_caps, self.d_caps, h // 2, w // 2)


class AttentionRouting(nn.Module):
    """Iterative agreement routing weighted by learned attention.

    Attention a[i,j,:] comes from a grouped 1x1 conv over the primary
    capsules, pooled spatially and squashed to (0,1) with a sigmoid. Each
    round mixes s_j = sum_i c_ij * a_ij * u_i, squashes, and raises the
    routing logit of capsule pairs whose output agrees with their input.
    """

    def __init__(self, n_caps: int = 8, d_caps: int = 16, iterations: int = 3):
        super().__init__()
        if iterations < 1:
            raise ConfigurationError("routing needs at least one iteration")
        self.n_caps = n_caps
        self.d_caps = d_caps
        self.iterations = iterations
        self.attn_conv = nn.Conv2d(
            n_caps * d_caps, n_caps * n_caps * d_caps, 1, groups=n_caps
        )

    def attention_weights(self, u: torch.Tensor) -> torch.Tensor:
        b, n, d, h, w = u.shape
        a = self.attn_conv(u.reshape(b, n * d, h, w))
        a = a.mean(dim=(2, 3)).view(b, n, n, d)
        return torch.sigmoid(a)

    def forward(self, u: torch.Tensor, iterations: int | None = None) -> CapsuleStack:
        rounds = self.iterations if iterations is None else iterations
        if rounds < 1:
            raise ConfigurationError("routing needs at least one iteration")
        b, n, d, h, w = u.shape
        a = self.attention_weights(u)
        logits = torch.zeros(b, n, n, h, w, dtype=u.dtype, device=u.device)
        for r in range(rounds):
            c = torch.softmax(logits, dim=2)
            s = torch.einsum("bijxy,bijd,bidxy->bjdxy", c, a, u)
            v = squash(s, dim=2)
            if r + 1 < rounds:
                agreement = torch.einsum("bjdxy,bijd,bidxy->bijxy", v, a, u)
                logits = logits + agreement
        return CapsuleStack(caps=v, routing=c, attention=a)


class SketchEncoder(nn.Module):
    """Full sketch embedding: CNN -> primary capsules -> routing -> flatten."""

    def __init__(
        self,
        in_size: int = 64,
        n_caps: int = 8,
        d_caps: int = 16,
        d_input: int = 16,
        routing_iterations: int = 3,
    ):
        super().__init__()
        if in_size % 16 != 0 or in_size < 16:
            raise ConfigurationError("sketch size must be a positive multiple of 16")
        self.in_size = in_size
        self.n_caps = n_caps
        self.d_caps = d_caps
        self.embedding_dim = n_caps * d_caps
        self.cnn = SketchCNN(n_caps=n_caps, d_input=d_input)
        self.primary = PrimaryCapsules(n_caps=n_caps, d_input=d_input, d_caps=d_caps)
        self.routing = AttentionRouting(n_caps=n_caps, d_caps=d_caps, iterations=routing_iterations)

    def _check(self, x: torch.Tensor) -> None:
        if x.shape[-2:] != (self.in_size, self.in_size):
            raise ConfigurationError(
                f"sketch of size {tuple(x.shape[-2:])} does not match the "
                f"configured {self.in_size}x{self.in_size}"
            )

    def forward_stack(self, x: torch.Tensor) -> tuple[torch.Tensor, CapsuleStack]:
        """Embedding plus the capsule stack, for diagnostics."""
        self._check(x)
        fmap = self.cnn(x)
        u = self.primary(fmap)
        stack = self.routing(u)
        emb = stack.caps.mean(dim=(3, 4)).flatten(start_dim=1)
        return emb, stack

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.forward_stack(x)[0]


def sketch_to_tensor(sketch: SketchImage | np.ndarray) -> torch.Tensor:
    pixels = sketch.pixels if isinstance(sketch, SketchImage) else np.asarray(sketch)
    return torch.from_numpy(np.ascontiguousarray(pixels, dtype=np.float64)).view(
        1, 1, *pixels.shape
    )


def encode_sketch(encoder: SketchEncoder, sketch: SketchImage | np.ndarray) -> torch.Tensor:
    """Embedding vector (n_caps * d_caps,) for a single sketch."""
    return encoder(sketch_to_tensor(sketch)).view(-1)


def attention_map(stack: CapsuleStack) -> np.ndarray:
    """(N, D) attention summary: mean over output capsules, first batch item."""
    return stack.attention[0].mean(dim=1).detach().numpy()


def dump_attention(encoder: SketchEncoder, sketch: SketchImage, out_dir) -> tuple[float, float]:
    """Write per-capsule attention heatmaps (PGM) and raw scores; returns (ISS, ISC).

    Capsule i's file shows its attention onto every output capsule and
    dimension as an (n_caps x d_caps) image, min-max scaled per capsule.
    """
    from pathlib import Path

    from .data.io import write_pgm

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with torch.no_grad():
        _, stack = encoder.forward_stack(sketch_to_tensor(sketch))
    attention = stack.attention[0].numpy()  # (N_in, N_out, D)
    lines = []
    for i in range(attention.shape[0]):
        amap = attention[i]
        lo, hi = amap.min(), amap.max()
        scaled = (amap - lo) / (hi - lo) if hi > lo else np.zeros_like(amap)
        write_pgm(out / f"capsule_{i}.pgm", SketchImage(pixels=scaled))
        for j in range(amap.shape[0]):
            row = " ".join(repr(v) for v in amap[j])
            lines.append(f"attention.{i}.{j} = {row}")
    iss, isc = instance_scores(sketch, stack)
    lines.append(f"iss_percent = {iss!r}")
    lines.append(f"isc_percent = {isc!r}")
    (out / "scores.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    return iss, isc


def instance_scores(
    sketch: SketchImage | np.ndarray, stack: CapsuleStack
) -> tuple[float, float]:
    """(ISS, ISC) percentages.

    ISS is the share of ink pixels in the sketch. ISC normalizes each
    attention-map column (capsule dimension) to sum to 1 over capsules and
    averages the per-column maxima; uniform attention over N capsules
    therefore gives 100/N.
    """
    pixels = sketch.pixels if isinstance(sketch, SketchImage) else np.asarray(sketch)
    iss = 100.0 * float((pixels > 0.0).mean())
    amap = attention_map(stack)
    col_sums = amap.sum(axis=0)
    normalized = amap / col_sums[None, :]
    isc = 100.0 * float(normalized.max(axis=0).mean())
    return iss, isc
