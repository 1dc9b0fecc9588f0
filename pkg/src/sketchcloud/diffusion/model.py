"""Per-point noise prediction network.

The same MLP is applied to every point: its input is the point's noisy
channels, a sinusoidal embedding of the timestep, the condition vector,
and (appearance stage only) the point's clean coordinates. The condition
vector is re-concatenated at every hidden layer. Sharing the map across
points makes the prediction permutation-equivariant.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..errors import ConfigurationError

TIME_EMBED_DIM = 64


def time_embedding(t, dim: int = TIME_EMBED_DIM, dtype=torch.float64) -> torch.Tensor:
    """Sinusoidal embedding of integer timesteps; t is scalar or (B,)."""
    t_arr = torch.as_tensor(t, dtype=dtype).reshape(-1, 1)
    half = dim // 2
    freqs = torch.exp(
        -np.log(10000.0) * torch.arange(half, dtype=dtype) / half
    )
    angles = t_arr * freqs
    return torch.cat([torch.sin(angles), torch.cos(angles)], dim=-1)


class NoisePredictor(nn.Module):
    """Shared per-point MLP, 4 hidden layers of width 256, SiLU throughout."""

    def __init__(
        self,
        stage: str,
        point_dim: int = 3,
        cond_dim: int = 128,
        hidden: int = 256,
        n_hidden: int = 4,
        time_dim: int = TIME_EMBED_DIM,
    ):
        super().__init__()
        if stage not in ("geometry", "appearance"):
            raise ConfigurationError(f"stage must be geometry or appearance, got {stage!r}")
        self.stage = stage
        self.point_dim = point_dim
        self.cond_dim = cond_dim
        self.time_dim = time_dim
        self.with_geometry = stage == "appearance"
        in_dim = point_dim + time_dim + cond_dim + (3 if self.with_geometry else 0)
        layers = [nn.Linear(in_dim, hidden)]
        for _ in range(n_hidden - 1):
            layers.append(nn.Linear(hidden + cond_dim, hidden))
        self.hidden_layers = nn.ModuleList(layers)
        self.out = nn.Linear(hidden + cond_dim, point_dim)
        self.act = nn.SiLU()

    def forward(
        self,
        x_t: torch.Tensor,
        cond: torch.Tensor,
        t,
        g0: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """x_t (B,N,3) or (N,3); cond (B,C) or (C,); t int or (B,)."""
        squeeze = x_t.dim() == 2
        if squeeze:
            x_t = x_t.unsqueeze(0)
            cond = cond.unsqueeze(0)
            if g0 is not None:
                g0 = g0.unsqueeze(0)
        b, n, _ = x_t.shape
        if self.with_geometry and g0 is None:
            raise ConfigurationError("appearance stage requires the clean geometry g0")
        if not self.with_geometry and g0 is not None:
            raise ConfigurationError("geometry stage takes no g0 argument")
        temb = time_embedding(t, self.time_dim, dtype=x_t.dtype)
        if temb.shape[0] == 1 and b > 1:
            temb = temb.expand(b, -1)
        cond_pts = cond.unsqueeze(1).expand(b, n, self.cond_dim)
        feats = [x_t, temb.unsqueeze(1).expand(b, n, self.time_dim), cond_pts]
        if self.with_geometry:
            feats.append(g0)
        h = torch.cat(feats, dim=-1)
        h = self.act(self.hidden_layers[0](h))
        for layer in self.hidden_layers[1:]:
            h = self.act(layer(torch.cat([h, cond_pts], dim=-1)))
        eps = self.out(torch.cat([h, cond_pts], dim=-1))
        return eps.squeeze(0) if squeeze else eps


def predict_noise(
    model: NoisePredictor,
    x_t: torch.Tensor,
    cond: torch.Tensor,
    t,
    g0: torch.Tensor | None = None,
) -> torch.Tensor:
    """Functional wrapper over :class:`NoisePredictor`."""
    return model(x_t, cond, t, g0=g0)
