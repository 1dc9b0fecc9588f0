"""Reverse-chain sampling: generation and appearance re-editing.

Generation runs the geometry chain from Gaussian noise under the fused
sketch-text condition, then the appearance chain conditioned on the
produced coordinates. Re-editing keeps a given geometry fixed and reruns
only the appearance chain with the new prompt's text feature as the
condition. Each chain draws its noise from an RNG stream derived from
(seed, purpose), so chains are independent and scheduling-invariant.
"""

from __future__ import annotations

import numpy as np
import torch

from ..data.prompts import TextPrompt, parse_prompt
from ..data.shapes import ColoredPointCloud
from ..data.sketch import SketchImage
from ..errors import CheckpointError
from ..seeding import rng_for
from .model import NoisePredictor
from .schedule import DiffusionSchedule, reverse_step
from .training import TrainedStage


def sample_chain(
    model: NoisePredictor,
    cond: torch.Tensor,
    schedule: DiffusionSchedule,
    n_points: int,
    rng: np.random.Generator,
    g0: torch.Tensor | None = None,
) -> np.ndarray:
    """Run the full reverse chain from x_T ~ N(0, I) down to x_0."""
    with torch.no_grad():
        x = torch.from_numpy(rng.standard_normal((n_points, 3)))
        for t in range(schedule.t_steps, 0, -1):
            eps_hat = model(x, cond, t, g0=g0)
            z = torch.from_numpy(rng.standard_normal((n_points, 3))) if t > 1 else 0.0
            x = reverse_step(x, eps_hat, t, schedule, z)
            if not torch.isfinite(x).all():
                raise RuntimeError(f"non-finite sample state at t={t}")
        return x.numpy()


def _as_prompt(text: TextPrompt | str | None) -> TextPrompt | None:
    if text is None or isinstance(text, TextPrompt):
        return text
    return parse_prompt(text)


def generate(
    sketch: SketchImage,
    text: TextPrompt | str | None,
    seed: int,
    geometry: TrainedStage,
    appearance: TrainedStage | None = None,
    n_points: int = 2048,
    shape_only: bool = False,
) -> ColoredPointCloud:
    """Sample a (colored) cloud conditioned on a sketch and optional text.

    With ``shape_only`` (or no appearance stage) the result carries
    coordinates only. Colors are clamped to [0, 1] at the very end.
    """
    if geometry.stage != "geometry":
        raise CheckpointError(f"geometry argument has stage {geometry.stage!r}")
    geometry.eval()
    prompt = _as_prompt(text)
    with torch.no_grad():
        s = geometry.nets.embed_sketch(sketch)
        cond_g = geometry.nets.condition_geometry(s, prompt)
        g = sample_chain(
            geometry.noise_model,
            cond_g,
            geometry.schedule,
            n_points,
            rng_for(seed, "chain", "geometry"),
        )
    if shape_only:
        return ColoredPointCloud(g=g)
    if appearance is None:
        raise CheckpointError("colored generation requires an appearance checkpoint")
    if appearance.stage != "appearance":
        raise CheckpointError(f"appearance argument has stage {appearance.stage!r}")
    appearance.eval()
    with torch.no_grad():
        s_a = appearance.nets.embed_sketch(sketch)
        cond_a = appearance.nets.condition_appearance(s_a, prompt)
        raw = sample_chain(
            appearance.noise_model,
            cond_a,
            appearance.schedule,
            n_points,
            rng_for(seed, "chain", "appearance"),
            g0=torch.from_numpy(g),
        )
    colors = np.clip((raw + 1.0) / 2.0, 0.0, 1.0)
    return ColoredPointCloud(g=g, a=colors)


def re_edit(
    g0: np.ndarray,
    new_text: TextPrompt | str,
    seed: int,
    appearance: TrainedStage,
) -> ColoredPointCloud:
    """Recolor existing geometry from a new prompt; geometry passes through.

    The condition is the prompt's text feature applied directly, so no
    sketch is needed once the geometry exists.
    """
    if appearance.stage != "appearance":
        raise CheckpointError(f"appearance argument has stage {appearance.stage!r}")
    appearance.eval()
    g0 = np.asarray(g0, dtype=np.float64)
    with torch.no_grad():
        cond_a = appearance.nets.condition_text_only(_as_prompt(new_text))
        raw = sample_chain(
            appearance.noise_model,
            cond_a,
            appearance.schedule,
            g0.shape[0],
            rng_for(seed, "chain", "appearance"),
            g0=torch.from_numpy(g0),
        )
    colors = np.clip((raw + 1.0) / 2.0, 0.0, 1.0)
    return ColoredPointCloud(g=g0, a=colors)
