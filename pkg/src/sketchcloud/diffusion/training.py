"""Staged training: geometry first, then appearance with frozen geometry.

The geometry stage trains the sketch/text encoders, the geometry fusion
head, and the geometry noise net end to end. The appearance stage loads a
geometry checkpoint, freezes everything in it, and trains only the
appearance fusion head and the appearance noise net on color channels
mapped to [-1, 1].
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch
from torch import nn

from ..data.io import DatasetItem
from ..data.prompts import TextPrompt
from ..encoder import sketch_to_tensor
from ..errors import CheckpointError, ConfigurationError
from ..nninit import init_parameters
from ..seeding import rng_for
from ..textenc import tokenize
from .checkpoint import CheckpointData, apply_blocks, load_checkpoint, save_checkpoint
from .conditioning import APPEARANCE_CONDITIONS, ConditionNetworks
from .model import NoisePredictor, predict_noise
from .schedule import DiffusionSchedule, make_schedule


@dataclass(frozen=True)
class TrainConfig:
    stage: str
    t_steps: int = 200
    beta_start: float = 1e-4
    beta_end: float = 0.02
    learning_rate: float = 1e-3
    batch_size: int = 8
    steps: int = 2000
    seed: int = 0
    grad_clip: float = 10.0
    appearance_condition: str = "fused"

    def validate(self) -> None:
        if self.stage not in ("geometry", "appearance"):
            raise ConfigurationError(f"stage must be geometry or appearance, got {self.stage!r}")
        for name in ("t_steps", "learning_rate", "batch_size", "steps", "grad_clip"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.appearance_condition not in APPEARANCE_CONDITIONS:
            raise ConfigurationError(
                f"appearance_condition must be one of {APPEARANCE_CONDITIONS}"
            )

    def echo(self) -> dict[str, str]:
        return {
            "stage": self.stage,
            "t_steps": str(self.t_steps),
            "beta_start": repr(self.beta_start),
            "beta_end": repr(self.beta_end),
            "learning_rate": repr(self.learning_rate),
            "batch_size": str(self.batch_size),
            "steps": str(self.steps),
            "seed": str(self.seed),
            "grad_clip": repr(self.grad_clip),
            "appearance_condition": self.appearance_condition,
        }


@dataclass
class TrainedStage:
    stage: str
    nets: ConditionNetworks
    noise_model: NoisePredictor
    schedule: DiffusionSchedule
    config_echo: dict[str, str] = field(default_factory=dict)
    loss_history: np.ndarray = field(default_factory=lambda: np.empty(0))

    def eval(self) -> "TrainedStage":
        self.nets.eval()
        self.noise_model.eval()
        return self

    def modules_for_checkpoint(self) -> dict[str, nn.Module]:
        mods = {
            "sketch_encoder": self.nets.sketch_encoder,
            "text_encoder": self.nets.text_encoder,
        }
        if self.stage == "geometry":
            mods["fusion_geometry"] = self.nets.fusion_geometry
            mods["noise_geometry"] = self.noise_model
        else:
            mods["fusion_appearance"] = self.nets.fusion_appearance
            mods["noise_appearance"] = self.noise_model
        return mods


def denoise_loss(
    model: NoisePredictor,
    x0: torch.Tensor,
    cond: torch.Tensor,
    schedule: DiffusionSchedule,
    rng: np.random.Generator | None = None,
    *,
    t: int | None = None,
    eps: torch.Tensor | None = None,
    g0: torch.Tensor | None = None,
) -> torch.Tensor:
    """Noise-matching loss for a single cloud.

    Draws t uniform in 1..T and standard-normal eps from ``rng`` unless
    given explicitly; returns mean squared error between drawn and
    predicted noise over points and channels.
    """
    if t is None or eps is None:
        if rng is None:
            raise ConfigurationError("denoise_loss needs rng or explicit (t, eps)")
        if t is None:
            t = int(rng.integers(1, schedule.t_steps + 1))
        if eps is None:
            eps = torch.from_numpy(rng.standard_normal(tuple(x0.shape)))
    ab = schedule.alpha_bar[t]
    x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
    eps_hat = predict_noise(model, x_t, cond, t, g0=g0)
    return ((eps - eps_hat) ** 2).mean()


@dataclass
class _PreparedItem:
    sketch: torch.Tensor  # (1, 1, H, W)
    prompt: TextPrompt | None
    g0: torch.Tensor  # (N, 3)
    colors: torch.Tensor | None  # (N, 3) in [-1, 1]


def _prepare(items: Sequence[DatasetItem]) -> list[_PreparedItem]:
    prepared = []
    for item in items:
        colors = None
        if item.cloud.a is not None:
            colors = torch.from_numpy(item.cloud.a * 2.0 - 1.0)
        if item.prompt is not None:
            tokenize(item.prompt)  # fail fast on out-of-vocabulary prompts
        prepared.append(
            _PreparedItem(
                sketch=sketch_to_tensor(item.sketch),
                prompt=item.prompt,
                g0=torch.from_numpy(np.asarray(item.cloud.g, dtype=np.float64)),
                colors=colors,
            )
        )
    return prepared


def _freeze(module: nn.Module) -> None:
    module.eval()
    for p in module.parameters():
        p.requires_grad_(False)


def train_stage(
    items: Sequence[DatasetItem],
    config: TrainConfig,
    geometry: TrainedStage | None = None,
    log: Callable[[int, float], None] | None = None,
) -> TrainedStage:
    """Run one training stage over the dataset items.

    The appearance stage requires the trained ``geometry`` stage, whose
    encoders it reuses frozen; only the appearance fusion head and noise
    net receive gradients there.
    """
    config.validate()
    if not items:
        raise ConfigurationError("training needs at least one dataset item")
    if config.stage == "appearance":
        if geometry is None:
            raise CheckpointError("appearance stage requires a geometry checkpoint")
        if geometry.stage != "geometry":
            raise CheckpointError(
                f"expected a geometry checkpoint, got stage {geometry.stage!r}"
            )

    prepared = _prepare(items)
    schedule = make_schedule(config.t_steps, config.beta_start, config.beta_end)
    init_rng = rng_for(config.seed, "init", config.stage)
    noise_model = NoisePredictor(config.stage).double()
    init_parameters(noise_model, init_rng)

    if config.stage == "geometry":
        nets = ConditionNetworks.build(rng_for(config.seed, "init", "conditioning"))
        trainable: list[nn.Module] = [
            nets.sketch_encoder, nets.text_encoder, nets.fusion_geometry, noise_model,
        ]
        for m in (nets.sketch_encoder, nets.text_encoder, nets.fusion_geometry):
            m.train()
        _freeze(nets.fusion_appearance)
    else:
        nets = copy.deepcopy(geometry.nets)
        fusion_a = nets.fusion_appearance
        init_parameters(fusion_a, rng_for(config.seed, "init", "fusion-appearance"))
        for m in (nets.sketch_encoder, nets.text_encoder, nets.fusion_geometry):
            _freeze(m)
        fusion_a.train()
        trainable = [fusion_a, noise_model] if config.appearance_condition == "fused" else [noise_model]
        if config.appearance_condition == "text":
            _freeze(fusion_a)
    noise_model.train()

    params = [p for m in trainable for p in m.parameters()]
    opt = torch.optim.Adam(params, lr=config.learning_rate)
    batch_rng = rng_for(config.seed, "batches", config.stage)
    noise_rng = rng_for(config.seed, "noise", config.stage)

    # Frozen-encoder embeddings can be computed once.
    cached_s: list[torch.Tensor] | None = None
    cached_t: list[torch.Tensor | None] | None = None
    if config.stage == "appearance":
        with torch.no_grad():
            cached_s = [nets.embed_sketch(p.sketch) for p in prepared]
            cached_t = [nets.embed_text(p.prompt) for p in prepared]

    history = np.empty(config.steps)
    n_items = len(prepared)
    for step in range(config.steps):
        idx = batch_rng.integers(0, n_items, size=config.batch_size)
        conds = []
        if config.stage == "geometry":
            batch_sketches = torch.cat([prepared[i].sketch for i in idx], dim=0)
            s_batch = nets.sketch_encoder(batch_sketches)
            for row, i in enumerate(idx):
                conds.append(nets.condition_geometry(s_batch[row], prepared[i].prompt))
        else:
            for i in idx:
                if config.appearance_condition == "text":
                    t_emb = cached_t[i]
                    if t_emb is None:
                        raise ConfigurationError(
                            "appearance_condition=text requires every item to have a prompt"
                        )
                    conds.append(t_emb)
                else:
                    conds.append(nets.fusion_appearance(cached_s[i], cached_t[i]))
        cond = torch.stack(conds)

        if config.stage == "geometry":
            x0 = torch.stack([prepared[i].g0 for i in idx])
            g0 = None
        else:
            x0 = torch.stack([prepared[i].colors for i in idx])
            g0 = torch.stack([prepared[i].g0 for i in idx])

        t = noise_rng.integers(1, schedule.t_steps + 1, size=config.batch_size)
        eps = torch.from_numpy(noise_rng.standard_normal(tuple(x0.shape)))
        ab = torch.from_numpy(schedule.alpha_bar[t]).view(-1, 1, 1)
        x_t = torch.sqrt(ab) * x0 + torch.sqrt(1.0 - ab) * eps
        eps_hat = noise_model(x_t, cond, torch.from_numpy(t), g0=g0)
        loss = ((eps - eps_hat) ** 2).mean(dim=(1, 2)).mean()

        opt.zero_grad()
        loss.backward()
        nn.utils.clip_grad_norm_(params, config.grad_clip)
        opt.step()
        history[step] = float(loss.detach())
        if log is not None:
            log(step, history[step])

    stage = TrainedStage(
        stage=config.stage,
        nets=nets,
        noise_model=noise_model,
        schedule=schedule,
        config_echo=config.echo(),
        loss_history=history,
    )
    return stage.eval()


def save_stage(path: Path | str, stage: TrainedStage) -> None:
    save_checkpoint(
        path,
        stage.stage,
        stage.modules_for_checkpoint(),
        stage.schedule,
        stage.config_echo,
        stage.loss_history,
    )


def load_stage(path: Path | str, expect_stage: str | None = None) -> TrainedStage:
    data: CheckpointData = load_checkpoint(path, expect_stage)
    nets = ConditionNetworks.build(rng_for(0, "load-init"))
    noise_model = NoisePredictor(data.stage).double()
    stage = TrainedStage(
        stage=data.stage,
        nets=nets,
        noise_model=noise_model,
        schedule=data.schedule,
        config_echo=data.config_echo,
        loss_history=data.loss_history,
    )
    apply_blocks(stage.modules_for_checkpoint(), data.blocks, source=str(path))
    return stage.eval()
