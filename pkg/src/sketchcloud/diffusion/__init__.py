"""Staged denoising diffusion: schedules, noise nets, training, sampling."""

from .checkpoint import CheckpointData, load_checkpoint, save_checkpoint
from .conditioning import APPEARANCE_CONDITIONS, ConditionNetworks
from .model import NoisePredictor, predict_noise, time_embedding
from .sampling import generate, re_edit, sample_chain
from .schedule import (
    DiffusionSchedule,
    forward_sample,
    make_schedule,
    posterior_params,
    reverse_step,
)
from .training import (
    TrainConfig,
    TrainedStage,
    denoise_loss,
    load_stage,
    save_stage,
    train_stage,
)

__all__ = [name for name in dir() if not name.startswith("_")]
