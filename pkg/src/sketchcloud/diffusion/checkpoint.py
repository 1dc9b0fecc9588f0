"""Binary stage checkpoints.

Layout: magic string, format version, stage tag, schedule parameters,
training-config echo, loss history, then named parameter blocks (name,
shape, float64 little-endian data). Loading validates the magic, the
version, the stage tag, and every block's name and shape against the
freshly built model.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from ..errors import CheckpointError
from .schedule import DiffusionSchedule, make_schedule

MAGIC = b"SKCLOUD\x00"
VERSION = 1

STAGES = ("geometry", "appearance")


@dataclass
class CheckpointData:
    stage: str
    schedule: DiffusionSchedule
    config_echo: dict[str, str]
    loss_history: np.ndarray
    blocks: dict[str, np.ndarray]


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def _read_exact(f, n: int, path: Path) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise CheckpointError(f"{path}: truncated checkpoint")
    return buf


def _unpack_str(f, path: Path) -> str:
    (n,) = struct.unpack("<I", _read_exact(f, 4, path))
    return _read_exact(f, n, path).decode("utf-8")


def collect_blocks(modules: dict[str, nn.Module]) -> dict[str, np.ndarray]:
    """Named parameter/buffer blocks, float64, sorted by name."""
    blocks: dict[str, np.ndarray] = {}
    for prefix, module in modules.items():
        for name, tensor in module.state_dict().items():
            if name.endswith("num_batches_tracked"):
                continue
            blocks[f"{prefix}.{name}"] = tensor.detach().numpy().astype(np.float64)
    return dict(sorted(blocks.items()))


def apply_blocks(modules: dict[str, nn.Module], blocks: dict[str, np.ndarray],
                 source: str = "checkpoint") -> None:
    """Load blocks into modules; names and shapes must match exactly."""
    expected = set(collect_blocks(modules))
    got = set(blocks)
    if expected != got:
        missing = sorted(expected - got)[:3]
        extra = sorted(got - expected)[:3]
        raise CheckpointError(
            f"{source}: parameter blocks do not match the model "
            f"(missing {missing}, unexpected {extra})"
        )
    for prefix, module in modules.items():
        state = module.state_dict()
        for name, tensor in state.items():
            if name.endswith("num_batches_tracked"):
                continue
            arr = blocks[f"{prefix}.{name}"]
            if tuple(arr.shape) != tuple(tensor.shape):
                raise CheckpointError(
                    f"{source}: block {prefix}.{name} has shape {arr.shape}, "
                    f"model expects {tuple(tensor.shape)}"
                )
            state[name] = torch.from_numpy(arr.copy()).to(tensor.dtype)
        module.load_state_dict(state)


def save_checkpoint(
    path: Path | str,
    stage: str,
    modules: dict[str, nn.Module],
    schedule: DiffusionSchedule,
    config_echo: dict[str, str],
    loss_history: np.ndarray,
) -> None:
    if stage not in STAGES:
        raise CheckpointError(f"unknown stage tag {stage!r}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blocks = collect_blocks(modules)
    parts = [MAGIC, struct.pack("<I", VERSION), _pack_str(stage)]
    parts.append(struct.pack("<Idd", schedule.t_steps, schedule.beta_start, schedule.beta_end))
    echo = "".join(f"{k} = {v}\n" for k, v in sorted(config_echo.items()))
    parts.append(_pack_str(echo))
    hist = np.asarray(loss_history, dtype=np.float64)
    parts.append(struct.pack("<Q", hist.size))
    parts.append(hist.astype("<f8").tobytes())
    parts.append(struct.pack("<Q", len(blocks)))
    for name, arr in blocks.items():
        parts.append(_pack_str(name))
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr).astype("<f8").tobytes())
    path.write_bytes(b"".join(parts))


def load_checkpoint(path: Path | str, expect_stage: str | None = None) -> CheckpointData:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"{path}: checkpoint file does not exist")
    with path.open("rb") as f:
        if _read_exact(f, len(MAGIC), path) != MAGIC:
            raise CheckpointError(f"{path}: bad magic; not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(f, 4, path))
        if version != VERSION:
            raise CheckpointError(f"{path}: format version {version}, expected {VERSION}")
        stage = _unpack_str(f, path)
        if stage not in STAGES:
            raise CheckpointError(f"{path}: unknown stage tag {stage!r}")
        if expect_stage is not None and stage != expect_stage:
            raise CheckpointError(
                f"{path}: stage tag {stage!r} does not match expected {expect_stage!r}"
            )
        t_steps, beta_start, beta_end = struct.unpack("<Idd", _read_exact(f, 20, path))
        schedule = make_schedule(t_steps, beta_start, beta_end)
        echo_text = _unpack_str(f, path)
        echo: dict[str, str] = {}
        for line in echo_text.splitlines():
            key, _, value = line.partition(" = ")
            echo[key] = value
        (n_hist,) = struct.unpack("<Q", _read_exact(f, 8, path))
        hist = np.frombuffer(_read_exact(f, 8 * n_hist, path), dtype="<f8").astype(np.float64)
        (n_blocks,) = struct.unpack("<Q", _read_exact(f, 8, path))
        blocks: dict[str, np.ndarray] = {}
        for _ in range(n_blocks):
            name = _unpack_str(f, path)
            (ndim,) = struct.unpack("<I", _read_exact(f, 4, path))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(f, 8 * ndim, path)) if ndim else ()
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(_read_exact(f, 8 * count, path), dtype="<f8")
            blocks[name] = data.astype(np.float64).reshape(shape)
        if f.read(1):
            raise CheckpointError(f"{path}: trailing bytes after parameter blocks")
    return CheckpointData(
        stage=stage,
        schedule=schedule,
        config_echo=echo,
        loss_history=hist,
        blocks=blocks,
    )
