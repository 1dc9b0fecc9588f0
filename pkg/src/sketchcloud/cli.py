"""Command-line entry point.

Subcommands: gen-data, train, sample, re-edit, segment, metrics, probe,
dump-attention. Options resolve as defaults < config file < command-line
flags; unknown config keys are rejected, and every run writes its fully
resolved configuration next to its outputs. All randomness is derived
from the seed option, so reruns are byte-identical, and --threads only
fans out independent work units (items, chains).

Exit codes: 0 success, 1 usage/configuration, 2 data error, 3 checkpoint
error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np
import torch

from . import data as d
from .diffusion import (
    TrainConfig,
    generate,
    load_stage,
    re_edit,
    save_stage,
    train_stage,
)
from .encoder import dump_attention
from .errors import CheckpointError, ConfigurationError, DataError, VocabularyError
from .metrics import compute_report
from .probe import linear_probe
from .seeding import derive_seed
from .segmentation import segment_parts

DATA_ROOT_ENV = "SKETCHCLOUD_DATA_ROOT"


class UsageError(ConfigurationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # one-line diagnostics, exit code 1
        raise UsageError(f"{self.prog}: {message}")


@dataclass(frozen=True)
class Opt:
    name: str
    type: Callable[[str], Any] = str
    default: Any = None
    help: str = ""
    required: bool = False
    flag: bool = False

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


def _bool_of(value: str) -> bool:
    if value in ("true", "1", "yes"):
        return True
    if value in ("false", "0", "no"):
        return False
    raise ConfigurationError(f"expected a boolean, got {value!r}")


_COMMON = [
    Opt("config", str, None, "key = value file merged below command-line flags"),
    Opt("seed", int, 0, "seed for every random choice in this run"),
]

_COMMANDS: dict[str, list[Opt]] = {
    "gen-data": _COMMON + [
        Opt("categories", str, ",".join(d.CATEGORIES), "comma-separated categories"),
        Opt("count", int, 16, "total number of items (round-robin over categories)"),
        Opt("out", str, None, "dataset root directory", required=True),
        Opt("split", str, "train", "dataset split subdirectory"),
        Opt("points", int, 2048, "points per cloud"),
        Opt("view", str, "front", f"sketch view, one of {d.VIEWS}"),
        Opt("text-mode", str, "appearance_only", f"prompt mode, one of {d.TEXT_MODES}"),
        Opt("colors", str, "random", "part colors: random or canonical"),
        Opt("threads", int, 1, "worker threads (output is thread-count invariant)"),
    ],
    "train": _COMMON + [
        Opt("stage", str, None, "geometry or appearance", required=True),
        Opt("data", str, None, f"dataset root (default ${DATA_ROOT_ENV})"),
        Opt("split", str, "train", "dataset split to train on"),
        Opt("out", str, None, "run directory for checkpoint and logs", required=True),
        Opt("steps", int, 2000, "optimization steps"),
        Opt("batch-size", int, 8, "items per step"),
        Opt("t-steps", int, 200, "diffusion steps T"),
        Opt("beta-start", float, 1e-4, "first beta of the linear schedule"),
        Opt("beta-end", float, 0.02, "last beta of the linear schedule"),
        Opt("learning-rate", float, 1e-3, "optimizer learning rate"),
        Opt("grad-clip", float, 10.0, "gradient norm clip"),
        Opt("appearance-condition", str, "fused",
            "appearance stage condition source: fused or text"),
        Opt("geometry-checkpoint", str, None,
            "trained geometry checkpoint (required for the appearance stage)"),
        Opt("log-every", int, 50, "progress line cadence"),
    ],
    "sample": _COMMON + [
        Opt("sketch", str, None, "input sketch (PGM)", required=True),
        Opt("text", str, None, "optional prompt text"),
        Opt("geometry-checkpoint", str, None, "geometry checkpoint", required=True),
        Opt("appearance-checkpoint", str, None, "appearance checkpoint"),
        Opt("shape-only", flag=True, default=False, help="emit coordinates only"),
        Opt("points", int, 2048, "points per generated cloud"),
        Opt("count", int, 1, "number of independent chains"),
        Opt("out", str, None, "output PLY (count=1) or directory", required=True),
        Opt("threads", int, 1, "worker threads (output is thread-count invariant)"),
    ],
    "re-edit": _COMMON + [
        Opt("cloud", str, None, "geometry to recolor (PLY)", required=True),
        Opt("text", str, None, "new prompt text", required=True),
        Opt("appearance-checkpoint", str, None, "appearance checkpoint", required=True),
        Opt("out", str, None, "output PLY", required=True),
    ],
    "segment": _COMMON + [
        Opt("cloud", str, None, "geometry to segment (PLY)", required=True),
        Opt("category", str, None, f"one of {d.CATEGORIES}", required=True),
        Opt("appearance-checkpoint", str, None, "appearance checkpoint", required=True),
        Opt("out", str, None, "labeled PLY (label encoded as canonical part color)",
            required=True),
        Opt("report", str, None, "text report path (default <out>.report.txt)"),
    ],
    "metrics": _COMMON + [
        Opt("generated", str, None, "directory of generated PLY files", required=True),
        Opt("reference", str, None, "directory of reference PLY files", required=True),
        Opt("out", str, None, "report path (.csv for CSV, else key = value text)",
            required=True),
    ],
    "probe": _COMMON + [
        Opt("data", str, None, f"dataset root (default ${DATA_ROOT_ENV})"),
        Opt("split", str, "train", "dataset split to probe"),
        Opt("geometry-checkpoint", str, None, "geometry checkpoint", required=True),
        Opt("probe-split", float, 0.75, "train fraction for the probe"),
        Opt("out", str, None, "accuracy report path", required=True),
    ],
    "dump-attention": _COMMON + [
        Opt("sketch", str, None, "input sketch (PGM)", required=True),
        Opt("geometry-checkpoint", str, None, "geometry checkpoint", required=True),
        Opt("out", str, None, "output directory", required=True),
    ],
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="sketchcloud", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, opts in _COMMANDS.items():
        p = sub.add_parser(name, help=f"{name} workflow", parser_class=_Parser)
        for opt in opts:
            if opt.flag:
                p.add_argument(
                    f"--{opt.name}", action="store_true",
                    default=argparse.SUPPRESS, help=opt.help,
                )
            else:
                p.add_argument(
                    f"--{opt.name}", type=opt.type,
                    default=argparse.SUPPRESS, help=opt.help,
                )
    return parser


def _resolve(command: str, ns: argparse.Namespace) -> dict[str, Any]:
    """defaults < config file < command-line flags."""
    opts = {o.dest: o for o in _COMMANDS[command]}
    cfg: dict[str, Any] = {o.dest: o.default for o in _COMMANDS[command]}
    cli_values = {k: v for k, v in vars(ns).items() if k != "command"}
    config_path = cli_values.get("config")
    if config_path is not None:
        for key, raw in d.parse_kv(config_path).items():
            dest = key.replace("-", "_").strip()
            if dest not in opts:
                raise ConfigurationError(f"{config_path}: unknown config key {key!r}")
            opt = opts[dest]
            cfg[dest] = _bool_of(raw) if opt.flag else opt.type(raw)
    cfg.update(cli_values)
    for o in _COMMANDS[command]:
        if o.required and cfg.get(o.dest) is None:
            raise UsageError(f"sketchcloud {command}: missing required --{o.name}")
    return cfg


def _echo_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_resolved(cfg: dict[str, Any], command: str, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    pairs = {"command": command}
    pairs.update({k.replace("_", "-"): _echo_value(v) for k, v in sorted(cfg.items())
                  if v is not None and k != "config"})
    path.write_text(d.format_kv(pairs), encoding="utf-8")


def _data_root(cfg: dict[str, Any]) -> Path:
    root = cfg.get("data") or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise UsageError(f"no --data given and ${DATA_ROOT_ENV} is not set")
    return Path(root)


def _cmd_gen_data(cfg: dict[str, Any]) -> int:
    categories = tuple(c.strip() for c in cfg["categories"].split(",") if c.strip())
    if cfg["view"] not in d.VIEWS:
        raise ConfigurationError(f"view must be one of {d.VIEWS}, got {cfg['view']!r}")
    if cfg["text_mode"] not in d.TEXT_MODES:
        raise ConfigurationError(
            f"text-mode must be one of {d.TEXT_MODES}, got {cfg['text_mode']!r}"
        )
    if cfg["colors"] not in ("random", "canonical"):
        raise ConfigurationError(f"colors must be random or canonical, got {cfg['colors']!r}")
    out = Path(cfg["out"])
    plan = d.corpus_plan(categories, cfg["count"], cfg["seed"])

    def build(entry):
        item_id, category, item_seed = entry
        item = d.synthesize_item(
            category,
            item_seed,
            item_id=item_id,
            n_points=cfg["points"],
            view=cfg["view"],
            text_mode=cfg["text_mode"],
            canonical_colors=cfg["colors"] == "canonical",
        )
        d.write_item(out, cfg["split"], item)
        return item_id

    if cfg["threads"] > 1:
        with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
            ids = list(pool.map(build, plan))
    else:
        ids = [build(e) for e in plan]
    for item_id in ids:
        print(f"item={item_id}")
    _write_resolved(cfg, "gen-data", out / "config.txt")
    print(f"items={len(ids)} out={out / cfg['split']}")
    return 0


def _cmd_train(cfg: dict[str, Any]) -> int:
    items = d.read_dataset(_data_root(cfg), cfg["split"])
    train_cfg = TrainConfig(
        stage=cfg["stage"],
        t_steps=cfg["t_steps"],
        beta_start=cfg["beta_start"],
        beta_end=cfg["beta_end"],
        learning_rate=cfg["learning_rate"],
        batch_size=cfg["batch_size"],
        steps=cfg["steps"],
        seed=cfg["seed"],
        grad_clip=cfg["grad_clip"],
        appearance_condition=cfg["appearance_condition"],
    )
    geometry = None
    if cfg["stage"] == "appearance":
        if not cfg["geometry_checkpoint"]:
            raise CheckpointError(
                "appearance stage requires --geometry-checkpoint (none given)"
            )
        geometry = load_stage(cfg["geometry_checkpoint"], "geometry")

    every = max(1, cfg["log_every"])

    def log(step: int, loss: float) -> None:
        if step % every == 0 or step == cfg["steps"] - 1:
            print(f"step={step} loss={loss!r}")

    stage = train_stage(items, train_cfg, geometry, log=log)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    ckpt = out / f"{cfg['stage']}.ckpt"
    save_stage(ckpt, stage)
    lines = [f"step={i} loss={v!r}" for i, v in enumerate(stage.loss_history)]
    (out / "loss_history.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_resolved(cfg, "train", out / "config.txt")
    print(f"checkpoint={ckpt} final_loss={stage.loss_history[-1]!r}")
    return 0


def _cmd_sample(cfg: dict[str, Any]) -> int:
    geometry = load_stage(cfg["geometry_checkpoint"], "geometry")
    appearance = None
    if not cfg["shape_only"]:
        if not cfg["appearance_checkpoint"]:
            raise CheckpointError(
                "colored sampling requires --appearance-checkpoint "
                "(or pass --shape-only)"
            )
        appearance = load_stage(cfg["appearance_checkpoint"], "appearance")
    sk = d.read_pgm(cfg["sketch"])
    out = Path(cfg["out"])

    def one(k: int) -> Path:
        chain_seed = cfg["seed"] if cfg["count"] == 1 else derive_seed(cfg["seed"], "chain-set", k)
        cloud = generate(
            sk, cfg["text"], chain_seed, geometry, appearance,
            n_points=cfg["points"], shape_only=cfg["shape_only"],
        )
        path = out if cfg["count"] == 1 else out / f"sample_{k:03d}.ply"
        path.parent.mkdir(parents=True, exist_ok=True)
        d.write_ply(path, cloud)
        return path

    if cfg["count"] > 1:
        out.mkdir(parents=True, exist_ok=True)
    indices = range(cfg["count"])
    if cfg["threads"] > 1:
        with ThreadPoolExecutor(max_workers=cfg["threads"]) as pool:
            paths = list(pool.map(one, indices))
    else:
        paths = [one(k) for k in indices]
    for p in paths:
        print(f"sample={p}")
    resolved = (out.parent / f"{out.name}.config.txt") if cfg["count"] == 1 else out / "config.txt"
    _write_resolved(cfg, "sample", resolved)
    return 0


def _cmd_re_edit(cfg: dict[str, Any]) -> int:
    appearance = load_stage(cfg["appearance_checkpoint"], "appearance")
    cloud = d.read_ply(cfg["cloud"])
    edited = re_edit(cloud.g, cfg["text"], cfg["seed"], appearance)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    d.write_ply(out, edited)
    _write_resolved(cfg, "re-edit", out.parent / f"{out.name}.config.txt")
    print(f"sample={out}")
    return 0


def _cmd_segment(cfg: dict[str, Any]) -> int:
    if cfg["category"] not in d.CATEGORIES:
        raise ConfigurationError(
            f"category must be one of {d.CATEGORIES}, got {cfg['category']!r}"
        )
    appearance = load_stage(cfg["appearance_checkpoint"], "appearance")
    cloud = d.read_ply(cfg["cloud"])
    result = segment_parts(cloud.g, cfg["category"], appearance, cfg["seed"])
    parts = d.PART_NAMES[cfg["category"]]
    canonical = np.array(
        [d.PALETTE[w] for w in d.CANONICAL_COLOR_WORDS[: len(parts)]]
    )
    labeled = d.ColoredPointCloud(g=cloud.g, a=canonical[result.labels])
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    d.write_ply(out, labeled)
    counts = np.bincount(result.labels, minlength=len(parts))
    report_path = Path(cfg["report"]) if cfg["report"] else out.parent / f"{out.name}.report.txt"
    lines = [f"category = {cfg['category']}", f"points = {cloud.n}"]
    lines += [f"count.{name} = {int(c)}" for name, c in zip(parts, counts)]
    report_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_resolved(cfg, "segment", out.parent / f"{out.name}.config.txt")
    for line in lines:
        print(line.replace(" = ", "="))
    return 0


def _read_cloud_dir(path: str) -> list[np.ndarray]:
    p = Path(path)
    if not p.is_dir():
        raise DataError(f"{p}: not a directory of PLY files")
    files = sorted(p.glob("*.ply"))
    if not files:
        raise DataError(f"{p}: no .ply files found")
    return [d.read_ply(f).g for f in files]


def _cmd_metrics(cfg: dict[str, Any]) -> int:
    gen = _read_cloud_dir(cfg["generated"])
    ref = _read_cloud_dir(cfg["reference"])
    report = compute_report(gen, ref)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    text = report.to_csv() if out.suffix == ".csv" else report.to_text()
    out.write_text(text, encoding="utf-8")
    _write_resolved(cfg, "metrics", out.parent / f"{out.name}.config.txt")
    print(
        f"mmd_cd={report.mmd_cd!r} mmd_emd={report.mmd_emd!r} "
        f"cov_cd={report.cov_cd!r} cov_emd={report.cov_emd!r}"
    )
    return 0


def _cmd_probe(cfg: dict[str, Any]) -> int:
    geometry = load_stage(cfg["geometry_checkpoint"], "geometry")
    items = d.read_dataset(_data_root(cfg), cfg["split"])
    categories = sorted({i.spec.category for i in items if i.spec is not None})
    if len(categories) < 2:
        raise DataError("probe needs dataset items with specs from >= 2 categories")
    cat_index = {c: k for k, c in enumerate(categories)}
    embeddings, labels = [], []
    for item in items:
        if item.spec is None:
            raise DataError(f"item {item.item_id}: probe requires .spec files")
        embeddings.append(geometry.nets.probe_embedding(item.sketch))
        labels.append(cat_index[item.spec.category])
    model, accuracy = linear_probe(
        np.stack(embeddings), np.array(labels), split=cfg["probe_split"], seed=cfg["seed"]
    )
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        f"accuracy = {accuracy!r}",
        f"classes = {','.join(categories)}",
        f"n_train = {model.metadata['n_train']}",
        f"n_test = {model.metadata['n_test']}",
    ]
    out.write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_resolved(cfg, "probe", out.parent / f"{out.name}.config.txt")
    print(f"accuracy={accuracy!r}")
    return 0


def _cmd_dump_attention(cfg: dict[str, Any]) -> int:
    geometry = load_stage(cfg["geometry_checkpoint"], "geometry")
    sk = d.read_pgm(cfg["sketch"])
    out = Path(cfg["out"])
    iss, isc = dump_attention(geometry.nets.sketch_encoder, sk, out)
    _write_resolved(cfg, "dump-attention", out / "config.txt")
    print(f"iss={iss!r} isc={isc!r} out={out}")
    return 0


_HANDLERS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "sample": _cmd_sample,
    "re-edit": _cmd_re_edit,
    "segment": _cmd_segment,
    "metrics": _cmd_metrics,
    "probe": _cmd_probe,
    "dump-attention": _cmd_dump_attention,
}


def run(argv: list[str]) -> int:
    """Execute one CLI invocation; returns the process exit code."""
    torch.set_num_threads(1)
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command is None:
            parser.print_usage(sys.stderr)
            return 1
        cfg = _resolve(ns.command, ns)
        return _HANDLERS[ns.command](cfg)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ConfigurationError, VocabularyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except DataError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except CheckpointError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run(sys.argv[1:]))
