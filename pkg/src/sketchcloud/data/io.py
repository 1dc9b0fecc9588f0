"""Dataset file formats and directory layout.

Clouds are ASCII PLY (xyz as 32-bit reals, rgb as 8-bit integers),
sketches are binary PGM (P5), shape specs and prompts are UTF-8
``key = value`` files. A dataset is ``<root>/<split>/<id>.{ply,pgm,txt,spec}``
with one quadruple per item.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import DataError
from .prompts import PromptAttributes, TextPrompt, render_text
from .shapes import (
    Box,
    ColoredPointCloud,
    Cylinder,
    Part,
    PART_NAMES,
    ShapeSpec,
)
from .sketch import SketchImage


@dataclass
class DatasetItem:
    item_id: str
    cloud: ColoredPointCloud
    sketch: SketchImage
    prompt: TextPrompt | None
    spec: ShapeSpec | None = None


def _f32(x: float) -> str:
    # 9 significant digits round-trip any float32 exactly.
    return format(np.float32(x), ".9g")


# ---------------------------------------------------------------------------
# PLY


def write_ply(path: Path | str, cloud: ColoredPointCloud) -> None:
    path = Path(path)
    xyz = cloud.g.astype(np.float32)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {cloud.n}",
        "property float x",
        "property float y",
        "property float z",
    ]
    if cloud.a is not None:
        lines += ["property uchar red", "property uchar green", "property uchar blue"]
    lines.append("end_header")
    if cloud.a is None:
        for p in xyz:
            lines.append(f"{_f32(p[0])} {_f32(p[1])} {_f32(p[2])}")
    else:
        rgb = np.clip(np.rint(cloud.a * 255.0), 0, 255).astype(np.uint8)
        for p, c in zip(xyz, rgb):
            lines.append(f"{_f32(p[0])} {_f32(p[1])} {_f32(p[2])} {c[0]} {c[1]} {c[2]}")
    path.write_text("\n".join(lines) + "\n", encoding="ascii")


def read_ply(path: Path | str) -> ColoredPointCloud:
    path = Path(path)
    try:
        raw = path.read_text(encoding="ascii").splitlines()
    except OSError as e:
        raise DataError(f"{path}: cannot read PLY: {e}") from e
    if not raw or raw[0].strip() != "ply":
        raise DataError(f"{path}:1: not a PLY file (missing 'ply' magic)")
    n_vertex = None
    body_start = None
    properties: list[str] = []
    for i, line in enumerate(raw[1:], start=2):
        tok = line.split()
        if tok[:2] == ["element", "vertex"]:
            try:
                n_vertex = int(tok[2])
            except (IndexError, ValueError):
                raise DataError(f"{path}:{i}: malformed 'element vertex' count")
        if tok[:1] == ["property"] and len(tok) == 3:
            properties.append(tok[2])
        if line.strip() == "end_header":
            body_start = i
            break
    if body_start is None:
        raise DataError(f"{path}: missing 'end_header'")
    if n_vertex is None:
        raise DataError(f"{path}: missing 'element vertex' declaration")
    if properties[:3] != ["x", "y", "z"]:
        raise DataError(f"{path}: vertex properties must start with x y z")
    has_color = properties[3:] == ["red", "green", "blue"]
    if not has_color and properties[3:]:
        raise DataError(f"{path}: unsupported property list {properties}")
    n_fields = 6 if has_color else 3
    body = raw[body_start:]
    if len(body) < n_vertex:
        raise DataError(
            f"{path}:{body_start + len(body)}: truncated PLY: "
            f"expected {n_vertex} vertices, found {len(body)}"
        )
    g = np.empty((n_vertex, 3), dtype=np.float64)
    a = np.empty((n_vertex, 3), dtype=np.float64) if has_color else None
    for k in range(n_vertex):
        lineno = body_start + 1 + k
        tok = body[k].split()
        if len(tok) != n_fields:
            raise DataError(f"{path}:{lineno}: expected {n_fields} vertex fields")
        try:
            g[k] = [np.float32(tok[0]), np.float32(tok[1]), np.float32(tok[2])]
        except ValueError:
            raise DataError(f"{path}:{lineno}: malformed coordinate field")
        if has_color:
            try:
                rgb = [int(tok[3]), int(tok[4]), int(tok[5])]
            except ValueError:
                raise DataError(f"{path}:{lineno}: malformed color field")
            if not all(0 <= v <= 255 for v in rgb):
                raise DataError(f"{path}:{lineno}: color field outside 0..255")
            a[k] = np.array(rgb, dtype=np.float64) / 255.0
    return ColoredPointCloud(g=g, a=a)


# ---------------------------------------------------------------------------
# PGM


def write_pgm(path: Path | str, sketch: SketchImage) -> None:
    path = Path(path)
    data = np.rint(sketch.pixels * 255.0).astype(np.uint8)
    header = f"P5\n{sketch.width} {sketch.height}\n255\n".encode("ascii")
    path.write_bytes(header + data.tobytes())


def read_pgm(path: Path | str) -> SketchImage:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataError(f"{path}: cannot read PGM: {e}") from e
    if not blob.startswith(b"P5"):
        raise DataError(f"{path}:1: not a binary PGM (missing 'P5' magic)")
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        try:
            fields.append(int(blob[start:pos]))
        except ValueError:
            raise DataError(f"{path}: malformed PGM header field")
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise DataError(f"{path}: unsupported PGM maxval {maxval}")
    data = blob[pos : pos + width * height]
    if len(data) != width * height:
        raise DataError(f"{path}: truncated PGM pixel data")
    pixels = np.frombuffer(data, dtype=np.uint8).reshape(height, width)
    return SketchImage(pixels=pixels.astype(np.float64) / 255.0)


# ---------------------------------------------------------------------------
# key = value files


def parse_kv(path: Path | str) -> dict[str, str]:
    """Parse a ``key = value`` file; blank lines and '#' comments allowed."""
    path = Path(path)
    out: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: cannot read: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise DataError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if not key:
            raise DataError(f"{path}:{lineno}: empty key")
        if key in out:
            raise DataError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def format_kv(pairs: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs.items())


# ---------------------------------------------------------------------------
# ShapeSpec files


def _prim_to_str(p: Box | Cylinder) -> str:
    if isinstance(p, Box):
        c, h = p.center, p.half
        return "box " + " ".join(repr(v) for v in (*c, *h))
    return "cylinder " + " ".join(
        [repr(p.center[0]), repr(p.center[1]), repr(p.center[2]),
         str(p.axis), repr(p.radius), repr(p.half_length)]
    )


def _prim_from_str(s: str, where: str) -> Box | Cylinder:
    tok = s.split()
    try:
        if tok[0] == "box" and len(tok) == 7:
            v = [float(x) for x in tok[1:]]
            return Box(center=(v[0], v[1], v[2]), half=(v[3], v[4], v[5]))
        if tok[0] == "cylinder" and len(tok) == 7:
            return Cylinder(
                center=(float(tok[1]), float(tok[2]), float(tok[3])),
                axis=int(tok[4]), radius=float(tok[5]), half_length=float(tok[6]),
            )
    except ValueError:
        pass
    raise DataError(f"{where}: malformed primitive {s!r}")


def write_spec(path: Path | str, spec: ShapeSpec) -> None:
    pairs: dict[str, str] = {
        "category": spec.category,
        "seed": str(spec.seed),
        "parts": ",".join(spec.part_names()),
    }
    for part in spec.parts:
        pairs[f"color.{part.name}"] = ",".join(repr(v) for v in part.color)
        for i, prim in enumerate(part.primitives):
            pairs[f"prim.{part.name}.{i}"] = _prim_to_str(prim)
    Path(path).write_text(format_kv(pairs), encoding="utf-8")


def read_spec(path: Path | str) -> ShapeSpec:
    path = Path(path)
    kv = parse_kv(path)
    for key in ("category", "seed", "parts"):
        if key not in kv:
            raise DataError(f"{path}: missing field {key!r}")
    category = kv["category"]
    if category not in PART_NAMES:
        raise DataError(f"{path}: field 'category': unknown category {category!r}")
    try:
        seed = int(kv["seed"])
    except ValueError:
        raise DataError(f"{path}: field 'seed': not an integer")
    names = tuple(kv["parts"].split(","))
    parts = []
    for name in names:
        ckey = f"color.{name}"
        if ckey not in kv:
            raise DataError(f"{path}: missing field {ckey!r}")
        try:
            color = tuple(float(v) for v in kv[ckey].split(","))
        except ValueError:
            raise DataError(f"{path}: field {ckey!r}: malformed color")
        if len(color) != 3 or not all(0.0 <= v <= 1.0 for v in color):
            raise DataError(f"{path}: field {ckey!r}: color must be 3 values in [0,1]")
        prims = []
        i = 0
        while f"prim.{name}.{i}" in kv:
            prims.append(_prim_from_str(kv[f"prim.{name}.{i}"], f"{path}: field prim.{name}.{i}"))
            i += 1
        if not prims:
            raise DataError(f"{path}: part {name!r} has no primitives")
        parts.append(Part(name=name, primitives=tuple(prims), color=color))
    return ShapeSpec(category=category, seed=seed, parts=tuple(parts))


# ---------------------------------------------------------------------------
# Prompt files


def write_prompt(path: Path | str, prompt: TextPrompt | None) -> None:
    if prompt is None:
        pairs = {"present": "false"}
    else:
        attrs = prompt.attributes
        pairs = {
            "present": "true",
            "text": prompt.text,
            "category": attrs.category,
            "part_colors": ",".join(attrs.part_colors),
            "adjectives": ",".join(attrs.adjectives),
        }
    Path(path).write_text(format_kv(pairs), encoding="utf-8")


def read_prompt(path: Path | str) -> TextPrompt | None:
    path = Path(path)
    kv = parse_kv(path)
    if kv.get("present") == "false":
        return None
    for key in ("present", "text", "category", "part_colors"):
        if key not in kv:
            raise DataError(f"{path}: missing field {key!r}")
    attrs = PromptAttributes(
        category=kv["category"],
        part_colors=tuple(kv["part_colors"].split(",")),
        adjectives=tuple(a for a in kv.get("adjectives", "").split(",") if a),
    )
    expected = render_text(attrs)
    if kv["text"] != expected:
        raise DataError(
            f"{path}: field 'text': does not match attributes "
            f"(got {kv['text']!r}, expected {expected!r})"
        )
    return TextPrompt(text=kv["text"], attributes=attrs)


# ---------------------------------------------------------------------------
# Dataset directories


def labels_from_spec(cloud: ColoredPointCloud, spec: ShapeSpec) -> np.ndarray:
    """Recover part labels by exact match against quantized part colors."""
    quant = np.rint(cloud.a * 255.0).astype(np.int64)
    part_quant = np.rint(spec.part_colors() * 255.0).astype(np.int64)
    labels = np.full(cloud.n, -1, dtype=np.int64)
    for idx, pc in enumerate(part_quant):
        labels[(quant == pc).all(axis=1)] = idx
    if (labels < 0).any():
        raise DataError("cloud colors do not match any part color in the spec")
    return labels


def write_item(root: Path | str, split: str, item: DatasetItem) -> None:
    d = Path(root) / split
    d.mkdir(parents=True, exist_ok=True)
    write_ply(d / f"{item.item_id}.ply", item.cloud)
    write_pgm(d / f"{item.item_id}.pgm", item.sketch)
    write_prompt(d / f"{item.item_id}.txt", item.prompt)
    if item.spec is not None:
        write_spec(d / f"{item.item_id}.spec", item.spec)


def read_item(root: Path | str, split: str, item_id: str) -> DatasetItem:
    d = Path(root) / split
    cloud = read_ply(d / f"{item_id}.ply")
    sketch = read_pgm(d / f"{item_id}.pgm")
    prompt = read_prompt(d / f"{item_id}.txt")
    spec = None
    spec_path = d / f"{item_id}.spec"
    if spec_path.exists():
        spec = read_spec(spec_path)
        cloud.labels = labels_from_spec(cloud, spec)
    return DatasetItem(item_id=item_id, cloud=cloud, sketch=sketch, prompt=prompt, spec=spec)


def write_dataset(root: Path | str, split: str, items: list[DatasetItem]) -> None:
    for item in items:
        write_item(root, split, item)


def read_dataset(root: Path | str, split: str) -> list[DatasetItem]:
    """Read every item under ``root/split`` in stable (sorted id) order."""
    d = Path(root) / split
    if not d.is_dir():
        raise DataError(f"{d}: dataset split directory does not exist")
    ids = sorted(p.stem for p in d.glob("*.ply"))
    if not ids:
        raise DataError(f"{d}: no .ply items found")
    return [read_item(root, split, i) for i in ids]
