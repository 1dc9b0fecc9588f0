"""Orthographic edge-projection sketches.

A sketch is rendered by projecting primitive silhouette and crease edges
onto one of three fixed axis-aligned views and rasterizing 1-pixel
strokes: ink pixels are 1.0, background is exactly 0.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError, DataError
from .shapes import Box, Cylinder, ShapeSpec

VIEWS = ("front", "side", "top")

# View -> (dropped axis, horizontal axis, vertical axis).
_VIEW_AXES = {"front": (1, 0, 2), "side": (0, 1, 2), "top": (2, 0, 1)}

# World half-extent mapped onto the canvas; shapes live in [-1, 1]^3.
# Chosen so corpus-average ink stays well below 5% of pixels at 64x64.
_FRAME = 1.35


@dataclass
class SketchImage:
    """Single-channel raster, values in [0, 1] with 1 = ink."""

    pixels: np.ndarray

    def __post_init__(self) -> None:
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.ndim != 2:
            raise DataError(f"sketch must be 2-D, got shape {self.pixels.shape}")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise DataError("sketch values must lie in [0, 1]")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def ink_fraction(self) -> float:
        return float((self.pixels > 0.0).mean())


def _to_px(u: float, size: int) -> int:
    return int(np.rint((u + _FRAME) / (2.0 * _FRAME) * (size - 1)))


def _draw_segment(canvas: np.ndarray, p0: tuple[float, float], p1: tuple[float, float]) -> None:
    h, w = canvas.shape
    x0, y0 = _to_px(p0[0], w), _to_px(p0[1], h)
    x1, y1 = _to_px(p1[0], w), _to_px(p1[1], h)
    # Bresenham on pixel endpoints.
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        if 0 <= x < w and 0 <= y < h:
            canvas[h - 1 - y, x] = 1.0
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy
    return


def _draw_circle(canvas: np.ndarray, center: tuple[float, float], radius: float) -> None:
    h, w = canvas.shape
    r_px = radius / (2.0 * _FRAME) * (w - 1)
    steps = max(16, int(np.ceil(4.0 * np.pi * max(r_px, 1.0))))
    theta = np.linspace(0.0, 2.0 * np.pi, steps, endpoint=False)
    for t in theta:
        x = _to_px(center[0] + radius * np.cos(t), w)
        y = _to_px(center[1] + radius * np.sin(t), h)
        if 0 <= x < w and 0 <= y < h:
            canvas[h - 1 - y, x] = 1.0


def _box_strokes(box: Box, drop: int, ha: int, va: int):
    c = np.array(box.center)
    half = np.array(box.half)
    corners = [
        c + half * np.array(s)
        for s in [(sx, sy, sz) for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
    ]
    edges = []
    for i, a in enumerate(corners):
        for b in corners[i + 1:]:
            if np.sum(np.abs(a - b) > 1e-12) == 1:  # box edge: differ on one axis
                edges.append(((a[ha], a[va]), (b[ha], b[va])))
    return edges, []


def _cylinder_strokes(cyl: Cylinder, drop: int, ha: int, va: int):
    c = np.array(cyl.center)
    segments, circles = [], []
    if cyl.axis == drop:
        # Looking down the axis: both caps project to one circle.
        circles.append(((c[ha], c[va]), cyl.radius))
        return segments, circles
    # Side-on: caps project to segments of length 2r, plus two silhouette
    # lines parallel to the axis at +-r offset.
    axis_dir = np.zeros(3)
    axis_dir[cyl.axis] = 1.0
    perp = next(a for a in (ha, va) if a != cyl.axis)
    for side in (-1.0, 1.0):
        cap = c + side * cyl.half_length * axis_dir
        a, b = cap.copy(), cap.copy()
        a[perp] -= cyl.radius
        b[perp] += cyl.radius
        segments.append(((a[ha], a[va]), (b[ha], b[va])))
    for side in (-1.0, 1.0):
        a = c - cyl.half_length * axis_dir
        b = c + cyl.half_length * axis_dir
        a[perp] += side * cyl.radius
        b[perp] += side * cyl.radius
        segments.append(((a[ha], a[va]), (b[ha], b[va])))
    return segments, circles


def render_sketch(spec: ShapeSpec | None, view: str, width: int = 64, height: int = 64) -> SketchImage:
    """Project primitive edges of ``spec`` under the named view.

    ``spec=None`` (or a spec with no parts) yields an all-background image.
    """
    if view not in VIEWS:
        raise ConfigurationError(f"unknown view {view!r}; expected one of {VIEWS}")
    if width < 16 or height < 16:
        raise ConfigurationError("sketch dimensions must be at least 16x16")
    drop, ha, va = _VIEW_AXES[view]
    canvas = np.zeros((height, width), dtype=np.float64)
    if spec is not None:
        for part in spec.parts:
            for prim in part.primitives:
                if isinstance(prim, Box):
                    segments, circles = _box_strokes(prim, drop, ha, va)
                else:
                    segments, circles = _cylinder_strokes(prim, drop, ha, va)
                for p0, p1 in segments:
                    _draw_segment(canvas, p0, p1)
                for center, radius in circles:
                    _draw_circle(canvas, center, radius)
    return SketchImage(pixels=canvas)
