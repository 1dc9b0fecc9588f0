"""Procedural colored shapes built from axis-aligned primitives.

Four categories (chair, table, aeroplane, car) are assembled from boxes
and cylinders with seeded random proportions. Each part of a shape has a
name, one or more primitives, and a single exact RGB color, which doubles
as the ground-truth part label. Point clouds are sampled uniformly by
surface area with per-part quotas proportional to part area.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import DataError
from ..seeding import rng_for

CATEGORIES = ("chair", "table", "aeroplane", "car")

PART_NAMES = {
    "chair": ("seat", "back", "legs"),
    "table": ("top", "legs"),
    "aeroplane": ("body", "wings", "tail"),
    "car": ("body", "wheels", "cabin"),
}

# Closed color palette; prompt color words are exact reverse lookups.
PALETTE = {
    "red": (0.9, 0.1, 0.1),
    "green": (0.1, 0.8, 0.15),
    "blue": (0.15, 0.2, 0.9),
    "yellow": (0.95, 0.85, 0.1),
    "orange": (0.95, 0.55, 0.1),
    "purple": (0.6, 0.15, 0.8),
    "white": (0.95, 0.95, 0.95),
    "black": (0.05, 0.05, 0.05),
}
COLOR_WORDS = tuple(PALETTE)

# Per-category part colors used for the segmentation protocol: the first
# parts take blue, green, red in order.
CANONICAL_COLOR_WORDS = ("blue", "green", "red")


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and half extents."""

    center: tuple[float, float, float]
    half: tuple[float, float, float]

    def surface_area(self) -> float:
        hx, hy, hz = self.half
        return 8.0 * (hx * hy + hy * hz + hx * hz)

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        hx, hy, hz = self.half
        areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
        areas *= 4.0
        face = rng.choice(6, size=n, p=areas / areas.sum())
        u = rng.uniform(-1.0, 1.0, size=(n, 2))
        pts = np.empty((n, 3))
        half = np.array(self.half)
        for k in range(6):
            m = face == k
            axis = k // 2
            sign = 1.0 if k % 2 == 0 else -1.0
            others = [a for a in range(3) if a != axis]
            pts[m, axis] = sign * half[axis]
            pts[m, others[0]] = u[m, 0] * half[others[0]]
            pts[m, others[1]] = u[m, 1] * half[others[1]]
        return pts + np.array(self.center)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        c, h = np.array(self.center), np.array(self.half)
        return c - h, c + h


@dataclass(frozen=True)
class Cylinder:
    """Axis-aligned cylinder; ``axis`` is the coordinate index 0/1/2."""

    center: tuple[float, float, float]
    axis: int
    radius: float
    half_length: float

    def surface_area(self) -> float:
        lateral = 2.0 * np.pi * self.radius * 2.0 * self.half_length
        caps = 2.0 * np.pi * self.radius**2
        return float(lateral + caps)

    def sample_surface(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lateral = 2.0 * np.pi * self.radius * 2.0 * self.half_length
        caps = 2.0 * np.pi * self.radius**2
        on_cap = rng.random(n) < caps / (lateral + caps)
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        along = rng.uniform(-self.half_length, self.half_length, size=n)
        r = self.radius * np.sqrt(rng.random(n))
        cap_side = np.where(rng.random(n) < 0.5, -1.0, 1.0)

        radial = np.where(on_cap, r, self.radius)
        axial = np.where(on_cap, cap_side * self.half_length, along)

        p, q = [a for a in range(3) if a != self.axis]
        pts = np.empty((n, 3))
        pts[:, self.axis] = axial
        pts[:, p] = radial * np.cos(theta)
        pts[:, q] = radial * np.sin(theta)
        return pts + np.array(self.center)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.array(self.center, dtype=float)
        hi = lo.copy()
        lo[self.axis] -= self.half_length
        hi[self.axis] += self.half_length
        for a in range(3):
            if a != self.axis:
                lo[a] -= self.radius
                hi[a] += self.radius
        return lo, hi


Primitive = Box | Cylinder


@dataclass(frozen=True)
class Part:
    name: str
    primitives: tuple[Primitive, ...]
    color: tuple[float, float, float]

    def surface_area(self) -> float:
        return sum(p.surface_area() for p in self.primitives)


@dataclass(frozen=True)
class ShapeSpec:
    """Full description of one procedural shape."""

    category: str
    seed: int
    parts: tuple[Part, ...]

    def part_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.parts)

    def part_colors(self) -> np.ndarray:
        return np.array([p.color for p in self.parts])

    def color_words(self) -> tuple[str, ...]:
        return tuple(color_word(p.color) for p in self.parts)


@dataclass
class ColoredPointCloud:
    """N points with coordinates ``g`` (N,3) and colors ``a`` (N,3) in [0,1].

    ``a`` may be None for shape-only clouds (geometry-stage output).
    """

    g: np.ndarray
    a: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.g = np.asarray(self.g, dtype=np.float64)
        if self.g.ndim != 2 or self.g.shape[1] != 3:
            raise DataError(f"geometry must be (N,3), got {self.g.shape}")
        if self.a is not None:
            self.a = np.asarray(self.a, dtype=np.float64)
            if self.a.shape != self.g.shape:
                raise DataError(f"colors must match geometry shape, got {self.a.shape}")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (self.g.shape[0],):
                raise DataError("labels must be one index per point")

    @property
    def n(self) -> int:
        return self.g.shape[0]


def color_word(rgb: tuple[float, float, float]) -> str:
    """Name of the nearest palette color."""
    rgb_arr = np.array(rgb)
    dists = {w: float(np.sum((np.array(c) - rgb_arr) ** 2)) for w, c in PALETTE.items()}
    return min(dists, key=dists.get)


def _pick_colors(names: tuple[str, ...], rng: np.random.Generator,
                 canonical: bool) -> list[tuple[float, float, float]]:
    if canonical:
        words = CANONICAL_COLOR_WORDS[: len(names)]
    else:
        words = rng.choice(len(COLOR_WORDS), size=len(names), replace=False)
        words = [COLOR_WORDS[int(i)] for i in words]
    return [PALETTE[w] for w in words]


def _chair_parts(rng: np.random.Generator) -> dict[str, tuple[Primitive, ...]]:
    w = rng.uniform(0.45, 0.65)
    d = rng.uniform(0.40, 0.55)
    th = rng.uniform(0.03, 0.05)
    seat_z = rng.uniform(-0.15, 0.0)
    back_h = rng.uniform(0.30, 0.42)
    back_t = rng.uniform(0.025, 0.04)
    leg_t = rng.uniform(0.03, 0.05)

    seat = Box((0.0, 0.0, seat_z), (w, d, th))
    back = Box((0.0, -d + back_t, seat_z + th + back_h), (w, back_t, back_h))
    leg_h = (seat_z - th + 1.0) / 2.0
    leg_z = -1.0 + leg_h
    lx, ly = w - leg_t, d - leg_t
    legs = tuple(
        Box((sx * lx, sy * ly, leg_z), (leg_t, leg_t, leg_h))
        for sx in (-1.0, 1.0)
        for sy in (-1.0, 1.0)
    )
    return {"seat": (seat,), "back": (back,), "legs": legs}


def _table_parts(rng: np.random.Generator) -> dict[str, tuple[Primitive, ...]]:
    w = rng.uniform(0.6, 0.9)
    d = rng.uniform(0.45, 0.7)
    th = rng.uniform(0.03, 0.06)
    top_z = rng.uniform(0.1, 0.3)
    leg_r = rng.uniform(0.035, 0.055)

    top = Box((0.0, 0.0, top_z), (w, d, th))
    leg_h = (top_z - th + 1.0) / 2.0
    leg_z = -1.0 + leg_h
    lx, ly = w - 2 * leg_r, d - 2 * leg_r
    legs = tuple(
        Cylinder((sx * lx, sy * ly, leg_z), 2, leg_r, leg_h)
        for sx in (-1.0, 1.0)
        for sy in (-1.0, 1.0)
    )
    return {"top": (top,), "legs": legs}


def _aeroplane_parts(rng: np.random.Generator) -> dict[str, tuple[Primitive, ...]]:
    body_r = rng.uniform(0.08, 0.13)
    body_l = rng.uniform(0.7, 0.9)
    chord = rng.uniform(0.10, 0.18)
    span = rng.uniform(0.65, 0.9)
    wing_x = rng.uniform(0.0, 0.25)
    wing_t = 0.02
    tail_c = rng.uniform(0.06, 0.10)
    tail_span = rng.uniform(0.22, 0.35)
    fin_h = rng.uniform(0.14, 0.24)

    body = Cylinder((0.0, 0.0, 0.0), 0, body_r, body_l)
    wings = Box((wing_x, 0.0, 0.0), (chord, span, wing_t))
    tail_x = -body_l + tail_c
    tail = (
        Box((tail_x, 0.0, 0.0), (tail_c, tail_span, wing_t)),
        Box((tail_x, 0.0, body_r + fin_h), (tail_c, wing_t, fin_h)),
    )
    return {"body": (body,), "wings": (wings,), "tail": tail}


def _car_parts(rng: np.random.Generator) -> dict[str, tuple[Primitive, ...]]:
    length = rng.uniform(0.7, 0.9)
    width = rng.uniform(0.3, 0.42)
    height = rng.uniform(0.14, 0.2)
    wheel_r = rng.uniform(0.12, 0.17)
    wheel_w = rng.uniform(0.04, 0.06)
    cab_h = rng.uniform(0.1, 0.16)
    cab_l = length * rng.uniform(0.35, 0.5)

    body_z = -0.5 + wheel_r + height
    body = Box((0.0, 0.0, body_z), (length, width, height))
    cabin = Box((0.0, 0.0, body_z + height + cab_h), (cab_l, width * 0.85, cab_h))
    wx = length * 0.6
    wheels = tuple(
        Cylinder((sx * wx, sy * width, -0.5 + wheel_r), 1, wheel_r, wheel_w)
        for sx in (-1.0, 1.0)
        for sy in (-1.0, 1.0)
    )
    return {"body": (body,), "wheels": wheels, "cabin": (cabin,)}


_BUILDERS = {
    "chair": _chair_parts,
    "table": _table_parts,
    "aeroplane": _aeroplane_parts,
    "car": _car_parts,
}


def make_shape_spec(category: str, seed: int, canonical_colors: bool = False) -> ShapeSpec:
    """Build a seeded random shape of the given category.

    With ``canonical_colors`` the parts take the fixed blue/green/red
    assignment used by the segmentation protocol instead of seeded colors.
    """
    if category not in CATEGORIES:
        raise DataError(f"unknown category {category!r}; expected one of {CATEGORIES}")
    rng = rng_for(seed, "shape", category)
    prims = _BUILDERS[category](rng)
    names = PART_NAMES[category]
    colors = _pick_colors(names, rng, canonical_colors)
    parts = tuple(Part(nm, prims[nm], colors[i]) for i, nm in enumerate(names))
    spec = ShapeSpec(category=category, seed=int(seed), parts=parts)
    lo, hi = spec_bounds(spec)
    if (lo < -1.0 - 1e-9).any() or (hi > 1.0 + 1e-9).any():
        raise DataError(f"{category} seed {seed}: assembly escapes the canonical cube")
    return spec


def spec_bounds(spec: ShapeSpec) -> tuple[np.ndarray, np.ndarray]:
    los, his = zip(*(pr.bounds() for part in spec.parts for pr in part.primitives))
    return np.min(los, axis=0), np.max(his, axis=0)


def with_canonical_colors(spec: ShapeSpec) -> ShapeSpec:
    colors = [PALETTE[w] for w in CANONICAL_COLOR_WORDS[: len(spec.parts)]]
    parts = tuple(replace(p, color=c) for p, c in zip(spec.parts, colors))
    return replace(spec, parts=parts)


def _largest_remainder(weights: np.ndarray, total: int) -> np.ndarray:
    """Integer quotas proportional to weights, summing exactly to total.

    Ties in the fractional remainders are broken by position order.
    """
    weights = np.asarray(weights, dtype=np.float64)
    raw = weights / weights.sum() * total
    quotas = np.floor(raw).astype(int)
    short = total - quotas.sum()
    if short > 0:
        remainders = raw - quotas
        order = np.lexsort((np.arange(len(weights)), -remainders))
        quotas[order[:short]] += 1
    return quotas


def sample_cloud(spec: ShapeSpec, n_points: int, seed: int) -> ColoredPointCloud:
    """Sample ``n_points`` uniformly by area over the spec's surfaces.

    Quotas are stratified per part (then per primitive) proportional to
    surface area; every point carries its part label and exact part color.
    """
    if n_points < 1:
        raise DataError("n_points must be >= 1")
    rng = rng_for(seed, "surface", spec.category, spec.seed)
    part_areas = np.array([p.surface_area() for p in spec.parts])
    part_quota = _largest_remainder(part_areas, n_points)

    pts, cols, labs = [], [], []
    for idx, (part, quota) in enumerate(zip(spec.parts, part_quota)):
        if quota == 0:
            continue
        prim_areas = np.array([pr.surface_area() for pr in part.primitives])
        prim_quota = _largest_remainder(prim_areas, int(quota))
        for prim, k in zip(part.primitives, prim_quota):
            if k == 0:
                continue
            pts.append(prim.sample_surface(int(k), rng))
            cols.append(np.tile(part.color, (int(k), 1)))
            labs.append(np.full(int(k), idx, dtype=np.int64))
    return ColoredPointCloud(
        g=np.concatenate(pts), a=np.concatenate(cols), labels=np.concatenate(labs)
    )


def generate_shape(category: str, seed: int, n_points: int = 2048,
                   canonical_colors: bool = False) -> tuple[ShapeSpec, ColoredPointCloud]:
    """Seeded shape plus a surface-sampled colored cloud (default 2048 points)."""
    spec = make_shape_spec(category, seed, canonical_colors=canonical_colors)
    cloud = sample_cloud(spec, n_points, seed)
    return spec, cloud


def normalize_cloud(cloud: ColoredPointCloud) -> ColoredPointCloud:
    """Translate to zero mean and scale isotropically to max |coord| = 1.

    Colors and labels pass through untouched. Degenerate clouds (all
    points identical) cannot be normalized and raise ``DataError``.
    """
    if cloud.n < 1:
        raise DataError("cannot normalize an empty cloud")
    g = cloud.g - cloud.g.mean(axis=0)
    scale = np.abs(g).max()
    if scale <= 0.0:
        raise DataError("degenerate cloud: zero spatial extent")
    labels = None if cloud.labels is None else cloud.labels.copy()
    colors = None if cloud.a is None else cloud.a.copy()
    return ColoredPointCloud(g=g / scale, a=colors, labels=labels)
