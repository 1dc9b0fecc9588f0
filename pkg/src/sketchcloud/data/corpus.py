"""Corpus assembly: one call from category and seed to a dataset item.

An item is a normalized cloud, an edge sketch of the same shape, the
templated prompt, and the shape spec. Per-item seeds are derived from the
corpus seed and the item index, so items are independent and can be built
by any number of workers in any order.
"""

from __future__ import annotations

from ..errors import ConfigurationError
from ..seeding import derive_seed
from .io import DatasetItem
from .prompts import generate_text
from .shapes import CATEGORIES, generate_shape, normalize_cloud
from .sketch import render_sketch


def synthesize_item(
    category: str,
    item_seed: int,
    item_id: str | None = None,
    n_points: int = 2048,
    view: str = "front",
    text_mode: str = "appearance_only",
    canonical_colors: bool = False,
    sketch_size: int = 64,
) -> DatasetItem:
    spec, cloud = generate_shape(
        category, item_seed, n_points=n_points, canonical_colors=canonical_colors
    )
    return DatasetItem(
        item_id=item_id or f"{category}_{item_seed:08d}",
        cloud=normalize_cloud(cloud),
        sketch=render_sketch(spec, view, sketch_size, sketch_size),
        prompt=generate_text(spec, text_mode, item_seed),
        spec=spec,
    )


def corpus_plan(categories: tuple[str, ...], count: int, seed: int):
    """(item_id, category, item_seed) for each of ``count`` items, round-robin."""
    for c in categories:
        if c not in CATEGORIES:
            raise ConfigurationError(f"unknown category {c!r}; expected one of {CATEGORIES}")
    if count < 1:
        raise ConfigurationError("count must be >= 1")
    plan = []
    per_cat = {c: 0 for c in categories}
    for j in range(count):
        category = categories[j % len(categories)]
        item_id = f"{category}_{per_cat[category]:04d}"
        per_cat[category] += 1
        plan.append((item_id, category, derive_seed(seed, "item", j)))
    return plan


def synthesize_corpus(
    categories: tuple[str, ...],
    count: int,
    seed: int,
    **item_kwargs,
) -> list[DatasetItem]:
    return [
        synthesize_item(category, item_seed, item_id=item_id, **item_kwargs)
        for item_id, category, item_seed in corpus_plan(categories, count, seed)
    ]
