"""Synthetic dataset generation: shapes, sketches, prompts, and file IO."""

from .prompts import (
    ADJECTIVES,
    TEXT_MODES,
    VOCABULARY,
    PromptAttributes,
    TextPrompt,
    canonical_prompt,
    generate_text,
    has_shape_description,
    parse_prompt,
    render_text,
)
from .corpus import corpus_plan, synthesize_corpus, synthesize_item
from .shapes import (
    CANONICAL_COLOR_WORDS,
    CATEGORIES,
    COLOR_WORDS,
    PALETTE,
    PART_NAMES,
    Box,
    ColoredPointCloud,
    Cylinder,
    Part,
    ShapeSpec,
    color_word,
    generate_shape,
    make_shape_spec,
    normalize_cloud,
    sample_cloud,
    spec_bounds,
    with_canonical_colors,
)
from .sketch import VIEWS, SketchImage, render_sketch
from .io import (
    DatasetItem,
    labels_from_spec,
    parse_kv,
    format_kv,
    read_dataset,
    read_item,
    read_ply,
    read_pgm,
    read_prompt,
    read_spec,
    write_dataset,
    write_item,
    write_ply,
    write_pgm,
    write_prompt,
    write_spec,
)

__all__ = [name for name in dir() if not name.startswith("_")]
