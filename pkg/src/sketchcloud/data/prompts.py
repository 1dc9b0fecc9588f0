"""Templated text prompts over a closed vocabulary.

Prompts follow the fixed pattern ``a [<adjective>] <color> <category>
with <color> <part> [and <color> <part>]``; the leading color describes
the shape's primary part. The vocabulary is closed so the text encoder
can be trained from scratch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError
from ..seeding import rng_for
from .shapes import CATEGORIES, COLOR_WORDS, PART_NAMES, ShapeSpec, spec_bounds

TEXT_MODES = ("appearance_only", "shape_and_appearance", "none")

ADJECTIVES = ("tall", "short", "wide", "narrow", "long", "round")

_FUNCTION_WORDS = ("a", "an", "with", "and")

# Token 0 is reserved for padding.
VOCABULARY: tuple[str, ...] = (
    ("<pad>",)
    + _FUNCTION_WORDS
    + CATEGORIES
    + tuple(dict.fromkeys(n for parts in PART_NAMES.values() for n in parts))
    + COLOR_WORDS
    + ADJECTIVES
)


@dataclass(frozen=True)
class PromptAttributes:
    category: str
    part_colors: tuple[str, ...]  # color word per part, in part order
    adjectives: tuple[str, ...] = ()


@dataclass(frozen=True)
class TextPrompt:
    text: str
    attributes: PromptAttributes


def _shape_adjectives(spec: ShapeSpec) -> tuple[str, ...]:
    """Candidate adjectives derived from the assembly's proportions."""
    lo, hi = spec_bounds(spec)
    ext = hi - lo
    if spec.category in ("chair", "table"):
        aspect = ext[2] / max(ext[0], ext[1])
        first = "tall" if aspect > 1.05 else "short"
        second = "wide" if ext[0] > 1.15 * ext[1] else "narrow"
    elif spec.category == "aeroplane":
        first = "wide" if ext[1] > ext[0] else "long"
        second = "narrow" if ext[1] < 0.9 * ext[0] else "wide"
    else:
        first = "long" if ext[0] > 3.0 * ext[2] else "round"
        second = "short" if ext[2] < 0.35 * ext[0] else "tall"
    return (first, second)


def render_text(attributes: PromptAttributes) -> str:
    """Deterministically expand attributes through the fixed template."""
    parts = PART_NAMES[attributes.category]
    words = ["a", *attributes.adjectives, attributes.part_colors[0], attributes.category]
    tail: list[str] = []
    for color, part in zip(attributes.part_colors[1:], parts[1:]):
        if tail:
            tail.append("and")
        tail.extend([color, part])
    if tail:
        words.append("with")
        words.extend(tail)
    return " ".join(words)


def generate_text(spec: ShapeSpec, mode: str, seed: int) -> TextPrompt | None:
    """Prompt for a shape, or ``None`` when ``mode == "none"``."""
    if mode not in TEXT_MODES:
        raise ConfigurationError(f"unknown text mode {mode!r}; expected one of {TEXT_MODES}")
    if mode == "none":
        return None
    adjectives: tuple[str, ...] = ()
    if mode == "shape_and_appearance":
        candidates = _shape_adjectives(spec)
        rng = rng_for(seed, "adjective", spec.category, spec.seed)
        adjectives = (candidates[int(rng.integers(len(candidates)))],)
    attrs = PromptAttributes(
        category=spec.category,
        part_colors=spec.color_words(),
        adjectives=adjectives,
    )
    return TextPrompt(text=render_text(attrs), attributes=attrs)


def canonical_prompt(category: str) -> str:
    """The fixed per-category sentence used for part segmentation."""
    from .shapes import CANONICAL_COLOR_WORDS

    parts = PART_NAMES[category]
    attrs = PromptAttributes(
        category=category, part_colors=CANONICAL_COLOR_WORDS[: len(parts)]
    )
    return render_text(attrs)


def has_shape_description(prompt: TextPrompt | None) -> bool:
    """Whether the prompt carries geometry information (shape adjectives)."""
    return prompt is not None and bool(prompt.attributes.adjectives)


def parse_prompt(text: str) -> TextPrompt:
    """Classify the words of a free-form prompt string into attributes.

    Words must come from the closed vocabulary (enforced later when the
    prompt is tokenized); category defaults to the first category word.
    """
    words = text.lower().split()
    category = next((w for w in words if w in CATEGORIES), CATEGORIES[0])
    colors = tuple(w for w in words if w in COLOR_WORDS)
    adjectives = tuple(w for w in words if w in ADJECTIVES)
    attrs = PromptAttributes(category=category, part_colors=colors, adjectives=adjectives)
    return TextPrompt(text=text, attributes=attrs)
