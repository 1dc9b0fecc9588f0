"""Part segmentation by appearance diffusion plus color clustering.

Given clean geometry and the category's fixed prompt, the appearance
chain paints each point; K-means refines the raw colors into K clusters,
and each cluster takes the part label of the nearest canonical part
color. mIoU scores the result against ground-truth labels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .data.prompts import canonical_prompt
from .data.shapes import CANONICAL_COLOR_WORDS, PALETTE, PART_NAMES
from .errors import ConfigurationError
from .seeding import rng_for


@dataclass
class KMeansResult:
    labels: np.ndarray
    centers: np.ndarray
    inertia_history: np.ndarray


@dataclass
class SegmentationResult:
    labels: np.ndarray
    raw_colors: np.ndarray
    k: int


def kmeans_colors(colors: np.ndarray, k: int, seed: int,
                  max_iterations: int = 100, tol: float = 1e-6) -> KMeansResult:
    """Lloyd's iterations from k-means++ style seeding.

    Runs until centroid movement falls below ``tol`` or the iteration cap;
    empty clusters are re-seeded to the point farthest from its center.
    """
    colors = np.asarray(colors, dtype=np.float64)
    n = colors.shape[0]
    if k < 1:
        raise ConfigurationError("k must be >= 1")
    if n < k:
        raise ConfigurationError(f"need at least k={k} points, got {n}")
    rng = rng_for(seed, "kmeans")

    centers = np.empty((k, colors.shape[1]))
    centers[0] = colors[int(rng.integers(n))]
    for i in range(1, k):
        d2 = np.min(
            ((colors[:, None, :] - centers[None, :i, :]) ** 2).sum(axis=2), axis=1
        )
        total = d2.sum()
        if total <= 0.0:
            centers[i] = colors[int(rng.integers(n))]
            continue
        centers[i] = colors[int(rng.choice(n, p=d2 / total))]

    inertia = []
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iterations):
        d2 = ((colors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        inertia.append(float(d2[np.arange(n), labels].sum()))
        new_centers = centers.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                new_centers[j] = colors[members].mean(axis=0)
            else:
                far = int(d2[np.arange(n), labels].argmax())
                new_centers[j] = colors[far]
        shift = np.linalg.norm(new_centers - centers, axis=1).max()
        centers = new_centers
        if shift < tol:
            break
    d2 = ((colors[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = d2.argmin(axis=1)
    inertia.append(float(d2[np.arange(n), labels].sum()))
    return KMeansResult(labels=labels, centers=centers, inertia_history=np.array(inertia))


def labels_from_colors(colors: np.ndarray, category: str, seed: int = 0) -> SegmentationResult:
    """Cluster colors and map clusters to parts by nearest canonical color."""
    parts = PART_NAMES[category]
    k = len(parts)
    result = kmeans_colors(colors, k, seed)
    canonical = np.array([PALETTE[w] for w in CANONICAL_COLOR_WORDS[:k]])
    center_to_part = np.array(
        [((canonical - c[None, :]) ** 2).sum(axis=1).argmin() for c in result.centers]
    )
    return SegmentationResult(
        labels=center_to_part[result.labels], raw_colors=colors, k=k
    )


def segment_parts(g0: np.ndarray, category: str, appearance, seed: int = 0) -> SegmentationResult:
    """Segment given geometry by painting it under the category prompt.

    ``appearance`` is a trained appearance stage; the condition is the
    text feature of the fixed canonical prompt.
    """
    from .diffusion.sampling import sample_chain

    if category not in PART_NAMES:
        raise ConfigurationError(f"unknown category {category!r}")
    appearance.eval()
    g0 = np.asarray(g0, dtype=np.float64)
    with torch.no_grad():
        cond = appearance.nets.condition_text_only(canonical_prompt(category))
        raw = sample_chain(
            appearance.noise_model,
            cond,
            appearance.schedule,
            g0.shape[0],
            rng_for(seed, "chain", "segmentation"),
            g0=torch.from_numpy(g0),
        )
    colors = np.clip((raw + 1.0) / 2.0, 0.0, 1.0)
    return labels_from_colors(colors, category, seed)


def miou(pred_labels: np.ndarray, gt_labels: np.ndarray, k: int) -> tuple[float, np.ndarray]:
    """(instance mIoU, per-class IoU); classes with empty union get NaN."""
    pred = np.asarray(pred_labels, dtype=np.int64)
    gt = np.asarray(gt_labels, dtype=np.int64)
    if pred.shape != gt.shape:
        raise ConfigurationError(
            f"label arrays must have equal length, got {pred.shape} and {gt.shape}"
        )
    if pred.size and (pred.min() < 0 or pred.max() >= k or gt.min() < 0 or gt.max() >= k):
        raise ConfigurationError(f"labels must lie in [0, {k})")
    per_class = np.full(k, np.nan)
    for c in range(k):
        inter = np.sum((pred == c) & (gt == c))
        union = np.sum((pred == c) | (gt == c))
        if union > 0:
            per_class[c] = inter / union
    present = ~np.isnan(per_class)
    if not present.any():
        raise ConfigurationError("no class present in either labeling")
    return float(per_class[present].mean()), per_class
