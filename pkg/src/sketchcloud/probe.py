"""Linear probing of condition embeddings.

A linear classifier with multiclass hinge loss and L2 regularization is
trained by full-batch gradient descent on a stratified split; held-out
accuracy measures how much category information the embeddings carry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .seeding import rng_for


@dataclass
class ProbeModel:
    weights: np.ndarray  # (classes, dim)
    bias: np.ndarray  # (classes,)
    metadata: dict = field(default_factory=dict)

    def predict(self, embeddings: np.ndarray) -> np.ndarray:
        scores = embeddings @ self.weights.T + self.bias
        return scores.argmax(axis=1)


def _split_stratified(labels: np.ndarray, split: float, rng: np.random.Generator):
    train_idx, test_idx = [], []
    for c in np.unique(labels):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        cut = max(1, int(round(split * len(members))))
        cut = min(cut, len(members) - 1) if len(members) > 1 else cut
        train_idx.extend(members[:cut])
        test_idx.extend(members[cut:])
    return np.sort(train_idx), np.sort(test_idx)


def _hinge_grad(w, b, x, y, n_classes, l2):
    scores = x @ w.T + b
    correct = scores[np.arange(len(y)), y][:, None]
    margins = np.maximum(0.0, 1.0 + scores - correct)
    margins[np.arange(len(y)), y] = 0.0
    loss = margins.sum() / len(y) + l2 * (w * w).sum()
    active = (margins > 0).astype(np.float64)
    active[np.arange(len(y)), y] = -active.sum(axis=1)
    gw = active.T @ x / len(y) + 2.0 * l2 * w
    gb = active.sum(axis=0) / len(y)
    return loss, gw, gb


def linear_probe(
    embeddings: np.ndarray,
    labels: np.ndarray,
    split: float = 0.75,
    seed: int = 0,
    steps: int = 400,
    learning_rate: float = 0.5,
    l2: float = 1e-4,
) -> tuple[ProbeModel, float]:
    """Train a hinge-loss linear classifier; returns (model, held-out accuracy)."""
    x = np.asarray(embeddings, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ConfigurationError("embeddings must be (M, D) with one label per row")
    classes = np.unique(y)
    if len(classes) < 2:
        raise ConfigurationError("linear probe needs at least 2 classes")
    if not 0.0 < split < 1.0:
        raise ConfigurationError("split must be a fraction in (0, 1)")
    remap = {c: i for i, c in enumerate(classes)}
    y = np.array([remap[v] for v in y])
    n_classes = len(classes)

    rng = rng_for(seed, "probe")
    train_idx, test_idx = _split_stratified(y, split, rng)
    if len(test_idx) == 0:
        raise ConfigurationError("split leaves no held-out items")
    x_tr, y_tr = x[train_idx], y[train_idx]

    mean = x_tr.mean(axis=0)
    scale = x_tr.std(axis=0) + 1e-8
    x_tr = (x_tr - mean) / scale

    w = rng.normal(0.0, 0.01, size=(n_classes, x.shape[1]))
    b = np.zeros(n_classes)
    vel_w = np.zeros_like(w)
    vel_b = np.zeros_like(b)
    for _ in range(steps):
        _, gw, gb = _hinge_grad(w, b, x_tr, y_tr, n_classes, l2)
        vel_w = 0.9 * vel_w - learning_rate * gw
        vel_b = 0.9 * vel_b - learning_rate * gb
        w = w + vel_w
        b = b + vel_b

    model = ProbeModel(
        weights=w / scale[None, :],
        bias=b - (w @ (mean / scale)),
        metadata={
            "classes": classes.tolist(),
            "n_train": len(train_idx),
            "n_test": len(test_idx),
            "steps": steps,
            "seed": int(seed),
        },
    )
    pred = model.predict(x[test_idx])
    accuracy = float((pred == y[test_idx]).mean())
    return model, accuracy
