"""Sigmoid + binary cross-entropy on logits."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


def sigmoid_bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean BCE of ``sigmoid(logits)`` against ``targets`` and its gradient.

    Uses ``max(z, 0) - z*t + log1p(exp(-|z|))`` so large logits never
    overflow.  The gradient is ``(sigmoid(z) - t) / N``.
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if z.shape != t.shape:
        raise ShapeError(f"logits {z.shape} and targets {t.shape} differ")
    n = z.size
    loss = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    return float(loss.sum() / n), (sigmoid(z) - t) / n
