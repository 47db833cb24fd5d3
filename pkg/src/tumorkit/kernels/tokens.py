"""Patch tokenization and skip-connection fusion."""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, ShapeError


def patchify(x: np.ndarray, p: int) -> np.ndarray:
    """Cut (C, D, H, W) into non-overlapping p^3 patches, one token each.

    Tokens follow row-major order over the patch grid; each token is the
    patch flattened in (C, pd, ph, pw) order, so its length is C * p^3.
    """
    x = np.asarray(x)
    if x.ndim != 4:
        raise ShapeError(f"patchify expects (C, D, H, W), got {x.shape}")
    if p < 1:
        raise ConfigError(f"patch edge must be positive, got {p}")
    c, d, h, w = x.shape
    if d % p or h % p or w % p:
        raise ConfigError(f"spatial dims {(d, h, w)} are not divisible by {p}")
    t = x.reshape(c, d // p, p, h // p, p, w // p, p)
    t = t.transpose(1, 3, 5, 0, 2, 4, 6)
    return t.reshape((d // p) * (h // p) * (w // p), c * p**3)


def unpatchify(tokens: np.ndarray, shape: tuple[int, int, int, int], p: int) -> np.ndarray:
    """Inverse of :func:`patchify` for a target (C, D, H, W) shape."""
    c, d, h, w = shape
    if d % p or h % p or w % p:
        raise ConfigError(f"spatial dims {(d, h, w)} are not divisible by {p}")
    gd, gh, gw = d // p, h // p, w // p
    tokens = np.asarray(tokens)
    if tokens.shape != (gd * gh * gw, c * p**3):
        raise ShapeError(f"token array {tokens.shape} does not match shape {shape} with p={p}")
    t = tokens.reshape(gd, gh, gw, c, p, p, p)
    return t.transpose(3, 0, 4, 1, 5, 2, 6).reshape(shape)


def skip_fuse(a: np.ndarray, b: np.ndarray, mode: str = "add") -> np.ndarray:
    """Merge an encoder skip ``a`` with decoder features ``b``.

    ``add`` sums elementwise; ``concat`` stacks along the channel axis
    (axis 0) with ``a`` first.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if mode == "add":
        if a.shape != b.shape:
            raise ShapeError(f"add needs equal shapes, got {a.shape} and {b.shape}")
        return a + b
    if mode == "concat":
        if a.ndim != b.ndim or a.shape[1:] != b.shape[1:]:
            raise ShapeError(f"concat needs matching non-channel dims, got {a.shape} and {b.shape}")
        return np.concatenate([a, b], axis=0)
    raise ConfigError(f"mode must be 'add' or 'concat', got {mode!r}")
