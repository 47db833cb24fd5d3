"""Group normalization with an analytic backward pass."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..errors import ConfigError, ShapeError


@dataclass
class GroupNormConfig:
    groups: int = 32
    eps: float = 1e-5
    gamma: Optional[np.ndarray] = None  # per-channel scale, default ones
    beta: Optional[np.ndarray] = None  # per-channel shift, default zeros

    def __post_init__(self):
        if self.groups < 1:
            raise ConfigError(f"groups must be positive, got {self.groups}")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}")


def group_norm(x: np.ndarray, cfg: GroupNormConfig = GroupNormConfig()):
    """Normalize ``x`` of shape (C, D, H, W) over channel groups.

    Returns ``(y, backward)``; ``backward(dy)`` gives a dict with gradients
    for ``x``, ``gamma`` and ``beta``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2:
        raise ShapeError(f"group_norm expects (C, ...) input, got shape {x.shape}")
    c = x.shape[0]
    g = cfg.groups
    if c % g:
        raise ConfigError(f"{c} channels are not divisible into {g} groups")
    gamma = np.ones(c) if cfg.gamma is None else np.asarray(cfg.gamma, dtype=np.float64)
    beta = np.zeros(c) if cfg.beta is None else np.asarray(cfg.beta, dtype=np.float64)
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ShapeError(f"gamma/beta must have shape ({c},)")

    bshape = (c,) + (1,) * (x.ndim - 1)
    xg = x.reshape(g, -1)
    mean = xg.mean(axis=1, keepdims=True)
    var = xg.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + cfg.eps)
    xhat = ((xg - mean) * inv_std).reshape(x.shape)
    y = gamma.reshape(bshape) * xhat + beta.reshape(bshape)

    def backward(dy: np.ndarray) -> dict[str, np.ndarray]:
        dy = np.asarray(dy, dtype=np.float64).reshape(x.shape)
        axes = tuple(range(1, x.ndim))
        dgamma = (dy * xhat).sum(axis=axes)
        dbeta = dy.sum(axis=axes)
        dxhat = (dy * gamma.reshape(bshape)).reshape(g, -1)
        xh = xhat.reshape(g, -1)
        dx = inv_std * (
            dxhat - dxhat.mean(axis=1, keepdims=True) - xh * (dxhat * xh).mean(axis=1, keepdims=True)
        )
        return {"x": dx.reshape(x.shape), "gamma": dgamma, "beta": dbeta}

    return y, backward


def group_stats(x: np.ndarray, groups: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group mean and (population) variance of a (C, ...) array."""
    xg = np.asarray(x, dtype=np.float64).reshape(groups, -1)
    return xg.mean(axis=1), xg.var(axis=1)
