"""Multi-head self-attention along a single spatial axis of a volume.

Every 1-D line parallel to the attended axis is an independent sequence, so
the cost is (number of lines) x (per-line cost): linear in the extent of
the non-attended axes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from ..errors import ConfigError, ShapeError

AXES = {"depth": 1, "height": 2, "width": 3}


@dataclass
class OpCounter:
    """Tally of scalar multiplications performed by a forward pass."""

    multiplies: int = 0


@dataclass
class AxialAttentionConfig:
    """Projection weights for one axial attention block.

    ``wq``, ``wk``, ``wv`` have shape (heads*head_dim, C); ``wo`` has shape
    (C, heads*head_dim).  ``pos`` is an optional (extent, C) table added to
    the query/key inputs at each coordinate of the attended axis.
    """

    axis: Union[str, int]
    heads: int
    head_dim: int
    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    pos: Optional[np.ndarray] = None

    def __post_init__(self):
        if isinstance(self.axis, str):
            if self.axis not in AXES:
                raise ConfigError(f"axis must be one of {sorted(AXES)}, got {self.axis!r}")
        elif self.axis not in (1, 2, 3):
            raise ConfigError(f"integer axis must be 1, 2 or 3, got {self.axis}")
        if self.heads < 1 or self.head_dim < 1:
            raise ConfigError("heads and head_dim must be positive")
        inner = self.heads * self.head_dim
        for name in ("wq", "wk", "wv", "wo"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        c = self.wq.shape[1] if self.wq.ndim == 2 else -1
        for name in ("wq", "wk", "wv"):
            if getattr(self, name).shape != (inner, c):
                raise ShapeError(f"{name} must be ({inner}, C), got {getattr(self, name).shape}")
        if self.wo.shape != (c, inner):
            raise ShapeError(f"wo must be ({c}, {inner}), got {self.wo.shape}")
        if self.pos is not None:
            self.pos = np.asarray(self.pos, dtype=np.float64)
            if self.pos.ndim != 2 or self.pos.shape[1] != c:
                raise ShapeError(f"pos must be (extent, {c}), got {self.pos.shape}")

    @property
    def axis_index(self) -> int:
        return AXES[self.axis] if isinstance(self.axis, str) else int(self.axis)

    @property
    def channels(self) -> int:
        return self.wq.shape[1]

    @classmethod
    def random(
        cls,
        channels: int,
        axis: Union[str, int] = "width",
        heads: int = 2,
        head_dim: Optional[int] = None,
        extent: Optional[int] = None,
        rng: Optional[np.random.Generator] = None,
        scale: float = 0.5,
    ) -> "AxialAttentionConfig":
        """Gaussian weights; a position table is drawn when ``extent`` is given."""
        rng = rng or np.random.default_rng(0)
        head_dim = head_dim or max(channels // heads, 1)
        inner = heads * head_dim

        def w(*shape):
            return rng.normal(0.0, scale / np.sqrt(shape[-1]), size=shape)

        pos = rng.normal(0.0, scale, size=(extent, channels)) if extent else None
        return cls(axis, heads, head_dim, w(inner, channels), w(inner, channels),
                   w(inner, channels), w(channels, inner), pos)


def _mm(a: np.ndarray, b: np.ndarray, counter: Optional[OpCounter]) -> np.ndarray:
    out = a @ b
    if counter is not None:
        counter.multiplies += out.size * a.shape[-1]
    return out


def _softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def axial_attention(x: np.ndarray, cfg: AxialAttentionConfig, counter: Optional[OpCounter] = None):
    """Attend along ``cfg.axis`` of ``x`` (C, D, H, W).

    Returns ``(y, backward)``; ``backward(dy)`` gives gradients for ``x``,
    ``wq``, ``wk``, ``wv``, ``wo`` and (when present) ``pos``.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(f"axial_attention expects (C, D, H, W), got {x.shape}")
    c = x.shape[0]
    if c != cfg.channels:
        raise ShapeError(f"weights expect {cfg.channels} channels, input has {c}")
    ax = cfg.axis_index
    length = x.shape[ax]
    if cfg.pos is not None and cfg.pos.shape[0] != length:
        raise ShapeError(f"pos table has {cfg.pos.shape[0]} rows, axis extent is {length}")
    h, dh = cfg.heads, cfg.head_dim

    # (C, D, H, W) -> (lines, L, C)
    moved = np.moveaxis(x, (0, ax), (-1, -2))
    line_shape = moved.shape
    xs = moved.reshape(-1, length, c)
    n = xs.shape[0]
    xqk = xs + cfg.pos if cfg.pos is not None else xs

    def split(t):  # (N, L, h*dh) -> (N, h, L, dh)
        return t.reshape(n, length, h, dh).transpose(0, 2, 1, 3)

    def merge(t):  # (N, h, L, dh) -> (N, L, h*dh)
        return t.transpose(0, 2, 1, 3).reshape(n, length, h * dh)

    q = split(_mm(xqk, cfg.wq.T, counter))
    k = split(_mm(xqk, cfg.wk.T, counter))
    v = split(_mm(xs, cfg.wv.T, counter))
    scale = 1.0 / np.sqrt(dh)
    s = _mm(q, k.transpose(0, 1, 3, 2), counter) * scale
    if counter is not None:
        counter.multiplies += s.size
    a = _softmax(s)
    o = merge(_mm(a, v, counter))
    ys = _mm(o, cfg.wo.T, counter)
    y = np.moveaxis(ys.reshape(line_shape), (-1, -2), (0, ax))

    def backward(dy: np.ndarray) -> dict[str, np.ndarray]:
        dy = np.asarray(dy, dtype=np.float64).reshape(x.shape)
        dys = np.moveaxis(dy, (0, ax), (-1, -2)).reshape(n, length, c)
        grads = {"wo": dys.reshape(-1, c).T @ o.reshape(-1, h * dh)}
        do = split(dys @ cfg.wo)
        da = do @ v.transpose(0, 1, 3, 2)
        dv = a.transpose(0, 1, 3, 2) @ do
        ds = a * (da - (da * a).sum(axis=-1, keepdims=True)) * scale
        dq = merge(ds @ k)
        dk = merge(ds.transpose(0, 1, 3, 2) @ q)
        dv = merge(dv)
        grads["wq"] = dq.reshape(-1, h * dh).T @ xqk.reshape(-1, c)
        grads["wk"] = dk.reshape(-1, h * dh).T @ xqk.reshape(-1, c)
        grads["wv"] = dv.reshape(-1, h * dh).T @ xs.reshape(-1, c)
        dxqk = dq @ cfg.wq + dk @ cfg.wk
        dxs = dxqk + dv @ cfg.wv
        if cfg.pos is not None:
            grads["pos"] = dxqk.sum(axis=0)
        grads["x"] = np.moveaxis(dxs.reshape(line_shape), (-1, -2), (0, ax))
        return grads

    return y, backward


def axial_attention_3d(x: np.ndarray, blocks: list[AxialAttentionConfig], counter: Optional[OpCounter] = None):
    """Apply attention blocks one axis after another, each with a residual add."""
    x = np.asarray(x, dtype=np.float64)
    for cfg in blocks:
        y, _ = axial_attention(x, cfg, counter)
        x = x + y
    return x
