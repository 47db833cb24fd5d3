"""3x3x3 stride-2 convolution (cross-correlation) with zero padding 1."""

from __future__ import annotations

import itertools

import numpy as np

from ..errors import ShapeError

_TAPS = list(itertools.product(range(3), repeat=3))


def conv3_downsample(x: np.ndarray, kernel: np.ndarray):
    """Downsample ``x`` (Cin, D, H, W) with ``kernel`` (Cout, Cin, 3, 3, 3).

    Output shape is (Cout, ceil(D/2), ceil(H/2), ceil(W/2)).  Returns
    ``(y, backward)`` where ``backward(dy)`` gives gradients for ``x`` and
    ``kernel``.
    """
    x = np.asarray(x, dtype=np.float64)
    k = np.asarray(kernel, dtype=np.float64)
    if x.ndim != 4:
        raise ShapeError(f"input must be (C, D, H, W), got {x.shape}")
    if k.ndim != 5 or k.shape[2:] != (3, 3, 3):
        raise ShapeError(f"kernel must be (Cout, Cin, 3, 3, 3), got {k.shape}")
    if k.shape[1] != x.shape[0]:
        raise ShapeError(f"kernel expects {k.shape[1]} input channels, input has {x.shape[0]}")

    out_sp = tuple((n + 1) // 2 for n in x.shape[1:])
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (1, 1)))

    def window(a, kd, kh, kw):
        do, ho, wo = out_sp
        return a[:, kd : kd + 2 * do : 2, kh : kh + 2 * ho : 2, kw : kw + 2 * wo : 2]

    y = np.zeros((k.shape[0],) + out_sp)
    for kd, kh, kw in _TAPS:
        y += np.einsum("oc,cdhw->odhw", k[:, :, kd, kh, kw], window(xp, kd, kh, kw))

    def backward(dy: np.ndarray) -> dict[str, np.ndarray]:
        dy = np.asarray(dy, dtype=np.float64).reshape(y.shape)
        dxp = np.zeros_like(xp)
        dk = np.zeros_like(k)
        for kd, kh, kw in _TAPS:
            dk[:, :, kd, kh, kw] = np.einsum("odhw,cdhw->oc", dy, window(xp, kd, kh, kw))
            window(dxp, kd, kh, kw)[...] += np.einsum("oc,odhw->cdhw", k[:, :, kd, kh, kw], dy)
        return {"x": dxp[:, 1:-1, 1:-1, 1:-1].copy(), "kernel": dk}

    return y, backward
