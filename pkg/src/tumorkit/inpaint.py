"""Inpainting masks and masked image-quality metrics (MSE, PSNR, SSIM)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ConfigError, EmptyMaskError, InfeasibleError, ShapeError
from .morphology import StructuringElement, dilate
from .volume import BinaryMask, LabelVolume, Volume3, require_valid_labels


def merge_and_dilate_roi(labels: LabelVolume, radius: int = 3) -> BinaryMask:
    """Union of all tumor labels, grown by a ball of ``radius`` voxels."""
    require_valid_labels(labels)
    roi = BinaryMask(labels.data > 0, labels.spacing)
    return dilate(roi, StructuringElement("ball", radius))


@dataclass(frozen=True)
class SurrogateConfig:
    count: int = 3
    radius_range: tuple[int, int] = (3, 8)
    max_tries: int = 100

    def __post_init__(self):
        lo, hi = self.radius_range
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if lo < 0 or hi < lo:
            raise ConfigError(f"invalid radius_range {self.radius_range}")
        if self.max_tries < 1:
            raise ConfigError("max_tries must be >= 1")


def _paint_ball(out: np.ndarray, center, r: int) -> None:
    lo = [max(c - r, 0) for c in center]
    hi = [min(c + r + 1, n) for c, n in zip(center, out.shape)]
    grids = np.ogrid[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]]
    d2 = sum((g - c) ** 2 for g, c in zip(grids, center))
    out[lo[0]:hi[0], lo[1]:hi[1], lo[2]:hi[2]] |= d2 <= r * r


def gen_surrogate_mask(
    brain: BinaryMask,
    tumor_roi: BinaryMask,
    seed: int,
    cfg: SurrogateConfig = SurrogateConfig(),
) -> BinaryMask:
    """Random union of balls placed in healthy brain tissue.

    Centers are drawn from ``brain & ~tumor_roi``; the result is clipped to
    the brain and never touches ``tumor_roi``.  Deterministic in ``seed``.
    """
    brain.require_same_grid(tumor_roi)
    healthy = brain.data & ~tumor_roi.data
    candidates = np.flatnonzero(healthy)
    if len(candidates) == 0:
        raise InfeasibleError("no healthy brain voxels outside the tumor ROI")

    rng = np.random.default_rng(seed)
    lo, hi = cfg.radius_range
    for _ in range(cfg.max_tries):
        out = np.zeros(brain.dims, dtype=bool)
        centers = rng.choice(candidates, size=cfg.count, replace=True)
        radii = rng.integers(lo, hi, endpoint=True, size=cfg.count)
        for flat, r in zip(centers, radii):
            _paint_ball(out, np.unravel_index(flat, brain.dims), int(r))
        out &= healthy
        if out.any():
            return BinaryMask(out, brain.spacing)
    raise InfeasibleError(f"no nonempty surrogate mask after {cfg.max_tries} tries")


def _masked_pair(pred: Volume3, ref: Volume3, mask: BinaryMask) -> None:
    if not (pred.dims == ref.dims == mask.dims):
        raise ShapeError(f"dims differ: {pred.dims}, {ref.dims}, {mask.dims}")
    if not mask.data.any():
        raise EmptyMaskError("metric mask is empty")


def masked_mse(pred: Volume3, ref: Volume3, mask: BinaryMask) -> float:
    _masked_pair(pred, ref, mask)
    m = mask.data
    d = pred.data[m].astype(np.float64) - ref.data[m].astype(np.float64)
    return float(np.mean(d * d))


def psnr_from_mse(mse: float, peak: float = 1.0) -> float:
    if peak <= 0:
        raise ConfigError(f"peak must be positive, got {peak}")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def masked_psnr(pred: Volume3, ref: Volume3, mask: BinaryMask, peak: float = 1.0) -> float:
    """PSNR in dB over the mask; ``inf`` when the masked voxels agree exactly."""
    return psnr_from_mse(masked_mse(pred, ref, mask), peak)


@dataclass(frozen=True)
class SsimConfig:
    window: int = 7
    k1: float = 0.01
    k2: float = 0.03
    data_range: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.window % 2 == 0:
            raise ConfigError(f"SSIM window must be odd and positive, got {self.window}")
        if min(self.k1, self.k2, self.data_range) <= 0:
            raise ConfigError("k1, k2 and data_range must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.data_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.data_range) ** 2


def ssim_map(pred: Volume3, ref: Volume3, mask: BinaryMask, cfg: SsimConfig = SsimConfig()) -> np.ndarray:
    """Local SSIM at every mask voxel (NaN elsewhere).

    Window statistics use a uniform cube of edge ``cfg.window`` restricted
    to voxels that are both on the grid and inside the mask, so voxels
    outside the mask have no influence.
    """
    _masked_pair(pred, ref, mask)
    m = mask.data
    x = np.where(m, pred.data.astype(np.float64), 0.0)
    y = np.where(m, ref.data.astype(np.float64), 0.0)

    def box(a):
        return ndimage.uniform_filter(a, size=cfg.window, mode="constant", cval=0.0)

    w = box(m.astype(np.float64))[m]
    mx = box(x)[m] / w
    my = box(y)[m] / w
    sxx = box(x * x)[m] / w - mx * mx
    syy = box(y * y)[m] / w - my * my
    sxy = box(x * y)[m] / w - mx * my

    c1, c2 = cfg.c1, cfg.c2
    local = ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2))
    out = np.full(mask.dims, np.nan)
    out[m] = local
    return out


def masked_ssim(pred: Volume3, ref: Volume3, mask: BinaryMask, cfg: SsimConfig = SsimConfig()) -> float:
    """Mean local SSIM over the mask voxels."""
    return float(np.mean(ssim_map(pred, ref, mask, cfg)[mask.data]))
