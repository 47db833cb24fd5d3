"""Volumetric data model.

All grids are stored as numpy arrays indexed ``[z, y, x]`` (depth, height,
width) in C order, so the flat index of voxel ``(z, y, x)`` is
``(z * H + y) * W + x``.  Arrays are made read-only on construction; the
containers are treated as immutable values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import LabelError, ShapeError

LABEL_NAMES = {0: "background", 1: "NC", 2: "ED", 3: "ET"}
VALID_LABELS = frozenset(LABEL_NAMES)
REGIONS = ("WT", "TC", "ET")

Spacing = tuple[float, float, float]


def _as_spacing(spacing) -> Spacing:
    sp = tuple(float(s) for s in spacing)
    if len(sp) != 3:
        raise ShapeError(f"spacing needs 3 components, got {len(sp)}")
    if not all(np.isfinite(s) and s > 0 for s in sp):
        raise ShapeError(f"spacing components must be positive, got {sp}")
    return sp  # type: ignore[return-value]


def _frozen(arr: np.ndarray) -> np.ndarray:
    if arr.ndim != 3:
        raise ShapeError(f"expected a 3-D array, got shape {arr.shape}")
    if min(arr.shape) < 1:
        raise ShapeError(f"dims must be positive, got {arr.shape}")
    if arr.flags.writeable or not arr.flags.c_contiguous:
        # private copy so later mutation of the caller's array cannot leak in
        arr = np.array(arr, order="C")
        arr.flags.writeable = False
    return arr


class _Grid:
    data: np.ndarray
    spacing: Spacing

    @property
    def dims(self) -> tuple[int, int, int]:
        return tuple(int(n) for n in self.data.shape)  # type: ignore[return-value]

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def voxel_volume(self) -> float:
        """Volume of one voxel in mm^3."""
        return float(np.prod(self.spacing))

    def flat_index(self, z: int, y: int, x: int) -> int:
        _, h, w = self.dims
        return (z * h + y) * w + x

    def coords(self, index: int) -> tuple[int, int, int]:
        return tuple(int(c) for c in np.unravel_index(index, self.dims))  # type: ignore[return-value]

    def same_grid(self, other: "_Grid") -> bool:
        return self.dims == other.dims and self.spacing == other.spacing

    def require_same_grid(self, other: "_Grid", *, spacing: bool = True) -> None:
        if self.dims != other.dims:
            raise ShapeError(f"dims differ: {self.dims} vs {other.dims}")
        if spacing and not np.allclose(self.spacing, other.spacing, rtol=1e-6, atol=0):
            raise ShapeError(f"spacing differs: {self.spacing} vs {other.spacing}")


@dataclass(frozen=True, eq=False)
class Volume3(_Grid):
    """Dense scalar grid (images, probabilities, distances).

    Images loaded from disk are float32; computed quantities such as
    distance maps are kept in float64.
    """

    data: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if not np.all(np.isfinite(arr)):
            raise ValueError("volume contains NaN or Inf")
        object.__setattr__(self, "data", _frozen(arr))
        object.__setattr__(self, "spacing", _as_spacing(self.spacing))


@dataclass(frozen=True, eq=False)
class LabelVolume(_Grid):
    """Tumor label map: 0 background, 1 NC, 2 ED, 3 ET."""

    data: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype != np.uint8:
            if arr.size and (arr.min() < 0 or arr.max() > 255):
                raise LabelError("label values must fit in uint8")
            arr = arr.astype(np.uint8)
        object.__setattr__(self, "data", _frozen(arr))
        object.__setattr__(self, "spacing", _as_spacing(self.spacing))


@dataclass(frozen=True, eq=False)
class BinaryMask(_Grid):
    data: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)

    def __post_init__(self):
        arr = np.asarray(self.data).astype(bool, copy=False)
        object.__setattr__(self, "data", _frozen(arr))
        object.__setattr__(self, "spacing", _as_spacing(self.spacing))

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.data))

    def indices(self) -> np.ndarray:
        """Flat indices of true voxels, ascending."""
        return np.flatnonzero(self.data)

    def with_data(self, data: np.ndarray) -> "BinaryMask":
        return BinaryMask(data, self.spacing)


@dataclass(frozen=True, eq=False)
class ProbabilityStack(_Grid):
    """Three aligned channels for the nested regions WT, TC and ET.

    Construction only checks alignment; use :meth:`check_range` (called by
    the decoding and fusion routines) to enforce the [0, 1] invariant.
    """

    wt: np.ndarray
    tc: np.ndarray
    et: np.ndarray
    spacing: Spacing = (1.0, 1.0, 1.0)

    def __post_init__(self):
        chans = []
        for name in ("wt", "tc", "et"):
            arr = np.asarray(getattr(self, name))
            if arr.dtype not in (np.float32, np.float64):
                arr = arr.astype(np.float32)
            chans.append(_frozen(arr))
        if not (chans[0].shape == chans[1].shape == chans[2].shape):
            raise ShapeError(f"channel shapes differ: {[c.shape for c in chans]}")
        for name, arr in zip(("wt", "tc", "et"), chans):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "spacing", _as_spacing(self.spacing))

    @property
    def data(self) -> np.ndarray:  # type: ignore[override]
        return self.wt

    def channel(self, region: str) -> np.ndarray:
        return {"WT": self.wt, "TC": self.tc, "ET": self.et}[region]

    def channels(self) -> Iterator[tuple[str, np.ndarray]]:
        yield "WT", self.wt
        yield "TC", self.tc
        yield "ET", self.et

    def check_range(self) -> None:
        from .errors import RangeError

        for name, arr in self.channels():
            # NaN fails both comparisons
            if not np.all((arr >= 0) & (arr <= 1)):
                raise RangeError(f"{name} channel has values outside [0, 1]")


def validate_label_volume(v: LabelVolume, limit: int = 100) -> list[tuple[int, int]]:
    """Return ``(flat_index, value)`` for voxels outside {0,1,2,3}.

    An empty list means the volume is valid.  At most ``limit`` entries are
    reported.
    """
    flat = v.data.ravel()
    bad = np.flatnonzero(flat > 3)[:limit]
    return [(int(i), int(flat[i])) for i in bad]


def require_valid_labels(v: LabelVolume) -> None:
    bad = validate_label_volume(v, limit=5)
    if bad:
        raise LabelError(f"invalid labels (index, value): {bad}")
