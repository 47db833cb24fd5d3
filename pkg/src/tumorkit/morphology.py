"""Binary morphology on 3-D masks: components, dilation, surfaces, distances."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ConfigError, EmptyMaskError
from .volume import BinaryMask, Volume3

# neighborhood size -> scipy connectivity rank
_RANK = {6: 1, 18: 2, 26: 3}

_FACE_OFFSETS = [
    (-1, 0, 0), (1, 0, 0),
    (0, -1, 0), (0, 1, 0),
    (0, 0, -1), (0, 0, 1),
]


def neighborhood(connectivity: int) -> np.ndarray:
    """3x3x3 boolean structuring element for 6-, 18- or 26-connectivity."""
    try:
        rank = _RANK[connectivity]
    except KeyError:
        raise ConfigError(f"connectivity must be one of 6, 18, 26; got {connectivity}") from None
    return ndimage.generate_binary_structure(3, rank)


@dataclass(frozen=True)
class Lesion:
    id: int
    voxels: np.ndarray  # flat indices, ascending
    volume_voxels: int
    volume_mm3: float


@dataclass(frozen=True)
class LesionSet:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    components: list[Lesion] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def mask(self, lesion: Lesion) -> np.ndarray:
        out = np.zeros(int(np.prod(self.dims)), dtype=bool)
        out[lesion.voxels] = True
        return out.reshape(self.dims)

    def label_map(self) -> np.ndarray:
        """int32 array with each voxel set to its component id (0 = none)."""
        out = np.zeros(int(np.prod(self.dims)), dtype=np.int32)
        for c in self.components:
            out[c.voxels] = c.id
        return out.reshape(self.dims)


def connected_components(mask: BinaryMask, connectivity: int = 26) -> LesionSet:
    """Split the true voxels of ``mask`` into maximal connected components.

    Ids are assigned 1.. by descending volume; equal volumes are ordered by
    their smallest flat index.
    """
    labelled, n = ndimage.label(mask.data, structure=neighborhood(connectivity))
    if n == 0:
        return LesionSet(mask.dims, mask.spacing, [])

    flat = labelled.ravel()
    idx = np.flatnonzero(flat)
    lab = flat[idx]
    # stable sort keeps voxel indices ascending inside each component
    order = np.argsort(lab, kind="stable")
    idx, lab = idx[order], lab[order]
    starts = np.searchsorted(lab, np.arange(1, n + 1))
    groups = np.split(idx, starts[1:])

    groups.sort(key=lambda g: (-len(g), int(g[0])))
    vox_mm3 = mask.voxel_volume
    comps = [
        Lesion(id=i, voxels=g, volume_voxels=len(g), volume_mm3=len(g) * vox_mm3)
        for i, g in enumerate(groups, start=1)
    ]
    return LesionSet(mask.dims, mask.spacing, comps)


@dataclass(frozen=True)
class StructuringElement:
    kind: str = "ball"
    radius: int = 1

    def __post_init__(self):
        if self.kind not in ("ball", "cube"):
            raise ConfigError(f"element kind must be 'ball' or 'cube', got {self.kind!r}")
        if int(self.radius) != self.radius or self.radius < 0:
            raise ConfigError(f"element radius must be a non-negative integer, got {self.radius}")

    def footprint(self) -> np.ndarray:
        r = int(self.radius)
        if self.kind == "cube":
            return np.ones((2 * r + 1,) * 3, dtype=bool)
        g = np.arange(-r, r + 1)
        dz, dy, dx = np.meshgrid(g, g, g, indexing="ij")
        return dz * dz + dy * dy + dx * dx <= r * r


def dilate(mask: BinaryMask, element: StructuringElement = StructuringElement()) -> BinaryMask:
    if element.radius == 0 or not mask.data.any():
        return mask
    # footprint is point-symmetric, so reflection inside scipy is harmless
    out = ndimage.binary_dilation(mask.data, structure=element.footprint(), border_value=0)
    return mask.with_data(out)


def surface_mask(data: np.ndarray) -> np.ndarray:
    """True voxels with at least one 6-neighbor that is false or off-grid."""
    padded = np.pad(data, 1, constant_values=False)
    interior = data.copy()
    for offset in _FACE_OFFSETS:
        sl = tuple(slice(1 + o, padded.shape[a] - 1 + o) for a, o in enumerate(offset))
        interior &= padded[sl]
    return data & ~interior


def surface_voxels(mask: BinaryMask) -> np.ndarray:
    """Flat indices (ascending) of the 6-connected surface of ``mask``."""
    return np.flatnonzero(surface_mask(mask.data))


def edt(data: np.ndarray, spacing) -> np.ndarray:
    """float64 distance (mm) from every voxel to the nearest true voxel."""
    if not data.any():
        raise EmptyMaskError("distance transform of an empty mask")
    return ndimage.distance_transform_edt(~data, sampling=spacing)


def distance_transform(mask: BinaryMask) -> Volume3:
    """Exact Euclidean distance map to the true voxels of ``mask``.

    The result is float64 and zero on true voxels.
    """
    return Volume3(edt(mask.data, mask.spacing), mask.spacing)
