"""Label maps <-> nested region channels, ensemble fusion and ET clean-up.

Regions are nested: WT = {NC, ED, ET}, TC = {NC, ET}, ET = {ET}.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ArityError, ConfigError, ShapeError
from .morphology import connected_components
from .volume import BinaryMask, LabelVolume, ProbabilityStack, require_valid_labels

NC, ED, ET = 1, 2, 3

REGION_LABELS = {
    "WT": (NC, ED, ET),
    "TC": (NC, ET),
    "ET": (ET,),
}


@dataclass(frozen=True)
class DecodeConfig:
    tau_wt: float = 0.5
    tau_tc: float = 0.5
    tau_et: float = 0.5

    def __post_init__(self):
        for name, tau in asdict(self).items():
            if not 0.0 < tau < 1.0:
                raise ConfigError(f"{name} must lie strictly inside (0, 1), got {tau}")


@dataclass(frozen=True)
class PostprocessConfig:
    """Enhancing-tumor clean-up thresholds (voxel counts).

    The defaults are placeholders; callers are expected to tune them.
    """

    et_total_min: int = 200
    et_component_min: int = 10
    relabel_target: int = NC
    connectivity: int = 26

    def __post_init__(self):
        if self.et_total_min < 0 or self.et_component_min < 0:
            raise ConfigError("post-processing voxel counts must be >= 0")
        if self.relabel_target not in (0, 1, 2):
            raise ConfigError(f"relabel_target must be 0, 1 or 2, got {self.relabel_target}")
        if self.connectivity not in (6, 18, 26):
            raise ConfigError(f"connectivity must be 6, 18 or 26, got {self.connectivity}")


def region_mask(labels: LabelVolume, region: str) -> BinaryMask:
    return BinaryMask(np.isin(labels.data, REGION_LABELS[region]), labels.spacing)


def labels_to_regions(v: LabelVolume) -> ProbabilityStack:
    """Binary (0/1) region channels for a label map."""
    require_valid_labels(v)
    chans = [np.isin(v.data, REGION_LABELS[r]).astype(np.float32) for r in ("WT", "TC", "ET")]
    return ProbabilityStack(*chans, spacing=v.spacing)


def regions_to_labels(p: ProbabilityStack, cfg: DecodeConfig = DecodeConfig()) -> LabelVolume:
    """Hierarchical decode: ET first, then TC (as NC), then WT (as ED)."""
    p.check_range()
    out = np.zeros(p.dims, dtype=np.uint8)
    wt = p.wt >= cfg.tau_wt
    tc = p.tc >= cfg.tau_tc
    et = p.et >= cfg.tau_et
    out[wt] = ED
    out[tc] = NC
    out[et] = ET
    return LabelVolume(out, p.spacing)


def fuse_ensemble(
    stacks: Sequence[ProbabilityStack],
    weights: Optional[Sequence[float]] = None,
) -> ProbabilityStack:
    """Per-voxel weighted mean of the member probabilities."""
    if not stacks:
        raise ArityError("fuse_ensemble needs at least one stack")
    first = stacks[0]
    for s in stacks[1:]:
        if s.dims != first.dims:
            raise ShapeError(f"stack dims differ: {first.dims} vs {s.dims}")
    if weights is None:
        w = np.ones(len(stacks))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(stacks),):
            raise ArityError(f"got {len(w)} weights for {len(stacks)} stacks")
        if np.any(w < 0) or not np.isfinite(w).all() or w.sum() <= 0:
            raise ConfigError("weights must be finite, non-negative and sum to > 0")
    for s in stacks:
        s.check_range()

    total = w.sum()
    fused = []
    for region in ("WT", "TC", "ET"):
        acc = np.zeros(first.dims, dtype=np.float64)
        for wi, s in zip(w, stacks):
            if wi:
                acc += wi * s.channel(region)
        dtype = np.result_type(*(s.channel(region).dtype for s in stacks))
        fused.append(np.clip(acc / total, 0.0, 1.0).astype(dtype))
    return ProbabilityStack(*fused, spacing=first.spacing)


def postprocess_enhancing(labels: LabelVolume, cfg: PostprocessConfig = PostprocessConfig()) -> LabelVolume:
    """Drop small ET components, then drop all ET if too little survives.

    Removed ET voxels become ``cfg.relabel_target``; other labels are never
    touched.  Filtering components before the total-volume check makes the
    operation idempotent.
    """
    require_valid_labels(labels)
    et = labels.data == ET
    if not et.any():
        return labels
    out = labels.data.copy()
    comps = connected_components(BinaryMask(et, labels.spacing), cfg.connectivity)
    flat = out.reshape(-1)
    kept = 0
    for c in comps:
        if c.volume_voxels < cfg.et_component_min:
            flat[c.voxels] = cfg.relabel_target
        else:
            kept += c.volume_voxels
    if kept < cfg.et_total_min:
        out[out == ET] = cfg.relabel_target
    return LabelVolume(out, labels.spacing)
