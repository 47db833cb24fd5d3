"""Legacy and lesion-wise Dice / HD95 for the WT, TC and ET regions."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, EmptyMaskError, ShapeError
from .morphology import StructuringElement, connected_components, dilate, edt, surface_mask
from .regions import region_mask
from .volume import REGIONS, BinaryMask, LabelVolume

# Regions in report column order.
REPORT_REGIONS = ("ET", "TC", "WT")

UNIT_SPACING = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class LesionWiseConfig:
    dilation_radius: int = 3
    min_lesion_volume: int = 50
    penalty_hd95: float = 374.0
    penalty_dsc: float = 0.0
    connectivity: int = 26
    unit_voxels: bool = False

    def __post_init__(self):
        if self.penalty_hd95 < 0 or self.penalty_dsc < 0:
            raise ConfigError("penalties must be >= 0")
        if self.min_lesion_volume < 0:
            raise ConfigError("min_lesion_volume must be >= 0")
        if self.dilation_radius < 0:
            raise ConfigError("dilation_radius must be >= 0")
        if self.connectivity not in (6, 18, 26):
            raise ConfigError(f"connectivity must be 6, 18 or 26, got {self.connectivity}")


@dataclass(frozen=True)
class RegionMetrics:
    region: str
    dsc: float
    hd95: float


@dataclass(frozen=True)
class LesionEntry:
    """One term of a lesion-wise region mean."""

    kind: str  # "tp" (matched), "fn" (missed GT lesion) or "fp"
    dsc: float
    hd95: float
    gt_volume: int = 0
    pred_volume: int = 0


@dataclass
class MetricsReport:
    case_id: str
    mode: str
    per_region: dict[str, RegionMetrics]
    config: dict = field(default_factory=dict)
    entries: dict[str, list[LesionEntry]] = field(default_factory=dict)

    @property
    def avg(self) -> RegionMetrics:
        vals = [self.per_region[r] for r in REPORT_REGIONS]
        return RegionMetrics(
            "Avg",
            float(np.mean([m.dsc for m in vals])),
            float(np.mean([m.hd95 for m in vals])),
        )

    def to_dict(self, percent: bool = False) -> dict:
        scale = 100.0 if percent else 1.0
        regions = {
            r: {"dsc": self.per_region[r].dsc * scale, "hd95": self.per_region[r].hd95}
            for r in REPORT_REGIONS
        }
        avg = self.avg
        return {
            "case_id": self.case_id,
            "mode": self.mode,
            "regions": regions,
            "avg": {"dsc": avg.dsc * scale, "hd95": avg.hd95},
        }

    def csv_rows(self, percent: bool = False) -> list[list]:
        scale = 100.0 if percent else 1.0
        rows = [
            [self.case_id, self.mode, r, self.per_region[r].dsc * scale, self.per_region[r].hd95]
            for r in REPORT_REGIONS
        ]
        avg = self.avg
        rows.append([self.case_id, self.mode, "Avg", avg.dsc * scale, avg.hd95])
        return rows


def _check_pair(pred: BinaryMask, gt: BinaryMask, spacing: bool) -> None:
    if pred.dims != gt.dims:
        raise ShapeError(f"dims differ: {pred.dims} vs {gt.dims}")
    if spacing:
        pred.require_same_grid(gt)


def dice(pred: BinaryMask, gt: BinaryMask) -> float:
    """2|A∩B| / (|A|+|B|); two empty masks score 1.0."""
    _check_pair(pred, gt, spacing=False)
    return _dice(pred.data, gt.data)


def _dice(a: np.ndarray, b: np.ndarray) -> float:
    na = int(np.count_nonzero(a))
    nb = int(np.count_nonzero(b))
    if na + nb == 0:
        return 1.0
    inter = int(np.count_nonzero(a & b))
    return 2.0 * inter / (na + nb)


def percentile_index(n: int, q: int = 95) -> int:
    """0-based nearest-rank index ceil(q/100 * n) - 1, in integer arithmetic."""
    return max((q * n + 99) // 100 - 1, 0)


def surface_distances(a: np.ndarray, b: np.ndarray, spacing) -> np.ndarray:
    """Pooled surface distances A->B and B->A (mm), unsorted."""
    if not a.any() or not b.any():
        raise EmptyMaskError("surface distance needs two nonempty masks")
    sa = surface_mask(a)
    sb = surface_mask(b)
    return np.concatenate([edt(sb, spacing)[sa], edt(sa, spacing)[sb]])


def _hd95(a: np.ndarray, b: np.ndarray, spacing) -> float:
    d = np.sort(surface_distances(a, b, spacing))
    return float(d[percentile_index(len(d))])


def hd95(pred: BinaryMask, gt: BinaryMask, unit_voxels: bool = False) -> float:
    """95th percentile (nearest rank) of pooled symmetric surface distances."""
    _check_pair(pred, gt, spacing=True)
    spacing = UNIT_SPACING if unit_voxels else gt.spacing
    return _hd95(pred.data, gt.data, spacing)


def _pair_scores(a: np.ndarray, b: np.ndarray, spacing, penalty_dsc: float, penalty_hd95: float):
    ea, eb = not a.any(), not b.any()
    if ea and eb:
        return 1.0, 0.0
    if ea or eb:
        return penalty_dsc, penalty_hd95
    return _dice(a, b), _hd95(a, b, spacing)


def _require_pair(pred: LabelVolume, gt: LabelVolume) -> None:
    if pred.dims != gt.dims:
        raise ShapeError(f"dims differ: {pred.dims} vs {gt.dims}")
    pred.require_same_grid(gt)


def legacy_case_metrics(
    pred: LabelVolume,
    gt: LabelVolume,
    cfg: Optional[LesionWiseConfig] = None,
    case_id: str = "",
) -> MetricsReport:
    """Whole-region Dice and HD95 for each of WT, TC, ET.

    Both empty scores (1.0, 0.0); exactly one empty scores (0.0, penalty).
    """
    cfg = cfg or LesionWiseConfig()
    _require_pair(pred, gt)
    spacing = UNIT_SPACING if cfg.unit_voxels else gt.spacing
    per_region = {}
    for region in REGIONS:
        a = region_mask(pred, region).data
        b = region_mask(gt, region).data
        dsc, hd = _pair_scores(a, b, spacing, 0.0, cfg.penalty_hd95)
        per_region[region] = RegionMetrics(region, dsc, hd)
    return MetricsReport(
        case_id, "legacy", per_region, config={"penalty_hd95": cfg.penalty_hd95, "unit_voxels": cfg.unit_voxels}
    )


def lesionwise_entries(pred: BinaryMask, gt: BinaryMask, cfg: LesionWiseConfig) -> list[LesionEntry]:
    """Per-lesion scores for one region.

    GT lesions are the components of the dilated GT mask, restricted back to
    the undilated GT voxels; lesions smaller than ``cfg.min_lesion_volume``
    are ignored, as are prediction components that only touch them.  Each
    remaining GT lesion is scored against the union of every prediction
    component that meets its dilated footprint.  Unmatched GT lesions and
    large enough unmatched prediction components score the penalty pair.
    """
    _check_pair(pred, gt, spacing=True)
    spacing = UNIT_SPACING if cfg.unit_voxels else gt.spacing
    shape = gt.dims

    dilated = dilate(gt, StructuringElement("ball", cfg.dilation_radius))
    gt_comps = connected_components(dilated, cfg.connectivity)
    pred_comps = connected_components(pred, cfg.connectivity)
    pred_ids = pred_comps.label_map().ravel()
    gt_flat = gt.data.ravel()

    entries: list[LesionEntry] = []
    seen_pred: set[int] = set()
    for comp in gt_comps:
        lesion_idx = comp.voxels[gt_flat[comp.voxels]]
        hits = np.unique(pred_ids[comp.voxels])
        hits = hits[hits > 0]
        seen_pred.update(int(h) for h in hits)
        if len(lesion_idx) < cfg.min_lesion_volume:
            continue

        lesion = np.zeros(gt.size, dtype=bool)
        lesion[lesion_idx] = True
        if len(hits) == 0:
            entries.append(LesionEntry("fn", cfg.penalty_dsc, cfg.penalty_hd95, len(lesion_idx), 0))
            continue
        matched = np.isin(pred_ids, hits)
        a, b = matched.reshape(shape), lesion.reshape(shape)
        entries.append(
            LesionEntry(
                "tp",
                _dice(a, b),
                _hd95(a, b, spacing),
                len(lesion_idx),
                int(np.count_nonzero(matched)),
            )
        )

    for comp in pred_comps:
        if comp.id in seen_pred or comp.volume_voxels < cfg.min_lesion_volume:
            continue
        entries.append(LesionEntry("fp", cfg.penalty_dsc, cfg.penalty_hd95, 0, comp.volume_voxels))
    return entries


def region_mean(entries: list[LesionEntry]) -> tuple[float, float]:
    if not entries:
        return 1.0, 0.0
    return (
        float(np.mean([e.dsc for e in entries])),
        float(np.mean([e.hd95 for e in entries])),
    )


def lesionwise_case_metrics(
    pred: LabelVolume,
    gt: LabelVolume,
    cfg: Optional[LesionWiseConfig] = None,
    case_id: str = "",
) -> MetricsReport:
    cfg = cfg or LesionWiseConfig()
    _require_pair(pred, gt)
    per_region = {}
    all_entries = {}
    for region in REGIONS:
        entries = lesionwise_entries(region_mask(pred, region), region_mask(gt, region), cfg)
        dsc, hd = region_mean(entries)
        per_region[region] = RegionMetrics(region, dsc, hd)
        all_entries[region] = entries
    return MetricsReport(case_id, "lesion_wise", per_region, config=asdict(cfg), entries=all_entries)
