"""Volumetric brain-tumor evaluation toolkit.

Segmentation metrics (legacy and lesion-wise Dice/HD95), ensemble fusion and
enhancing-tumor post-processing, inpainting quality metrics with rank-sum
aggregation, and gradient-checked reference kernels.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArityError,
    ConfigError,
    DegenerateError,
    EmptyMaskError,
    FormatError,
    IncompleteError,
    InfeasibleError,
    IoError,
    LabelError,
    RangeError,
    ShapeError,
    TumorKitError,
    UnsupportedError,
)
from .inpaint import (  # noqa: E402
    SsimConfig,
    SurrogateConfig,
    gen_surrogate_mask,
    masked_mse,
    masked_psnr,
    masked_ssim,
    merge_and_dilate_roi,
)
from .io import load_volume, save_volume  # noqa: E402
from .morphology import (  # noqa: E402
    LesionSet,
    StructuringElement,
    connected_components,
    dilate,
    distance_transform,
    surface_voxels,
)
from .regions import (  # noqa: E402
    DecodeConfig,
    PostprocessConfig,
    fuse_ensemble,
    labels_to_regions,
    postprocess_enhancing,
    regions_to_labels,
)
from .segmetrics import (  # noqa: E402
    LesionWiseConfig,
    MetricsReport,
    RegionMetrics,
    dice,
    hd95,
    legacy_case_metrics,
    lesionwise_case_metrics,
)
from .stats import CaseScores, TTestResult, paired_ttest, rank_sum  # noqa: E402
from .volume import BinaryMask, LabelVolume, ProbabilityStack, Volume3, validate_label_volume  # noqa: E402
