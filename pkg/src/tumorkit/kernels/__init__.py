"""float64 reference kernels for the network building blocks."""

from .attention import AxialAttentionConfig, OpCounter, axial_attention, axial_attention_3d
from .conv import conv3_downsample
from .gradcheck import GradCheckReport, grad_check
from .loss import sigmoid, sigmoid_bce_with_logits
from .norm import GroupNormConfig, group_norm, group_stats
from .tokens import patchify, skip_fuse, unpatchify

__all__ = [
    "AxialAttentionConfig",
    "GradCheckReport",
    "GroupNormConfig",
    "OpCounter",
    "axial_attention",
    "axial_attention_3d",
    "conv3_downsample",
    "grad_check",
    "group_norm",
    "group_stats",
    "patchify",
    "sigmoid",
    "sigmoid_bce_with_logits",
    "skip_fuse",
    "unpatchify",
]
