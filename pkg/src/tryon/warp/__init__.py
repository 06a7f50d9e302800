"""Cascaded deformable-flow garment warping."""

from .deform import DeformConv2d, deformable_conv, standard_conv
from .flow import (compose_flow, fuse_features, local_correlation, upsample_flow,
                   warp_image)
from .losses import WarpLoss, warp_training_loss
from .network import (CascadeOutput, FeaturePyramid, FlowHead, PyramidExtractor,
                      WarpNetConfig, WarpNetwork, extract_pyramid, one_hot_parse,
                      predict_flow_residual, run_cascade)

__all__ = [
    "CascadeOutput", "DeformConv2d", "FeaturePyramid", "FlowHead", "PyramidExtractor",
    "WarpLoss", "WarpNetConfig", "WarpNetwork", "compose_flow", "deformable_conv",
    "extract_pyramid", "fuse_features", "local_correlation", "one_hot_parse",
    "predict_flow_residual", "run_cascade", "standard_conv", "upsample_flow",
    "warp_image", "warp_training_loss",
]
