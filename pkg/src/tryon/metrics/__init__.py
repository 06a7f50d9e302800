"""Image similarity and distribution metrics plus evaluation protocols."""

from .distribution import FeatureSet, fid, kid, mmd2_unbiased, polynomial_kernel, trace_sqrt_product
from .evaluate import (KID_TEXT_SCALE, MetricReport, UnmatchedFilesError, evaluate_pairs, format_deltas,
                       format_table, pool_reports, pooled_features, pose_robustness)
from .image import gaussian_window, lpips_distance, ssim

__all__ = [
    "FeatureSet", "KID_TEXT_SCALE", "MetricReport", "UnmatchedFilesError", "evaluate_pairs", "fid",
    "format_deltas", "format_table", "gaussian_window", "kid", "lpips_distance", "mmd2_unbiased",
    "polynomial_kernel", "pool_reports", "pooled_features", "pose_robustness", "ssim",
    "trace_sqrt_product",
]
