"""Flow-field algebra and feature operations used by the warping cascade.

Flows are (B, 2, h, w) tensors of pixel displacements: channel 0 is
horizontal, channel 1 vertical. Warping reads ``out(x) = img(x + flow(x))``.
"""

import torch
import torch.nn.functional as F

from ..errors import ArgumentError, DimensionError
from .sampling import base_grid, bilinear_sample, nearest_sample


def _check_flow(flow, like=None):
    if flow.dim() != 4 or flow.shape[1] != 2:
        raise DimensionError(f"flow must be (B, 2, h, w), got {tuple(flow.shape)}")
    if like is not None and flow.shape[-2:] != like.shape[-2:]:
        raise DimensionError(
            f"flow spatial size {tuple(flow.shape[-2:])} != {tuple(like.shape[-2:])}")


def warp_image(image, flow, mode="bilinear"):
    """Backward-warp ``image`` by ``flow`` with zero fill outside bounds."""
    _check_flow(flow, image)
    if mode not in ("bilinear", "nearest"):
        raise ArgumentError(f"unknown sampling mode {mode!r}")
    B, _, h, w = flow.shape
    xs, ys = base_grid(h, w, B, flow.dtype, flow.device)
    x = xs + flow[:, 0]
    y = ys + flow[:, 1]
    if mode == "nearest":
        return nearest_sample(image, x, y)
    return bilinear_sample(image, x, y)


def compose_flow(prev, residual):
    """Compose two displacement fields: the residual is applied first.

    ``composed(x) = residual(x) + prev(x + residual(x))``, so warping by the
    result equals warping by ``prev`` and then by ``residual``.
    """
    _check_flow(prev)
    _check_flow(residual, prev)
    return residual + warp_image(prev, residual)


def upsample_flow(flow, factor, size=None):
    """Bilinearly upsample a flow and rescale its displacements.

    With ``size=None`` the output is ``factor`` times larger and vectors
    are multiplied by ``factor``. Passing ``size`` resamples to that exact
    (h, w) and scales each component by the per-axis size ratio, which is
    what odd pyramid levels need.
    """
    if factor < 1:
        raise ArgumentError(f"upsample factor must be >= 1, got {factor}")
    _check_flow(flow)
    h, w = flow.shape[-2:]
    if size is None:
        if factor == 1:
            return flow
        size = (h * factor, w * factor)
        sx = sy = float(factor)
    else:
        sy = size[0] / h
        sx = size[1] / w
    up = F.interpolate(flow, size=tuple(size), mode="bilinear", align_corners=False)
    scale = torch.tensor([sx, sy], dtype=flow.dtype, device=flow.device).view(1, 2, 1, 1)
    return up * scale


def local_correlation(feat_a, feat_b, radius):
    """Local cost volume between two feature maps.

    Entry ``(d, x)`` is ``<feat_a(x), feat_b(x + d)> / C`` for every shift
    ``d`` with ``|d|_inf <= radius``; shifts are enumerated row-major
    (vertical outer, horizontal inner). Out-of-bounds samples contribute 0.

    Returns:
        (B, (2r+1)^2, H, W) tensor.
    """
    if feat_a.shape != feat_b.shape:
        raise DimensionError(f"feature shapes differ: {tuple(feat_a.shape)} vs {tuple(feat_b.shape)}")
    if radius < 0:
        raise ArgumentError("radius must be >= 0")
    B, C, H, W = feat_a.shape
    r = radius
    padded = F.pad(feat_b, (r, r, r, r))
    vols = []
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            shifted = padded[:, :, r + dy:r + dy + H, r + dx:r + dx + W]
            vols.append((feat_a * shifted).sum(1))
    return torch.stack(vols, dim=1) / C


def fuse_features(low, high, alpha=1.0, beta=1.0):
    """Weighted sum of a fine feature map and a projected coarse one.

    ``high`` must already be resampled and projected to ``low``'s shape.
    """
    if low.shape != high.shape:
        raise DimensionError(
            f"fusion needs equal shapes, got {tuple(low.shape)} and {tuple(high.shape)}")
    return alpha * low + beta * high
