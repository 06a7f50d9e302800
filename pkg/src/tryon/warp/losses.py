"""Training objective for the warping network."""

from dataclasses import dataclass

import torch

from ..errors import ArgumentError, DimensionError


@dataclass
class WarpLoss:
    """Total loss plus every unweighted term, for logging."""

    total: torch.Tensor
    l1: torch.Tensor
    perceptual: torch.Tensor
    smooth_first: torch.Tensor
    smooth_second: torch.Tensor

    def terms(self):
        return {k: float(getattr(self, k).detach()) for k in
                ("total", "l1", "perceptual", "smooth_first", "smooth_second")}


def normalized_flow(flow):
    """Pixel displacements -> displacements in [-1, 1] grid units of the flow's own size.

    Smoothness is measured in these units so the penalty weights do not
    depend on the resolution of each cascade level.
    """
    h, w = flow.shape[-2:]
    scale = flow.new_tensor([2.0 / max(w - 1, 1), 2.0 / max(h - 1, 1)]).view(1, 2, 1, 1)
    return flow * scale


def first_order_smoothness(flow):
    """Mean absolute first difference of a flow along x and y."""
    total = flow.new_zeros(())
    if flow.shape[-1] > 1:
        total = total + (flow[..., :, 1:] - flow[..., :, :-1]).abs().mean()
    if flow.shape[-2] > 1:
        total = total + (flow[..., 1:, :] - flow[..., :-1, :]).abs().mean()
    return total


def second_order_smoothness(flow):
    """Mean absolute second difference of a flow along x and y."""
    total = flow.new_zeros(())
    if flow.shape[-1] > 2:
        total = total + (flow[..., :, 2:] - 2 * flow[..., :, 1:-1] + flow[..., :, :-2]).abs().mean()
    if flow.shape[-2] > 2:
        total = total + (flow[..., 2:, :] - 2 * flow[..., 1:-1, :] + flow[..., :-2, :]).abs().mean()
    return total


def perceptual_distance(a, b, extractor):
    feats_a = extractor(a)
    feats_b = extractor(b)
    return sum((fa - fb).abs().mean() for fa, fb in zip(feats_a, feats_b)) / len(feats_a)


def warp_training_loss(warped, target, flows, lambda_perceptual=0.2, lambda_smooth_first=0.01,
                       lambda_smooth_second=6.0, extractor=None):
    """L1 + weighted perceptual + first/second-order flow smoothness.

    Args:
        warped: warped garment (B, 3, H, W).
        target: garment region cut from the ground-truth person, same shape.
        flows: list of pixel-unit flows from every cascade level; smoothness
            is computed on their normalised form.
        extractor: feature net for the perceptual term; the term is skipped
            (reported as 0) when ``None`` or when its weight is 0.
    """
    lambdas = (lambda_perceptual, lambda_smooth_first, lambda_smooth_second)
    if any(lam < 0 for lam in lambdas):
        raise ArgumentError(f"loss weights must be non-negative, got {lambdas}")
    if warped.shape != target.shape:
        raise DimensionError(f"warped {tuple(warped.shape)} vs target {tuple(target.shape)}")
    l1 = (warped - target).abs().mean()
    zero = l1.new_zeros(())
    if extractor is not None and lambda_perceptual > 0:
        perceptual = perceptual_distance(warped, target, extractor)
    else:
        perceptual = zero
    s1 = sum((first_order_smoothness(normalized_flow(f)) for f in flows), zero) / max(len(flows), 1)
    s2 = sum((second_order_smoothness(normalized_flow(f)) for f in flows), zero) / max(len(flows), 1)
    total = l1 + lambda_perceptual * perceptual + lambda_smooth_first * s1 + lambda_smooth_second * s2
    return WarpLoss(total, l1, perceptual, s1, s2)
