"""Geometric condition stack fed to the denoiser by channel concatenation."""

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from ..errors import DimensionError

# (name, channels) in stacking order; the order is part of the contract
STACK_ORDER = (("z", 4), ("e_warp", 4), ("e_agnostic", 4), ("mask", 1), ("pose", 3))
STACK_WIDTH = sum(c for _, c in STACK_ORDER)


@dataclass
class GeometricCondition:
    e_warp: torch.Tensor
    e_agnostic: torch.Tensor
    mask: torch.Tensor
    pose: torch.Tensor
    z: torch.Tensor

    def stack(self):
        return torch.cat([getattr(self, name) for name, _ in STACK_ORDER], dim=1)


def downsample_mask(mask, size):
    """Area-average to ``size`` then re-binarise at 0.5."""
    return (F.interpolate(mask, size=size, mode="area") >= 0.5).to(mask.dtype)


def downsample_pose(pose, size):
    return F.interpolate(pose, size=size, mode="bilinear", align_corners=False)


def assemble_geometric_condition(e_warp, e_agnostic, mask_full, pose_full, z):
    """Bring mask and pose to latent resolution and stack all five parts.

    Args:
        e_warp, e_agnostic, z: (B, 4, h, w) latents.
        mask_full: (B, 1, H, W) binary inpainting mask.
        pose_full: (B, 3, H, W) dense-pose rendering.

    Returns:
        ``(GeometricCondition, stacked)`` where ``stacked`` is (B, 16, h, w)
        ordered [z, e_warp, e_agnostic, mask, pose].
    """
    size = tuple(z.shape[-2:])
    mask = downsample_mask(mask_full, size)
    pose = downsample_pose(pose_full, size)
    cond = GeometricCondition(e_warp, e_agnostic, mask, pose, z)
    for name, channels in STACK_ORDER:
        t = getattr(cond, name)
        if t.dim() != 4 or t.shape[1] != channels or tuple(t.shape[-2:]) != size:
            raise DimensionError(f"{name} has shape {tuple(t.shape)}, expected (B, {channels}, {size[0]}, {size[1]})")
    return cond, cond.stack()
