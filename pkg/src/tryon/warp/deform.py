"""Deformable convolution with a hand-derived backward pass.

Every kernel tap ``n`` at output position ``p`` samples the input at
``p + p_n + offset_n(p)`` with bilinear interpolation (zero outside the
image), then the taps are combined by an ordinary weight tensor. Stride is
1 and padding is "same", so the output keeps the input's spatial size.

Offset layout: ``offset`` is (B, 2*k*k, H, W); channels ``2n`` and ``2n+1``
hold the horizontal and vertical shift of tap ``n``, with taps enumerated
row-major over the kernel window.
"""

import math

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import DimensionError
from .sampling import base_grid


def _tap_positions(offset, k):
    B, _, H, W = offset.shape
    K = k * k
    r = k // 2
    xs, ys = base_grid(H, W, B, offset.dtype, offset.device)
    taps = torch.arange(K, device=offset.device)
    dy = (taps // k - r).to(offset.dtype).view(1, K, 1, 1)
    dx = (taps % k - r).to(offset.dtype).view(1, K, 1, 1)
    off = offset.view(B, K, 2, H, W)
    px = xs.unsqueeze(1) + dx + off[:, :, 0]
    py = ys.unsqueeze(1) + dy + off[:, :, 1]
    return px.reshape(B, -1), py.reshape(B, -1)


def _corners(px, py, H, W):
    x0 = torch.floor(px)
    y0 = torch.floor(py)
    fx = px - x0
    fy = py - y0
    x0 = x0.long()
    y0 = y0.long()
    out = []
    for oy, ox in ((0, 0), (0, 1), (1, 0), (1, 1)):
        yy = y0 + oy
        xx = x0 + ox
        valid = (xx >= 0) & (xx < W) & (yy >= 0) & (yy < H)
        idx = yy.clamp(0, H - 1) * W + xx.clamp(0, W - 1)
        out.append((idx, valid))
    return out, fx, fy


def _gather(flat, idx, valid):
    B, C, _ = flat.shape
    vals = torch.gather(flat, 2, idx.unsqueeze(1).expand(B, C, -1))
    return vals * valid.unsqueeze(1).to(flat.dtype)


class _DeformConvFunction(torch.autograd.Function):

    @staticmethod
    def forward(ctx, x, offset, weight, bias):
        B, C, H, W = x.shape
        k = weight.shape[-1]
        K = k * k
        px, py = _tap_positions(offset, k)
        corners, fx, fy = _corners(px, py, H, W)
        flat = x.reshape(B, C, H * W)
        v00, v01, v10, v11 = (_gather(flat, i, v) for i, v in corners)
        fx_ = fx.unsqueeze(1)
        fy_ = fy.unsqueeze(1)
        cols = ((v00 * (1 - fx_) + v01 * fx_) * (1 - fy_)
                + (v10 * (1 - fx_) + v11 * fx_) * fy_)
        cols = cols.view(B, C, K, H, W)
        w = weight.reshape(weight.shape[0], C, K)
        out = torch.einsum("ock,bckhw->bohw", w, cols)
        if bias is not None:
            out = out + bias.view(1, -1, 1, 1)
        ctx.save_for_backward(x, offset, weight, cols)
        ctx.has_bias = bias is not None
        return out

    @staticmethod
    def backward(ctx, grad_out):
        x, offset, weight, cols = ctx.saved_tensors
        B, C, H, W = x.shape
        k = weight.shape[-1]
        K = k * k
        w = weight.reshape(weight.shape[0], C, K)
        grad_x = grad_offset = grad_weight = grad_bias = None

        if ctx.needs_input_grad[2]:
            grad_weight = torch.einsum("bohw,bckhw->ock", grad_out, cols).reshape(weight.shape)
        if ctx.has_bias and ctx.needs_input_grad[3]:
            grad_bias = grad_out.sum(dim=(0, 2, 3))
        if not (ctx.needs_input_grad[0] or ctx.needs_input_grad[1]):
            return grad_x, grad_offset, grad_weight, grad_bias

        grad_cols = torch.einsum("ock,bohw->bckhw", w, grad_out).reshape(B, C, -1)
        px, py = _tap_positions(offset, k)
        corners, fx, fy = _corners(px, py, H, W)
        fx_ = fx.unsqueeze(1)
        fy_ = fy.unsqueeze(1)

        if ctx.needs_input_grad[0]:
            coeffs = ((1 - fx_) * (1 - fy_), fx_ * (1 - fy_), (1 - fx_) * fy_, fx_ * fy_)
            grad_flat = torch.zeros(B, C, H * W, dtype=x.dtype, device=x.device)
            for (idx, valid), a in zip(corners, coeffs):
                contrib = grad_cols * a * valid.unsqueeze(1).to(x.dtype)
                grad_flat.scatter_add_(2, idx.unsqueeze(1).expand(B, C, -1), contrib)
            grad_x = grad_flat.view(B, C, H, W)

        if ctx.needs_input_grad[1]:
            flat = x.reshape(B, C, H * W)
            v00, v01, v10, v11 = (_gather(flat, i, v) for i, v in corners)
            d_px = (1 - fy_) * (v01 - v00) + fy_ * (v11 - v10)
            d_py = (1 - fx_) * (v10 - v00) + fx_ * (v11 - v01)
            g_px = (grad_cols * d_px).sum(1).view(B, K, H, W)
            g_py = (grad_cols * d_py).sum(1).view(B, K, H, W)
            grad_offset = torch.stack([g_px, g_py], dim=2).reshape(B, 2 * K, H, W)

        return grad_x, grad_offset, grad_weight, grad_bias


def deformable_conv(x, offset, weight, bias=None):
    """Deformable convolution, stride 1, same padding.

    Args:
        x: (B, C_in, H, W) input features.
        offset: (B, 2*k*k, H, W) per-tap sampling shifts in pixels.
        weight: (C_out, C_in, k, k) kernel, ``k`` odd.
        bias: optional (C_out,) tensor.

    Returns:
        (B, C_out, H, W) tensor.
    """
    if x.dim() != 4 or weight.dim() != 4:
        raise DimensionError("deformable_conv expects 4-D input and weight")
    c_out, c_in, kh, kw = weight.shape
    if kh != kw or kh % 2 == 0:
        raise DimensionError(f"kernel must be square with odd size, got {kh}x{kw}")
    if x.shape[1] != c_in:
        raise DimensionError(f"input has {x.shape[1]} channels, kernel expects {c_in}")
    expected = (x.shape[0], 2 * kh * kw, x.shape[2], x.shape[3])
    if tuple(offset.shape) != expected:
        raise DimensionError(f"offset shape {tuple(offset.shape)} != {expected}")
    return _DeformConvFunction.apply(x, offset, weight, bias)


class DeformConv2d(nn.Module):
    """Deformable conv layer whose offsets come from a plain conv.

    The offset predictor is zero-initialised, so a fresh layer behaves
    exactly like a standard convolution. ``offset_input`` lets callers
    predict offsets from a different tensor than the one being sampled.
    """

    def __init__(self, in_channels, out_channels, kernel_size=3, offset_channels=None, bias=True):
        super().__init__()
        self.kernel_size = kernel_size
        self.weight = nn.Parameter(torch.empty(out_channels, in_channels, kernel_size, kernel_size))
        self.bias = nn.Parameter(torch.zeros(out_channels)) if bias else None
        nn.init.kaiming_uniform_(self.weight, a=math.sqrt(5))
        self.offset_conv = nn.Conv2d(offset_channels or in_channels, 2 * kernel_size * kernel_size,
                                     kernel_size, padding=kernel_size // 2)
        nn.init.zeros_(self.offset_conv.weight)
        nn.init.zeros_(self.offset_conv.bias)

    def forward(self, x, offset_input=None):
        offset = self.offset_conv(x if offset_input is None else offset_input)
        return deformable_conv(x, offset, self.weight, self.bias)


def standard_conv(x, weight, bias=None):
    """Reference ``same``-padded convolution matching :func:`deformable_conv`."""
    return F.conv2d(x, weight, bias, padding=weight.shape[-1] // 2)
