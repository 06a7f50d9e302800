"""Small UNet noise predictor with cross-attention to the text sequence."""

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import DimensionError
from .condition import STACK_WIDTH
from .latent import LATENT_CHANNELS
from .layers import Attention, sinusoidal


class ResBlock(nn.Module):

    def __init__(self, c_in, c_out, time_dim, groups=8):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, c_in)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.time = nn.Linear(time_dim, c_out)
        self.norm2 = nn.GroupNorm(groups, c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.skip = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x, temb):
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.time(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttention2d(nn.Module):
    """Spatial positions attend to the conditioning sequence."""

    def __init__(self, channels, context_dim, heads=4, groups=8):
        super().__init__()
        self.norm = nn.GroupNorm(groups, channels)
        self.attn = Attention(channels, heads, context_dim)

    def forward(self, x, context, mask):
        B, C, H, W = x.shape
        h = self.norm(x).flatten(2).transpose(1, 2)
        h = self.attn(h, context=context, mask=mask)
        return x + h.transpose(1, 2).view(B, C, H, W)


class Denoiser(nn.Module):
    """Two-level UNet: input is the 16-channel condition stack, output 4 channels."""

    def __init__(self, base=32, context_dim=64, time_dim=64, in_channels=STACK_WIDTH):
        super().__init__()
        self.in_channels = in_channels
        self.time_dim = time_dim
        self.time_mlp = nn.Sequential(nn.Linear(time_dim, time_dim), nn.SiLU(), nn.Linear(time_dim, time_dim))
        self.inp = nn.Conv2d(in_channels, base, 3, padding=1)
        self.res1 = ResBlock(base, base, time_dim)
        self.attn1 = CrossAttention2d(base, context_dim)
        self.down = nn.Conv2d(base, 2 * base, 3, stride=2, padding=1)
        self.res2 = ResBlock(2 * base, 2 * base, time_dim)
        self.attn2 = CrossAttention2d(2 * base, context_dim)
        self.up = nn.Conv2d(2 * base, base, 3, padding=1)
        self.res3 = ResBlock(2 * base, base, time_dim)
        self.attn3 = CrossAttention2d(base, context_dim)
        self.out_norm = nn.GroupNorm(8, base)
        self.out = nn.Conv2d(base, LATENT_CHANNELS, 3, padding=1)

    def forward(self, x, t, context, context_mask=None):
        if x.shape[1] != self.in_channels:
            raise DimensionError(f"denoiser expects {self.in_channels} input channels, got {x.shape[1]}")
        t = torch.as_tensor(t, device=x.device).reshape(-1).expand(x.shape[0])
        temb = self.time_mlp(sinusoidal(t, self.time_dim).to(x.dtype))
        h1 = self.attn1(self.res1(self.inp(x), temb), context, context_mask)
        h2 = self.attn2(self.res2(self.down(h1), temb), context, context_mask)
        up = self.up(F.interpolate(h2, size=h1.shape[-2:], mode="nearest"))
        h3 = self.attn3(self.res3(torch.cat([up, h1], 1), temb), context, context_mask)
        return self.out(F.silu(self.out_norm(h3)))
