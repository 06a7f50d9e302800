"""Latent encoder/decoder contract and the desk autoencoder.

Any encoder must map (B, 3, H, W) images to (B, 4, H/8, W/8) latents. The
desk pair folds each 8x8 patch into a 192-vector and projects it onto four
orthonormal patterns: the three per-channel means and a zero-mean
luminance ramp. ``encode(decode(z)) == z`` holds exactly and
``decode(encode(x)) == x`` for every image in the decoder's range.
"""

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ContractError, DimensionError

LATENT_CHANNELS = 4
DOWNSCALE = 8


def _desk_basis(dtype=torch.float64):
    p = DOWNSCALE
    n = p * p
    rows = torch.zeros(LATENT_CHANNELS, 3 * n, dtype=dtype)
    for c in range(3):
        rows[c, c * n:(c + 1) * n] = 1.0
    ii, jj = torch.meshgrid(torch.arange(p, dtype=dtype), torch.arange(p, dtype=dtype), indexing="ij")
    ramp = (ii - (p - 1) / 2) + (jj - (p - 1) / 2)
    rows[3] = ramp.reshape(-1).repeat(3)
    return rows / rows.norm(dim=1, keepdim=True)


class DeskAutoencoder(nn.Module):
    """Fixed linear space-to-depth autoencoder honouring the latent shape contract."""

    def __init__(self):
        super().__init__()
        self.register_buffer("basis", _desk_basis().float())
        # latents of a constant image equal its value
        self.scale = float(DOWNSCALE)

    def encode(self, x):
        patches = F.pixel_unshuffle(x, DOWNSCALE)
        return torch.einsum("kc,bchw->bkhw", self.basis.to(x.dtype), patches) / self.scale

    def decode(self, z):
        patches = torch.einsum("kc,bkhw->bchw", self.basis.to(z.dtype), z) * self.scale
        return F.pixel_shuffle(patches, DOWNSCALE)

    def forward(self, x):
        return self.encode(x)


def encode_latent(image, encoder):
    """Encode images and enforce the (4, H/8, W/8) contract.

    ``encoder`` is either an object with ``.encode`` or a plain callable.
    """
    if image.dim() == 3:
        return encode_latent(image[None], encoder)[0]
    H, W = image.shape[-2:]
    if H % DOWNSCALE or W % DOWNSCALE:
        raise DimensionError(f"image size {H}x{W} is not divisible by {DOWNSCALE}")
    fn = encoder.encode if hasattr(encoder, "encode") else encoder
    z = fn(image)
    expected = (image.shape[0], LATENT_CHANNELS, H // DOWNSCALE, W // DOWNSCALE)
    if tuple(z.shape) != expected:
        raise ContractError(f"encoder returned {tuple(z.shape)}, expected {expected}")
    return z


def decode_latent(z, decoder):
    if z.dim() == 3:
        return decode_latent(z[None], decoder)[0]
    fn = decoder.decode if hasattr(decoder, "decode") else decoder
    return fn(z)
