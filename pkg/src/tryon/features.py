"""Fixed random feature extractor shared by the perceptual loss and metrics.

Pretrained backbones are out of reach at desk scale, so both the
perceptual warp loss and the LPIPS/FID/KID metrics read features from a
small convolutional net whose weights are drawn once from a fixed seed.
Anything with the same call signature (image batch in, list of feature maps
out) can be swapped in.
"""

import torch
from torch import nn


class RandomConvExtractor(nn.Module):
    """Three stride-2 conv layers with frozen, seeded weights.

    Args:
        in_channels: channels of the input images.
        widths: output channels of each layer.
        seed: RNG seed for the weights; same seed gives identical features.
    """

    def __init__(self, in_channels=3, widths=(16, 32, 64), seed=0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        layers = []
        c = in_channels
        for width in widths:
            conv = nn.Conv2d(c, width, 3, stride=2, padding=1)
            fan_in = c * 9
            with torch.no_grad():
                conv.weight.copy_(torch.randn(conv.weight.shape, generator=gen) * (2.0 / fan_in) ** 0.5)
                conv.bias.zero_()
            layers.append(conv)
            c = width
        self.layers = nn.ModuleList(layers)
        self.act = nn.LeakyReLU(0.2)
        self.requires_grad_(False)
        self.seed = seed

    def forward(self, x):
        feats = []
        for conv in self.layers:
            x = self.act(conv(x))
            feats.append(x)
        return feats
