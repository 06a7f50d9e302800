"""Pairwise image similarity: windowed SSIM and a perceptual feature distance."""

import numpy as np
import torch

from ..errors import DimensionError


def gaussian_window(size=11, sigma=1.5):
    """Normalised 1-D Gaussian taps."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    w = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return w / w.sum()


def _filter_valid(img, taps):
    # separable correlation over the last two axes, keeping only full windows
    k = len(taps)
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=-2) @ taps
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=-1) @ taps


def _as_channels(a):
    a = a.detach().cpu().numpy() if isinstance(a, torch.Tensor) else np.asarray(a)
    a = a.astype(np.float64)
    return a[None] if a.ndim == 2 else a


def ssim(x, y, window=11, sigma=1.5, k1=0.01, k2=0.03, data_range=1.0):
    """Mean structural similarity of two images.

    Args:
        x, y: (H, W) or (C, H, W) arrays or tensors with values in
            ``[0, data_range]``. Channels are scored separately and averaged.

    Only windows lying fully inside the image contribute. Variances use the
    population (Gaussian-weighted) form.
    """
    a, b = _as_channels(x), _as_channels(y)
    if a.shape != b.shape:
        raise DimensionError(f"ssim inputs differ in shape: {a.shape} vs {b.shape}")
    if min(a.shape[-2:]) < window:
        raise DimensionError(f"images {a.shape[-2:]} are smaller than the {window}-pixel window")
    taps = gaussian_window(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_a, mu_b = _filter_valid(a, taps), _filter_valid(b, taps)
    var_a = _filter_valid(a * a, taps) - mu_a * mu_a
    var_b = _filter_valid(b * b, taps) - mu_b * mu_b
    cov = _filter_valid(a * b, taps) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float((num / den).mean(axis=(-2, -1)).mean())


def _unit_channels(f, eps=1e-10):
    return f / (f.pow(2).sum(dim=1, keepdim=True).sqrt() + eps)


@torch.no_grad()
def lpips_distance(x, y, extractor):
    """Perceptual distance over the feature maps of ``extractor``.

    Features are unit-normalised along channels at every position; the
    squared difference is summed over channels, averaged over positions,
    then averaged over layers. Batches are averaged.

    Args:
        x, y: (3, H, W) or (B, 3, H, W) tensors in the extractor's range.
        extractor: callable returning a list of (B, C, h, w) maps.
    """
    if x.shape != y.shape:
        raise DimensionError(f"lpips inputs differ in shape: {tuple(x.shape)} vs {tuple(y.shape)}")
    if x.dim() == 3:
        x, y = x[None], y[None]
    fx, fy = extractor(x), extractor(y)
    if len(fx) == 0 or len(fx) != len(fy):
        raise DimensionError("extractor must return the same non-empty list of maps for both inputs")
    per_layer = []
    for a, b in zip(fx, fy):
        if a.shape != b.shape or a.dim() != 4:
            raise DimensionError(f"extractor maps differ: {tuple(a.shape)} vs {tuple(b.shape)}")
        d = (_unit_channels(a.double()) - _unit_channels(b.double())).pow(2).sum(dim=1)
        per_layer.append(d.mean(dim=(1, 2)))
    return float(torch.stack(per_layer).mean())
