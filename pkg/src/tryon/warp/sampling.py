"""Pixel-coordinate sampling with zero fill outside the image.

All coordinates are in pixels: ``x`` indexes columns, ``y`` indexes rows,
and integer coordinates hit pixel centres exactly.
"""

import torch


def bilinear_corners(img, x, y):
    """Gather the four neighbours of every sample position.

    Args:
        img: (B, C, H, W) tensor.
        x, y: (B, P) sample coordinates.

    Returns:
        Tuple ``(v00, v01, v10, v11, fx, fy)``. ``v00`` is the top-left
        neighbour, ``v01`` top-right, ``v10`` bottom-left, ``v11``
        bottom-right, each (B, C, P) with out-of-bounds neighbours set to 0.
        ``fx``/``fy`` are the fractional parts, shape (B, 1, P).
    """
    B, C, H, W = img.shape
    x0 = torch.floor(x)
    y0 = torch.floor(y)
    fx = (x - x0).unsqueeze(1)
    fy = (y - y0).unsqueeze(1)
    x0 = x0.long()
    y0 = y0.long()
    flat = img.reshape(B, C, H * W)

    def gather(yy, xx):
        valid = (xx >= 0) & (xx < W) & (yy >= 0) & (yy < H)
        idx = (yy.clamp(0, H - 1) * W + xx.clamp(0, W - 1)).unsqueeze(1).expand(B, C, -1)
        vals = torch.gather(flat, 2, idx)
        return vals * valid.unsqueeze(1).to(img.dtype)

    return (gather(y0, x0), gather(y0, x0 + 1), gather(y0 + 1, x0),
            gather(y0 + 1, x0 + 1), fx, fy)


def bilinear_sample(img, x, y):
    """Bilinearly sample ``img`` at pixel positions ``(x, y)``.

    ``x`` and ``y`` have shape (B, H_out, W_out); the result is
    (B, C, H_out, W_out). Differentiable in ``img``, ``x`` and ``y``.
    """
    B = img.shape[0]
    out_hw = x.shape[1:]
    v00, v01, v10, v11, fx, fy = bilinear_corners(img, x.reshape(B, -1), y.reshape(B, -1))
    top = v00 * (1 - fx) + v01 * fx
    bottom = v10 * (1 - fx) + v11 * fx
    out = top * (1 - fy) + bottom * fy
    return out.reshape(B, img.shape[1], *out_hw)


def nearest_sample(img, x, y):
    """Nearest-neighbour sampling (round half up) with zero fill."""
    B, C, H, W = img.shape
    xi = torch.floor(x + 0.5).long()
    yi = torch.floor(y + 0.5).long()
    valid = (xi >= 0) & (xi < W) & (yi >= 0) & (yi < H)
    idx = (yi.clamp(0, H - 1) * W + xi.clamp(0, W - 1)).reshape(B, 1, -1).expand(B, C, -1)
    out = torch.gather(img.reshape(B, C, H * W), 2, idx)
    out = out * valid.reshape(B, 1, -1).to(img.dtype)
    return out.reshape(B, C, *x.shape[1:])


def base_grid(h, w, batch, dtype, device=None):
    """Pixel-centre coordinate grids ``(xs, ys)``, each (batch, h, w)."""
    ys, xs = torch.meshgrid(
        torch.arange(h, dtype=dtype, device=device),
        torch.arange(w, dtype=dtype, device=device),
        indexing="ij",
    )
    return xs.expand(batch, h, w), ys.expand(batch, h, w)
