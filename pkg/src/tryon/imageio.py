"""PNG and tensor-container I/O.

Images live in memory as float tensors (C, H, W) in [-1, 1]; on disk they
are 8-bit PNGs. Parse maps are paletted PNGs whose palette indices are the
labels.
"""

import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

# one RGB colour per parse label
PARSE_PALETTE = [
    (0, 0, 0), (128, 0, 0), (255, 224, 189), (254, 85, 0), (51, 170, 221), (0, 255, 255),
    (255, 170, 170), (0, 85, 85), (85, 255, 170), (170, 255, 85), (255, 255, 0),
    (255, 170, 0), (0, 0, 255),
]


def to_uint8(img):
    """(C, H, W) float in [-1, 1] -> (H, W, C) uint8 array."""
    arr = img.detach().cpu().double().clamp(-1, 1)
    arr = torch.round((arr + 1) * 127.5).to(torch.uint8)
    return arr.permute(1, 2, 0).numpy()


def from_uint8(arr):
    """(H, W, C) uint8 array -> (C, H, W) float32 tensor in [-1, 1]."""
    t = torch.from_numpy(np.array(arr)).permute(2, 0, 1).float()
    return t / 127.5 - 1.0


def save_rgb(img, path):
    Image.fromarray(to_uint8(img)).save(path, format="PNG")


def load_rgb(path):
    with Image.open(path) as im:
        return from_uint8(np.asarray(im.convert("RGB")))


def save_mask(mask, path):
    arr = (mask.detach().cpu().numpy() > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr.reshape(arr.shape[-2:]), mode="L").save(path, format="PNG")


def load_mask(path):
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return torch.from_numpy((arr > 127).astype(np.float32))


def save_parse(labels, path):
    im = Image.fromarray(labels.cpu().numpy().astype(np.uint8), mode="P")
    flat = [c for rgb in PARSE_PALETTE for c in rgb]
    im.putpalette(flat + [0] * (768 - len(flat)))
    im.save(path, format="PNG")


def load_parse(path):
    with Image.open(path) as im:
        if im.mode not in ("P", "L"):
            raise ValueError(f"parse map must be paletted or grayscale, got mode {im.mode}")
        arr = np.asarray(im)
    return torch.from_numpy(arr.astype(np.int64))


def resize_image(img, size):
    """Resize a (C, H, W) float image to ``size=(H, W)`` with antialiased bilinear."""
    if tuple(img.shape[-2:]) == tuple(size):
        return img
    return torch.nn.functional.interpolate(img[None], size=size, mode="bilinear",
                                           align_corners=False, antialias=True)[0]


def resize_labels(labels, size):
    """Nearest-neighbour resize of an (H, W) integer or binary map."""
    if tuple(labels.shape[-2:]) == tuple(size):
        return labels
    out = torch.nn.functional.interpolate(labels[None, None].float(), size=size, mode="nearest")
    return out[0, 0].to(labels.dtype)


def save_tensor(tensor, path):
    """Write a raw ``.npy`` array plus a JSON sidecar describing it."""
    path = Path(path)
    arr = tensor.detach().cpu().numpy()
    np.save(path.with_suffix(".npy"), arr)
    meta = {"shape": list(arr.shape), "dtype": str(arr.dtype), "layout": "C-order"}
    path.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_tensor(path):
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    arr = np.load(path.with_suffix(".npy"))
    if list(arr.shape) != meta["shape"] or str(arr.dtype) != meta["dtype"]:
        raise ValueError(f"tensor {path} does not match its sidecar")
    return torch.from_numpy(arr)
