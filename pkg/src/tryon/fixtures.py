"""Synthetic multi-pose try-on data with exact annotations.

Each subject is a flat-shaded figure wearing a textured top. The garment
image shows the same top laid flat; on the body it is an affine copy of
the flat one (scaled and shifted per pose), so a perfect warp exists.
Parse map, dense-pose rendering, keypoints, agnostic image and caption are
all derived from the same geometry.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import imageio
from .semantics.attributes import (COLLAR, COMMON_COLORS, COMMON_PATTERNS, FIT, NECKLINE,
                                   SHIRT_LENGTH, SLEEVE, GarmentAttributes, serialize_caption)
from .semantics.dataset import ParseMap, make_agnostic

COLOR_RGB = {
    "white": (235, 235, 235), "black": (30, 30, 35), "gray": (128, 128, 128),
    "red": (200, 40, 40), "blue": (40, 80, 200), "navy": (25, 35, 90), "green": (40, 150, 60),
    "yellow": (230, 210, 50), "orange": (240, 140, 30), "pink": (240, 150, 190),
    "purple": (130, 60, 170), "brown": (120, 75, 40), "beige": (220, 200, 160),
    "khaki": (190, 175, 120), "cream": (250, 240, 210), "multicolor": (180, 90, 150),
}


@dataclass
class Figure:
    """Body geometry in normalised [0, 1] image coordinates."""

    cx: float
    top: float
    scale: float
    arm_angle: float


def _ellipse(xs, ys, cx, cy, rx, ry):
    return ((xs - cx) / rx) ** 2 + ((ys - cy) / ry) ** 2 <= 1.0


def _garment_shape(u, v):
    """Top silhouette in garment-local coordinates u, v in [0, 1]."""
    body = (np.abs(u - 0.5) <= 0.28 + 0.06 * v) & (v >= 0.0) & (v <= 1.0)
    shoulders = (v <= 0.25) & (np.abs(u - 0.5) <= 0.42 - 0.3 * v)
    neck_cut = _ellipse(u, v, 0.5, 0.0, 0.12, 0.12)
    return (body | shoulders) & ~neck_cut & (v >= 0) & (v <= 1) & (u >= 0) & (u <= 1)


def _garment_texture(u, v, color, pattern):
    base = np.array(COLOR_RGB.get(color, (150, 150, 150)), dtype=np.float64) / 255.0
    accent = 1.0 - 0.6 * base
    if pattern == "solid":
        t = np.zeros_like(u)
    elif pattern == "striped":
        t = (np.sin(v * 2 * np.pi * 5) > 0).astype(np.float64)
    elif pattern in ("plaid", "checked"):
        t = ((np.sin(v * 2 * np.pi * 4) > 0) ^ (np.sin(u * 2 * np.pi * 4) > 0)).astype(np.float64)
    elif pattern == "dotted":
        t = ((np.mod(u * 8, 1) - 0.5) ** 2 + (np.mod(v * 8, 1) - 0.5) ** 2 < 0.06).astype(np.float64)
    else:
        t = 0.5 + 0.5 * np.sin(u * 7 + v * 5)
    shade = 0.85 + 0.15 * np.cos((u - 0.5) * 3)
    rgb = (base[None, None] * (1 - t[..., None] * 0.7) + accent[None, None] * t[..., None] * 0.7)
    return np.clip(rgb * shade[..., None], 0, 1)


def _render_person(h, w, fig, attrs, skin, bg):
    ys, xs = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing="ij")
    s = fig.scale
    cx, top = fig.cx, fig.top
    labels = np.zeros((h, w), dtype=np.int64)
    head_cy = top + 0.07 * s
    neck_y = top + 0.15 * s
    torso_top = top + 0.17 * s
    torso_h = 0.34 * s
    torso_w = 0.34 * s
    hip_y = torso_top + torso_h

    legs_l = (xs >= cx - 0.12 * s) & (xs <= cx - 0.01 * s) & (ys >= hip_y) & (ys <= hip_y + 0.32 * s)
    legs_r = (xs >= cx + 0.01 * s) & (xs <= cx + 0.12 * s) & (ys >= hip_y) & (ys <= hip_y + 0.32 * s)
    labels[legs_l] = 8
    labels[legs_r] = 9
    shoe_y = hip_y + 0.32 * s
    labels[(xs >= cx - 0.13 * s) & (xs <= cx - 0.01 * s) & (ys > shoe_y) & (ys <= shoe_y + 0.04 * s)] = 10
    labels[(xs >= cx + 0.01 * s) & (xs <= cx + 0.13 * s) & (ys > shoe_y) & (ys <= shoe_y + 0.04 * s)] = 11
    labels[(np.abs(xs - cx) <= 0.15 * s) & (ys >= hip_y - 0.02 * s) & (ys <= hip_y + 0.12 * s)] = 7

    # arms: slanted bars hanging from the shoulders
    ang = fig.arm_angle
    for side, lab in ((-1, 4), (1, 5)):
        sx = cx + side * 0.16 * s
        sy = torso_top + 0.03 * s
        dx = xs - sx
        dy = ys - sy
        along = dy * np.cos(ang) + side * dx * np.sin(ang)
        across = -dy * np.sin(ang) * side + dx * np.cos(ang)
        arm = (along >= 0) & (along <= 0.36 * s) & (np.abs(across) <= 0.035 * s)
        labels[arm] = lab

    labels[(np.abs(xs - cx) <= 0.035 * s) & (ys >= neck_y - 0.02 * s) & (ys <= torso_top + 0.02 * s)] = 12
    labels[_ellipse(xs, ys, cx, torso_top + 0.02 * s, 0.05 * s, 0.05 * s) & (ys >= torso_top)] = 6
    u = (xs - (cx - torso_w / 2)) / torso_w
    v = (ys - torso_top) / torso_h
    gmask = _garment_shape(u, v)
    labels[gmask] = 3
    head = _ellipse(xs, ys, cx, head_cy, 0.055 * s, 0.07 * s)
    labels[head] = 2
    labels[head & (ys < head_cy - 0.03 * s)] = 1

    part_colors = {
        0: bg, 1: (40, 30, 25), 2: skin, 4: skin, 5: skin, 6: skin, 12: skin,
        7: (60, 70, 110), 8: (60, 70, 110), 9: (60, 70, 110), 10: (20, 20, 20), 11: (20, 20, 20),
    }
    rgb = np.zeros((h, w, 3), dtype=np.float64)
    for lab, col in part_colors.items():
        rgb[labels == lab] = np.array(col) / 255.0
    tex = _garment_texture(u, v, attrs.color, attrs.pattern)
    rgb[gmask] = tex[gmask]

    # dense pose: R = part id, G/B = local surface coordinates
    dense = np.zeros((h, w, 3), dtype=np.float64)
    body = labels > 0
    dense[..., 0] = np.where(body, labels / 12.0, 0)
    dense[..., 1] = np.where(body, np.clip((xs - cx) / (0.4 * s) + 0.5, 0, 1), 0)
    dense[..., 2] = np.where(body, np.clip((ys - top) / (0.95 * s), 0, 1), 0)

    def kp(x, y):
        return [float(x * w), float(y * h), 1.0]

    def arm_point(side, frac):
        sx = cx + side * 0.16 * s
        sy = torso_top + 0.03 * s
        d = 0.36 * s * frac
        return kp(sx + side * d * np.sin(ang), sy + d * np.cos(ang))

    pts = [
        kp(cx, head_cy), kp(cx, torso_top),
        kp(cx - 0.16 * s, torso_top + 0.03 * s), arm_point(-1, 0.5), arm_point(-1, 1.0),
        kp(cx + 0.16 * s, torso_top + 0.03 * s), arm_point(1, 0.5), arm_point(1, 1.0),
        kp(cx - 0.07 * s, hip_y), kp(cx - 0.07 * s, hip_y + 0.16 * s), kp(cx - 0.07 * s, shoe_y),
        kp(cx + 0.07 * s, hip_y), kp(cx + 0.07 * s, hip_y + 0.16 * s), kp(cx + 0.07 * s, shoe_y),
        kp(cx - 0.02 * s, head_cy - 0.01 * s), kp(cx + 0.02 * s, head_cy - 0.01 * s),
        kp(cx - 0.045 * s, head_cy), kp(cx + 0.045 * s, head_cy),
    ]
    for p in pts:
        if not (0 <= p[0] < w and 0 <= p[1] < h):
            p[:] = [0.0, 0.0, 0.0]
    return rgb, labels, dense, pts, gmask


def _render_flat_garment(h, w, attrs, bg=(1.0, 1.0, 1.0)):
    ys, xs = np.meshgrid((np.arange(h) + 0.5) / h, (np.arange(w) + 0.5) / w, indexing="ij")
    u = (xs - 0.15) / 0.7
    v = (ys - 0.2) / 0.6
    mask = _garment_shape(u, v)
    rgb = np.broadcast_to(np.array(bg), (h, w, 3)).copy()
    tex = _garment_texture(u, v, attrs.color, attrs.pattern)
    rgb[mask] = tex[mask]
    return rgb, mask


def random_attributes(rng):
    pick = lambda seq: seq[int(rng.integers(len(seq)))]  # noqa: E731
    return GarmentAttributes(
        fit=pick(FIT), pattern=pick(COMMON_PATTERNS), color=pick(COMMON_COLORS),
        neckline=pick(NECKLINE), collar=pick(COLLAR), sleeve=pick(SLEEVE),
        shirt_length=pick(SHIRT_LENGTH))


def _to_tensor(rgb):
    return imageio.from_uint8(np.round(rgb * 255).astype(np.uint8))


def write_sample(pose_dir, size, fig, attrs, skin, bg):
    """Render one pose of one subject into ``pose_dir``."""
    h, w = size
    pose_dir = Path(pose_dir)
    pose_dir.mkdir(parents=True, exist_ok=True)
    rgb, labels, dense, pts, _ = _render_person(h, w, fig, attrs, skin, bg)
    person = _to_tensor(rgb)
    parse_t = torch.from_numpy(labels)
    agnostic = make_agnostic(person, ParseMap(parse_t))
    garment, gmask = _render_flat_garment(h, w, attrs)
    imageio.save_rgb(person, pose_dir / "person.png")
    imageio.save_rgb(agnostic, pose_dir / "agnostic.png")
    imageio.save_rgb(_to_tensor(garment), pose_dir / "garment.png")
    imageio.save_mask(torch.from_numpy(gmask.astype(np.float32)), pose_dir / "garment_mask.png")
    imageio.save_rgb(_to_tensor(dense), pose_dir / "densepose.png")
    imageio.save_parse(parse_t, pose_dir / "parse.png")
    (pose_dir / "openpose.json").write_text(json.dumps(pts) + "\n")
    (pose_dir / "caption.txt").write_text(serialize_caption(attrs) + "\n", encoding="utf-8")


def make_fixture_tree(root, subjects=4, splits=("train", "test"), size=(512, 384), seed=0, poses=(1, 2)):
    """Write a complete synthetic dataset tree and return its root."""
    root = Path(root)
    rng = np.random.default_rng(seed)
    for split in splits:
        for i in range(subjects):
            sid = f"{split}{i:04d}"
            attrs = random_attributes(rng)
            skin = tuple(int(c) for c in rng.integers(150, 230, size=3))
            bg = tuple(int(c) for c in rng.integers(180, 250, size=3))
            base = Figure(cx=0.5 + rng.uniform(-0.04, 0.04), top=0.06 + rng.uniform(0, 0.03),
                          scale=0.9 + rng.uniform(-0.05, 0.05), arm_angle=0.25)
            for pose in poses:
                fig = base if pose == 1 else Figure(
                    cx=base.cx + rng.uniform(-0.06, 0.06), top=base.top + rng.uniform(-0.02, 0.02),
                    scale=base.scale * rng.uniform(0.9, 1.0), arm_angle=0.6)
                write_sample(root / split / sid / f"pose{pose}", size, fig, attrs, skin, bg)
    return root
