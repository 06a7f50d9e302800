"""Pyramid feature extraction and the cascaded flow estimator."""

from dataclasses import dataclass, field

import torch
from torch import nn
import torch.nn.functional as F

from ..errors import ArgumentError, DimensionError
from .deform import DeformConv2d
from .flow import compose_flow, fuse_features, local_correlation, upsample_flow, warp_image

NUM_PARSE_CLASSES = 13


@dataclass
class WarpNetConfig:
    """Architecture knobs of the warping network.

    ``channels`` gives one width per pyramid level (finest first); the
    cascade uses the ``cascade_depth`` finest levels.
    """

    channels: tuple = (16, 24, 32, 32, 32)
    cascade_depth: int = 5
    corr_radius: int = 4
    head_width: int = 32
    alpha: float = 1.0
    beta: float = 1.0
    pyramid_deformable: bool = False
    flow_deformable: bool = True
    parse_classes: int = NUM_PARSE_CLASSES

    @property
    def levels(self):
        return len(self.channels)


@dataclass
class FeaturePyramid:
    """Per-level feature maps, finest level first."""

    levels: list = field(default_factory=list)

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, i):
        return self.levels[i]

    @property
    def sizes(self):
        return [tuple(f.shape[-2:]) for f in self.levels]


def one_hot_parse(labels, num_classes=NUM_PARSE_CLASSES):
    """(B, H, W) integer labels -> (B, num_classes, H, W) float one-hot."""
    return F.one_hot(labels.long(), num_classes).permute(0, 3, 1, 2).float()


class _PyramidLevel(nn.Module):

    def __init__(self, c_in, c_out, stride, deformable):
        super().__init__()
        self.down = nn.Conv2d(c_in, c_out, 3, stride=stride, padding=1)
        if deformable:
            self.refine = DeformConv2d(c_out, c_out, 3)
        else:
            self.refine = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.act = nn.LeakyReLU(0.1)
        nn.init.zeros_(self.down.bias)
        nn.init.zeros_(self.refine.bias)

    def forward(self, x):
        x = self.act(self.down(x))
        return self.act(self.refine(x))


class PyramidExtractor(nn.Module):
    """Multi-level conv encoder followed by coarse-to-fine feature fusion.

    Level 0 keeps the input resolution; each further level halves it with
    a stride-2 conv (``ceil(h / 2)``). Every level except the coarsest is
    fused with the next coarser level after a bilinear resize and a 1x1
    projection: ``alpha * fine + beta * projected_coarse``.
    """

    def __init__(self, in_channels, channels, alpha=1.0, beta=1.0, deformable=False):
        super().__init__()
        if len(channels) < 2:
            raise ArgumentError("a pyramid needs at least two levels")
        self.in_channels = in_channels
        blocks = []
        c = in_channels
        for i, width in enumerate(channels):
            blocks.append(_PyramidLevel(c, width, 1 if i == 0 else 2, deformable))
            c = width
        self.blocks = nn.ModuleList(blocks)
        self.project = nn.ModuleList(
            nn.Conv2d(channels[i + 1], channels[i], 1, bias=False) for i in range(len(channels) - 1))
        self.alpha = alpha
        self.beta = beta

    def encode(self, x):
        raw = []
        for block in self.blocks:
            x = block(x)
            raw.append(x)
        return raw

    def forward(self, x):
        if x.shape[1] != self.in_channels:
            raise DimensionError(f"extractor expects {self.in_channels} channels, got {x.shape[1]}")
        raw = self.encode(x)
        fused = []
        for i, low in enumerate(raw[:-1]):
            high = F.interpolate(raw[i + 1], size=low.shape[-2:], mode="bilinear", align_corners=False)
            fused.append(fuse_features(low, self.project[i](high), self.alpha, self.beta))
        fused.append(raw[-1])
        return FeaturePyramid(fused)


def extract_pyramid(image, extractor, dense_pose=None, parse=None, num_classes=NUM_PARSE_CLASSES):
    """Channel-concatenate image, dense-pose rendering and one-hot parse, then encode.

    Args:
        image: (B, C, H, W) image tensor.
        extractor: a :class:`PyramidExtractor` sized for the concatenation.
        dense_pose: optional (B, 3, H, W) rendering.
        parse: optional (B, H, W) integer label map.
    """
    parts = [image]
    if dense_pose is not None:
        parts.append(dense_pose)
    if parse is not None:
        parts.append(one_hot_parse(parse, num_classes).to(image.dtype))
    size = image.shape[-2:]
    for p in parts:
        if p.shape[-2:] != size:
            raise DimensionError(f"spatial size {tuple(p.shape[-2:])} != image size {tuple(size)}")
    return extractor(torch.cat(parts, dim=1))


class FlowHead(nn.Module):
    """Predicts one flow residual from [flow, warped garment, person, cost volume].

    The first layer is a deformable conv (offsets from a zero-initialised
    plain conv over the same input) when ``deformable`` is set. The last
    layer is zero-initialised so an untrained head predicts no motion.
    """

    def __init__(self, feat_channels, corr_channels, width, deformable=True):
        super().__init__()
        c_in = 2 + 2 * feat_channels + corr_channels
        self.in_channels = c_in
        if deformable:
            self.first = DeformConv2d(c_in, width, 3)
        else:
            self.first = nn.Conv2d(c_in, width, 3, padding=1)
        self.mid = nn.Conv2d(width, width, 3, padding=1)
        self.out = nn.Conv2d(width, 2, 3, padding=1)
        self.act = nn.LeakyReLU(0.1)
        nn.init.zeros_(self.out.weight)
        nn.init.zeros_(self.out.bias)

    def forward(self, x):
        x = self.act(self.first(x))
        x = self.act(self.mid(x))
        return self.out(x)


def predict_flow_residual(prev_flow, garment_feats, person_feats, corr, head):
    """One residual step of the cascade.

    ``garment_feats`` must already be warped by ``prev_flow``.
    """
    size = prev_flow.shape[-2:]
    for name, t in (("garment_feats", garment_feats), ("person_feats", person_feats), ("corr", corr)):
        if t.shape[-2:] != size:
            raise DimensionError(f"{name} size {tuple(t.shape[-2:])} != flow size {tuple(size)}")
    x = torch.cat([prev_flow, garment_feats, person_feats, corr], dim=1)
    if x.shape[1] != head.in_channels:
        raise DimensionError(f"flow head expects {head.in_channels} channels, got {x.shape[1]}")
    return head(x)


@dataclass
class CascadeOutput:
    flow: torch.Tensor
    warped: torch.Tensor
    warped_mask: torch.Tensor
    flows: list


class WarpNetwork(nn.Module):
    """Garment and person pyramids plus one flow head per cascade level.

    Garment stream input: garment RGB and garment mask (4 channels).
    Person stream input: agnostic RGB, dense-pose RGB and one-hot parse.
    """

    GARMENT_CHANNELS = 4

    def __init__(self, config=None):
        super().__init__()
        self.config = cfg = config or WarpNetConfig()
        if not 1 <= cfg.cascade_depth <= cfg.levels:
            raise ArgumentError(
                f"cascade depth {cfg.cascade_depth} must be in [1, {cfg.levels}]")
        self.garment_encoder = PyramidExtractor(
            self.GARMENT_CHANNELS, cfg.channels, cfg.alpha, cfg.beta, cfg.pyramid_deformable)
        self.person_encoder = PyramidExtractor(
            6 + cfg.parse_classes, cfg.channels, cfg.alpha, cfg.beta, cfg.pyramid_deformable)
        corr_channels = (2 * cfg.corr_radius + 1) ** 2
        self.heads = nn.ModuleList(
            FlowHead(c, corr_channels, cfg.head_width, cfg.flow_deformable) for c in cfg.channels)

    def pyramids(self, garment, garment_mask, agnostic, dense_pose, parse):
        g = extract_pyramid(torch.cat([garment, garment_mask], 1), self.garment_encoder)
        p = extract_pyramid(agnostic, self.person_encoder, dense_pose, parse, self.config.parse_classes)
        return g, p

    def forward(self, garment, garment_mask, agnostic, dense_pose, parse, depth=None):
        return run_cascade(self, garment, garment_mask, agnostic, dense_pose, parse, depth)


def run_cascade(net, garment, garment_mask, agnostic, dense_pose, parse, depth=None):
    """Coarse-to-fine flow refinement over the ``depth`` finest pyramid levels.

    Each level: upsample the running flow, warp garment features, build the
    local cost volume against person features, predict a residual and
    compose it into the flow. The final flow is at input resolution and is
    used to warp the masked garment.
    """
    depth = net.config.cascade_depth if depth is None else depth
    if not 1 <= depth <= net.config.levels:
        raise ArgumentError(f"cascade depth {depth} exceeds pyramid depth {net.config.levels}")
    g_pyr, p_pyr = net.pyramids(garment, garment_mask, agnostic, dense_pose, parse)
    start = depth - 1
    B = garment.shape[0]
    h, w = g_pyr.sizes[start]
    flow = garment.new_zeros(B, 2, h, w)
    flows = []
    for level in range(start, -1, -1):
        if level != start:
            flow = upsample_flow(flow, 2, size=g_pyr.sizes[level])
        warped_feats = warp_image(g_pyr[level], flow)
        corr = local_correlation(warped_feats, p_pyr[level], net.config.corr_radius)
        residual = predict_flow_residual(flow, warped_feats, p_pyr[level], corr, net.heads[level])
        flow = compose_flow(flow, residual)
        flows.append(flow)
    masked = garment * garment_mask
    return CascadeOutput(flow, warp_image(masked, flow), warp_image(garment_mask, flow), flows)
