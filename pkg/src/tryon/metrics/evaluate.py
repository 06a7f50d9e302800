"""Directory-level evaluation, pose-robustness deltas and report rendering."""

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import imageio
from ..errors import ArgumentError, ProvenanceError, TryOnError
from ..semantics.dataset import record_name
from .distribution import FeatureSet, fid, kid
from .image import lpips_distance, ssim

MODES = ("paired", "unpaired")
POSE_SCOPES = ("pose1", "pose2", "both")
KID_TEXT_SCALE = 1e3


class UnmatchedFilesError(TryOnError):
    """Generated and reference directories do not cover the same records."""

    def __init__(self, missing):
        self.missing = sorted(missing)
        super().__init__("unmatched files: " + ", ".join(self.missing))


@dataclass
class MetricReport:
    """Scores for one (mode, pose scope) evaluation.

    ``ssim`` and ``lpips`` are None in unpaired mode. ``kid`` is stored raw;
    the text table multiplies it by 1000.
    """

    mode: str
    pose_scope: str
    count: int
    fid: float
    kid: float
    kid_stderr: float
    ssim: float = None
    lpips: float = None
    fingerprint: str = None
    per_image: dict = field(default_factory=dict)
    features: FeatureSet = None
    ref_features: FeatureSet = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ArgumentError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.pose_scope not in POSE_SCOPES:
            raise ArgumentError(f"pose scope must be one of {POSE_SCOPES}, got {self.pose_scope!r}")

    def metrics(self):
        out = {"fid": self.fid, "kid": self.kid}
        if self.mode == "paired":
            out = {"ssim": self.ssim, "lpips": self.lpips, **out}
        return out

    def to_dict(self):
        d = {"mode": self.mode, "pose_scope": self.pose_scope, "count": self.count,
             "fingerprint": self.fingerprint, **self.metrics(),
             "kid_stderr": None if math.isnan(self.kid_stderr) else self.kid_stderr}
        if self.per_image:
            d["per_image"] = self.per_image
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def pooled_features(images, extractor):
    """(B, 3, H, W) images -> FeatureSet of spatially pooled extractor maps."""
    with torch.no_grad():
        maps = extractor(images)
    return FeatureSet(torch.cat([m.mean(dim=(2, 3)) for m in maps], dim=1).double().numpy())


def _unit_range(img):
    return ((img.double() + 1.0) / 2.0).clamp(0.0, 1.0)


def _load_set(directory, names):
    directory = Path(directory)
    return {n: imageio.load_rgb(directory / f"{n}.png") for n in names if (directory / f"{n}.png").is_file()}


def distribution_scores(gen_feats, ref_feats):
    k, k_err = kid(gen_feats, ref_feats)
    return fid(gen_feats, ref_feats), k, k_err


def evaluate_pairs(gen_dir, ref_dir, manifest, mode="paired", pose_scope="both", extractor=None,
                   fingerprint=None):
    """Score generated images against references named after manifest records.

    Files are ``<subject>_pose<k>.png`` in both directories. Paired mode
    scores each image against its reference and also compares the two
    feature distributions; unpaired mode compares distributions only.

    Raises:
        UnmatchedFilesError: a record has no generated or reference image.
    """
    if mode not in MODES:
        raise ArgumentError(f"mode must be one of {MODES}, got {mode!r}")
    if extractor is None:
        from ..features import RandomConvExtractor
        extractor = RandomConvExtractor()
    names = sorted(record_name(r) for r in manifest.select(pose_scope))
    if not names:
        raise ArgumentError(f"manifest has no records for scope {pose_scope!r}")
    gen, ref = _load_set(gen_dir, names), _load_set(ref_dir, names)
    missing = [f"gen:{n}" for n in names if n not in gen] + [f"ref:{n}" for n in names if n not in ref]
    if missing:
        raise UnmatchedFilesError(missing)
    g = torch.stack([gen[n] for n in names])
    r = torch.stack([ref[n] for n in names])
    gf, rf = pooled_features(g, extractor), pooled_features(r, extractor)
    f, k, k_err = distribution_scores(gf, rf)
    report = MetricReport(mode, pose_scope, len(names), f, k, k_err, fingerprint=fingerprint,
                          features=gf, ref_features=rf)
    if mode == "paired":
        per = {}
        for i, n in enumerate(names):
            per[n] = {"ssim": ssim(_unit_range(g[i]), _unit_range(r[i])),
                      "lpips": lpips_distance(g[i], r[i], extractor)}
        report.per_image = per
        report.ssim = float(np.mean([v["ssim"] for v in per.values()]))
        report.lpips = float(np.mean([v["lpips"] for v in per.values()]))
    return report


def pool_reports(a, b):
    """Recompute every metric over the union of two reports' images."""
    if a.mode != b.mode:
        raise ArgumentError("cannot pool paired and unpaired reports")
    if a.features is None or b.features is None:
        raise ArgumentError("pooling needs the feature sets of both reports")
    gf, rf = a.features.concat(b.features), a.ref_features.concat(b.ref_features)
    f, k, k_err = distribution_scores(gf, rf)
    pooled = MetricReport(a.mode, "both", a.count + b.count, f, k, k_err, fingerprint=a.fingerprint,
                          features=gf, ref_features=rf)
    if a.mode == "paired":
        per = {**a.per_image, **b.per_image}
        pooled.per_image = per
        pooled.ssim = float(np.mean([v["ssim"] for v in per.values()]))
        pooled.lpips = float(np.mean([v["lpips"] for v in per.values()]))
    return pooled


def pose_robustness(report_pose1, report_pose2):
    """Per-metric change from pose 1 to pose 2 plus the pooled report.

    Returns:
        ``(deltas, pooled)`` where ``deltas[m] = pose2[m] - pose1[m]``.

    Raises:
        ProvenanceError: the reports come from different checkpoints.
    """
    if report_pose1.fingerprint != report_pose2.fingerprint:
        raise ProvenanceError(
            f"reports come from different checkpoints: {report_pose1.fingerprint} vs {report_pose2.fingerprint}")
    m1, m2 = report_pose1.metrics(), report_pose2.metrics()
    deltas = {k: m2[k] - m1[k] for k in m1}
    return deltas, pool_reports(report_pose1, report_pose2)


def _fmt(value, digits):
    return "-" if value is None else f"{value:.{digits}f}"


def format_table(rows, label="Setting"):
    """Aligned text table with one row per ``(name, MetricReport)``.

    Columns follow the usual layout: SSIM up, LPIPS down, KID down (x1e3),
    FID down.
    """
    header = [label, "Mode", "Pose", "N", "SSIM↑", "LPIPS↓", "KID×1e3↓", "FID↓"]
    body = []
    for name, rep in rows:
        body.append([name, rep.mode, rep.pose_scope, str(rep.count), _fmt(rep.ssim, 3),
                     _fmt(rep.lpips, 3), _fmt(rep.kid * KID_TEXT_SCALE, 3), _fmt(rep.fid, 2)])
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in [header] + body]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)


def format_deltas(deltas):
    return "  ".join(f"Δ{k.upper()} {v:+.4f}" for k, v in deltas.items())
