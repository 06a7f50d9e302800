"""Multi-pose try-on samples: loading, validation, agnostic images, manifests.

Directory layout::

    <root>/<split>/<subject_id>/pose<k>/
        person.png  garment.png  garment_mask.png  caption.txt
        densepose.png  openpose.json  parse.png  agnostic.png
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .. import imageio
from ..errors import AnnotationError, AssetError, DimensionError, SemanticError
from .attributes import clean_caption, parse_caption
from .captioning import CaptionResult, generate_caption

log = logging.getLogger(__name__)

WIDTH, HEIGHT = 384, 512
MANIFEST_SCHEMA_VERSION = 1

ASSET_FILES = {
    "person": "person.png",
    "garment": "garment.png",
    "garment_mask": "garment_mask.png",
    "caption": "caption.txt",
    "densepose": "densepose.png",
    "openpose": "openpose.json",
    "parse": "parse.png",
    "agnostic": "agnostic.png",
}

PARSE_LABELS = ("background", "hair", "face", "upper_garment", "left_arm", "right_arm",
                "torso_skin", "lower_garment", "left_leg", "right_leg", "left_shoe",
                "right_shoe", "neck")
UPPER_GARMENT = 3
TRY_ON_LABELS = (3, 4, 5, 6)
NUM_KEYPOINTS = 18
# one 8-bit quantisation step in [-1, 1] units
AGNOSTIC_ATOL = 1.5 / 127.5


@dataclass
class ParseMap:
    labels: torch.Tensor
    num_classes: int = len(PARSE_LABELS)

    def __post_init__(self):
        if self.labels.dim() != 2:
            raise DimensionError(f"parse labels must be (H, W), got {tuple(self.labels.shape)}")
        if self.labels.numel() and (int(self.labels.min()) < 0 or int(self.labels.max()) >= self.num_classes):
            raise AnnotationError(f"parse labels outside [0, {self.num_classes})")

    def region(self, labels=TRY_ON_LABELS):
        return torch.isin(self.labels, torch.tensor(labels))


@dataclass
class PoseKeypoints:
    """OpenPose body-18 keypoints as an (18, 3) array of (x, y, confidence)."""

    points: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.shape != (NUM_KEYPOINTS, 3):
            raise AnnotationError(f"expected 18 keypoints of (x, y, c), got {self.points.shape}")
        conf = self.points[:, 2]
        if np.any(conf < 0) or np.any(conf > 1):
            raise AnnotationError("keypoint confidence outside [0, 1]")

    def check_bounds(self, width, height):
        x, y, c = self.points.T
        outside = (x < 0) | (x >= width) | (y < 0) | (y >= height)
        if np.any(outside & (c > 0)):
            bad = np.flatnonzero(outside & (c > 0)).tolist()
            raise AnnotationError(f"keypoints {bad} outside {width}x{height} with nonzero confidence")

    def scaled(self, sx, sy):
        pts = self.points.copy()
        pts[:, 0] *= sx
        pts[:, 1] *= sy
        return PoseKeypoints(pts)

    def to_json(self):
        return [[float(x), float(y), float(c)] for x, y, c in self.points]


@dataclass
class SampleRecord:
    person_image: torch.Tensor
    garment_image: torch.Tensor
    garment_mask: torch.Tensor
    caption: CaptionResult
    dense_pose: torch.Tensor
    openpose: PoseKeypoints
    parse: ParseMap
    agnostic: torch.Tensor
    pose_id: int
    subject_id: str

    def validate(self, size=(HEIGHT, WIDTH)):
        for name in ("person_image", "garment_image", "dense_pose", "agnostic"):
            t = getattr(self, name)
            if tuple(t.shape) != (3, *size):
                raise DimensionError(f"{name} is {tuple(t.shape)}, expected (3, {size[0]}, {size[1]})")
        if tuple(self.garment_mask.shape) != tuple(size):
            raise DimensionError(f"garment_mask is {tuple(self.garment_mask.shape)}")
        if tuple(self.parse.labels.shape) != tuple(size):
            raise DimensionError(f"parse is {tuple(self.parse.labels.shape)}")
        if not torch.all((self.garment_mask == 0) | (self.garment_mask == 1)):
            raise AnnotationError("garment mask is not binary")
        if self.pose_id not in (1, 2):
            raise AnnotationError(f"pose_id must be 1 or 2, got {self.pose_id}")
        self.openpose.check_bounds(size[1], size[0])
        outside = ~self.parse.region()
        if not torch.allclose(self.agnostic[:, outside], self.person_image[:, outside], atol=AGNOSTIC_ATOL):
            raise AnnotationError("agnostic image differs from person outside the try-on region")
        parse_caption(self.caption.text)
        return self


def make_agnostic(person, parse, keypoints=None, fill=0.0):
    """Grey out upper garment, arms and torso skin of a person image.

    Args:
        person: (3, H, W) image in [-1, 1].
        parse: :class:`ParseMap` with the 13-label palette.
        keypoints: optional :class:`PoseKeypoints`; only bounds-checked.

    Every pixel outside the selected labels is returned bit-identical.
    """
    if parse.num_classes <= max(TRY_ON_LABELS):
        raise AnnotationError(
            f"parse map with {parse.num_classes} classes lacks garment/arm/torso labels")
    if person.shape[-2:] != parse.labels.shape:
        raise DimensionError(f"person {tuple(person.shape[-2:])} vs parse {tuple(parse.labels.shape)}")
    if keypoints is not None:
        keypoints.check_bounds(person.shape[-1], person.shape[-2])
    region = parse.region()
    out = person.clone()
    out[:, region] = fill
    return out


def _aspect_ok(h, w, size):
    return abs(h * size[1] - w * size[0]) <= max(h, w) // 64


def _load_asset(asset, path, loader):
    path = Path(path)
    if not path.is_file():
        raise AssetError(asset, path, "missing")
    try:
        return loader(path)
    except (OSError, ValueError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise AssetError(asset, path, f"cannot decode: {exc.__class__.__name__}") from exc


def _load_keypoints(path):
    return PoseKeypoints(np.asarray(json.loads(path.read_text()), dtype=np.float64))


def build_sample(paths, pose_id, subject_id, size=(HEIGHT, WIDTH), resize=True):
    """Load, resize and validate the eight assets of one sample.

    Args:
        paths: mapping from asset name (keys of ``ASSET_FILES``) to file path.
        size: target (H, W); defaults to 512x384.
        resize: scale images of the same aspect ratio to ``size``; when
            False, any other resolution is a dimension error.

    Raises:
        AssetError: a file is missing or undecodable (names the asset).
        DimensionError: resolution cannot be brought to ``size``.
        AnnotationError, SemanticError: annotation invariants fail.
    """
    paths = {k: Path(v) for k, v in paths.items()}
    for asset in ASSET_FILES:
        if asset not in paths:
            raise AssetError(asset, "<unset>", "missing")
    person = _load_asset("person", paths["person"], imageio.load_rgb)
    garment = _load_asset("garment", paths["garment"], imageio.load_rgb)
    mask = _load_asset("garment_mask", paths["garment_mask"], imageio.load_mask)
    dense = _load_asset("densepose", paths["densepose"], imageio.load_rgb)
    labels = _load_asset("parse", paths["parse"], imageio.load_parse)
    agnostic = _load_asset("agnostic", paths["agnostic"], imageio.load_rgb)
    keypoints = _load_asset("openpose", paths["openpose"], _load_keypoints)
    raw_caption = _load_asset("caption", paths["caption"], lambda p: p.read_text(encoding="utf-8"))

    h, w = person.shape[-2:]
    for name, t in (("densepose", dense), ("parse", labels), ("agnostic", agnostic)):
        if tuple(t.shape[-2:]) != (h, w):
            raise DimensionError(f"{name} is {tuple(t.shape[-2:])}, person is {(h, w)}")
    if tuple(mask.shape) != tuple(garment.shape[-2:]):
        raise DimensionError("garment_mask and garment resolutions differ")

    parse = ParseMap(labels)
    # the agnostic invariant is checked before resampling blurs region edges
    outside = ~parse.region()
    if not torch.allclose(agnostic[:, outside], person[:, outside], atol=AGNOSTIC_ATOL):
        raise AnnotationError("agnostic image differs from person outside the try-on region")
    keypoints.check_bounds(w, h)

    for name, (hh, ww) in (("person", (h, w)), ("garment", tuple(garment.shape[-2:]))):
        if (hh, ww) != tuple(size) and not (resize and _aspect_ok(hh, ww, size)):
            raise DimensionError(f"{name} resolution {ww}x{hh} cannot be brought to {size[1]}x{size[0]}")

    if (h, w) != tuple(size):
        keypoints = keypoints.scaled(size[1] / w, size[0] / h)
        person = imageio.resize_image(person, size)
        dense = imageio.resize_image(dense, size)
        labels = imageio.resize_labels(labels, size)
        parse = ParseMap(labels)
        # rebuild rather than resample so the invariant holds exactly
        agnostic = make_agnostic(person, parse)
    garment = imageio.resize_image(garment, size)
    mask = imageio.resize_labels(mask, size)

    try:
        text = clean_caption(raw_caption)
        parse_caption(text)
    except SemanticError as exc:
        raise SemanticError(f"caption ({paths['caption']}): {exc}") from exc
    record = SampleRecord(person, garment, mask, CaptionResult(text, "annotation", raw_caption),
                          dense, keypoints, parse, agnostic, pose_id, subject_id)
    return record.validate(size)


def sample_paths(pose_dir):
    pose_dir = Path(pose_dir)
    return {asset: pose_dir / name for asset, name in ASSET_FILES.items()}


@dataclass
class DatasetManifest:
    split: str
    records: list = field(default_factory=list)
    pairing: str = "paired"

    @property
    def counts(self):
        counts = {"1": 0, "2": 0}
        for r in self.records:
            counts[str(r["pose_id"])] += 1
        return counts

    def to_dict(self):
        return {"schema_version": MANIFEST_SCHEMA_VERSION, "split": self.split,
                "pairing": self.pairing, "records": self.records, "counts": self.counts}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write(self, path):
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != MANIFEST_SCHEMA_VERSION:
            raise SemanticError(f"unsupported manifest schema {d.get('schema_version')!r}")
        m = cls(d["split"], list(d["records"]), d.get("pairing", "paired"))
        if m.counts != d["counts"]:
            raise SemanticError("manifest counts do not match its records")
        return m

    @classmethod
    def read(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def select(self, pose_scope="both"):
        if pose_scope in ("both", None):
            return list(self.records)
        pose = int(str(pose_scope).replace("pose", ""))
        return [r for r in self.records if r["pose_id"] == pose]


@dataclass
class ManifestResult:
    manifest: DatasetManifest
    warnings: list
    errors: list

    def error_report(self):
        return json.dumps({"errors": self.errors, "warnings": self.warnings},
                          indent=2, sort_keys=True) + "\n"


def _pose_dirs(subject_dir):
    poses = {}
    extra = []
    for d in sorted(p for p in subject_dir.iterdir() if p.is_dir()):
        if d.name in ("pose1", "pose2"):
            poses[int(d.name[-1])] = d
        else:
            extra.append(d.name)
    return poses, extra


def build_manifest(root, split, pairing="paired", workers=1, size=(HEIGHT, WIDTH), caption_clients=None):
    """Enumerate, validate and pair every sample of one split.

    Records are ordered by (subject_id, pose_id), so the same tree always
    gives a byte-identical manifest. When any subject of the split has two
    poses, subjects with only one are orphans: they are excluded with a
    warning. Invalid samples are excluded and listed in ``errors``.

    ``pairing="unpaired"`` gives every subject the garment of the next
    subject in sorted order.

    ``caption_clients`` is an optional ``(primary, fallback)`` pair of
    caption clients. When given, every valid record is re-captioned through
    :func:`generate_caption` (the annotated attributes are the local
    fallback) and the record stores ``caption`` and ``caption_source``.
    """
    if pairing not in ("paired", "unpaired"):
        raise ValueError(f"pairing must be 'paired' or 'unpaired', got {pairing!r}")
    root = Path(root)
    split_dir = root / split
    warnings, errors = [], []
    subjects = {}
    if split_dir.is_dir():
        for sdir in sorted(p for p in split_dir.iterdir() if p.is_dir()):
            poses, extra = _pose_dirs(sdir)
            for name in extra:
                warnings.append({"subject_id": sdir.name, "reason": f"ignored directory {name}"})
            if poses:
                subjects[sdir.name] = poses
    two_pose = any(len(p) == 2 for p in subjects.values())
    if two_pose:
        for sid in [s for s, p in subjects.items() if len(p) == 1]:
            warnings.append({"subject_id": sid, "reason": "orphan pose excluded"})
            del subjects[sid]

    order = sorted(subjects)
    garment_from = {sid: sid for sid in order}
    if pairing == "unpaired" and len(order) > 1:
        garment_from = {sid: order[(i + 1) % len(order)] for i, sid in enumerate(order)}

    jobs = [(sid, pose, subjects[sid][pose]) for sid in order for pose in sorted(subjects[sid])]

    def check(job):
        sid, pose, pdir = job
        try:
            return build_sample(sample_paths(pdir), pose, sid, size=size)
        except (AssetError, DimensionError, AnnotationError, SemanticError) as exc:
            entry = {"subject_id": sid, "pose_id": pose, "error": type(exc).__name__,
                     "message": str(exc).replace(str(root), "<root>")}
            if isinstance(exc, AssetError):
                entry["asset"] = exc.asset
                entry["path"] = Path(exc.path).relative_to(root).as_posix()
            return entry

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(check, jobs))
    else:
        outcomes = [check(j) for j in jobs]

    records = []
    for (sid, pose, pdir), outcome in zip(jobs, outcomes):
        if isinstance(outcome, dict):
            errors.append(outcome)
            log.warning("excluded %s pose%d: %s", sid, pose, outcome["message"])
            continue
        gdir = subjects[garment_from[sid]].get(pose) or next(iter(subjects[garment_from[sid]].values()))
        records.append({
            "subject_id": sid,
            "pose_id": pose,
            "dir": pdir.relative_to(root).as_posix(),
            "garment_from": garment_from[sid],
            "garment_dir": gdir.relative_to(root).as_posix(),
        })
    if caption_clients is not None:
        _caption_records(records, root, jobs, outcomes, caption_clients)
    return ManifestResult(DatasetManifest(split, records, pairing), warnings, errors)


def _caption_records(records, root, jobs, outcomes, clients):
    # captions describe the garment a record is trained with, so key them by garment_dir
    samples = {pdir.relative_to(root).as_posix(): out
               for (_, _, pdir), out in zip(jobs, outcomes) if not isinstance(out, dict)}
    primary, fallback = clients
    done = {}
    for rec in records:
        key = rec["garment_dir"]
        if key not in samples:
            continue
        if key not in done:
            sample = samples[key]
            attrs = parse_caption(sample.caption.text).as_dict()
            done[key] = generate_caption(sample.garment_image, primary, fallback, attributes=attrs)
        rec["caption"] = done[key].text
        rec["caption_source"] = done[key].source


def record_name(record):
    """Canonical file stem for outputs generated from a manifest record."""
    return f"{record['subject_id']}_pose{record['pose_id']}"


def load_record(root, record, size=(HEIGHT, WIDTH)):
    """Re-load and re-validate a manifest record; swaps in the paired garment."""
    root = Path(root)
    sample = build_sample(sample_paths(root / record["dir"]), record["pose_id"],
                          record["subject_id"], size=size)
    if record.get("garment_dir", record["dir"]) != record["dir"]:
        other = build_sample(sample_paths(root / record["garment_dir"]), record["pose_id"],
                             record["garment_from"], size=size)
        sample.garment_image = other.garment_image
        sample.garment_mask = other.garment_mask
        sample.caption = other.caption
    if "caption" in record:
        text = record["caption"]
        parse_caption(text)
        sample.caption = CaptionResult(text, record["caption_source"], text)
    return sample
