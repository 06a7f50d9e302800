"""Turning manifest records into batched training tensors."""

from dataclasses import dataclass
from pathlib import Path

import torch

from ..errors import ArgumentError
from ..semantics.dataset import UPPER_GARMENT, DatasetManifest, load_record, record_name


@dataclass
class Batch:
    """Stacked tensors for a list of samples (images in [-1, 1])."""

    names: list
    person: torch.Tensor
    garment: torch.Tensor
    garment_mask: torch.Tensor
    agnostic: torch.Tensor
    dense_pose: torch.Tensor
    parse: torch.Tensor
    region: torch.Tensor
    garment_region: torch.Tensor
    captions: list

    def __len__(self):
        return len(self.names)

    @property
    def target_garment(self):
        """The person's own garment pixels, zero elsewhere."""
        return self.person * self.garment_region

    def select(self, idx):
        idx = [int(i) for i in idx]
        pick = lambda t: t[idx]  # noqa: E731
        return Batch([self.names[i] for i in idx], pick(self.person), pick(self.garment),
                     pick(self.garment_mask), pick(self.agnostic), pick(self.dense_pose),
                     pick(self.parse), pick(self.region), pick(self.garment_region),
                     [self.captions[i] for i in idx])


def collate(samples, names=None):
    if not samples:
        raise ArgumentError("no samples to train or evaluate on")
    names = names or [f"{s.subject_id}_pose{s.pose_id}" for s in samples]
    stack = lambda f: torch.stack([f(s) for s in samples])  # noqa: E731
    return Batch(
        names=list(names),
        person=stack(lambda s: s.person_image),
        garment=stack(lambda s: s.garment_image),
        garment_mask=stack(lambda s: s.garment_mask[None]),
        agnostic=stack(lambda s: s.agnostic),
        dense_pose=stack(lambda s: s.dense_pose),
        parse=stack(lambda s: s.parse.labels),
        region=stack(lambda s: s.parse.region()[None].float()),
        garment_region=stack(lambda s: (s.parse.labels == UPPER_GARMENT)[None].float()),
        captions=[s.caption.text for s in samples],
    )


def load_batch(root, manifest, size, pose_scope="both"):
    """Load every record of ``manifest`` (a path or :class:`DatasetManifest`)."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.read(manifest)
    records = manifest.select(pose_scope)
    if not records:
        raise ArgumentError("manifest is empty")
    samples = [load_record(Path(root), r, size=size) for r in records]
    return collate(samples, [record_name(r) for r in records])
