"""Checkpoint files and JSON-lines logs."""

import hashlib
import json
from pathlib import Path

import torch

from ..errors import ProvenanceError


def file_hash(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_checkpoint(payload, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, tmp)
    tmp.replace(path)
    return path


def load_checkpoint(path, kind=None, fingerprint=None):
    """Load a checkpoint, optionally checking its kind and config fingerprint."""
    payload = torch.load(path, map_location="cpu", weights_only=False)
    if kind is not None and payload.get("kind") != kind:
        raise ProvenanceError(f"{path} is a {payload.get('kind')!r} checkpoint, expected {kind!r}")
    if fingerprint is not None and payload.get("fingerprint") != fingerprint:
        raise ProvenanceError(
            f"{path} was written under config {payload.get('fingerprint')}, current config is {fingerprint}")
    return payload


class JsonlLog:
    """Append-only line-delimited JSON records."""

    def __init__(self, path):
        self.path = Path(path) if path is not None else None
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, record):
        if self.path is None:
            return
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def read_log(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
