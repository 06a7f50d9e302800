"""Ablation suites: each setting trains and evaluates with the same seed."""

import json
import re
from dataclasses import dataclass
from pathlib import Path

from ..errors import ArgumentError
from ..features import RandomConvExtractor
from ..metrics import evaluate_pairs, format_table
from ..semantics import build_manifest
from .data import load_batch
from .inference import infer, write_references
from .plotting import plot_metric_bars
from .training import train_generation, train_warp

_NO_TEXT = {"ablation.text_mode": "none"}

# (row label, config overrides) in table order
SUITES = {
    "table3": [
        ("no deformable conv", {**_NO_TEXT, "ablation.pyramid_deformable": False, "ablation.flow_deformable": False}),
        ("pyramid deformable", {**_NO_TEXT, "ablation.pyramid_deformable": True, "ablation.flow_deformable": False}),
        ("flow deformable", {**_NO_TEXT, "ablation.pyramid_deformable": False, "ablation.flow_deformable": True}),
        ("pyramid + flow deformable", {**_NO_TEXT, "ablation.pyramid_deformable": True,
                                       "ablation.flow_deformable": True}),
    ],
    "table4": [
        ("no text", {"ablation.text_mode": "none"}),
        ("raw text", {"ablation.text_mode": "raw"}),
        ("structured text", {"ablation.text_mode": "structured"}),
    ],
    "table5": [
        ("warping only", {"ablation.use_flow_warp": True, "ablation.use_semantics": False}),
        ("semantics only", {"ablation.use_flow_warp": False, "ablation.use_semantics": True,
                            "ablation.text_mode": "structured"}),
        ("warping + semantics, raw text", {"ablation.use_flow_warp": True, "ablation.use_semantics": True,
                                           "ablation.text_mode": "raw"}),
        ("warping + semantics, structured text", {"ablation.use_flow_warp": True,
                                                  "ablation.use_semantics": True,
                                                  "ablation.text_mode": "structured"}),
    ],
}


@dataclass
class AblationRow:
    label: str
    overrides: dict
    seed: int
    report: object


@dataclass
class AblationResult:
    suite: str
    rows: list
    table: str
    json_path: Path
    figure_path: Path


def _slug(label):
    return re.sub(r"[^a-z0-9]+", "_", label.lower()).strip("_")


def suite_settings(suite):
    if suite not in SUITES:
        raise ArgumentError(f"unknown ablation suite {suite!r}; choose from {sorted(SUITES)}")
    return SUITES[suite]


def run_ablation(suite, config, root, out_dir, train_split="train", test_split="test"):
    """Train and evaluate every setting of ``suite`` on the dataset under ``root``.

    Every setting starts from ``config`` with only its ablation flags
    overridden, so all share one seed. Writes ``report.json``,
    ``report.txt`` and ``metrics.png`` under ``out_dir/<suite>``.
    """
    settings = suite_settings(suite)
    out = Path(out_dir) / suite
    train = build_manifest(root, train_split, size=config.size)
    test = build_manifest(root, test_split, size=config.size)
    for res in (train, test):
        if res.errors:
            raise ArgumentError(f"dataset has invalid samples:\n{res.error_report()}")
    train_batch = load_batch(root, train.manifest, config.size)
    test_batch = load_batch(root, test.manifest, config.size)
    ref_dir = write_references(test_batch, out / "reference")
    extractor = RandomConvExtractor()
    rows = []
    for label, overrides in settings:
        cfg = config.with_overrides(overrides)
        run_dir = out / _slug(label)
        warp_ck = None
        if cfg.ablation.use_flow_warp:
            warp_ck = train_warp(train_batch, cfg, run_dir).path
        gen_ck = train_generation(train_batch, cfg, run_dir, warp_ck)
        _, prov = infer(test_batch, cfg, gen_ck.path, warp_ck, seed=cfg.run.seed, out_dir=run_dir / "images")
        report = evaluate_pairs(run_dir / "images", ref_dir, test.manifest, "paired", "both", extractor,
                                fingerprint=prov["gen_checkpoint"])
        rows.append(AblationRow(label, overrides, cfg.run.seed, report))
    table = format_table([(r.label, r.report) for r in rows], label="Settings")
    payload = {"suite": suite, "settings": [
        {"label": r.label, "overrides": r.overrides, "seed": r.seed, **r.report.to_dict()} for r in rows]}
    json_path = out / "report.json"
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(table + "\n")
    fig = plot_metric_bars([(r.label, r.report) for r in rows], out / "metrics.png", title=suite)
    return AblationResult(suite, rows, table, json_path, fig)
