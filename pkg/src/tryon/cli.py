"""Command-line entry point: ``tryon <command> ...``."""

import argparse
import json
import sys
from pathlib import Path

from . import imageio
from .errors import ArgumentError, TryOnError


def _add_config_args(p):
    p.add_argument("--preset", default="desk", choices=("desk", "full"))
    p.add_argument("--config", type=Path, help="key-value (TOML) config file")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one config field, e.g. warp.lr=1e-4")


def _config(args):
    from .harness.config import load_config
    return load_config(args.config, args.preset, args.overrides)


def _batch(args, config):
    from .harness.data import load_batch
    return load_batch(args.root, args.manifest, config.size, getattr(args, "pose", "both"))


def cmd_make_fixtures(args):
    from .fixtures import make_fixture_tree
    make_fixture_tree(args.out, subjects=args.subjects, size=(args.height, args.width), seed=args.seed)
    print(args.out)


def _load_clients(target):
    import importlib
    module, _, attr = target.partition(":")
    if not module or not attr:
        raise ArgumentError(f"--clients must look like module:factory, got {target!r}")
    factory = getattr(importlib.import_module(module), attr)
    primary, fallback = factory()
    return primary, fallback


def cmd_build_dataset(args):
    from .semantics import build_manifest
    clients = None
    if args.caption_source == "clients":
        if not args.clients:
            raise ArgumentError("--caption-source clients needs --clients module:factory")
        clients = _load_clients(args.clients)
    res = build_manifest(args.root, args.split, pairing=args.pairing, workers=args.workers,
                         size=(args.height, args.width), caption_clients=clients)
    res.manifest.write(args.out)
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if res.errors:
        print(res.error_report())
    counts = res.manifest.counts
    print(f"records={len(res.manifest.records)} pose1={counts['1']} pose2={counts['2']} "
          f"errors={len(res.errors)}")
    return 1 if res.errors else 0


def cmd_config(args):
    config = _config(args)
    sys.stdout.write(config.to_text())
    print(f"# fingerprint = {config.fingerprint()}")


def cmd_train_warp(args):
    from .harness.checkpoint import read_log
    from .harness.plotting import plot_loss_curves
    from .harness.training import train_warp
    config = _config(args)
    ck = train_warp(_batch(args, config), config, args.out, resume=args.resume, stop_epoch=args.stop_epoch)
    log = read_log(Path(args.out) / "warp_log.jsonl")
    fig = plot_loss_curves(log, Path(args.out) / "warp_loss.png", keys=("total", "l1"))
    print(json.dumps({"checkpoint": str(ck.path), "epoch": ck.payload["epoch"], "figure": str(fig),
                      "last": ck.history[-1] if ck.history else None}))


def cmd_train_gen(args):
    from .harness.checkpoint import read_log
    from .harness.plotting import plot_loss_curves
    from .harness.training import dropout_rates, train_generation
    config = _config(args)
    ck = train_generation(_batch(args, config), config, args.out, args.warp_ckpt, resume=args.resume,
                          stop_step=args.stop_step)
    log = read_log(Path(args.out) / "generation_log.jsonl")
    fig = plot_loss_curves(log, Path(args.out) / "generation_loss.png")
    out = {"checkpoint": str(ck.path), "phase": ck.payload["phase"], "step": ck.payload["step"],
           "figure": str(fig)}
    if any("dropped" in r for r in log):
        out["dropout_rates"], out["dropout_trials"] = dropout_rates(log)
    print(json.dumps(out))


def cmd_infer(args):
    from .harness.inference import infer
    config = _config(args)
    batch = _batch(args, config)
    if args.record:
        idx = [i for i, n in enumerate(batch.names) if n in args.record]
        batch = batch.select(idx)
    _, prov = infer(batch, config, args.gen_ckpt, args.warp_ckpt, seed=args.seed, steps=args.steps,
                    guidance_scale=args.guidance_scale, out_dir=args.out)
    print(json.dumps(prov, indent=2, sort_keys=True))


def cmd_evaluate(args):
    from .harness.plotting import plot_metric_bars
    from .metrics import evaluate_pairs, format_table
    from .semantics import DatasetManifest
    scope = "both" if args.pose == "both" else f"pose{args.pose}"
    report = evaluate_pairs(args.gen, args.ref, DatasetManifest.read(args.manifest), args.mode, scope)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json() + "\n")
    table = format_table([(Path(args.gen).name, report)])
    (out / "report.txt").write_text(table + "\n")
    plot_metric_bars([(Path(args.gen).name, report)], out / "metrics.png")
    print(table)


def cmd_ablate(args):
    from .harness.ablation import run_ablation
    config = _config(args)
    res = run_ablation(args.suite, config, args.root, args.out)
    print(res.table)
    print(f"report: {res.json_path}\nfigure: {res.figure_path}")


def cmd_grid(args):
    from .harness.grid import emit_grid
    dirs = [Path(d) for d in args.inputs]
    stems = sorted(set.intersection(*({p.stem for p in d.glob("*.png")} for d in dirs)))
    if args.limit:
        stems = stems[:args.limit]
    rows = [[imageio.load_rgb(d / f"{s}.png") for d in dirs] for s in stems]
    headers = args.headers or [d.name for d in dirs]
    print(emit_grid(rows, args.out, headers))


def build_parser():
    parser = argparse.ArgumentParser(prog="tryon", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("make-fixtures", help="write a synthetic dataset tree")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--subjects", type=int, default=4)
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--width", type=int, default=384)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_fixtures)

    p = sub.add_parser("build-dataset", help="validate a split and write its manifest")
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--pairing", default="paired", choices=("paired", "unpaired"))
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--caption-source", default="local", choices=("local", "clients"),
                   help="keep annotated captions or re-caption through remote clients")
    p.add_argument("--clients", metavar="MODULE:FACTORY",
                   help="callable returning (primary, fallback) caption clients")
    p.add_argument("--height", type=int, default=512)
    p.add_argument("--width", type=int, default=384)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("config", help="print the canonical configuration")
    _add_config_args(p)
    p.set_defaults(func=cmd_config)

    for name, func, help_text in (("train-warp", cmd_train_warp, "train the warping network"),
                                  ("train-gen", cmd_train_gen, "train mapper and denoiser")):
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        p.add_argument("--root", type=Path, required=True)
        p.add_argument("--manifest", type=Path, required=True)
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--resume", type=Path)
        if name == "train-warp":
            p.add_argument("--stop-epoch", type=int)
        else:
            p.add_argument("--warp-ckpt", type=Path)
            p.add_argument("--stop-step", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("infer", help="generate try-on images")
    _add_config_args(p)
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--gen-ckpt", type=Path, required=True)
    p.add_argument("--warp-ckpt", type=Path)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--record", action="append", help="restrict to these record names")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int)
    p.add_argument("--guidance-scale", type=float)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("evaluate", help="score generated images against references")
    p.add_argument("--gen", type=Path, required=True)
    p.add_argument("--ref", type=Path, required=True)
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--mode", default="paired", choices=("paired", "unpaired"))
    p.add_argument("--pose", default="both", choices=("1", "2", "both"))
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="run an ablation suite")
    _add_config_args(p)
    p.add_argument("suite", choices=("table3", "table4", "table5"))
    p.add_argument("--root", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("grid", help="tile matching PNGs from several directories")
    p.add_argument("inputs", nargs="+", help="one directory per column")
    p.add_argument("--headers", nargs="*")
    p.add_argument("--limit", type=int, default=0)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_grid)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args) or 0
    except TryOnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
