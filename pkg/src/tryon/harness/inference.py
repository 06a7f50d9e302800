"""End-to-end try-on inference with provenance records."""

import json
from pathlib import Path

import torch

from .. import imageio
from ..errors import ProvenanceError
from ..generation import decode_latent, sample
from .checkpoint import file_hash
from .training import load_generation_model, schedule_for, warped_garments


def infer(batch, config, gen_checkpoint, warp_checkpoint=None, seed=0, steps=None, guidance_scale=None,
          out_dir=None):
    """Warp, encode conditions, sample and decode for every sample in ``batch``.

    Args:
        steps: sampling steps; defaults to the trained number of timesteps.
        guidance_scale: defaults to ``config.denoiser.guidance_scale``.
        out_dir: when given, writes ``<name>.png`` per sample and
            ``provenance.json``.

    Returns:
        ``(images, provenance)`` with images (B, 3, H, W) in [-1, 1].

    Raises:
        ProvenanceError: a checkpoint does not match ``config`` or the
            generation checkpoint was trained from another warp checkpoint.
    """
    model, ck = load_generation_model(gen_checkpoint, config)
    warp_hash = file_hash(warp_checkpoint) if warp_checkpoint is not None else None
    if config.ablation.use_flow_warp and ck["warp_checkpoint"] != warp_hash:
        raise ProvenanceError("generation checkpoint was trained from a different warp checkpoint")
    schedule = schedule_for(config)
    steps = schedule.T if steps is None else int(steps)
    scale = config.denoiser.guidance_scale if guidance_scale is None else float(guidance_scale)
    sched, timesteps = schedule.respaced(steps)
    with torch.no_grad():
        warped = warped_garments(batch, config, warp_checkpoint, training=False)
        cond = model.conditions(batch.garment, warped, batch.agnostic, batch.region, batch.dense_pose,
                                batch.captions)
        uncond = model.unconditional(cond)
        gen = torch.Generator().manual_seed(int(seed))
        latent = sample(model, cond, uncond, sched, scale, gen, timesteps=timesteps)
        decoded = decode_latent(latent, model.autoencoder).clamp(-1, 1)
        images = batch.region * decoded + (1 - batch.region) * batch.agnostic
    provenance = {
        "gen_checkpoint": file_hash(gen_checkpoint),
        "warp_checkpoint": warp_hash,
        "fingerprint": config.fingerprint(),
        "seed": int(seed),
        "steps": steps,
        "guidance_scale": scale,
        "text_mode": config.ablation.effective_text_mode,
        "resolution": [config.run.width, config.run.height],
        "outputs": [f"{n}.png" for n in batch.names],
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, img in zip(batch.names, images):
            imageio.save_rgb(img, out_dir / f"{name}.png")
        (out_dir / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    return images, provenance


def write_references(batch, out_dir):
    """Write the ground-truth person images under their record names."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, img in zip(batch.names, batch.person):
        imageio.save_rgb(img, out_dir / f"{name}.png")
    return out_dir
