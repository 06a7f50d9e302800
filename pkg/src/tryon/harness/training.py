"""Training loops for the warping network and the two generation phases.

Both loops are resumable: a checkpoint holds parameters, optimizer state,
position and RNG state, and a resumed run reproduces the uninterrupted one
exactly.
"""

from dataclasses import dataclass
from pathlib import Path

import torch

from ..errors import ArgumentError
from ..features import RandomConvExtractor
from ..generation import DiffusionSchedule, GenerationConfig, GenerationModel, diffusion_loss, mask_conditions
from ..generation.latent import encode_latent
from ..warp import WarpNetConfig, WarpNetwork, warp_training_loss
from .checkpoint import JsonlLog, file_hash, load_checkpoint, save_checkpoint
from .config import from_text, warp_fingerprint

GEN_PHASES = ("mapper", "denoiser", "done")


def warp_lr(epoch, base_lr, epochs, decay_start):
    """Constant until ``decay_start``, then linear to zero at ``epochs``."""
    if not 0 <= epoch <= epochs:
        raise ArgumentError(f"epoch {epoch} outside [0, {epochs}]")
    if epoch <= decay_start or epochs == decay_start:
        return base_lr
    return base_lr * (epochs - epoch) / (epochs - decay_start)


def warp_net_config(config):
    wn = config.warp_net
    return WarpNetConfig(channels=tuple(wn.channels), cascade_depth=wn.cascade_depth,
                         corr_radius=wn.corr_radius, head_width=wn.head_width, alpha=wn.alpha,
                         beta=wn.beta, pyramid_deformable=config.ablation.pyramid_deformable,
                         flow_deformable=config.ablation.flow_deformable)


def generation_config(config):
    m = config.model
    return GenerationConfig(d_text=m.d_text, max_text=m.max_text, visual_dim=m.visual_dim,
                            visual_blocks=m.visual_blocks, mapper_hidden=m.mapper_hidden,
                            text_blocks=m.text_blocks, denoiser_base=m.denoiser_base,
                            time_dim=m.time_dim, seed=config.run.seed)


def schedule_for(config):
    d = config.denoiser
    return DiffusionSchedule.linear(d.timesteps, d.beta_start, d.beta_end)


def _seeded(seed, build):
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return build()


def build_warp_network(config):
    return _seeded(config.run.seed, lambda: WarpNetwork(warp_net_config(config)))


def build_generation_model(config):
    return _seeded(config.run.seed, lambda: GenerationModel(generation_config(config),
                                                             config.ablation.effective_text_mode))


@dataclass
class Checkpoint:
    path: Path
    payload: dict

    @property
    def hash(self):
        return file_hash(self.path)

    @property
    def history(self):
        return self.payload["history"]


def _epoch_order(seed, epoch, n):
    gen = torch.Generator().manual_seed(seed * 1_000_003 + epoch)
    return torch.randperm(n, generator=gen)


def _warp_step(net, batch, config, extractor):
    out = net(batch.garment, batch.garment_mask, batch.agnostic, batch.dense_pose, batch.parse)
    w = config.warp
    return warp_training_loss(out.warped, batch.target_garment, out.flows, w.lambda_perceptual,
                              w.lambda_smooth_first, w.lambda_smooth_second, extractor)


def train_warp(batch, config, out_dir, resume=None, stop_epoch=None):
    """Train the warping network on a :class:`Batch` of samples.

    Args:
        resume: checkpoint path to continue from; its fingerprint must match.
        stop_epoch: stop (and checkpoint) after this many epochs in total.

    Returns:
        :class:`Checkpoint` written to ``out_dir/warp.pt``.
    """
    if len(batch) == 0:
        raise ArgumentError("empty training set")
    out_dir = Path(out_dir)
    w, seed = config.warp, config.run.seed
    fp = warp_fingerprint(config)
    net = build_warp_network(config)
    opt = torch.optim.Adam(net.parameters(), lr=w.lr, betas=(w.beta1, w.beta2))
    extractor = RandomConvExtractor()
    start, step, history = 0, 0, []
    if resume is not None:
        ck = load_checkpoint(resume, "warp", fp)
        net.load_state_dict(ck["state"])
        opt.load_state_dict(ck["optimizer"])
        start, step, history = ck["epoch"], ck["step"], list(ck["history"])
    log = JsonlLog(out_dir / "warp_log.jsonl")
    end = w.epochs if stop_epoch is None else min(stop_epoch, w.epochs)
    bs = min(config.data.batch_size, len(batch))
    n = len(batch)
    for epoch in range(start, end):
        lr = warp_lr(epoch, w.lr, w.epochs, w.decay_start)
        for group in opt.param_groups:
            group["lr"] = lr
        order = _epoch_order(seed, epoch, n)
        per_epoch = w.steps_per_epoch or -(-n // bs)
        sums = {}
        for k in range(per_epoch):
            idx = [order[(k * bs + j) % n] for j in range(bs)]
            loss = _warp_step(net, batch.select(idx), config, extractor)
            opt.zero_grad(set_to_none=True)
            loss.total.backward()
            torch.nn.utils.clip_grad_norm_(net.parameters(), config.data.clip_norm)
            opt.step()
            step += 1
            terms = loss.terms()
            for key, v in terms.items():
                sums[key] = sums.get(key, 0.0) + v
            if step % config.run.log_every == 0:
                log.write({"phase": "warp", "epoch": epoch, "step": step, "lr": lr, "seed": seed, **terms})
        history.append({"epoch": epoch, "lr": lr, **{k: v / per_epoch for k, v in sums.items()}})
    payload = {"kind": "warp", "state": net.state_dict(), "optimizer": opt.state_dict(), "epoch": end,
               "step": step, "fingerprint": fp, "config": config.to_text(), "history": history,
               "rng": torch.get_rng_state()}
    path = save_checkpoint(payload, out_dir / "warp.pt")
    return Checkpoint(path, payload)


def load_warp_network(path, config=None):
    """Rebuild a trained warping network; checks the fingerprint when ``config`` is given."""
    ck = load_checkpoint(path, "warp", None if config is None else warp_fingerprint(config))
    cfg = config or from_text(ck["config"])
    net = build_warp_network(cfg)
    net.load_state_dict(ck["state"])
    return net.eval()


@torch.no_grad()
def warped_garments(batch, config, warp_checkpoint=None, training=True):
    """Garment condition images for the generator.

    With the warping network enabled, the garment is warped by the trained
    network. Without it, training uses the person's own garment region and
    inference uses the unwarped garment.
    """
    if config.ablation.use_flow_warp:
        if warp_checkpoint is None:
            raise ArgumentError("a warp checkpoint is required when the warping network is enabled")
        net = load_warp_network(warp_checkpoint, config)
        return net(batch.garment, batch.garment_mask, batch.agnostic, batch.dense_pose, batch.parse).warped
    if training:
        return batch.target_garment
    return batch.garment * batch.garment_mask


def _conditions(model, batch, warped):
    return model.conditions(batch.garment, warped, batch.agnostic, batch.region, batch.dense_pose,
                            batch.captions)


def _phase_setup(model, phase, config):
    model.requires_grad_(False)
    if phase == "mapper":
        params = list(model.mapper.parameters())
        s = config.mapper
    else:
        params = list(model.denoiser.parameters()) + [model.null_text]
        s = config.denoiser
    for p in params:
        p.requires_grad_(True)
    opt = torch.optim.AdamW(params, lr=s.lr, betas=(s.beta1, s.beta2), weight_decay=s.weight_decay)
    return params, opt, s.steps


def train_generation(batch, config, out_dir, warp_checkpoint=None, resume=None, stop_step=None):
    """Two phases: the pseudo-word mapper, then the denoiser under condition dropout.

    The mapper phase minimises the diffusion loss with the denoiser frozen
    and no dropout. The denoiser phase trains the denoiser and the null text
    row with text, warped garment and pose dropped independently.

    Args:
        stop_step: stop after this many optimisation steps in total
            (both phases counted), writing a resumable checkpoint.

    Returns:
        :class:`Checkpoint` written to ``out_dir/generation.pt``.
    """
    if len(batch) == 0:
        raise ArgumentError("empty training set")
    out_dir = Path(out_dir)
    seed = config.run.seed
    fp = config.fingerprint()
    warp_hash = file_hash(warp_checkpoint) if warp_checkpoint is not None else None
    warped = warped_garments(batch, config, warp_checkpoint, training=True)
    model = build_generation_model(config)
    autoencoder = model.autoencoder
    x0 = encode_latent(batch.person, autoencoder)
    schedule = schedule_for(config)
    gen = torch.Generator().manual_seed(seed)
    phase, phase_step, total, history, opt_state = "mapper", 0, 0, [], None
    if resume is not None:
        ck = load_checkpoint(resume, "generation", fp)
        if ck["warp_checkpoint"] != warp_hash:
            raise ArgumentError("resume checkpoint was trained from a different warp checkpoint")
        model.load_state_dict(ck["state"])
        phase, phase_step, total = ck["phase"], ck["phase_step"], ck["step"]
        history, opt_state = list(ck["history"]), ck["optimizer"]
        gen.set_state(ck["generator"])
    log = JsonlLog(out_dir / "generation_log.jsonl")
    bs = min(config.data.batch_size, len(batch))
    p_drop = config.denoiser.dropout
    opt = None
    while phase != "done" and (stop_step is None or total < stop_step):
        params, opt, steps = _phase_setup(model, phase, config)
        if opt_state is not None:
            opt.load_state_dict(opt_state)
            opt_state = None
        while phase_step < steps and (stop_step is None or total < stop_step):
            idx = torch.randperm(len(batch), generator=gen)[:bs]
            sub = batch.select(idx)
            cond = _conditions(model, sub, warped[idx])
            record = {"phase": phase, "step": total + 1, "phase_step": phase_step + 1, "seed": seed}
            if phase == "denoiser":
                cond, drops = mask_conditions(cond, model.null_text, p_drop, gen)
                record["dropped"] = {k: v.int().tolist() for k, v in drops.items()}
            loss = diffusion_loss(model, x0[idx], cond, schedule, gen)
            opt.zero_grad(set_to_none=True)
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, config.data.clip_norm)
            opt.step()
            phase_step += 1
            total += 1
            record["loss"] = loss.item()
            record["lr"] = opt.param_groups[0]["lr"]
            history.append({k: record[k] for k in ("phase", "step", "loss")})
            if total % config.run.log_every == 0:
                log.write(record)
        if phase_step >= steps:
            phase = GEN_PHASES[GEN_PHASES.index(phase) + 1]
            phase_step = 0
            opt = None
    model.requires_grad_(False)
    payload = {"kind": "generation", "state": model.state_dict(), "phase": phase, "phase_step": phase_step,
               "step": total, "optimizer": None if opt is None else opt.state_dict(),
               "generator": gen.get_state(), "fingerprint": fp, "warp_checkpoint": warp_hash,
               "config": config.to_text(), "history": history}
    path = save_checkpoint(payload, out_dir / "generation.pt")
    return Checkpoint(path, payload)


def load_generation_model(path, config):
    ck = load_checkpoint(path, "generation", config.fingerprint())
    model = build_generation_model(config)
    model.load_state_dict(ck["state"])
    return model.eval(), ck


def dropout_rates(log_records):
    """Empirical per-condition drop rates from denoiser-phase log records."""
    counts, trials = {}, 0
    for rec in log_records:
        if "dropped" not in rec:
            continue
        for key, flags in rec["dropped"].items():
            counts[key] = counts.get(key, 0) + sum(flags)
        trials += len(next(iter(rec["dropped"].values())))
    if trials == 0:
        raise ArgumentError("no denoiser-phase records in the log")
    return {k: v / trials for k, v in counts.items()}, trials
