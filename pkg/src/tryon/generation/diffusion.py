"""DDPM forward process, noise-prediction loss, condition dropout, guided sampling.

A noise predictor is any callable ``eps_model(x_t, t, cond) -> eps`` where
``cond`` is a :class:`Conditions`. The noisy latent ``x_t`` takes the place
of ``z`` in the condition stack.
"""

from dataclasses import dataclass, replace

import torch

from ..errors import ArgumentError, DimensionError


@dataclass(frozen=True)
class DiffusionSchedule:
    betas: torch.Tensor

    def __post_init__(self):
        b = self.betas.double()
        if b.dim() != 1 or len(b) < 1:
            raise ArgumentError("betas must be a non-empty 1-D tensor")
        if torch.any(b <= 0) or torch.any(b >= 1):
            raise ArgumentError("every beta must lie in (0, 1)")
        if torch.any(b[1:] < b[:-1]):
            raise ArgumentError("betas must be non-decreasing")
        ac = self.alphas_cumprod
        if torch.any(ac[1:] >= ac[:-1]) or ac[0] > 1 or ac[-1] <= 0:
            raise ArgumentError("cumulative alphas must decrease strictly inside (0, 1]")

    @classmethod
    def linear(cls, steps, beta_start=1e-4, beta_end=0.02):
        return cls(torch.linspace(beta_start, beta_end, steps, dtype=torch.float64))

    @property
    def T(self):
        return len(self.betas)

    @property
    def alphas(self):
        return 1.0 - self.betas.double()

    @property
    def alphas_cumprod(self):
        return torch.cumprod(self.alphas, dim=0)

    def respaced(self, steps):
        """Schedule over ``steps`` equally strided timesteps of this one.

        Returns:
            ``(schedule, timesteps)`` where ``timesteps[i]`` is the original
            index the model was trained with for respaced step ``i``.
        """
        if not 1 <= steps <= self.T:
            raise ArgumentError(f"sampling steps must be in [1, {self.T}], got {steps}")
        if steps == self.T:
            return self, torch.arange(self.T)
        # equal strides keep the respaced betas non-decreasing
        stride = self.T // steps
        idx = (torch.arange(steps) + 1) * stride - 1
        ac = self.alphas_cumprod[idx]
        prev = torch.cat([torch.ones(1, dtype=torch.float64), ac[:-1]])
        return DiffusionSchedule(1.0 - ac / prev), idx

    def posterior_variance(self, t):
        ac = self.alphas_cumprod
        prev = ac[t - 1] if t > 0 else torch.tensor(1.0, dtype=torch.float64)
        return self.betas.double()[t] * (1 - prev) / (1 - ac[t])


def _per_sample(values, t, x):
    v = values[t].to(x.dtype)
    return v.view(-1, *([1] * (x.dim() - 1))) if v.dim() else v


def _check_t(t, schedule):
    tt = torch.as_tensor(t)
    if torch.any(tt < 0) or torch.any(tt >= schedule.T):
        raise ArgumentError(f"timestep out of range [0, {schedule.T})")
    return tt


def add_noise(x0, t, noise, schedule):
    """``sqrt(abar_t) * x0 + sqrt(1 - abar_t) * noise``; ``t`` scalar or (B,)."""
    if noise.shape != x0.shape:
        raise DimensionError("noise and x0 shapes differ")
    t = _check_t(t, schedule)
    ac = schedule.alphas_cumprod
    return _per_sample(ac.sqrt(), t, x0) * x0 + _per_sample((1 - ac).sqrt(), t, x0) * noise


@dataclass
class Conditions:
    """Everything the noise predictor sees besides ``x_t`` and ``t``."""

    e_warp: torch.Tensor
    e_agnostic: torch.Tensor
    mask: torch.Tensor
    pose: torch.Tensor
    text: torch.Tensor
    text_mask: torch.Tensor

    @property
    def batch(self):
        return self.e_warp.shape[0]

    def nulled(self, null_text, drop_text=True, drop_warp=True, drop_pose=True):
        """Copy with the selected conditions replaced by their null values.

        ``drop_*`` may be booleans or (B,) boolean tensors.
        """
        B = self.batch

        def sel(flag, ref):
            f = torch.as_tensor(flag, device=ref.device).reshape(-1).expand(B)
            return f.view(B, *([1] * (ref.dim() - 1)))

        null_seq = null_text.to(self.text.dtype).view(1, 1, -1).expand_as(self.text)
        dt = sel(drop_text, self.text)
        return replace(
            self,
            e_warp=torch.where(sel(drop_warp, self.e_warp), torch.zeros_like(self.e_warp), self.e_warp),
            pose=torch.where(sel(drop_pose, self.pose), torch.zeros_like(self.pose), self.pose),
            text=torch.where(dt, null_seq, self.text),
            text_mask=self.text_mask | dt.view(B, 1),
        )


def diffusion_loss(eps_model, x0, cond, schedule, generator=None, t=None, noise=None):
    """Mean squared error between the sampled noise and its prediction.

    ``t`` is drawn uniformly from ``[0, T)`` and ``noise`` from N(0, I)
    using ``generator`` unless given explicitly.
    """
    B = x0.shape[0]
    if t is None:
        t = torch.randint(0, schedule.T, (B,), generator=generator)
    t = _check_t(t, schedule).reshape(-1).expand(B)
    if noise is None:
        noise = torch.randn(x0.shape, generator=generator, dtype=x0.dtype)
    x_t = add_noise(x0, t, noise, schedule)
    pred = eps_model(x_t, t, cond)
    if pred.shape != noise.shape:
        raise DimensionError(f"prediction {tuple(pred.shape)} vs noise {tuple(noise.shape)}")
    return ((noise - pred) ** 2).mean()


def mask_conditions(cond, null_text, p=0.2, generator=None):
    """Independently null text, warped garment and pose with probability ``p``.

    Returns:
        ``(masked_conditions, drops)`` where ``drops`` maps each condition
        name to a (B,) boolean tensor.
    """
    if not 0.0 <= p <= 1.0:
        raise ArgumentError(f"drop probability must be in [0, 1], got {p}")
    B = cond.batch
    u = torch.rand(3, B, generator=generator, dtype=torch.float64)
    drops = {"text": u[0] < p, "warp": u[1] < p, "pose": u[2] < p}
    masked = cond.nulled(null_text, drops["text"], drops["warp"], drops["pose"])
    return masked, drops


def guided_predict(eps_model, x_t, t, cond, uncond, scale):
    """Two-pass classifier-free guidance: ``s * eps_c + (1 - s) * eps_u``.

    Written this way round so ``s = 1`` returns the conditional pass and
    ``s = 0`` the unconditional pass bit for bit.
    """
    eps_c = eps_model(x_t, t, cond)
    eps_u = eps_model(x_t, t, uncond)
    return scale * eps_c + (1.0 - scale) * eps_u


@torch.no_grad()
def sample(eps_model, cond, uncond, schedule, scale=1.0, generator=None, decoder=None, latent_shape=None,
           timesteps=None):
    """Ancestral DDPM sampling with guided noise predictions.

    Args:
        cond, uncond: conditional and fully-nulled :class:`Conditions`.
        latent_shape: defaults to (B, 4, h, w) of ``cond.e_agnostic``.
        decoder: optional latent decoder; when given the decoded image is
            returned alongside the latent.
        timesteps: model timestep for each step of a respaced schedule.
    """
    shape = latent_shape or tuple(cond.e_agnostic.shape)
    dtype = cond.e_agnostic.dtype
    x = torch.randn(shape, generator=generator, dtype=dtype)
    alphas = schedule.alphas
    ac = schedule.alphas_cumprod
    betas = schedule.betas.double()
    for t in range(schedule.T - 1, -1, -1):
        model_t = t if timesteps is None else int(timesteps[t])
        tt = torch.full((shape[0],), model_t, dtype=torch.long)
        eps = guided_predict(eps_model, x, tt, cond, uncond, scale)
        coef = (betas[t] / (1 - ac[t]).sqrt()).to(dtype)
        x = (x - coef * eps) / alphas[t].sqrt().to(dtype)
        if t > 0:
            noise = torch.randn(shape, generator=generator, dtype=dtype)
            x = x + schedule.posterior_variance(t).sqrt().to(dtype) * noise
    if decoder is None:
        return x
    fn = decoder.decode if hasattr(decoder, "decode") else decoder
    return x, fn(x)
