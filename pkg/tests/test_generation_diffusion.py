import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from tryon.errors import ArgumentError, DimensionError
from tryon.generation import (Conditions, DiffusionSchedule, GenerationConfig, GenerationModel,
                              add_noise, caption_for_mode, diffusion_loss, guided_predict,
                              mask_conditions, sample)

CAPTION = "a slim blue striped top with round neck, mid neckline, short sleeve, normal length"


def conditions(B=2, h=2, w=3, n=5, d=4, seed=0):
    gen = torch.Generator().manual_seed(seed)
    r = lambda *s: torch.randn(*s, generator=gen)  # noqa: E731
    return Conditions(r(B, 4, h, w), r(B, 4, h, w), torch.ones(B, 1, h, w), r(B, 3, h, w), r(B, n, d),
                      torch.ones(B, n, dtype=torch.bool))


class TestSchedule:
    def test_linear_default(self):
        s = DiffusionSchedule.linear(1000)
        ac = s.alphas_cumprod
        assert torch.all(ac[1:] < ac[:-1]) and 0 < ac[-1] < ac[0] <= 1
        assert s.betas[0].item() == pytest.approx(1e-4) and s.betas[-1].item() == pytest.approx(0.02)

    def test_invalid(self):
        with pytest.raises(ArgumentError):
            DiffusionSchedule(torch.tensor([0.1, 0.05]))
        with pytest.raises(ArgumentError):
            DiffusionSchedule(torch.tensor([0.0, 0.1]))
        with pytest.raises(ArgumentError):
            DiffusionSchedule(torch.tensor([]))

    @pytest.mark.parametrize("steps", [1, 7, 10, 25, 50])
    def test_respacing_keeps_alpha_bar(self, steps):
        s = DiffusionSchedule.linear(50)
        r, idx = s.respaced(steps)
        assert r.T == steps
        assert torch.allclose(r.alphas_cumprod, s.alphas_cumprod[idx])

    def test_respace_range(self):
        with pytest.raises(ArgumentError):
            DiffusionSchedule.linear(10).respaced(11)


class TestAddNoise:
    def test_small_beta_limit(self):
        s = DiffusionSchedule(torch.tensor([1e-12, 0.1], dtype=torch.float64))
        x0 = torch.randn(3, 4, dtype=torch.float64)
        assert torch.allclose(add_noise(x0, 0, torch.randn(3, 4, dtype=torch.float64), s), x0, atol=1e-5)

    def test_zero_signal(self):
        s = DiffusionSchedule.linear(20)
        eps = torch.randn(2, 4, 3, 3, dtype=torch.float64)
        out = add_noise(torch.zeros_like(eps), 7, eps, s)
        assert torch.allclose(out, (1 - s.alphas_cumprod[7]).sqrt() * eps)

    def test_monte_carlo_variance(self):
        s = DiffusionSchedule.linear(50)
        gen = torch.Generator().manual_seed(0)
        t = 30
        x0 = torch.randn(10000, generator=gen, dtype=torch.float64) * 2.0
        eps = torch.randn(10000, generator=gen, dtype=torch.float64)
        ab = float(s.alphas_cumprod[t])
        expected = ab * float(x0.var()) + (1 - ab)
        assert float(add_noise(x0, t, eps, s).var()) == pytest.approx(expected, rel=0.05)

    def test_errors(self):
        s = DiffusionSchedule.linear(5)
        with pytest.raises(ArgumentError):
            add_noise(torch.zeros(2), 5, torch.zeros(2), s)
        with pytest.raises(DimensionError):
            add_noise(torch.zeros(2), 0, torch.zeros(3), s)

    @settings(max_examples=30, deadline=None)
    @given(t=st.integers(0, 49), a=st.floats(-3, 3), b=st.floats(-3, 3), seed=st.integers(0, 1000))
    def test_linear_in_signal_and_noise(self, t, a, b, seed):
        s = DiffusionSchedule.linear(50)
        g = torch.Generator().manual_seed(seed)
        x1, x2, e1, e2 = (torch.randn(2, 3, generator=g, dtype=torch.float64) for _ in range(4))
        lhs = add_noise(a * x1 + b * x2, t, a * e1 + b * e2, s)
        rhs = a * add_noise(x1, t, e1, s) + b * add_noise(x2, t, e2, s)
        assert lhs.shape == x1.shape
        assert torch.allclose(lhs, rhs, atol=1e-10)


class TestLoss:
    def setup_method(self):
        self.s = DiffusionSchedule.linear(50)
        self.x0 = torch.randn(3, 4, 2, 2, dtype=torch.float64)

    def test_oracle_predictor_zero(self):
        noise = torch.randn_like(self.x0)
        oracle = lambda x_t, t, c: noise  # noqa: E731
        assert diffusion_loss(oracle, self.x0, None, self.s, noise=noise).item() == 0.0

    @pytest.mark.parametrize("c", [0.1, -0.7, 2.5])
    def test_constant_offset(self, c):
        noise = torch.randn_like(self.x0)
        loss = diffusion_loss(lambda x_t, t, cond: noise + c, self.x0, None, self.s, noise=noise)
        assert loss.item() == pytest.approx(c * c, abs=1e-7)

    def test_matches_straight_line_oracle(self):
        gen = torch.Generator().manual_seed(4)
        t = torch.tensor([3, 17, 42])
        noise = torch.randn(self.x0.shape, generator=gen, dtype=torch.float64)
        w = torch.randn(4, generator=gen, dtype=torch.float64)
        model = lambda x_t, tt, c: x_t * w.view(1, 4, 1, 1) + tt.view(-1, 1, 1, 1) * 0.01  # noqa: E731
        loss = diffusion_loss(model, self.x0, None, self.s, t=t, noise=noise)
        ab = np.cumprod(1 - np.linspace(1e-4, 0.02, 50))
        x0, n, wn = self.x0.numpy(), noise.numpy(), w.numpy()
        total = 0.0
        for i, ti in enumerate(t.tolist()):
            xt = np.sqrt(ab[ti]) * x0[i] + np.sqrt(1 - ab[ti]) * n[i]
            pred = xt * wn[:, None, None] + ti * 0.01
            total += ((n[i] - pred) ** 2).sum()
        assert loss.item() == pytest.approx(total / x0.size, abs=1e-7)

    def test_scalar_predictor_gradient(self, fd, rel_err):
        theta = torch.tensor([0.3], dtype=torch.float64, requires_grad=True)
        noise = torch.randn_like(self.x0)
        t = torch.tensor([5, 20, 45])

        def value():
            return diffusion_loss(lambda x_t, tt, c: theta * x_t, self.x0, None, self.s, t=t, noise=noise)
        value().backward()
        with torch.no_grad():
            numeric = fd(value, theta)
        assert rel_err(theta.grad, numeric) < 1e-3

    def test_seeded_draws_are_reproducible(self):
        m = lambda x_t, t, c: x_t * 0.5  # noqa: E731
        a = diffusion_loss(m, self.x0, None, self.s, generator=torch.Generator().manual_seed(1))
        b = diffusion_loss(m, self.x0, None, self.s, generator=torch.Generator().manual_seed(1))
        assert a.item() == b.item()


class TestConditionDropout:
    def test_p_zero_identity(self):
        c = conditions()
        masked, drops = mask_conditions(c, torch.zeros(4), p=0.0)
        assert not any(d.any() for d in drops.values())
        for f in ("e_warp", "pose", "text", "text_mask"):
            assert torch.equal(getattr(masked, f), getattr(c, f))

    def test_p_one_nulls_everything(self):
        c = conditions()
        null = torch.arange(4.0)
        masked, drops = mask_conditions(c, null, p=1.0)
        assert all(d.all() for d in drops.values())
        assert torch.all(masked.e_warp == 0) and torch.all(masked.pose == 0)
        assert torch.equal(masked.text, null.expand_as(c.text))
        assert torch.equal(masked.e_agnostic, c.e_agnostic)

    def test_invalid_p(self):
        with pytest.raises(ArgumentError):
            mask_conditions(conditions(), torch.zeros(4), p=1.5)

    def test_rate_over_ten_thousand_trials(self):
        c = conditions(B=10000, h=1, w=1, n=1, d=1)
        _, drops = mask_conditions(c, torch.zeros(1), p=0.2, generator=torch.Generator().manual_seed(0))
        for name, d in drops.items():
            assert abs(d.double().mean().item() - 0.2) <= 0.012, name

    def test_drops_are_independent(self):
        c = conditions(B=20000, h=1, w=1, n=1, d=1)
        _, drops = mask_conditions(c, torch.zeros(1), p=0.5, generator=torch.Generator().manual_seed(1))
        both = (drops["text"] & drops["pose"]).double().mean().item()
        assert both == pytest.approx(0.25, abs=0.015)


class TestGuidance:
    def model(self, x_t, t, cond):
        return x_t * 0.3 + cond.e_warp.mean() + cond.text.mean()

    def test_scale_one_and_zero_bit_exact(self):
        c = conditions()
        u = c.nulled(torch.zeros(4))
        x = torch.randn(2, 4, 2, 3)
        t = torch.zeros(2, dtype=torch.long)
        assert torch.equal(guided_predict(self.model, x, t, c, u, 1.0), self.model(x, t, c))
        assert torch.equal(guided_predict(self.model, x, t, c, u, 0.0), self.model(x, t, u))

    def test_linear_formula(self):
        out = guided_predict(lambda x, t, c: torch.full((1,), float(c)), None, None, 1, 0, 2.0)
        assert out.item() == 2.0

    def test_always_two_passes(self):
        calls = []
        guided_predict(lambda x, t, c: calls.append(c) or torch.zeros(1), None, None, "c", "u", 3.0)
        assert calls == ["c", "u"]


class TestSample:
    def test_single_step_closed_form(self):
        s = DiffusionSchedule(torch.tensor([0.3], dtype=torch.float64))
        c = conditions()
        c.e_agnostic = c.e_agnostic.double()
        out = sample(lambda x, t, cc: torch.zeros_like(x), c, c, s, scale=1.0,
                     generator=torch.Generator().manual_seed(9))
        z = torch.randn(c.e_agnostic.shape, generator=torch.Generator().manual_seed(9), dtype=torch.float64)
        assert torch.allclose(out, z / np.sqrt(0.7), atol=1e-12)

    def test_two_step_closed_form(self):
        betas = torch.tensor([0.1, 0.2], dtype=torch.float64)
        s = DiffusionSchedule(betas)
        c = conditions(B=1)
        c.e_agnostic = c.e_agnostic.double()
        eps_value = 0.5
        out = sample(lambda x, t, cc: torch.full_like(x, eps_value), c, c, s,
                     generator=torch.Generator().manual_seed(2))
        g = torch.Generator().manual_seed(2)
        x = torch.randn(c.e_agnostic.shape, generator=g, dtype=torch.float64)
        a = 1 - betas
        ab = torch.cumprod(a, 0)
        x = (x - betas[1] / (1 - ab[1]).sqrt() * eps_value) / a[1].sqrt()
        var = betas[1] * (1 - ab[0]) / (1 - ab[1])
        x = x + var.sqrt() * torch.randn(c.e_agnostic.shape, generator=g, dtype=torch.float64)
        x = (x - betas[0] / (1 - ab[0]).sqrt() * eps_value) / a[0].sqrt()
        assert torch.allclose(out, x, atol=1e-12)

    def test_seeded_and_decoded(self):
        torch.manual_seed(0)
        model = GenerationModel(GenerationConfig(d_text=8, visual_dim=8, mapper_hidden=8, text_blocks=1,
                                                 visual_blocks=1, denoiser_base=8, time_dim=8))
        img = torch.rand(1, 3, 64, 48)
        with torch.no_grad():
            cond = model.conditions(img, img, img, torch.ones(1, 1, 64, 48), img, [CAPTION])
        unc = model.unconditional(cond)
        s = DiffusionSchedule.linear(4)
        runs = [sample(model, cond, unc, s, 2.0, torch.Generator().manual_seed(5), model.autoencoder)
                for _ in range(2)]
        assert torch.equal(runs[0][0], runs[1][0])
        assert runs[0][0].shape == (1, 4, 8, 6)
        assert runs[0][1].shape == (1, 3, 64, 48)


class TestModel:
    def tiny(self, mode="structured"):
        return GenerationModel(GenerationConfig(d_text=8, visual_dim=8, mapper_hidden=8, text_blocks=1,
                                                visual_blocks=1, denoiser_base=8, time_dim=8), mode)

    def test_caption_modes(self):
        assert caption_for_mode(CAPTION, "structured") == CAPTION
        assert caption_for_mode(CAPTION, "raw") != CAPTION
        assert caption_for_mode(CAPTION, "none") == ""
        with pytest.raises(ArgumentError):
            caption_for_mode(CAPTION, "fancy")

    def test_text_mode_none_uses_null_row(self):
        m = self.tiny("none")
        emb, mask = m.caption_tokens([CAPTION, CAPTION])
        assert torch.equal(emb[0, 0], m.null_text.detach())
        assert mask.sum().item() == 2

    def test_condition_shapes_and_frozen_parts(self):
        m = self.tiny()
        img = torch.rand(2, 3, 64, 48)
        c = m.conditions(img, img, img, torch.ones(2, 1, 64, 48), img, [CAPTION] * 2)
        assert c.text.shape == (2, 16 + 32, 8)
        assert c.e_warp.shape == (2, 4, 8, 6) and c.mask.shape == (2, 1, 8, 6) and c.pose.shape == (2, 3, 8, 6)
        trainable = {n.split(".")[0] for n, p in m.named_parameters() if p.requires_grad}
        assert trainable == {"mapper", "null_text", "denoiser"}

    def test_predict_noise_shape(self):
        m = self.tiny()
        img = torch.rand(1, 3, 64, 48)
        c = m.conditions(img, img, img, torch.ones(1, 1, 64, 48), img, [CAPTION])
        eps = m(torch.randn(1, 4, 8, 6), torch.tensor([3]), c)
        assert eps.shape == (1, 4, 8, 6)
