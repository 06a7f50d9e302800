import math

import pytest
import torch
from hypothesis import given, settings, strategies as st

from tryon.errors import ArgumentError, DimensionError
from tryon.warp import (FlowHead, PyramidExtractor, WarpNetConfig, WarpNetwork, extract_pyramid,
                        local_correlation, predict_flow_residual, run_cascade)


def small_config(**kw):
    base = dict(channels=(4, 4, 4), cascade_depth=3, corr_radius=1, head_width=8)
    base.update(kw)
    return WarpNetConfig(**base)


def inputs(h=16, w=12, seed=0, batch=1):
    gen = torch.Generator().manual_seed(seed)
    garment = torch.rand(batch, 3, h, w, generator=gen)
    mask = (torch.rand(batch, 1, h, w, generator=gen) > 0.3).float()
    agnostic = torch.rand(batch, 3, h, w, generator=gen)
    pose = torch.rand(batch, 3, h, w, generator=gen)
    parse = torch.randint(0, 13, (batch, h, w), generator=gen)
    return garment, mask, agnostic, pose, parse


class TestPyramid:
    def test_full_resolution_five_levels(self):
        ext = PyramidExtractor(3, (2, 2, 2, 2, 2))
        with torch.no_grad():
            pyr = ext(torch.zeros(1, 3, 512, 384))
        assert pyr.sizes == [(512, 384), (256, 192), (128, 96), (64, 48), (32, 24)]

    def test_zero_image_gives_zero_pyramid(self):
        torch.manual_seed(0)
        ext = PyramidExtractor(3, (4, 4, 4), deformable=True)
        with torch.no_grad():
            pyr = ext(torch.zeros(1, 3, 16, 16))
        assert all(torch.all(level == 0) for level in pyr.levels)

    def test_seeded_rerun_matches(self):
        def run():
            torch.manual_seed(7)
            ext = PyramidExtractor(3, (4, 4))
            x = torch.rand(1, 3, 16, 16, generator=torch.Generator().manual_seed(1))
            return ext(x)
        a, b = run(), run()
        assert a.sizes == [(16, 16), (8, 8)]
        assert all(torch.equal(x, y) for x, y in zip(a.levels, b.levels))

    def test_conditioning_concatenated_before_level_zero(self):
        torch.manual_seed(0)
        ext = PyramidExtractor(3 + 3 + 13, (4, 4))
        img = torch.rand(1, 3, 8, 8)
        pose = torch.rand(1, 3, 8, 8)
        parse = torch.zeros(1, 8, 8, dtype=torch.long)
        base = extract_pyramid(img, ext, pose, parse)
        parse2 = parse.clone()
        parse2[0, 2:5, 2:5] = 4
        other = extract_pyramid(img, ext, pose, parse2)
        assert not torch.equal(base[1], other[1])

    def test_mismatched_conditioning_size(self):
        ext = PyramidExtractor(6, (4, 4))
        with pytest.raises(DimensionError):
            extract_pyramid(torch.rand(1, 3, 8, 8), ext, torch.rand(1, 3, 8, 6))

    def test_single_level_rejected(self):
        with pytest.raises(ArgumentError):
            PyramidExtractor(3, (4,))


@settings(max_examples=15, deadline=None)
@given(h=st.integers(32, 512), w=st.integers(32, 512))
def test_halving_invariant(h, w):
    ext = PyramidExtractor(1, (1, 1, 1))
    with torch.no_grad():
        sizes = ext(torch.zeros(1, 1, h, w)).sizes
    for (h0, w0), (h1, w1) in zip(sizes, sizes[1:]):
        assert (h1, w1) == (math.ceil(h0 / 2), math.ceil(w0 / 2))


class TestFlowHead:
    def test_zero_init_residual(self):
        head = FlowHead(4, 9, 8)
        out = predict_flow_residual(torch.randn(1, 2, 5, 5), torch.randn(1, 4, 5, 5),
                                    torch.randn(1, 4, 5, 5), torch.randn(1, 9, 5, 5), head)
        assert torch.all(out == 0)

    def test_deterministic(self):
        def run():
            torch.manual_seed(3)
            head = FlowHead(4, 9, 8)
            torch.nn.init.normal_(head.out.weight)
            x = [torch.randn(1, c, 5, 5, generator=torch.Generator().manual_seed(c)) for c in (2, 4, 4, 9)]
            return predict_flow_residual(*x, head)
        assert torch.equal(run(), run())

    def test_size_mismatch(self):
        head = FlowHead(4, 9, 8)
        with pytest.raises(DimensionError):
            predict_flow_residual(torch.zeros(1, 2, 5, 5), torch.zeros(1, 4, 5, 5),
                                  torch.zeros(1, 4, 4, 5), torch.zeros(1, 9, 5, 5), head)

    def test_offset_gradient_matches_central_differences(self, fd, rel_err):
        torch.manual_seed(0)
        head = FlowHead(2, 1, 4).double()
        torch.nn.init.normal_(head.out.weight)
        torch.nn.init.normal_(head.first.offset_conv.weight, std=0.1)
        gen = torch.Generator().manual_seed(1)
        parts = [torch.randn(1, c, 5, 5, generator=gen, dtype=torch.float64) for c in (2, 2, 2, 1)]
        target = head.first.offset_conv.weight

        def value():
            return predict_flow_residual(*parts, head).sum()
        value().backward()
        with torch.no_grad():
            numeric = fd(value, target, indices=range(0, target.numel(), 7))
        analytic = torch.zeros_like(target).view(-1)
        analytic[list(range(0, target.numel(), 7))] = target.grad.view(-1)[::7]
        assert rel_err(analytic, numeric) < 1e-3


class TestCascade:
    def test_depth_one_untrained_is_identity(self):
        torch.manual_seed(0)
        net = WarpNetwork(small_config(cascade_depth=1))
        g, m, a, p, s = inputs()
        with torch.no_grad():
            out = run_cascade(net, g, m, a, p, s)
        assert torch.all(out.flow == 0)
        assert torch.equal(out.warped, g * m)

    def test_depth_exceeding_pyramid(self):
        torch.manual_seed(0)
        net = WarpNetwork(small_config())
        with pytest.raises(ArgumentError):
            run_cascade(net, *inputs(), depth=4)
        with pytest.raises(ArgumentError):
            WarpNetwork(small_config(cascade_depth=4))

    def test_same_seed_bit_identical(self):
        def run():
            torch.manual_seed(5)
            net = WarpNetwork(small_config())
            for head in net.heads:
                torch.nn.init.normal_(head.out.weight, std=0.1)
            with torch.no_grad():
                return net(*inputs(seed=2))
        a, b = run(), run()
        assert torch.equal(a.flow, b.flow) and torch.equal(a.warped, b.warped)

    def test_output_shapes(self):
        torch.manual_seed(0)
        net = WarpNetwork(small_config(pyramid_deformable=True))
        with torch.no_grad():
            out = net(*inputs(h=17, w=11, batch=2))
        assert out.flow.shape == (2, 2, 17, 11)
        assert out.warped.shape == (2, 3, 17, 11)
        assert len(out.flows) == 3
        assert [tuple(f.shape[-2:]) for f in out.flows] == [(5, 3), (9, 6), (17, 11)]

    def test_correlation_channels_follow_radius(self):
        assert local_correlation(torch.zeros(1, 2, 3, 3), torch.zeros(1, 2, 3, 3), 4).shape[1] == 81
