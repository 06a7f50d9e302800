import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from tryon.errors import DimensionError
from tryon.warp import DeformConv2d, deformable_conv, standard_conv


def test_zero_offsets_match_standard_conv_100_cases():
    # float64 so the comparison measures the algorithm, not float32 summation order
    gen = torch.Generator().manual_seed(0)
    worst = 0.0
    for _ in range(100):
        c_in = int(torch.randint(1, 5, (1,), generator=gen))
        c_out = int(torch.randint(1, 5, (1,), generator=gen))
        x = torch.randn(2, c_in, 8, 8, generator=gen, dtype=torch.float64)
        w = torch.randn(c_out, c_in, 3, 3, generator=gen, dtype=torch.float64)
        b = torch.randn(c_out, generator=gen, dtype=torch.float64)
        off = torch.zeros(2, 18, 8, 8, dtype=torch.float64)
        worst = max(worst, float((deformable_conv(x, off, w, b) - standard_conv(x, w, b)).abs().max()))
    assert worst < 1e-6


def test_zero_offsets_float32_within_roundoff():
    gen = torch.Generator().manual_seed(0)
    x = torch.randn(4, 3, 8, 8, generator=gen)
    w = torch.randn(5, 3, 3, 3, generator=gen)
    out = deformable_conv(x, torch.zeros(4, 18, 8, 8), w)
    ref = standard_conv(x, w)
    assert float((out - ref).abs().max()) < 1e-5 * float(ref.abs().max())


def test_constant_input_interior_is_nine_c():
    c = 0.7
    x = torch.full((1, 1, 9, 9), c, dtype=torch.float64)
    w = torch.ones(1, 1, 3, 3, dtype=torch.float64)
    gen = torch.Generator().manual_seed(1)
    # shifts under 1 px keep every tap of the interior 5x5 block in bounds
    off = (torch.rand(1, 18, 9, 9, generator=gen, dtype=torch.float64) - 0.5) * 1.8
    out = deformable_conv(x, off, w)
    assert torch.allclose(out[0, 0, 2:-2, 2:-2], torch.full((5, 5), 9 * c, dtype=torch.float64),
                          atol=1e-12)


def test_single_tap_offset_hits_bilinear_midpoint():
    ramp = torch.arange(16, dtype=torch.float64).view(1, 1, 4, 4)  # value 4*row + col
    w = torch.zeros(1, 1, 3, 3, dtype=torch.float64)
    w[0, 0, 1, 1] = 1.0  # centre tap only
    off = torch.zeros(1, 18, 4, 4, dtype=torch.float64)
    centre = 4
    off[0, 2 * centre, 1, 1] = 0.5  # horizontal shift of the centre tap at (1, 1)
    out = deformable_conv(ramp, off, w)
    # (row 1, col 1.5) -> midpoint of 5 and 6
    assert out[0, 0, 1, 1].item() == pytest.approx(0.5 * (5 + 6))
    assert out[0, 0, 2, 2].item() == 10.0


def test_offset_beyond_border_reads_zero():
    x = torch.ones(1, 1, 3, 3)
    w = torch.zeros(1, 1, 3, 3)
    w[0, 0, 1, 1] = 1.0
    off = torch.zeros(1, 18, 3, 3)
    off[:, 8] = 10.0
    assert torch.all(deformable_conv(x, off, w) == 0)


def test_shape_errors():
    x = torch.randn(1, 2, 5, 5)
    w = torch.randn(3, 2, 3, 3)
    with pytest.raises(DimensionError):
        deformable_conv(x, torch.zeros(1, 18, 4, 5), w)
    with pytest.raises(DimensionError):
        deformable_conv(x, torch.zeros(1, 8, 5, 5), torch.randn(3, 2, 2, 2))
    with pytest.raises(DimensionError):
        deformable_conv(torch.randn(1, 3, 5, 5), torch.zeros(1, 18, 5, 5), w)


@pytest.mark.parametrize("which", ["input", "weight", "offset"])
def test_gradients_match_central_differences(which, fd, rel_err):
    for seed in range(5):
        gen = torch.Generator().manual_seed(seed)
        x = torch.randn(1, 2, 5, 5, generator=gen, dtype=torch.float64)
        w = torch.randn(2, 2, 3, 3, generator=gen, dtype=torch.float64)
        # keep sample points away from integer grid lines where bilinear is not smooth
        off = (torch.rand(1, 18, 5, 5, generator=gen, dtype=torch.float64) * 0.6 + 0.2)
        target = {"input": x, "weight": w, "offset": off}[which]
        target.requires_grad_(True)
        deformable_conv(x, off, w).pow(2).sum().backward()
        with torch.no_grad():
            numeric = fd(lambda: deformable_conv(x, off, w).pow(2).sum(), target)
        assert rel_err(target.grad, numeric) < 1e-3


def test_fresh_layer_is_standard_conv():
    torch.manual_seed(0)
    layer = DeformConv2d(3, 4)
    x = torch.randn(2, 3, 6, 7)
    ref = standard_conv(x, layer.weight, layer.bias)
    assert torch.allclose(layer(x), ref, atol=1e-6)


@settings(max_examples=25, deadline=None)
@given(h=st.integers(3, 9), w=st.integers(3, 9), seed=st.integers(0, 2**16))
def test_zero_offset_equivalence_any_size(h, w, seed):
    gen = torch.Generator().manual_seed(seed)
    x = torch.randn(1, 2, h, w, generator=gen)
    k = torch.randn(3, 2, 3, 3, generator=gen)
    out = deformable_conv(x, torch.zeros(1, 18, h, w), k)
    assert np.abs((out - standard_conv(x, k)).numpy()).max() < 1e-5
