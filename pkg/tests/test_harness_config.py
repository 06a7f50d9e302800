import pytest
from hypothesis import given, settings, strategies as st

from tryon.errors import ArgumentError, ProvenanceError
from tryon.harness import (desk_preset, file_hash, from_text, full_preset, load_checkpoint, load_config,
                           save_checkpoint, warp_fingerprint, warp_lr)
from tryon.harness.config import NON_SEMANTIC, flatten


class TestWarpSchedule:
    @pytest.mark.parametrize("epoch,expected", [(0, 5e-5), (49, 5e-5), (50, 5e-5), (75, 2.5e-5), (100, 0.0)])
    def test_breakpoints(self, epoch, expected):
        assert warp_lr(epoch, 5e-5, 100, 50) == pytest.approx(expected, abs=1e-20)

    @settings(max_examples=50, deadline=None)
    @given(e=st.integers(50, 99))
    def test_linear_after_decay(self, e):
        step = warp_lr(e, 5e-5, 100, 50) - warp_lr(e + 1, 5e-5, 100, 50)
        assert step == pytest.approx(5e-5 / 50, rel=1e-9)


class TestConfig:
    def test_full_preset_hyperparameters(self):
        c = full_preset()
        assert (c.warp.lr, c.warp.beta1, c.warp.beta2, c.warp.epochs, c.warp.decay_start) == (5e-5, 0.5, 0.999, 100, 50)
        assert (c.warp.lambda_perceptual, c.warp.lambda_smooth_first, c.warp.lambda_smooth_second) == (0.2, 0.01, 6.0)
        assert (c.mapper.steps, c.mapper.lr, c.mapper.beta1, c.mapper.beta2, c.mapper.weight_decay) == (
            150000, 1e-5, 0.9, 0.999, 0.01)
        assert (c.denoiser.steps, c.denoiser.dropout) == (150000, 0.2)
        assert c.size == (512, 384)
        assert (c.data.batch_size, c.data.augmentation, c.data.clip_norm) == (4, False, 1.0)

    def test_text_round_trip(self):
        for c in (full_preset(), desk_preset()):
            assert from_text(c.to_text()) == c
            assert from_text(c.to_text()).to_text() == c.to_text()

    def test_load_with_file_and_overrides(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[warp]\nlr = 0.01\n[ablation]\ntext_mode = \"raw\"\n")
        c = load_config(path, "desk", ["warp.epochs=70", "ablation.pyramid_deformable=true"])
        assert (c.warp.lr, c.warp.epochs, c.ablation.text_mode, c.ablation.pyramid_deformable) == (
            0.01, 70, "raw", True)

    def test_invalid_values(self):
        with pytest.raises(ArgumentError):
            desk_preset().with_overrides({"warp.lr": -1.0})
        with pytest.raises(ArgumentError):
            desk_preset().with_overrides({"ablation.text_mode": "verbose"})
        with pytest.raises(ArgumentError):
            desk_preset().with_overrides({"warp.nonsense": 1})
        with pytest.raises(ArgumentError):
            desk_preset().with_overrides({"run.height": 60})
        with pytest.raises(ArgumentError):
            load_config(None, "huge")
        with pytest.raises(ArgumentError):
            load_config(None, "desk", ["warp.lr"])

    def test_dropout_bounds_inclusive(self):
        for p in (0.0, 1.0):
            assert desk_preset().with_overrides({"denoiser.dropout": p}).denoiser.dropout == p
        for p in (-0.1, 1.5):
            with pytest.raises(ArgumentError):
                desk_preset().with_overrides({"denoiser.dropout": p})

    def test_fingerprint_tracks_semantic_fields(self):
        base = desk_preset()
        fp = base.fingerprint()
        assert fp == desk_preset().fingerprint()
        for key, value in flatten(base).items():
            if isinstance(value, bool):
                new = not value
            elif isinstance(value, str):
                new = {"ablation.text_mode": "raw"}.get(key, value + "x")
            elif isinstance(value, tuple):
                new = tuple(v + 1 for v in value)
            elif key in ("warp.decay_start", "warp_net.cascade_depth"):
                new = value - 1
            else:
                new = value * 2 if value else 1
            changed = base.with_overrides({key: new}).fingerprint()
            assert (changed == fp) == (key in NON_SEMANTIC), key

    def test_warp_fingerprint_ignores_generation_fields(self):
        base = desk_preset()
        assert warp_fingerprint(base) == warp_fingerprint(base.with_overrides({"denoiser.lr": 0.5}))
        assert warp_fingerprint(base) != warp_fingerprint(base.with_overrides({"warp.lr": 0.5}))
        assert warp_fingerprint(base) != warp_fingerprint(base.with_overrides({"ablation.pyramid_deformable": True}))


class TestCheckpoint:
    def test_round_trip_and_provenance(self, tmp_path):
        path = save_checkpoint({"kind": "warp", "fingerprint": "abc", "x": [1, 2]}, tmp_path / "c.pt")
        assert load_checkpoint(path, "warp", "abc")["x"] == [1, 2]
        assert len(file_hash(path)) == 64
        with pytest.raises(ProvenanceError):
            load_checkpoint(path, "warp", "def")
        with pytest.raises(ProvenanceError):
            load_checkpoint(path, "generation")
        assert not list(tmp_path.glob("*.tmp*"))
