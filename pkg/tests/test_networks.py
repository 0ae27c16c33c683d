"""Forward contracts: shapes, ranges, determinism, per-sample independence."""

import numpy as np
import pytest
import torch

from attrgan.config import ModelConfig
from attrgan.errors import ConfigurationError, ContractViolation
from attrgan.networks import (
    AttributeTransferModel,
    LatentPair,
    MultiScaleOutput,
    build_model,
    images_to_tensor,
    tensor_to_images,
)
from conftest import random_images, random_labels, tiny_model_config


class TestEncode:
    def test_zero_image_shape_and_finiteness(self):
        model = build_model(ModelConfig(image_size=32), seed=0)
        latent = model.encode(torch.zeros(1, 3, 32, 32), mode="infer")
        assert latent.l_a.shape == (1, model.config.latent_channels, 1, 1)
        assert torch.isfinite(latent.l_a).all() and torch.isfinite(latent.l_b).all()

    def test_deterministic(self, tiny_config):
        model = build_model(tiny_config, seed=1)
        x = random_images(2, 16)
        a = model.encode(x, mode="infer")
        b = model.encode(x, mode="infer")
        assert torch.equal(a.l_a, b.l_a) and torch.equal(a.l_b, b.l_b)

    def test_per_sample_independence(self, tiny_config):
        model = build_model(tiny_config, seed=1)
        x = random_images(2, 16)
        both = model.encode(x, mode="infer")
        one = model.encode(x[:1], mode="infer")
        two = model.encode(x[1:], mode="infer")
        assert torch.allclose(both.l_a[0], one.l_a[0], atol=1e-6)
        assert torch.allclose(both.l_a[1], two.l_a[0], atol=1e-6)
        assert torch.allclose(both.l_b[0], one.l_b[0], atol=1e-6)

    def test_rejects_nonfinite_with_index(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        x = random_images(3, 16)
        x[1, 0, 0, 0] = float("nan")
        with pytest.raises(ContractViolation, match="batch index 1"):
            model.encode(x)

    def test_rejects_out_of_range(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        x = random_images(2, 16)
        x[0, 0, 0, 0] = 1.5
        with pytest.raises(ContractViolation, match="batch index 0"):
            model.encode(x)

    def test_l_b_within_prior_support(self, tiny_config):
        model = build_model(tiny_config, seed=2)
        latent = model.encode(random_images(4, 16), mode="infer")
        assert latent.l_b.abs().max() < 1.0


class TestDecoders:
    def test_background_shape(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        latent = model.encode(random_images(2, 16), mode="infer")
        r_b = model.decode_background(latent)
        assert r_b.shape == (2, tiny_config.fusion_channels, 8, 8)

    def test_background_zero_inputs_deterministic(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        latent = model.encode(torch.zeros(1, 3, 16, 16), mode="infer")
        zero = LatentPair(
            l_a=torch.zeros_like(latent.l_a),
            l_b=torch.zeros_like(latent.l_b),
            skips=[torch.zeros_like(s) for s in latent.skips],
        )
        a = model.decode_background(zero)
        b = model.decode_background(zero)
        assert torch.isfinite(a).all()
        assert torch.equal(a, b)

    def test_background_skip_mismatch(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        latent = model.encode(random_images(1, 16), mode="infer")
        broken = LatentPair(l_a=latent.l_a, l_b=latent.l_b, skips=latent.skips[:-1])
        with pytest.raises(ConfigurationError, match="skip"):
            model.decode_background(broken)

    def test_fuse_additive_symmetry(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        gen = torch.Generator().manual_seed(5)
        r = torch.randn(2, tiny_config.fusion_channels, 8, 8, generator=gen)
        zero = torch.zeros_like(r)
        assert torch.equal(model.decode_fuse(zero, r), model.decode_fuse(r, zero))

    def test_fuse_range_and_determinism(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        gen = torch.Generator().manual_seed(6)
        r_a = torch.randn(2, tiny_config.fusion_channels, 8, 8, generator=gen) * 5
        r_b = torch.randn(2, tiny_config.fusion_channels, 8, 8, generator=gen) * 5
        out = model.decode_fuse(r_a, r_b)
        assert out.shape == (2, 3, 16, 16)
        assert out.abs().max() <= 1.0
        assert torch.equal(out, model.decode_fuse(r_a, r_b))

    def test_fuse_shape_mismatch(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        with pytest.raises(ContractViolation):
            model.decode_fuse(torch.zeros(1, 8, 8, 8), torch.zeros(1, 8, 4, 4))


class TestShapeAlgebra:
    @pytest.mark.parametrize("size", [16, 32, 64])
    def test_full_composition_returns_input_size(self, size):
        config = ModelConfig(image_size=size, width_base=4, latent_channels=8,
                             fusion_channels=8, moment_hidden=8)
        model = build_model(config, seed=0)
        x = random_images(2, size)
        latent = model.encode(x, mode="infer")
        labels = random_labels(2)
        from attrgan.modulation import TransferControl, decode_attribute
        r_a = decode_attribute(model, latent.l_a, labels, TransferControl(1.0))
        r_b = model.decode_background(latent)
        assert r_a.shape == r_b.shape
        out = model.decode_fuse(r_a, r_b)
        assert out.shape == x.shape


class TestLatentDiscriminators:
    def test_fresh_scores_in_open_interval(self, tiny_config):
        model = build_model(tiny_config, seed=3)
        sample = torch.randn(4, tiny_config.latent_channels, 1, 1,
                             generator=torch.Generator().manual_seed(0))
        for fn in (model.discriminate_latent_gaussian, model.discriminate_latent_uniform):
            score = fn(sample)
            assert score.shape == (4,)
            assert (score > 0).all() and (score < 1).all()

    def test_disjoint_parameter_sets(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        g_params = {id(p) for p in model.gaussian_disc.parameters()}
        u_params = {id(p) for p in model.uniform_disc.parameters()}
        assert not g_params & u_params

    def test_batch_equals_per_sample(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        sample = torch.randn(3, tiny_config.latent_channels, 1, 1,
                             generator=torch.Generator().manual_seed(2))
        batch = model.discriminate_latent_gaussian(sample)
        singles = torch.cat([model.discriminate_latent_gaussian(sample[i:i + 1])
                             for i in range(3)])
        assert torch.allclose(batch, singles, atol=1e-6)

    def test_shape_check(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        with pytest.raises(ContractViolation):
            model.discriminate_latent_gaussian(torch.zeros(1, 8, 4, 4))


class TestImageDiscriminator:
    def test_single_scale_reduction(self):
        config = tiny_model_config(num_scales=1)
        model = build_model(config, seed=0)
        ms, _ = model.discriminate_image(random_images(2, 16))
        assert len(ms.d) == 1 and ms.gamma == [1.0]
        assert torch.equal(ms.aggregate(), ms.d[0])

    def test_gamma_uniform_and_normalized(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        ms, _ = model.discriminate_image(random_images(2, 16))
        assert len(ms.gamma) == tiny_config.num_scales
        assert all(g == pytest.approx(1.0 / tiny_config.num_scales) for g in ms.gamma)
        assert sum(ms.gamma) == pytest.approx(1.0)

    def test_prediction_shape_and_range(self, tiny_config):
        model = build_model(tiny_config, seed=0)
        _, pred = model.discriminate_image(random_images(3, 16))
        assert pred.c.shape == (3, tiny_config.num_attributes)
        assert (pred.c > 0).all() and (pred.c < 1).all()

    def test_too_many_scales_rejected(self):
        with pytest.raises(ValueError):
            tiny_model_config(num_scales=6)

    def test_bad_gamma_rejected(self):
        with pytest.raises(ContractViolation):
            MultiScaleOutput(d=[torch.tensor([0.5])], gamma=[0.7])


class TestInitAndConversion:
    def test_init_reproducible(self, tiny_config):
        a = build_model(tiny_config, seed=9)
        b = build_model(tiny_config, seed=9)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_different_seeds_differ(self, tiny_config):
        a = build_model(tiny_config, seed=1)
        b = build_model(tiny_config, seed=2)
        assert any(not torch.equal(pa, pb) for pa, pb in zip(a.parameters(), b.parameters()))

    def test_image_tensor_roundtrip(self, rng):
        images = rng.uniform(-1, 1, size=(2, 16, 16, 3)).astype(np.float32)
        back = tensor_to_images(images_to_tensor(images))
        assert np.array_equal(images, back)

    def test_parameter_collections_cover_model(self, tiny_config):
        model = AttributeTransferModel(tiny_config)
        named = dict(model.named_parameters())
        split = [n for n, _ in model.generator_named_parameters()]
        split += [n for n, _ in model.discriminator_named_parameters()]
        assert sorted(split) == sorted(named)
