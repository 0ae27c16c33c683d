import numpy as np
import pytest
import torch

from attrgan.config import ModelConfig, TrainConfig

torch.use_deterministic_algorithms(True)


def tiny_model_config(**overrides) -> ModelConfig:
    """16x16, every channel width <= 8; cheap enough for gradient checks."""
    defaults = dict(image_size=16, width_base=2, latent_channels=8,
                    fusion_channels=8, moment_hidden=8, num_scales=2)
    defaults.update(overrides)
    return ModelConfig(**defaults)


def tiny_train_config(**overrides) -> TrainConfig:
    defaults = dict(steps=5, batch_size=8, seed=7, checkpoint_interval=100,
                    model=tiny_model_config())
    defaults.update(overrides)
    return TrainConfig(**defaults)


@pytest.fixture
def tiny_config() -> ModelConfig:
    return tiny_model_config()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def random_images(batch: int, size: int, seed: int = 0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(batch, 3, size, size, generator=gen) * 2 - 1


def random_labels(batch: int, n: int = 4, seed: int = 0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return torch.randint(0, 2, (batch, n), generator=gen).float()
