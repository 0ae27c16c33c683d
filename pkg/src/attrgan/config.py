"""Model and training configuration with JSON round-tripping."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class ModelConfig:
    """Architecture hyperparameters shared by every network.

    Channel widths and the number of discriminator scales are not fixed by the
    method itself; the defaults here are the recorded desk-scale choices.
    """

    image_size: int = 32
    num_attributes: int = 4
    width_base: int = 16            # first conv stage width; doubles per stage, capped at 4x
    latent_channels: int = 32       # channels of each of l_a and l_b at the bottleneck
    fusion_channels: int = 32       # channels of r_a / r_b fed to the fusion decoder
    num_scales: int = 3             # m: image-discriminator scale taps
    num_stages: int = 5             # conv stages in encoder and image discriminator
    moment_hidden: int = 64         # hidden width of the mean/variance stacks

    def __post_init__(self) -> None:
        if not _is_power_of_two(self.image_size) or self.image_size < 16:
            raise ValueError(f"image_size must be a power of two >= 16, got {self.image_size}")
        if self.num_attributes < 1:
            raise ValueError("num_attributes must be >= 1")
        if self.num_scales < 1 or self.num_scales > self.num_stages:
            raise ValueError(
                f"num_scales must be in [1, {self.num_stages}], got {self.num_scales}"
            )
        for name in ("width_base", "latent_channels", "fusion_channels", "moment_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def num_downsamples(self) -> int:
        """Stride-2 stages; clamped so the bottleneck keeps spatial size >= 1."""
        return min(self.num_stages, self.image_size.bit_length() - 1)

    @property
    def bottleneck_size(self) -> int:
        return self.image_size >> self.num_downsamples

    @property
    def stage_widths(self) -> tuple[int, ...]:
        w = self.width_base
        return tuple(min(w * 2 ** i, 4 * w) for i in range(self.num_stages))


@dataclass(frozen=True)
class TrainConfig:
    """Optimization schedule. Optimizer defaults follow the training recipe
    (Adam, lr 2e-4, betas 0.5/0.999)."""

    steps: int = 9000
    batch_size: int = 32
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    seed: int = 0
    checkpoint_interval: int = 1000
    weight_recon: float = 10.0
    weight_adv_g: float = 1.0
    weight_adv_u: float = 1.0
    weight_adv_a: float = 1.0
    weight_cls_a: float = 2.0
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self) -> None:
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        for name in ("batch_size", "checkpoint_interval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("learning_rate", "beta1", "beta2"):
            if not 0 < getattr(self, name) < 1 and name != "learning_rate":
                raise ValueError(f"{name} must lie in (0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def loss_weights(self) -> dict[str, float]:
        return {
            "recon": self.weight_recon,
            "adv_g": self.weight_adv_g,
            "adv_u": self.weight_adv_u,
            "adv_a": self.weight_adv_a,
            "cls_a": self.weight_cls_a,
        }


def train_config_to_dict(cfg: TrainConfig) -> dict:
    return asdict(cfg)


def train_config_from_dict(data: dict) -> TrainConfig:
    data = dict(data)
    model = data.pop("model", {})
    return TrainConfig(model=ModelConfig(**model), **data)


def load_train_config(path: str | Path) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return train_config_from_dict(json.load(fh))


def save_train_config(cfg: TrainConfig, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(train_config_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")
