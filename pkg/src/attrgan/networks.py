"""The seven parameterized maps: encoder, three decoders, three discriminators.

Layer recipe: the encoder and the image discriminator use Conv-BatchNorm-
LeakyReLU stages; the decoders use Deconv-InstanceNorm-ReLU stages. Batch
normalization uses batch statistics in train mode and frozen running
statistics in infer mode, which makes every forward op a pure per-sample
function of (params, inputs) at inference time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .config import ModelConfig
from .errors import ConfigurationError, ContractViolation

LEAKY_SLOPE = 0.2
SCORE_EPS = 1e-6  # keeps sigmoid outputs strictly inside (0, 1) in float32


@dataclass
class LatentPair:
    """Encoder output: attribute map l_a, background map l_b, U-Net skips."""

    l_a: torch.Tensor                 # (B, C_a, h, w)
    l_b: torch.Tensor                 # (B, C_b, h, w)
    skips: list[torch.Tensor]


@dataclass
class MultiScaleOutput:
    """Per-scale realness scores d_i with aggregation weights gamma_i."""

    d: list[torch.Tensor]             # each (B,), values in (0, 1)
    gamma: list[float]

    def __post_init__(self) -> None:
        if len(self.d) != len(self.gamma):
            raise ContractViolation("scores and weights must have equal length")
        if abs(sum(self.gamma) - 1.0) > 1e-6:
            raise ContractViolation(f"scale weights must sum to 1, got {sum(self.gamma)!r}")

    def aggregate(self) -> torch.Tensor:
        """Weighted per-sample score sum; stays in (0, 1) because the weights
        form a convex combination of (0, 1) scores."""
        return sum(w * s for w, s in zip(self.gamma, self.d))


@dataclass
class AttributePrediction:
    """Per-attribute presence probabilities from the classification head."""

    c: torch.Tensor                   # (B, n), entries in (0, 1)


def validate_images(images: torch.Tensor, config: ModelConfig) -> None:
    if images.ndim != 4 or images.shape[1] != 3:
        raise ContractViolation(f"expected image batch (B, 3, H, W), got {tuple(images.shape)}")
    b, _, h, w = images.shape
    if b < 1 or h != config.image_size or w != config.image_size:
        raise ContractViolation(
            f"expected {config.image_size}x{config.image_size} images, got {h}x{w} (B={b})"
        )
    finite = torch.isfinite(images).view(b, -1).all(dim=1)
    if not bool(finite.all()):
        bad = int((~finite).nonzero()[0].item())
        raise ContractViolation(f"non-finite pixels in batch index {bad}")
    if bool((images.abs() > 1.0).any()):
        bad = int((images.abs() > 1.0).view(b, -1).any(dim=1).nonzero()[0].item())
        raise ContractViolation(f"pixels outside [-1, 1] in batch index {bad}")


def validate_labels(labels: torch.Tensor, config: ModelConfig) -> None:
    if labels.ndim != 2 or labels.shape[1] != config.num_attributes:
        raise ContractViolation(
            f"expected labels (B, {config.num_attributes}), got {tuple(labels.shape)}"
        )
    if not bool(((labels == 0) | (labels == 1)).all()):
        raise ContractViolation("labels must be binary")


def images_to_tensor(images: np.ndarray) -> torch.Tensor:
    """(B, H, W, 3) or (H, W, 3) float arrays in [-1, 1] -> (B, 3, H, W) tensor."""
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))


def tensor_to_images(batch: torch.Tensor) -> np.ndarray:
    """(B, 3, H, W) tensor -> (B, H, W, 3) float32 array."""
    return batch.detach().cpu().numpy().transpose(0, 2, 3, 1)


def labels_to_tensor(labels: np.ndarray) -> torch.Tensor:
    arr = np.asarray(labels, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[None]
    return torch.from_numpy(arr)


def _conv_block(c_in: int, c_out: int, stride: int) -> nn.Sequential:
    kernel, pad = (4, 1) if stride == 2 else (3, 1)
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, kernel, stride=stride, padding=pad),
        nn.BatchNorm2d(c_out),
        nn.LeakyReLU(LEAKY_SLOPE),
    )


def _deconv_block(c_in: int, c_out: int, norm: str = "instance") -> nn.Sequential:
    layers = [nn.ConvTranspose2d(c_in, c_out, 4, stride=2, padding=1)]
    if norm == "instance":
        layers.append(nn.InstanceNorm2d(c_out, affine=True))
    elif norm == "batch":
        layers.append(nn.BatchNorm2d(c_out))
    elif norm != "none":
        raise ValueError(f"unknown norm kind {norm!r}")
    layers.append(nn.ReLU())
    return nn.Sequential(*layers)


class Encoder(nn.Module):
    """Five conv stages; two 1x1 heads split the trunk into l_a and l_b.

    The l_b head is tanh-bounded so the background latent lives on the
    support of its uniform prior. Stage outputs before the bottleneck are
    returned as U-Net skips.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        widths = config.stage_widths
        downs = config.num_downsamples
        stages = []
        c_in = 3
        for i, c_out in enumerate(widths):
            stages.append(_conv_block(c_in, c_out, stride=2 if i < downs else 1))
            c_in = c_out
        self.stages = nn.ModuleList(stages)
        self.head_a = nn.Conv2d(c_in, config.latent_channels, 1)
        self.head_b = nn.Conv2d(c_in, config.latent_channels, 1)

    def forward(self, images: torch.Tensor) -> LatentPair:
        h = images
        skips = []
        for i, stage in enumerate(self.stages):
            h = stage(h)
            if i < len(self.stages) - 1:
                skips.append(h)
        return LatentPair(l_a=self.head_a(h), l_b=torch.tanh(self.head_b(h)), skips=skips)


class MomentStack(nn.Module):
    """Label -> spatial map shaped like l_a, via two 1x1 conv layers."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.net = nn.Sequential(
            nn.Conv2d(config.num_attributes, config.moment_hidden, 1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(config.moment_hidden, config.latent_channels, 1),
        )
        self.spatial = config.bottleneck_size

    def forward(self, labels: torch.Tensor) -> torch.Tensor:
        grid = labels[:, :, None, None].expand(-1, -1, self.spatial, self.spatial)
        return self.net(grid)


def _upsample_plan(config: ModelConfig) -> list[int]:
    """Output channels of each deconv stage from the bottleneck up to H/2."""
    n_up = config.num_downsamples - 1
    return list(reversed(config.stage_widths))[1:][:n_up]


class AttributeDecoder(nn.Module):
    """Maps the label-modulated attribute latent to the representation r_a.

    Owns the two stacks producing the label-conditioned mean and raw variance;
    the variance is passed through softplus with a small floor so it stays
    strictly positive for every label and parameter value.

    The stack is norm-free: instance normalization is invariant to per-channel
    scale, which would erase the transfer-intensity signal this decoder exists
    to express. The first two upsamplings are a single fully-connected
    projection so the label signal lands with uniform strength across the
    whole map; a transposed-conv pyramid from a 1x1 seed starves the image
    periphery of gradient.
    """

    VAR_FLOOR = 1e-4

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.mean_stack = MomentStack(config)
        self.var_stack = MomentStack(config)
        plan = _upsample_plan(config)
        b = config.bottleneck_size
        w = config.width_base
        self._fc_channels = 4 * w
        self._fc_spatial = b * 2 ** min(2, len(plan))
        self.fc = nn.Linear(config.latent_channels * b * b,
                            self._fc_channels * self._fc_spatial ** 2)
        ups = []
        c_in = self._fc_channels
        for i in range(max(0, len(plan) - 2)):
            c_out = max(4 * w >> i, w)
            ups.append(_deconv_block(c_in, c_out, norm="none"))
            c_in = c_out
        self.ups = nn.ModuleList(ups)
        self.out = nn.Conv2d(c_in, config.fusion_channels, 1)

    def moments(self, labels: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        validate_labels(labels, self.config)
        mean = self.mean_stack(labels)
        variance = nn.functional.softplus(self.var_stack(labels)) + self.VAR_FLOOR
        return mean, variance

    def body(self, modulated: torch.Tensor) -> torch.Tensor:
        h = torch.relu(self.fc(modulated.flatten(1)))
        h = h.view(-1, self._fc_channels, self._fc_spatial, self._fc_spatial)
        for up in self.ups:
            h = up(h)
        return self.out(h)


class BackgroundDecoder(nn.Module):
    """U-Net decoder over l_b, consuming encoder skips at matching sizes."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        downs = config.num_downsamples
        skip_sizes = [config.image_size >> min(i + 1, downs) for i in range(config.num_stages - 1)]
        skip_chans = list(config.stage_widths[:-1])
        self._skip_sizes = skip_sizes

        c_in = config.latent_channels
        size = config.bottleneck_size
        self._pre_concat = [i for i, s in enumerate(skip_sizes) if s == size]
        c_in += sum(skip_chans[i] for i in self._pre_concat)

        ups = []
        self._post_concat: list[list[int]] = []
        for c_out in _upsample_plan(config):
            ups.append(_deconv_block(c_in, c_out))
            size *= 2
            matching = [i for i, s in enumerate(skip_sizes) if s == size]
            self._post_concat.append(matching)
            c_in = c_out + sum(skip_chans[i] for i in matching)
        self.ups = nn.ModuleList(ups)
        self.out = nn.Conv2d(c_in, config.fusion_channels, 1)

    def forward(self, latent: LatentPair) -> torch.Tensor:
        skips = latent.skips
        if len(skips) != self.config.num_stages - 1:
            raise ConfigurationError(
                f"expected {self.config.num_stages - 1} skip tensors, got {len(skips)}"
            )
        for i, (skip, size) in enumerate(zip(skips, self._skip_sizes)):
            if skip.shape[-1] != size:
                raise ConfigurationError(
                    f"skip {i} has spatial size {skip.shape[-1]}, expected {size}"
                )
        h = latent.l_b
        for i in self._pre_concat:
            h = torch.cat([h, skips[i]], dim=1)
        for up, matching in zip(self.ups, self._post_concat):
            h = up(h)
            for i in matching:
                h = torch.cat([h, skips[i]], dim=1)
        return self.out(h)


class FusionDecoder(nn.Module):
    """Sums the two representations and decodes to a [-1, 1] image.

    A full-resolution refinement conv follows the upsampling; without it the
    half-resolution representations cannot place pixel-sharp detail. The
    upsampling uses batch rather than instance normalization: instance
    statistics strip the per-sample mean brightness, capping reconstruction
    at the dataset's average exposure, while batch statistics let it pass.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        width = 2 * config.width_base
        self.up = _deconv_block(config.fusion_channels, width, norm="batch")
        self.refine = nn.Sequential(nn.Conv2d(width, width, 3, padding=1), nn.ReLU())
        self.out = nn.Conv2d(width, 3, 3, padding=1)

    def forward(self, r_a: torch.Tensor, r_b: torch.Tensor) -> torch.Tensor:
        if r_a.shape != r_b.shape:
            raise ContractViolation(
                f"representation shapes differ: {tuple(r_a.shape)} vs {tuple(r_b.shape)}"
            )
        return torch.tanh(self.out(self.refine(self.up(r_a + r_b))))


class LatentDiscriminator(nn.Module):
    """Two 1x1 conv blocks plus a fully-connected score.

    Deliberately norm-free: a batch-normalized discriminator standardizes
    each incoming batch and therefore cannot penalize the very mean/variance
    mismatch it exists to detect.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        width = 4 * config.width_base
        self.blocks = nn.Sequential(
            nn.Conv2d(config.latent_channels, width, 1),
            nn.LeakyReLU(LEAKY_SLOPE),
            nn.Conv2d(width, width, 1),
            nn.LeakyReLU(LEAKY_SLOPE),
        )
        self.fc = nn.Linear(width * config.bottleneck_size ** 2, 1)
        self._expected_spatial = config.bottleneck_size

    def forward(self, sample: torch.Tensor) -> torch.Tensor:
        if sample.ndim != 4 or sample.shape[-1] != self._expected_spatial:
            raise ContractViolation(
                f"expected latent map (B, C, {self._expected_spatial}, {self._expected_spatial}),"
                f" got {tuple(sample.shape)}"
            )
        h = self.blocks(sample)
        score = torch.sigmoid(self.fc(h.flatten(1))).squeeze(1)
        return score.clamp(SCORE_EPS, 1.0 - SCORE_EPS)


class ImageDiscriminator(nn.Module):
    """Conv trunk with per-scale realness scores and an attribute head.

    Realness scores are tapped after each of the last `num_scales` stages
    (pooled, linear, sigmoid); the deepest stage additionally feeds the
    fully-connected attribute classification branch.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        if config.num_scales > config.num_stages:
            raise ConfigurationError(
                f"num_scales {config.num_scales} exceeds available depths {config.num_stages}"
            )
        widths = config.stage_widths
        downs = config.num_downsamples
        stages = []
        c_in = 3
        for i, c_out in enumerate(widths):
            stages.append(_conv_block(c_in, c_out, stride=2 if i < downs else 1))
            c_in = c_out
        self.stages = nn.ModuleList(stages)
        tap_start = config.num_stages - config.num_scales
        self._tap_start = tap_start
        self.score_heads = nn.ModuleList(
            nn.Linear(widths[i], 1) for i in range(tap_start, config.num_stages)
        )
        self.cls_head = nn.Linear(widths[-1], config.num_attributes)

    def forward(self, images: torch.Tensor) -> tuple[MultiScaleOutput, AttributePrediction]:
        validate_images(images, self.config)
        gamma = [1.0 / self.config.num_scales] * self.config.num_scales
        scores = []
        h = images
        head_iter = iter(self.score_heads)
        for i, stage in enumerate(self.stages):
            h = stage(h)
            if i >= self._tap_start:
                pooled = h.mean(dim=(2, 3))
                score = torch.sigmoid(next(head_iter)(pooled)).squeeze(1)
                scores.append(score.clamp(SCORE_EPS, 1.0 - SCORE_EPS))
        pooled = h.mean(dim=(2, 3))
        c = torch.sigmoid(self.cls_head(pooled)).clamp(SCORE_EPS, 1.0 - SCORE_EPS)
        return MultiScaleOutput(d=scores, gamma=gamma), AttributePrediction(c=c)


class AttributeTransferModel(nn.Module):
    """All seven networks plus the forward-evaluation contracts.

    In infer mode every op is a deterministic pure function of (params,
    inputs); train mode mutates normalization statistics and must be
    serialized by the caller.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.encoder = Encoder(config)
        self.attribute_decoder = AttributeDecoder(config)
        self.background_decoder = BackgroundDecoder(config)
        self.fusion_decoder = FusionDecoder(config)
        self.gaussian_disc = LatentDiscriminator(config)
        self.uniform_disc = LatentDiscriminator(config)
        self.image_disc = ImageDiscriminator(config)

    def _set_mode(self, mode: str) -> None:
        if mode not in ("train", "infer"):
            raise ContractViolation(f"mode must be 'train' or 'infer', got {mode!r}")
        self.train(mode == "train")

    GENERATOR_NETS = ("encoder", "attribute_decoder", "background_decoder", "fusion_decoder")
    DISCRIMINATOR_NETS = ("gaussian_disc", "uniform_disc", "image_disc")

    def _named_parameters_of(self, net_names) -> list[tuple[str, nn.Parameter]]:
        prefixes = tuple(f"{n}." for n in net_names)
        return [(name, p) for name, p in self.named_parameters() if name.startswith(prefixes)]

    def generator_named_parameters(self) -> list[tuple[str, nn.Parameter]]:
        return self._named_parameters_of(self.GENERATOR_NETS)

    def discriminator_named_parameters(self) -> list[tuple[str, nn.Parameter]]:
        return self._named_parameters_of(self.DISCRIMINATOR_NETS)

    def generator_parameters(self):
        return [p for _, p in self.generator_named_parameters()]

    def discriminator_parameters(self):
        return [p for _, p in self.discriminator_named_parameters()]

    def encode(self, images: torch.Tensor, mode: str = "infer") -> LatentPair:
        validate_images(images, self.config)
        self._set_mode(mode)
        return self.encoder(images)

    def decode_background(self, latent: LatentPair, mode: str = "infer") -> torch.Tensor:
        self._set_mode(mode)
        return self.background_decoder(latent)

    def decode_fuse(self, r_a: torch.Tensor, r_b: torch.Tensor, mode: str = "infer") -> torch.Tensor:
        self._set_mode(mode)
        return self.fusion_decoder(r_a, r_b)

    def discriminate_latent_gaussian(self, sample: torch.Tensor, mode: str = "infer") -> torch.Tensor:
        self._set_mode(mode)
        return self.gaussian_disc(sample)

    def discriminate_latent_uniform(self, sample: torch.Tensor, mode: str = "infer") -> torch.Tensor:
        self._set_mode(mode)
        return self.uniform_disc(sample)

    def discriminate_image(self, images: torch.Tensor, mode: str = "infer"):
        self._set_mode(mode)
        return self.image_disc(images)


def init_parameters(model: nn.Module, generator: torch.Generator) -> None:
    """Normal(0, 0.02) conv/linear weights, zero biases; norm scales
    Normal(1, 0.02). Draw order follows module registration order."""
    for module in model.modules():
        if isinstance(module, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            module.weight.data.normal_(0.0, 0.02, generator=generator)
            if module.bias is not None:
                module.bias.data.zero_()
        elif isinstance(module, (nn.BatchNorm2d, nn.InstanceNorm2d)):
            if module.weight is not None:
                module.weight.data.normal_(1.0, 0.02, generator=generator)
            if module.bias is not None:
                module.bias.data.zero_()


def build_model(config: ModelConfig, seed: int = 0) -> AttributeTransferModel:
    gen = torch.Generator().manual_seed(seed)
    model = AttributeTransferModel(config)
    init_parameters(model, gen)
    model.eval()
    return model
