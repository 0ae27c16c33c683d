"""Label-conditioned reparameterization of the attribute latent and the
controllable transfer pipeline.

The attribute latent is remapped as theta * (l_a * v + m), where the mean m
and variance v are generated from the target label and theta in [0, 1] sets
the transfer intensity (1.0 during training; an inference-time knob
otherwise). theta = 0 therefore erases all attribute signal and makes the
output independent of the target label.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ContractViolation
from .networks import AttributeTransferModel, LatentPair, validate_images, validate_labels


@dataclass(frozen=True)
class TransferControl:
    """Transfer intensity; values above 1 are rejected, not extrapolated."""

    theta: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ContractViolation(f"theta must lie in [0, 1], got {self.theta}")


@dataclass
class AttributeMoments:
    """Label-conditioned mean and strictly positive variance maps."""

    mean: torch.Tensor
    variance: torch.Tensor


def label_to_moments(model: AttributeTransferModel, labels: torch.Tensor,
                     mode: str = "infer") -> AttributeMoments:
    model._set_mode(mode)
    mean, variance = model.attribute_decoder.moments(labels)
    return AttributeMoments(mean=mean, variance=variance)


def modulate(l_a: torch.Tensor, moments: AttributeMoments,
             control: TransferControl) -> torch.Tensor:
    if l_a.shape != moments.mean.shape or l_a.shape != moments.variance.shape:
        raise ContractViolation(
            f"latent/moment shapes differ: {tuple(l_a.shape)} vs "
            f"{tuple(moments.mean.shape)} / {tuple(moments.variance.shape)}"
        )
    return control.theta * (l_a * moments.variance + moments.mean)


def decode_attribute(model: AttributeTransferModel, l_a: torch.Tensor,
                     labels: torch.Tensor, control: TransferControl,
                     mode: str = "infer") -> torch.Tensor:
    model._set_mode(mode)
    moments = label_to_moments(model, labels, mode=mode)
    return model.attribute_decoder.body(modulate(l_a, moments, control))


def transfer(model: AttributeTransferModel, images: torch.Tensor,
             targets: torch.Tensor, control: TransferControl,
             mode: str = "infer") -> torch.Tensor:
    """Full pipeline: encode, modulate toward the target label, decode."""
    validate_images(images, model.config)
    validate_labels(targets, model.config)
    if targets.shape[0] != images.shape[0]:
        raise ContractViolation(
            f"batch mismatch: {images.shape[0]} images vs {targets.shape[0]} labels"
        )
    latent = model.encode(images, mode=mode)
    return transfer_from_latent(model, latent, targets, control, mode=mode)


def transfer_from_latent(model: AttributeTransferModel, latent: LatentPair,
                         targets: torch.Tensor, control: TransferControl,
                         mode: str = "infer") -> torch.Tensor:
    r_a = decode_attribute(model, latent.l_a, targets, control, mode=mode)
    r_b = model.decode_background(latent, mode=mode)
    return model.decode_fuse(r_a, r_b, mode=mode)
