"""The five objective terms and their generator/discriminator variants.

Each adversarial expression is split into a discriminator-minimized loss
(the negated min-max expression) and a generator-minimized loss in the
non-saturating form -E[log D(fake)]. Scores are clipped to [EPS, 1 - EPS]
before every log, so all losses stay finite for score inputs of exactly
0 or 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .errors import ContractViolation, DivergenceError
from .networks import MultiScaleOutput

EPS = 1e-8

COMPONENT_ORDER = ("recon", "adv_g", "adv_u", "adv_a", "cls_a")

DISCRIMINATOR = "discriminator"
GENERATOR = "generator"


@dataclass(frozen=True)
class LossReport:
    """Weighted loss components for one optimization step.

    `total` is the exact left-to-right float sum of the five fields.
    """

    recon: float
    adv_g: float
    adv_u: float
    adv_a: float
    cls_a: float
    total: float
    role: str   # "generator_step" | "discriminator_step"

    def components(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in COMPONENT_ORDER}


@dataclass
class PriorSamples:
    """Reference draws for the latent discriminators."""

    g: torch.Tensor   # standard normal, shaped like l_a
    z: torch.Tensor   # uniform on (-1, 1), shaped like l_b


def sample_priors(shape_a, shape_b, generator: torch.Generator) -> PriorSamples:
    g = torch.empty(shape_a).normal_(0.0, 1.0, generator=generator)
    z = torch.empty(shape_b).uniform_(-1.0, 1.0, generator=generator)
    return PriorSamples(g=g, z=z)


def _check_side(side: str) -> None:
    if side not in (DISCRIMINATOR, GENERATOR):
        raise ContractViolation(f"side must be 'discriminator' or 'generator', got {side!r}")


def _clip(scores: torch.Tensor) -> torch.Tensor:
    # float64: 1 - EPS is not representable in float32, which would turn the
    # clip into a no-op and let log(0) through
    return scores.to(torch.float64).clamp(EPS, 1.0 - EPS)


def recon_loss(output: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute difference over all elements."""
    if output.shape != target.shape:
        raise ContractViolation(
            f"shape mismatch: {tuple(output.shape)} vs {tuple(target.shape)}"
        )
    return (output - target).abs().mean()


def latent_adv_loss(d_real: torch.Tensor, d_fake: torch.Tensor, side: str) -> torch.Tensor:
    _check_side(side)
    if side == DISCRIMINATOR:
        return -(torch.log(_clip(d_real)).mean() + torch.log(1.0 - _clip(d_fake)).mean())
    return -torch.log(_clip(d_fake)).mean()


def multiscale_adv_loss(real: MultiScaleOutput, fake: MultiScaleOutput, side: str) -> torch.Tensor:
    """Same sign conventions as latent_adv_loss, applied to the weighted
    per-sample aggregate of the scale scores."""
    _check_side(side)
    if side == DISCRIMINATOR:
        return -(torch.log(_clip(real.aggregate())).mean()
                 + torch.log(1.0 - _clip(fake.aggregate())).mean())
    return -torch.log(_clip(fake.aggregate())).mean()


def attribute_cls_loss(pred: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Binary cross entropy summed over attributes, averaged over the batch."""
    if pred.shape != labels.shape:
        raise ContractViolation(
            f"shape mismatch: {tuple(pred.shape)} vs {tuple(labels.shape)}"
        )
    c = _clip(pred)
    y = labels.to(torch.float64)
    bce = -(y * torch.log(c) + (1.0 - y) * torch.log(1.0 - c))
    return bce.sum(dim=1).mean()


def total_loss(components: dict[str, torch.Tensor], weights: dict[str, float],
               role: str, step: int | None = None) -> tuple[torch.Tensor, LossReport]:
    """Exact weighted sum in fixed component order.

    Returns the differentiable total plus a float report whose fields hold
    the weighted contributions.
    """
    weighted: dict[str, float] = {}
    total_t = None
    for name in COMPONENT_ORDER:
        value = components.get(name)
        if value is None:
            weighted[name] = 0.0
            continue
        if not bool(torch.isfinite(torch.as_tensor(value)).all()):
            raise DivergenceError(name, step)
        term = weights.get(name, 1.0) * value
        weighted[name] = float(term.detach()) if torch.is_tensor(term) else float(term)
        total_t = term if total_t is None else total_t + term
    if total_t is None:
        raise ContractViolation("no loss components given")
    total_f = 0.0
    for name in COMPONENT_ORDER:
        total_f += weighted[name]
    report = LossReport(total=total_f, role=role, **weighted)
    return total_t, report
