"""Alternating min-max training with seeded reproducibility.

Each step runs one discriminator update (prior samples vs. encoded latents,
real vs. transferred images, real-image classification) followed by one
generator update (a reconstruction pass with the source label plus a transfer
pass with within-batch permuted target labels). All stochastic choices - batch
indices, the target permutation, prior draws - come from a single checkpointed
torch.Generator, so a resumed run continues the identical trajectory.
"""

from __future__ import annotations

import csv
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt
from . import losses, synth
from .config import TrainConfig, train_config_from_dict, train_config_to_dict
from .errors import CheckpointError
from .losses import LossReport
from .modulation import TransferControl, label_to_moments, modulate, transfer_from_latent
from .networks import (
    AttributeTransferModel,
    images_to_tensor,
    init_parameters,
    labels_to_tensor,
)

ROLLING_WINDOW = 100

LOG_COLUMNS = (
    ["step"]
    + [f"d_{name}" for name in losses.COMPONENT_ORDER] + ["d_total"]
    + [f"g_{name}" for name in losses.COMPONENT_ORDER] + ["g_total"]
    + ["wall_time"]
)


@dataclass
class TrainState:
    """Everything needed to continue training deterministically."""

    config: TrainConfig
    model: AttributeTransferModel
    opt_g: torch.optim.Adam
    opt_d: torch.optim.Adam
    generator: torch.Generator
    step: int = 0
    rolling: dict[str, deque] = field(default_factory=dict)

    def rolling_mean(self, key: str) -> float:
        window = self.rolling.get(key)
        return float(np.mean(window)) if window else float("nan")


def _fresh_rolling() -> dict[str, deque]:
    keys = [f"{role}_{name}" for role in ("d", "g")
            for name in list(losses.COMPONENT_ORDER) + ["total"]]
    return {key: deque(maxlen=ROLLING_WINDOW) for key in keys}


def new_train_state(config: TrainConfig) -> TrainState:
    generator = torch.Generator().manual_seed(config.seed)
    model = AttributeTransferModel(config.model)
    init_parameters(model, generator)
    model.train()
    betas = (config.beta1, config.beta2)
    opt_g = torch.optim.Adam(model.generator_parameters(), lr=config.learning_rate, betas=betas)
    opt_d = torch.optim.Adam(model.discriminator_parameters(), lr=config.learning_rate, betas=betas)
    return TrainState(config=config, model=model, opt_g=opt_g, opt_d=opt_d,
                      generator=generator, rolling=_fresh_rolling())


def train_step(state: TrainState, images: torch.Tensor,
               labels: torch.Tensor) -> tuple[LossReport, LossReport]:
    """One discriminator update followed by one generator update.

    Leaves .grad populated on both parameter groups so optimizer arithmetic
    can be audited after the call.
    """
    model = state.model
    weights = state.config.loss_weights
    control = TransferControl(1.0)
    batch = images.shape[0]

    perm = torch.randperm(batch, generator=state.generator)
    targets = labels[perm]

    # --- discriminator update ---
    with torch.no_grad():
        latent = model.encode(images, mode="train")
        fake = transfer_from_latent(model, latent, targets, control, mode="train")
    priors = losses.sample_priors(latent.l_a.shape, latent.l_b.shape, state.generator)

    adv_g = losses.latent_adv_loss(
        model.discriminate_latent_gaussian(priors.g, mode="train"),
        model.discriminate_latent_gaussian(latent.l_a, mode="train"),
        losses.DISCRIMINATOR,
    )
    adv_u = losses.latent_adv_loss(
        model.discriminate_latent_uniform(priors.z, mode="train"),
        model.discriminate_latent_uniform(latent.l_b, mode="train"),
        losses.DISCRIMINATOR,
    )
    ms_real, pred_real = model.discriminate_image(images, mode="train")
    ms_fake, _ = model.discriminate_image(fake, mode="train")
    adv_a = losses.multiscale_adv_loss(ms_real, ms_fake, losses.DISCRIMINATOR)
    cls_a = losses.attribute_cls_loss(pred_real.c, labels)
    total_d, report_d = losses.total_loss(
        {"adv_g": adv_g, "adv_u": adv_u, "adv_a": adv_a, "cls_a": cls_a},
        weights, role="discriminator_step", step=state.step,
    )
    state.opt_d.zero_grad()
    total_d.backward()
    state.opt_d.step()

    # --- generator update ---
    for p in model.discriminator_parameters():
        p.requires_grad_(False)
    try:
        latent = model.encode(images, mode="train")
        r_b = model.decode_background(latent, mode="train")

        moments_x = label_to_moments(model, labels, mode="train")
        recon = model.decode_fuse(
            model.attribute_decoder.body(modulate(latent.l_a, moments_x, control)),
            r_b, mode="train",
        )
        l_recon = losses.recon_loss(recon, images)

        moments_y = label_to_moments(model, targets, mode="train")
        fake = model.decode_fuse(
            model.attribute_decoder.body(modulate(latent.l_a, moments_y, control)),
            r_b, mode="train",
        )
        adv_g = losses.latent_adv_loss(
            None, model.discriminate_latent_gaussian(latent.l_a, mode="train"), losses.GENERATOR
        )
        adv_u = losses.latent_adv_loss(
            None, model.discriminate_latent_uniform(latent.l_b, mode="train"), losses.GENERATOR
        )
        ms_fake, pred_fake = model.discriminate_image(fake, mode="train")
        adv_a = losses.multiscale_adv_loss(None, ms_fake, losses.GENERATOR)
        cls_a = losses.attribute_cls_loss(pred_fake.c, targets)
        total_g, report_g = losses.total_loss(
            {"recon": l_recon, "adv_g": adv_g, "adv_u": adv_u, "adv_a": adv_a, "cls_a": cls_a},
            weights, role="generator_step", step=state.step,
        )
        state.opt_g.zero_grad()
        total_g.backward()
        state.opt_g.step()
    finally:
        for p in model.discriminator_parameters():
            p.requires_grad_(True)

    state.step += 1
    for role, report in (("d", report_d), ("g", report_g)):
        for name, value in report.components().items():
            state.rolling[f"{role}_{name}"].append(value)
        state.rolling[f"{role}_total"].append(report.total)
    return report_d, report_g


class TrainData:
    """Pre-rendered training split of a synthetic dataset."""

    def __init__(self, manifest: synth.DatasetManifest):
        self.manifest = manifest
        seed_ids = list(manifest.train_seed_ids)
        if not seed_ids:
            raise ValueError("dataset has no training samples")
        samples = [synth.load_sample(manifest, sid) for sid in seed_ids]
        self.images = images_to_tensor(np.stack([s.image for s in samples]))
        self.labels = labels_to_tensor(np.stack([s.label for s in samples]))

    def __len__(self) -> int:
        return self.images.shape[0]

    def batch(self, indices: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.images[indices], self.labels[indices]


def run_training(state: TrainState, data: TrainData, log_path: str | Path,
                 checkpoint_dir: str | Path | None = None,
                 steps: int | None = None, quiet: bool = False) -> TrainState:
    """Drive train_step for the configured budget, appending one CSV row per
    step and checkpointing at the configured interval."""
    steps = state.config.steps if steps is None else steps
    log_path = Path(log_path)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    resume = state.step > 0 and log_path.exists()
    mode = "a" if resume else "w"
    t0 = time.time()
    with open(log_path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if not resume:
            writer.writerow(LOG_COLUMNS)
        while state.step < steps:
            idx = torch.randint(0, len(data), (state.config.batch_size,),
                                generator=state.generator)
            images, labels = data.batch(idx)
            report_d, report_g = train_step(state, images, labels)
            row = [state.step]
            for report in (report_d, report_g):
                row += [repr(v) for v in report.components().values()]
                row.append(repr(report.total))
            row.append(f"{time.time() - t0:.3f}")
            writer.writerow(row)
            fh.flush()
            if not quiet and state.step % 200 == 0:
                print(f"step {state.step}: g_recon={state.rolling_mean('g_recon'):.4f} "
                      f"g_total={state.rolling_mean('g_total'):.4f} "
                      f"d_total={state.rolling_mean('d_total'):.4f}", flush=True)
            if checkpoint_dir is not None and state.step % state.config.checkpoint_interval == 0:
                save_state(state, Path(checkpoint_dir) / f"checkpoint_{state.step:06d}.ckpt")
    if checkpoint_dir is not None:
        save_state(state, Path(checkpoint_dir) / "final.ckpt")
    return state


# ---------------------------------------------------------------------------
# Full-state persistence
# ---------------------------------------------------------------------------


def save_state(state: TrainState, path: str | Path) -> None:
    tensors = {name: ckpt._to_array(t) for name, t in ckpt.model_tensor_index(state.model).items()}
    for prefix, opt, named in (
        ("optim_g", state.opt_g, state.model.generator_named_parameters()),
        ("optim_d", state.opt_d, state.model.discriminator_named_parameters()),
    ):
        for name, tensor in ckpt._optimizer_tensors(prefix, opt, named).items():
            tensors[name] = ckpt._to_array(tensor)
    tensors["rng/state"] = state.generator.get_state().numpy().astype("u1")
    meta = {
        "kind": "train_state",
        "config": train_config_to_dict(state.config),
        "step": state.step,
        "rolling": {key: list(window) for key, window in state.rolling.items()},
    }
    ckpt.write_archive(path, tensors, meta)


def load_state(path: str | Path) -> TrainState:
    tensors, manifest = ckpt.read_archive(path)
    if manifest.get("kind") != "train_state":
        raise CheckpointError(f"archive {path} is not a training state")
    config = train_config_from_dict(manifest["config"])
    state = new_train_state(config)

    expected = set(f"model/{n}" for n, _ in state.model.named_parameters())
    expected |= set(f"model/{n}" for n, _ in state.model.named_buffers())
    for prefix, named in (("optim_g", state.model.generator_named_parameters()),
                          ("optim_d", state.model.discriminator_named_parameters())):
        for name, _ in named:
            expected |= {f"{prefix}/{name}/{leaf}" for leaf in ("exp_avg", "exp_avg_sq", "step")}
    expected.add("rng/state")
    if expected != set(tensors):
        missing = sorted(expected - set(tensors))[:5]
        extra = sorted(set(tensors) - expected)[:5]
        raise CheckpointError(f"tensor name mismatch; missing={missing} unexpected={extra}")

    ckpt._install_model_tensors(state.model, tensors)
    for prefix, opt, named in (
        ("optim_g", state.opt_g, state.model.generator_named_parameters()),
        ("optim_d", state.opt_d, state.model.discriminator_named_parameters()),
    ):
        for name, param in named:
            exp_avg = tensors[f"{prefix}/{name}/exp_avg"]
            exp_avg_sq = tensors[f"{prefix}/{name}/exp_avg_sq"]
            if exp_avg.shape != tuple(param.shape) or exp_avg_sq.shape != tuple(param.shape):
                raise CheckpointError(f"optimizer state shape mismatch for {name}")
            opt.state[param] = {
                "step": torch.tensor(float(tensors[f"{prefix}/{name}/step"])),
                "exp_avg": torch.from_numpy(np.ascontiguousarray(exp_avg)),
                "exp_avg_sq": torch.from_numpy(np.ascontiguousarray(exp_avg_sq)),
            }
    state.generator.set_state(torch.from_numpy(tensors["rng/state"].astype(np.uint8)))
    state.step = int(manifest["step"])
    rolling = _fresh_rolling()
    for key, values in manifest.get("rolling", {}).items():
        rolling[key] = deque(values, maxlen=ROLLING_WINDOW)
    state.rolling = rolling
    state.model.train()
    return state
