"""Quantitative evaluation of a trained checkpoint on the held-out split.

Metrics: per-attribute transfer accuracy under the analytic oracle,
preservation of the non-target bits, exact masked background error,
reconstruction error, empirical latent-prior statistics, and the rank
correlation between the transfer intensity and oracle confidence.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from scipy import stats

from . import synth
from .modulation import TransferControl, transfer
from .networks import AttributeTransferModel, images_to_tensor, labels_to_tensor, tensor_to_images

THETA_GRID = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)
_BATCH = 64


@dataclass
class EvalReport:
    """All metrics for one checkpoint over one held-out seed range."""

    eval_count: int
    eval_seed_range: tuple[int, int]
    per_attribute_accuracy: dict[str, float]
    average_accuracy: float
    per_attribute_preservation: dict[str, float]
    average_preservation: float
    mean_background_error: float
    reconstruction_mae: float
    latent_a_mean: float
    latent_a_var: float
    latent_b_min: float
    latent_b_max: float
    latent_b_bins: list[float]
    theta_rank_correlation: dict[str, float]
    mean_theta_rank_correlation: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EvalReport":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data["eval_seed_range"] = tuple(data["eval_seed_range"])
        return cls(**data)


def _eval_samples(manifest: synth.DatasetManifest, limit: int | None = None):
    seed_ids = list(manifest.eval_seed_ids)
    if limit is not None:
        seed_ids = seed_ids[:limit]
    if not seed_ids:
        raise ValueError("evaluation seed range is empty")
    return [synth.load_sample(manifest, sid) for sid in seed_ids]


def _batched_transfer(model: AttributeTransferModel, images: torch.Tensor,
                      targets: torch.Tensor, theta: float) -> np.ndarray:
    outs = []
    control = TransferControl(theta)
    with torch.no_grad():
        for i in range(0, images.shape[0], _BATCH):
            out = transfer(model, images[i:i + _BATCH], targets[i:i + _BATCH], control)
            outs.append(tensor_to_images(out))
    return np.concatenate(outs, axis=0)


def eval_transfer_accuracy(model: AttributeTransferModel, samples) -> dict:
    """Flip each attribute bit with theta=1 and score the outputs with the
    oracle; also measures background preservation on the same transfers."""
    n = model.config.num_attributes
    images = images_to_tensor(np.stack([s.image for s in samples]))
    labels = np.stack([s.label for s in samples])

    accuracy, preservation = {}, {}
    bg_errors = []
    for j in range(n):
        targets = labels.copy()
        targets[:, j] = 1 - targets[:, j]
        outs = _batched_transfer(model, images, labels_to_tensor(targets), theta=1.0)
        hit, keep = [], []
        for sample, target, out in zip(samples, targets, outs):
            pred, _ = synth.oracle_classify(out)
            hit.append(pred[j] == target[j])
            others = np.delete(np.arange(n), j)
            keep.append(float(np.mean(pred[others] == target[others])))
            bg_errors.append(synth.background_error(sample, out, target))
        name = synth.ATTRIBUTE_NAMES[j]
        accuracy[name] = float(np.mean(hit))
        preservation[name] = float(np.mean(keep))
    return {
        "accuracy": accuracy,
        "preservation": preservation,
        "mean_background_error": float(np.mean(bg_errors)),
    }


def eval_reconstruction(model: AttributeTransferModel, samples) -> float:
    images = images_to_tensor(np.stack([s.image for s in samples]))
    labels = labels_to_tensor(np.stack([s.label for s in samples]))
    outs = _batched_transfer(model, images, labels, theta=1.0)
    ins = np.stack([s.image for s in samples])
    return float(np.abs(outs - ins).mean())


def eval_latent_priors(model: AttributeTransferModel, samples) -> dict:
    """Pooled element statistics of l_a (Gaussian target) and l_b (uniform
    target): mean/variance, support, and decile-bin occupancy over [-1, 1]."""
    images = images_to_tensor(np.stack([s.image for s in samples]))
    la_parts, lb_parts = [], []
    with torch.no_grad():
        for i in range(0, images.shape[0], _BATCH):
            latent = model.encode(images[i:i + _BATCH], mode="infer")
            la_parts.append(latent.l_a.numpy().ravel())
            lb_parts.append(latent.l_b.numpy().ravel())
    l_a = np.concatenate(la_parts)
    l_b = np.concatenate(lb_parts)
    counts, _ = np.histogram(l_b, bins=10, range=(-1.0, 1.0))
    return {
        "latent_a_mean": float(l_a.mean()),
        "latent_a_var": float(l_a.var()),
        "latent_b_min": float(l_b.min()),
        "latent_b_max": float(l_b.max()),
        "latent_b_bins": (counts / l_b.size).tolist(),
    }


def theta_confidence_curves(model: AttributeTransferModel, samples,
                            grid=THETA_GRID) -> dict[str, list[float]]:
    """Mean oracle confidence for each target attribute as theta rises,
    computed over eval images that lack the attribute."""
    n = model.config.num_attributes
    curves = {}
    for j in range(n):
        subset = [s for s in samples if s.label[j] == 0]
        if not subset:
            curves[synth.ATTRIBUTE_NAMES[j]] = [float("nan")] * len(grid)
            continue
        images = images_to_tensor(np.stack([s.image for s in subset]))
        targets = np.stack([s.label for s in subset]).copy()
        targets[:, j] = 1
        targets_t = labels_to_tensor(targets)
        curve = []
        for theta in grid:
            outs = _batched_transfer(model, images, targets_t, theta)
            confs = [synth.oracle_confidence(out)[j] for out in outs]
            curve.append(float(np.mean(confs)))
        curves[synth.ATTRIBUTE_NAMES[j]] = curve
    return curves


def eval_theta_sweep(model: AttributeTransferModel, samples, grid=THETA_GRID) -> dict[str, float]:
    """Spearman rank correlation between theta and mean target confidence."""
    curves = theta_confidence_curves(model, samples, grid)
    corr = {}
    for name, curve in curves.items():
        if np.all(np.isfinite(curve)) and len(set(curve)) > 1:
            rho = float(stats.spearmanr(list(grid), curve).statistic)
        else:
            rho = float("nan")
        corr[name] = rho
    return corr


def evaluate(model: AttributeTransferModel, manifest: synth.DatasetManifest,
             limit: int | None = None, theta_limit: int = 50) -> EvalReport:
    samples = _eval_samples(manifest, limit)
    transfer_stats = eval_transfer_accuracy(model, samples)
    recon = eval_reconstruction(model, samples)
    priors = eval_latent_priors(model, samples)
    sweep = eval_theta_sweep(model, samples[:theta_limit])
    seed_ids = [s.seed_id for s in samples]
    return EvalReport(
        eval_count=len(samples),
        eval_seed_range=(min(seed_ids), max(seed_ids) + 1),
        per_attribute_accuracy=transfer_stats["accuracy"],
        average_accuracy=float(np.mean(list(transfer_stats["accuracy"].values()))),
        per_attribute_preservation=transfer_stats["preservation"],
        average_preservation=float(np.mean(list(transfer_stats["preservation"].values()))),
        mean_background_error=transfer_stats["mean_background_error"],
        reconstruction_mae=recon,
        theta_rank_correlation=sweep,
        mean_theta_rank_correlation=float(np.mean(list(sweep.values()))),
        **priors,
    )


def _to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint((image + 1.0) * 127.5), 0, 255).astype(np.uint8)


def save_transfer_grids(model: AttributeTransferModel, manifest: synth.DatasetManifest,
                        out_dir: str | Path, rows: int = 4, grid=THETA_GRID) -> list[Path]:
    """One PNG per attribute: each row is [source | transfers over the theta
    grid | clean target render]."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    samples = _eval_samples(manifest)
    size = manifest.image_size
    pad = 2
    paths = []
    for j, name in enumerate(synth.ATTRIBUTE_NAMES[:model.config.num_attributes]):
        subset = [s for s in samples if s.label[j] == 0][:rows]
        if not subset:
            continue
        cols = len(grid) + 2
        canvas = np.full(
            (len(subset) * (size + pad) - pad, cols * (size + pad) - pad, 3), 255, dtype=np.uint8
        )
        for r, sample in enumerate(subset):
            target = sample.label.copy()
            target[j] = 1
            y0 = r * (size + pad)
            canvas[y0:y0 + size, :size] = _to_uint8(sample.image)
            images = images_to_tensor(sample.image)
            targets_t = labels_to_tensor(target)
            for k, theta in enumerate(grid):
                out = _batched_transfer(model, images, targets_t, theta)[0]
                x0 = (k + 1) * (size + pad)
                canvas[y0:y0 + size, x0:x0 + size] = _to_uint8(out)
            clean = synth.render(sample.seed_id, target, size=size,
                                 global_seed=manifest.global_seed)
            x0 = (cols - 1) * (size + pad)
            canvas[y0:y0 + size, x0:x0 + size] = _to_uint8(clean.image)
        path = out_dir / f"transfer_grid_{name}.png"
        Image.fromarray(canvas, mode="RGB").save(path)
        paths.append(path)
    return paths
