"""Procedural attribute dataset with exact ground truth.

Every sample is rendered deterministically from (global_seed, seed_id, label).
The four binary attributes draw into fixed, pairwise-disjoint pixel regions:

    0  ring     -- red annulus around the image center
    1  stripes  -- yellow diagonal stripes outside the ring zone
    2  hue      -- the central glyph switches from green to magenta
    3  border   -- near-white frame around the image edge

The background is a seeded two-color linear gradient plus a position-jittered
central glyph. Because the regions are known analytically, the dataset carries
an exact per-sample background mask and an analytic classifier that is exact
on clean renders.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

GENERATOR_VERSION = "1"

ATTRIBUTE_NAMES = ("ring", "stripes", "hue", "border")
NUM_ATTRIBUTES = 4

# Draw colors, RGB in [-1, 1]. Chosen far outside the muted background
# palette so each attribute statistic separates cleanly.
RING_COLOR = np.array([1.0, -0.7, -0.7], dtype=np.float32)
STRIPE_COLOR = np.array([1.0, 1.0, -0.8], dtype=np.float32)
GLYPH_GREEN = np.array([-0.2, 0.9, -0.2], dtype=np.float32)
GLYPH_MAGENTA = np.array([0.8, -0.5, 0.8], dtype=np.float32)
BORDER_COLOR = np.array([0.95, 0.95, 0.95], dtype=np.float32)

# Background gray level and per-channel spread; statistics below rely on the
# spread staying under 0.12 so color contrasts cannot be faked by a gradient.
_BG_GRAY_LO, _BG_GRAY_HI = -0.55, 0.05
_BG_OFFSET = 0.12

# Confidence ramps per attribute: clip((stat - lo) / (hi - lo), 0, 1).
_CONF_RAMPS = ((0.35, 1.35), (0.35, 1.35), (-0.7, 0.9), (0.3, 0.8))


class EmptyMaskError(ValueError):
    """Raised when a background-error mask has no pixels."""


@dataclass(frozen=True)
class Geometry:
    """Pixel regions for one image size; all radii scale with size/32."""

    size: int

    @property
    def scale(self) -> float:
        return self.size / 32.0

    @property
    def center(self) -> float:
        return (self.size - 1) / 2.0

    @property
    def glyph_radius(self) -> float:
        return 4.5 * self.scale

    @property
    def probe_radius(self) -> float:
        return 2.0 * self.scale

    @property
    def max_jitter(self) -> int:
        return self.size // 32

    @property
    def ring_radii(self) -> tuple[float, float]:
        return 7.5 * self.scale, 10.5 * self.scale

    @property
    def stripe_min_radius(self) -> float:
        return 11.5 * self.scale

    @property
    def stripe_period(self) -> int:
        return max(4, round(8 * self.scale))

    @property
    def stripe_width(self) -> int:
        return max(1, round(2 * self.scale))

    @property
    def border_width(self) -> int:
        return max(1, round(2 * self.scale))

    def _dist(self) -> np.ndarray:
        idx = np.arange(self.size, dtype=np.float64)
        dy = idx[:, None] - self.center
        dx = idx[None, :] - self.center
        return np.sqrt(dy * dy + dx * dx)

    def ring_region(self) -> np.ndarray:
        d = self._dist()
        inner, outer = self.ring_radii
        return (d >= inner) & (d <= outer)

    def border_region(self) -> np.ndarray:
        m = np.zeros((self.size, self.size), dtype=bool)
        b = self.border_width
        m[:b, :] = True
        m[-b:, :] = True
        m[:, :b] = True
        m[:, -b:] = True
        return m

    def stripe_zone(self) -> np.ndarray:
        return (self._dist() > self.stripe_min_radius) & ~self.border_region()

    def stripe_phase(self) -> np.ndarray:
        idx = np.arange(self.size)
        diff = idx[:, None] - idx[None, :]
        return (diff % self.stripe_period) < self.stripe_width

    def stripe_region(self) -> np.ndarray:
        return self.stripe_zone() & self.stripe_phase()

    def glyph_region(self, jitter: tuple[int, int]) -> np.ndarray:
        idx = np.arange(self.size, dtype=np.float64)
        dy = idx[:, None] - (self.center + jitter[0])
        dx = idx[None, :] - (self.center + jitter[1])
        return np.sqrt(dy * dy + dx * dx) <= self.glyph_radius

    def probe_region(self) -> np.ndarray:
        # Central disk guaranteed inside the glyph for every legal jitter.
        return self._dist() <= self.probe_radius


@dataclass(frozen=True)
class SyntheticSample:
    """One rendered image plus its exact ground truth."""

    image: np.ndarray           # (H, W, 3) float32 in [-1, 1]
    label: np.ndarray           # (n,) int, entries in {0, 1}
    background_mask: np.ndarray  # (H, W) bool, True where no active attribute drew
    seed_id: int


@dataclass(frozen=True)
class DatasetManifest:
    """Everything needed to regenerate the dataset bit-exactly."""

    generator_version: str
    num_attributes: int
    image_size: int
    count: int
    global_seed: int
    train_count: int
    attribute_names: tuple[str, ...] = ATTRIBUTE_NAMES

    def to_dict(self) -> dict:
        return {
            "generator_version": self.generator_version,
            "num_attributes": self.num_attributes,
            "image_size": self.image_size,
            "count": self.count,
            "global_seed": self.global_seed,
            "train_count": self.train_count,
            "attribute_names": list(self.attribute_names),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetManifest":
        return cls(
            generator_version=data["generator_version"],
            num_attributes=data["num_attributes"],
            image_size=data["image_size"],
            count=data["count"],
            global_seed=data["global_seed"],
            train_count=data["train_count"],
            attribute_names=tuple(data["attribute_names"]),
        )

    @property
    def train_seed_ids(self) -> range:
        return range(0, self.train_count)

    @property
    def eval_seed_ids(self) -> range:
        return range(self.train_count, self.count)


def _appearance_rng(seed_id: int, global_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([global_seed, seed_id, 0])))


def _label_rng(seed_id: int, global_seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([global_seed, seed_id, 1])))


def _draw_appearance(seed_id: int, global_seed: int, geo: Geometry):
    rng = _appearance_rng(seed_id, global_seed)
    colors = []
    for _ in range(2):
        gray = rng.uniform(_BG_GRAY_LO, _BG_GRAY_HI)
        colors.append(gray + rng.uniform(-_BG_OFFSET, _BG_OFFSET, size=3))
    angle = rng.uniform(0.0, 2.0 * np.pi)
    j = geo.max_jitter
    jitter = (int(rng.integers(-j, j + 1)), int(rng.integers(-j, j + 1))) if j > 0 else (0, 0)
    return np.asarray(colors, dtype=np.float64), angle, jitter


def dataset_label(seed_id: int, global_seed: int = 0, n: int = NUM_ATTRIBUTES) -> np.ndarray:
    """The label assigned to a dataset slot; independent of appearance draws."""
    rng = _label_rng(seed_id, global_seed)
    return rng.integers(0, 2, size=n).astype(np.int64)


def quantize(image: np.ndarray) -> np.ndarray:
    """Snap to the 8-bit grid so PNG round trips are bit-exact."""
    u8 = np.clip(np.rint((image + 1.0) * 127.5), 0, 255).astype(np.uint8)
    return (u8.astype(np.float32) / 127.5) - 1.0


def render_region(attr: int, seed_id: int, size: int = 32, global_seed: int = 0) -> np.ndarray:
    """Pixel set attribute `attr` draws into for this sample's geometry."""
    geo = Geometry(size)
    if attr == 0:
        return geo.ring_region()
    if attr == 1:
        return geo.stripe_region()
    if attr == 2:
        _, _, jitter = _draw_appearance(seed_id, global_seed, geo)
        return geo.glyph_region(jitter)
    if attr == 3:
        return geo.border_region()
    raise ValueError(f"attribute index out of range: {attr}")


def render(seed_id: int, label, size: int = 32, global_seed: int = 0) -> SyntheticSample:
    """Deterministically render one sample."""
    label = np.asarray(label, dtype=np.int64)
    if label.shape != (NUM_ATTRIBUTES,) or not np.isin(label, (0, 1)).all():
        raise ValueError(f"label must be {NUM_ATTRIBUTES} bits of 0/1, got {label!r}")
    geo = Geometry(size)
    colors, angle, jitter = _draw_appearance(seed_id, global_seed, geo)

    idx = np.arange(size, dtype=np.float64)
    proj = np.cos(angle) * idx[None, :] + np.sin(angle) * idx[:, None]
    t = (proj - proj.min()) / max(proj.max() - proj.min(), 1e-9)
    image = (1.0 - t)[:, :, None] * colors[0] + t[:, :, None] * colors[1]
    image = image.astype(np.float32)

    glyph = geo.glyph_region(jitter)
    image[glyph] = GLYPH_MAGENTA if label[2] else GLYPH_GREEN

    active_regions = []
    if label[0]:
        region = geo.ring_region()
        image[region] = RING_COLOR
        active_regions.append(region)
    if label[1]:
        region = geo.stripe_region()
        image[region] = STRIPE_COLOR
        active_regions.append(region)
    if label[2]:
        active_regions.append(glyph)
    if label[3]:
        region = geo.border_region()
        image[region] = BORDER_COLOR
        active_regions.append(region)

    mask = np.ones((size, size), dtype=bool)
    for region in active_regions:
        mask &= ~region

    return SyntheticSample(
        image=quantize(image),
        label=label,
        background_mask=mask,
        seed_id=seed_id,
    )


def attribute_statistics(image: np.ndarray) -> np.ndarray:
    """Raw detection statistic per attribute (color contrast in its region)."""
    image = np.asarray(image, dtype=np.float64)
    size = image.shape[0]
    geo = Geometry(size)
    r, g, b = image[:, :, 0], image[:, :, 1], image[:, :, 2]

    redness = r - 0.5 * (g + b)
    ring_stat = float(redness[geo.ring_region()].mean())

    yellowness = 0.5 * (r + g - 2.0 * b)
    zone = geo.stripe_zone()
    phase = geo.stripe_phase()
    stripe_stat = float(yellowness[zone & phase].mean() - yellowness[zone & ~phase].mean())

    magenta = 0.5 * (r + b) - g
    hue_stat = float(magenta[geo.probe_region()].mean())

    luminance = (r + g + b) / 3.0
    border_stat = float(luminance[geo.border_region()].mean())

    return np.array([ring_stat, stripe_stat, hue_stat, border_stat])


def oracle_confidence(image: np.ndarray) -> np.ndarray:
    """Per-attribute presence confidence in [0, 1]."""
    stats = attribute_statistics(image)
    conf = np.empty(NUM_ATTRIBUTES)
    for j, (lo, hi) in enumerate(_CONF_RAMPS):
        conf[j] = np.clip((stats[j] - lo) / (hi - lo), 0.0, 1.0)
    return conf


def oracle_classify(image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Analytic attribute detection; exact on clean renders.

    Returns (label, confidence). The binary decision is confidence > 0.5.
    """
    conf = oracle_confidence(image)
    return (conf > 0.5).astype(np.int64), conf


def background_error(original: SyntheticSample, transferred: np.ndarray, target=None) -> float:
    """Mean absolute pixel difference over pixels that the transfer must leave
    untouched: original background minus wherever the target attributes draw."""
    transferred = np.asarray(transferred, dtype=np.float64)
    if transferred.shape != original.image.shape:
        raise ValueError(
            f"geometry mismatch: {transferred.shape} vs {original.image.shape}"
        )
    mask = original.background_mask.copy()
    if target is not None:
        target = np.asarray(target, dtype=np.int64)
        size = original.image.shape[0]
        for j in range(NUM_ATTRIBUTES):
            if target[j]:
                mask &= ~render_region(j, original.seed_id, size)
    if not mask.any():
        raise EmptyMaskError("background-error mask is empty")
    diff = np.abs(transferred - original.image.astype(np.float64))
    return float(diff[mask].mean())


# ---------------------------------------------------------------------------
# Dataset directory I/O
# ---------------------------------------------------------------------------

TRAIN_FRACTION = 0.8


def save_image_png(image: np.ndarray, path: str | Path) -> None:
    u8 = np.clip(np.rint((np.asarray(image) + 1.0) * 127.5), 0, 255).astype(np.uint8)
    Image.fromarray(u8, mode="RGB").save(path, format="PNG")


def load_image_png(path: str | Path) -> np.ndarray:
    with Image.open(path) as im:
        u8 = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return (u8.astype(np.float32) / 127.5) - 1.0


def generate_dataset(out_dir: str | Path, count: int, seed: int = 0, size: int = 32,
                     force: bool = False) -> DatasetManifest:
    """Write manifest + labels CSV + one PNG per sample."""
    out_dir = Path(out_dir)
    if out_dir.exists() and any(out_dir.iterdir()) and not force:
        raise FileExistsError(f"refusing to write into non-empty directory {out_dir}")
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)

    manifest = DatasetManifest(
        generator_version=GENERATOR_VERSION,
        num_attributes=NUM_ATTRIBUTES,
        image_size=size,
        count=count,
        global_seed=seed,
        train_count=int(count * TRAIN_FRACTION),
    )
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

    with open(out_dir / "labels.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["seed_id"] + [f"bit_{name}" for name in ATTRIBUTE_NAMES])
        for seed_id in range(count):
            label = dataset_label(seed_id, seed)
            sample = render(seed_id, label, size=size, global_seed=seed)
            save_image_png(sample.image, images_dir / f"sample_{seed_id:05d}.png")
            writer.writerow([seed_id] + label.tolist())
    return manifest


def load_manifest(data_dir: str | Path) -> DatasetManifest:
    with open(Path(data_dir) / "manifest.json", "r", encoding="utf-8") as fh:
        return DatasetManifest.from_dict(json.load(fh))


def load_sample(manifest: DatasetManifest, seed_id: int) -> SyntheticSample:
    """Re-render a dataset slot from its manifest (bit-exact with the PNG)."""
    if not 0 <= seed_id < manifest.count:
        raise IndexError(f"seed_id {seed_id} outside dataset range [0, {manifest.count})")
    label = dataset_label(seed_id, manifest.global_seed, manifest.num_attributes)
    return render(seed_id, label, size=manifest.image_size, global_seed=manifest.global_seed)
