"""Synthetic anatomy+pathology phantom dataset with ground-truth masks.

Each sample is a grayscale image of an "organ" (a soft-edged ellipse with a
few interior ridge lines and low-amplitude texture) whose appearance is a
pure function of ``structure_seed``. Positive samples additionally carry
1-3 bright Gaussian-profile blobs placed strictly inside the organ; the
blob field is truncated at half its peak amplitude so that the ground-truth
mask (pixels at or above half peak) is exactly the support of the added
pathology. Two positives sharing a structure seed therefore agree exactly
outside the union of their masks.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, MedxganError, MissingArtifactError

MANIFEST_VERSION = "1"

# rng stream tags keep anatomy / pathology / dataset draws independent
_STRUCT_TAG = 0x5EED0001
_PATH_TAG = 0x5EED0002
_DATA_TAG = 0x5EED0003

_MAX_PLACEMENT_ATTEMPTS = 200
# blobs must sit inside the ellipse scaled by sqrt(_INTERIOR_SHRINK)
_INTERIOR_SHRINK = 0.92


@dataclass(frozen=True)
class PhantomConfig:
    """Generator parameters. Lengths are fractions of the image side."""

    image_size: int = 64
    background: float = 0.05
    organ_level: float = 0.35
    organ_axis_frac: tuple[float, float] = (0.28, 0.40)
    center_jitter_frac: float = 0.05
    edge_sigma: float = 1.0
    ridge_count: tuple[int, int] = (3, 6)
    ridge_amplitude: float = 0.08
    ridge_width: float = 1.5
    noise_level: float = 0.02
    texture_sigma: float = 2.0
    blob_count: tuple[int, int] = (1, 3)
    blob_radius_frac: tuple[float, float] = (0.05, 0.09)
    blob_delta: float = 0.35

    def validate(self) -> None:
        if self.image_size < 16:
            raise ConfigError(f"image_size {self.image_size} too small (min 16)")
        if not (0 < self.organ_axis_frac[0] <= self.organ_axis_frac[1] < 0.5):
            raise ConfigError(f"organ_axis_frac {self.organ_axis_frac} must be within (0, 0.5)")
        if not (0 < self.blob_radius_frac[0] <= self.blob_radius_frac[1]):
            raise ConfigError(f"blob_radius_frac {self.blob_radius_frac} must be positive")
        if not (1 <= self.blob_count[0] <= self.blob_count[1]):
            raise ConfigError(f"blob_count {self.blob_count} invalid")
        # the largest blob must fit inside the smallest possible organ
        min_axis = self.organ_axis_frac[0] * self.image_size
        max_radius = self.blob_radius_frac[1] * self.image_size
        if max_radius + 1.0 > math.sqrt(_INTERIOR_SHRINK) * min_axis:
            raise ConfigError(
                f"blob radius up to {max_radius:.1f}px cannot fit inside the "
                f"minimum organ semi-axis {min_axis:.1f}px"
            )


@dataclass
class ImageSample:
    """One grayscale image with its label and optional pathology mask."""

    pixels: np.ndarray  # H x W float32 in [0, 1]
    label: int  # 1 = pathology present
    mask: Optional[np.ndarray]  # H x W bool, present iff label == 1
    structure_seed: int
    pathology_seed: Optional[int]


def _grids(size: int) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.mgrid[0:size, 0:size]
    return xs.astype(np.float64), ys.astype(np.float64)


def _anatomy(structure_seed: int, cfg: PhantomConfig):
    """Build the pathology-free anatomy image plus the organ geometry."""
    size = cfg.image_size
    rng = np.random.default_rng([_STRUCT_TAG, structure_seed])
    xs, ys = _grids(size)

    cx = size / 2 + cfg.center_jitter_frac * size * rng.uniform(-1.0, 1.0)
    cy = size / 2 + cfg.center_jitter_frac * size * rng.uniform(-1.0, 1.0)
    a = rng.uniform(*cfg.organ_axis_frac) * size
    b = rng.uniform(*cfg.organ_axis_frac) * size
    theta = rng.uniform(0.0, math.pi)

    ct, st = math.cos(theta), math.sin(theta)
    xr = (xs - cx) * ct + (ys - cy) * st
    yr = -(xs - cx) * st + (ys - cy) * ct
    ellipse = (xr / a) ** 2 + (yr / b) ** 2
    interior = ellipse <= 1.0

    img = cfg.background + (cfg.organ_level - cfg.background) * gaussian_filter(
        interior.astype(np.float64), cfg.edge_sigma
    )

    n_ridges = int(rng.integers(cfg.ridge_count[0], cfg.ridge_count[1] + 1))
    ridge_field = np.zeros((size, size), dtype=np.float64)
    for _ in range(n_ridges):
        r = math.sqrt(rng.uniform(0.0, 0.6))
        phi = rng.uniform(0.0, 2 * math.pi)
        px = cx + (r * math.cos(phi) * a) * ct - (r * math.sin(phi) * b) * st
        py = cy + (r * math.cos(phi) * a) * st + (r * math.sin(phi) * b) * ct
        psi = rng.uniform(0.0, math.pi)
        dist = np.abs(-(xs - px) * math.sin(psi) + (ys - py) * math.cos(psi))
        ridge_field += cfg.ridge_amplitude * np.exp(-(dist**2) / (2 * cfg.ridge_width**2))
    img += ridge_field * interior

    tex = gaussian_filter(rng.standard_normal((size, size)), cfg.texture_sigma)
    tex_std = tex.std()
    if tex_std > 0:
        img += (cfg.noise_level / tex_std) * tex * interior

    return img, ellipse, interior, (cx, cy, a, b, ct, st)


def _place_blobs(ellipse, geom, cfg: PhantomConfig, prng):
    """Sample 1-3 truncated Gaussian blobs strictly inside the organ."""
    size = cfg.image_size
    cx, cy, a, b, ct, st = geom
    xs, ys = _grids(size)
    contrib = np.zeros((size, size), dtype=np.float64)
    mask = np.zeros((size, size), dtype=bool)

    n_blobs = int(prng.integers(cfg.blob_count[0], cfg.blob_count[1] + 1))
    for _ in range(n_blobs):
        radius = prng.uniform(*cfg.blob_radius_frac) * size
        sigma = radius / math.sqrt(2 * math.log(2.0))
        placed = False
        for _attempt in range(_MAX_PLACEMENT_ATTEMPTS):
            r = math.sqrt(prng.uniform(0.0, _INTERIOR_SHRINK))
            phi = prng.uniform(0.0, 2 * math.pi)
            bx = cx + (r * math.cos(phi) * a) * ct - (r * math.sin(phi) * b) * st
            by = cy + (r * math.cos(phi) * a) * st + (r * math.sin(phi) * b) * ct
            g = np.exp(-((xs - bx) ** 2 + (ys - by) ** 2) / (2 * sigma**2))
            disc = g >= 0.5
            if disc.any() and np.all(ellipse[disc] <= _INTERIOR_SHRINK):
                contrib += np.where(disc, cfg.blob_delta * g, 0.0)
                mask |= disc
                placed = True
                break
        if not placed:
            raise ConfigError(
                f"could not place a blob of radius {radius:.1f}px inside the organ "
                f"after {_MAX_PLACEMENT_ATTEMPTS} attempts"
            )
    return contrib, mask


def generate_sample(
    structure_seed: int, pathology_seed: Optional[int], cfg: PhantomConfig
) -> ImageSample:
    """Generate one sample; pathology is present iff ``pathology_seed`` is given.

    The anatomy depends only on ``structure_seed``; the blob field is zero
    everywhere outside the returned mask, so realizations with the same
    structure seed are bit-identical off their mask union.
    """
    cfg.validate()
    img, ellipse, interior, geom = _anatomy(structure_seed, cfg)

    if pathology_seed is None:
        pixels = np.clip(img, 0.0, 1.0).astype(np.float32)
        return ImageSample(pixels, 0, None, structure_seed, None)

    prng = np.random.default_rng([_PATH_TAG, structure_seed, pathology_seed])
    contrib, mask = _place_blobs(ellipse, geom, cfg, prng)
    pixels = np.clip(img + contrib, 0.0, 1.0).astype(np.float32)
    return ImageSample(pixels, 1, mask, structure_seed, int(pathology_seed))


def quantize(pixels: np.ndarray) -> np.ndarray:
    """Map [0,1] floats to 8-bit grayscale."""
    return np.round(np.asarray(pixels, dtype=np.float64) * 255.0).astype(np.uint8)


def _write_png(arr8: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr8, mode="L").save(path)


def read_png(path: Path) -> np.ndarray:
    """Load an 8-bit grayscale PNG back into [0,1] float32."""
    if not Path(path).exists():
        raise MissingArtifactError(f"image file not found: {path}")
    arr = np.asarray(Image.open(path).convert("L"), dtype=np.float32)
    return arr / 255.0


@dataclass
class DatasetManifest:
    """Index of a dataset directory; saved as ``manifest.json``."""

    root: Path
    image_size: int
    counts: dict
    generator_params: dict
    root_seed: int
    samples: list = field(default_factory=list)
    version: str = MANIFEST_VERSION

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "image_size": self.image_size,
            "counts": self.counts,
            "generator_params": self.generator_params,
            "root_seed": self.root_seed,
            "samples": self.samples,
        }

    def save(self) -> Path:
        path = Path(self.root) / "manifest.json"
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return path

    @classmethod
    def load(cls, root) -> "DatasetManifest":
        root = Path(root)
        path = root / "manifest.json"
        if not path.exists():
            raise MissingArtifactError(f"dataset manifest not found: {path}")
        raw = json.loads(path.read_text())
        m = cls(
            root=root,
            image_size=raw["image_size"],
            counts=raw["counts"],
            generator_params=raw["generator_params"],
            root_seed=raw["root_seed"],
            samples=raw["samples"],
            version=raw["version"],
        )
        for label in ("neg", "pos"):
            n_listed = sum(1 for s in m.samples if s["label"] == (1 if label == "pos" else 0))
            if n_listed != m.counts[label]:
                raise ConfigError(
                    f"manifest counts[{label}]={m.counts[label]} but index lists {n_listed}"
                )
        return m

    def load_pixels(self, sample: dict) -> np.ndarray:
        return read_png(Path(self.root) / sample["file"])

    def load_mask(self, sample: dict) -> np.ndarray:
        if sample["mask"] is None:
            raise MissingArtifactError(f"sample {sample['id']} has no mask")
        return read_png(Path(self.root) / sample["mask"]) >= 0.5

    def positives(self) -> list:
        return [s for s in self.samples if s["label"] == 1]

    def negatives(self) -> list:
        return [s for s in self.samples if s["label"] == 0]

    def labels(self) -> np.ndarray:
        return np.array([s["label"] for s in self.samples], dtype=np.int64)


def build_dataset(
    cfg: PhantomConfig,
    n_per_class: int,
    root_seed: int,
    out_dir,
    overwrite: bool = False,
) -> DatasetManifest:
    """Write a class-balanced dataset of PNGs plus masks and a manifest."""
    cfg.validate()
    if n_per_class < 1:
        raise ConfigError(f"n_per_class must be >= 1, got {n_per_class}")
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if manifest_path.exists() and not overwrite:
        raise ConfigError(f"{manifest_path} already exists; pass overwrite to replace it")

    srng = np.random.default_rng([_DATA_TAG, root_seed])
    structure_seeds = srng.integers(0, 2**31 - 1, size=2 * n_per_class)
    pathology_seeds = srng.integers(0, 2**31 - 1, size=n_per_class)

    samples = []
    for i in range(2 * n_per_class):
        label = 0 if i < n_per_class else 1
        pseed = int(pathology_seeds[i - n_per_class]) if label == 1 else None
        sample = generate_sample(int(structure_seeds[i]), pseed, cfg)
        sub = "neg" if label == 0 else "pos"
        rel = f"images/{sub}/{i:05d}.png"
        try:
            _write_png(quantize(sample.pixels), out / rel)
        except OSError as exc:
            raise MedxganError(f"failed writing {out / rel}: {exc}") from exc
        rec = {
            "id": i,
            "file": rel,
            "label": label,
            "structure_seed": int(structure_seeds[i]),
            "pathology_seed": pseed,
            "mask": None,
        }
        if label == 1:
            mask_rel = f"masks/{i:05d}.png"
            _write_png((sample.mask.astype(np.uint8)) * 255, out / mask_rel)
            rec["mask"] = mask_rel
        samples.append(rec)

    manifest = DatasetManifest(
        root=out,
        image_size=cfg.image_size,
        counts={"neg": n_per_class, "pos": n_per_class},
        generator_params=asdict(cfg),
        root_seed=int(root_seed),
        samples=samples,
    )
    manifest.save()
    return manifest


def config_from_params(params: dict) -> PhantomConfig:
    """Rebuild a PhantomConfig from manifest generator_params."""
    kwargs = dict(params)
    for key in ("organ_axis_frac", "ridge_count", "blob_count", "blob_radius_frac"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return PhantomConfig(**kwargs)
