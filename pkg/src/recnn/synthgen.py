"""Deterministic synthetic archives with known class structure.

Every image belongs to one *composition* (its broad class). A composition
uses a fixed subset of ``s`` pixel classes laid out as a 2 x ``s`` grid of
rectangles. The top row holds classes ``c0 .. c(s-1)`` and the bottom row is
the same sequence shifted left by one::

    c0 c1 c2 ... c(s-1)
    c1 c2 c3 ... c0

Same-class rectangles therefore touch only diagonally, so the region count
is known in closed form (see :func:`expected_region_count`) and differs
between 4- and 8-connectivity.

Pixel class ``c`` has the one-hot prototype feature ``e_c``; each feature
pixel is its prototype plus Gaussian noise. Noise for image ``i`` comes from
a SplitMix64 stream seeded with ``seed ^ i`` (Box-Muller on pairs of
53-bit uniforms), so any image can be regenerated on its own.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataio import (
    FeatureMap,
    LabelMap,
    ManifestRecord,
    RasterImage,
    write_fmap,
    write_image,
    write_labelmap,
    write_manifest,
)

MAX_PIXEL_CLASSES = 17
_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

# one colour per pixel class (airplane .. water in the 17-class vocabulary)
PALETTE = np.array(
    [
        (230, 25, 75), (139, 90, 43), (128, 128, 128), (255, 225, 25),
        (170, 110, 40), (245, 130, 48), (70, 240, 240), (210, 245, 60),
        (60, 180, 75), (240, 50, 230), (64, 64, 64), (255, 250, 200),
        (0, 0, 128), (250, 190, 212), (220, 190, 255), (0, 100, 0),
        (0, 130, 200),
    ],
    dtype=np.uint8,
)


class SplitMix64:
    """Scalar SplitMix64 generator (reference implementation)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)


def splitmix64_stream(seed: int, n: int) -> np.ndarray:
    """First ``n`` SplitMix64 outputs for ``seed`` as a uint64 array."""
    with np.errstate(over="ignore"):
        z = np.uint64(seed & _MASK64) + np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def gaussian_noise(seed: int, n: int) -> np.ndarray:
    """``n`` standard normal samples from one SplitMix64 stream via Box-Muller."""
    pairs = (n + 1) // 2
    raw = splitmix64_stream(seed, 2 * pairs)
    top = (raw >> np.uint64(11)).astype(np.float64)
    u1 = (top[0::2] + 1.0) * 2.0**-53  # (0, 1], keeps log finite
    u2 = top[1::2] * 2.0**-53
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.empty(2 * pairs)
    z[0::2] = radius * np.cos(angle)
    z[1::2] = radius * np.sin(angle)
    return z[:n]


@dataclass(frozen=True)
class SynthConfig:
    num_images: int = 40
    num_compositions: int = 4
    num_pixel_classes: int = 8
    height: int = 64
    width: int = 64
    channels: int = 8
    noise_sigma: float = 0.0
    seed: int = 0
    feature_stride: int = 1  # >1 writes feature maps at reduced resolution

    def __post_init__(self):
        if self.num_images < 1 or self.num_compositions < 1:
            raise ValueError("num_images and num_compositions must be positive")
        if self.num_images % self.num_compositions:
            raise ValueError("num_images must be divisible by num_compositions")
        if not 1 <= self.num_pixel_classes <= MAX_PIXEL_CLASSES:
            raise ValueError(f"num_pixel_classes must lie in [1, {MAX_PIXEL_CLASSES}]")
        if self.channels < self.num_pixel_classes:
            raise ValueError(
                f"channels ({self.channels}) must be >= num_pixel_classes ({self.num_pixel_classes}) "
                "so class prototypes stay distinguishable"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.feature_stride < 1:
            raise ValueError("feature_stride must be >= 1")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        s = composition_size(self.num_pixel_classes)
        if self.width < s or (s > 1 and self.height < 2):
            raise ValueError(f"image {self.height}x{self.width} too small for a 2x{s} layout")
        composition_classes(self.num_compositions, self.num_pixel_classes)


def composition_size(num_pixel_classes: int) -> int:
    return min(3, num_pixel_classes)


def composition_classes(num_compositions: int, num_pixel_classes: int) -> list[tuple[int, ...]]:
    """Distinct pixel-class subsets, one per composition.

    Subsets of size ``s = min(3, P)`` are taken as consecutive runs starting at
    ``0, s, 2s, ...`` (mod P) so compositions share as few classes as
    possible; further subsets, if needed, come from plain enumeration.
    """
    p = num_pixel_classes
    s = composition_size(p)
    rotations = (tuple((start + t) % p for t in range(s)) for start in range(0, s * p, s))
    sizes = [s, *range(s - 1, 0, -1), *range(s + 1, p + 1)]
    enumerated = (c for size in sizes for c in itertools.combinations(range(p), size))
    chosen: list[tuple[int, ...]] = []
    seen: set[frozenset[int]] = set()
    for cand in itertools.chain(rotations, enumerated):
        key = frozenset(cand)
        if key not in seen:
            seen.add(key)
            chosen.append(cand)
            if len(chosen) == num_compositions:
                return chosen
    raise ValueError(f"{num_pixel_classes} pixel classes cannot form {num_compositions} distinct compositions")


def expected_region_count(num_classes_in_composition: int, connectivity: int) -> int:
    """Connected regions in one composition layout."""
    s = num_classes_in_composition
    if s == 1:
        return 1
    if connectivity == 4:
        return 2 * s
    return 2 if s == 2 else s + 1


def composition_layout(classes: tuple[int, ...], height: int, width: int) -> np.ndarray:
    s = len(classes)
    labels = np.empty((height, width), dtype=np.uint8)
    if s == 1:
        labels[:] = classes[0]
        return labels
    mid = height // 2
    edges = [t * width // s for t in range(s + 1)]
    for t in range(s):
        labels[:mid, edges[t] : edges[t + 1]] = classes[t]
        labels[mid:, edges[t] : edges[t + 1]] = classes[(t + 1) % s]
    return labels


def image_id(cfg: SynthConfig, index: int) -> str:
    digits = max(4, len(str(cfg.num_images - 1)))
    return f"img{index:0{digits}d}"


def composition_of(cfg: SynthConfig, index: int) -> int:
    return index % cfg.num_compositions


def class_label(composition: int) -> str:
    return f"comp{composition:02d}"


def generate_image(cfg: SynthConfig, index: int) -> tuple[RasterImage, LabelMap, FeatureMap]:
    classes = composition_classes(cfg.num_compositions, cfg.num_pixel_classes)[composition_of(cfg, index)]
    labels = composition_layout(classes, cfg.height, cfg.width)
    image = RasterImage(PALETTE[labels])
    labelmap = LabelMap(labels, MAX_PIXEL_CLASSES)

    stride = cfg.feature_stride
    rows = np.minimum(np.arange(0, cfg.height, stride) + stride // 2, cfg.height - 1)
    cols = np.minimum(np.arange(0, cfg.width, stride) + stride // 2, cfg.width - 1)
    coarse = labels[np.ix_(rows, cols)]
    values = np.eye(cfg.channels)[coarse]
    if cfg.noise_sigma > 0:
        noise = gaussian_noise(cfg.seed ^ index, values.size).reshape(values.shape)
        values = values + cfg.noise_sigma * noise
    return image, labelmap, FeatureMap(values.astype(np.float32))


def generate_dataset(cfg: SynthConfig, out_dir) -> Path:
    """Write images, label maps, feature maps and ``manifest.jsonl`` under ``out_dir``."""
    out = Path(out_dir)
    for sub in ("images", "labels", "features"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(cfg.num_images):
        image, labelmap, fmap = generate_image(cfg, i)
        name = image_id(cfg, i)
        record = ManifestRecord(
            image_id=name,
            class_label=class_label(composition_of(cfg, i)),
            image_path=out / "images" / f"{name}.ppm",
            label_path=out / "labels" / f"{name}.pgm",
            feature_path=out / "features" / f"{name}.fmap",
        )
        write_image(record.image_path, image)
        write_labelmap(record.label_path, labelmap)
        write_fmap(record.feature_path, fmap)
        records.append(record)
    manifest = out / "manifest.jsonl"
    write_manifest(manifest, records)
    return manifest
