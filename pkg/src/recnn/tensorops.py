"""Dense feature-map transforms applied before region pooling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import FeatureMap


def relu(fmap: FeatureMap) -> FeatureMap:
    return FeatureMap(np.maximum(fmap.values, 0))


def _lerp(a: np.ndarray, b: np.ndarray, w: np.ndarray) -> np.ndarray:
    # a + w*(b-a) is exact when a == b; the clip removes the 1-ulp overshoot
    # rounding can produce, so outputs never leave [min(a, b), max(a, b)].
    out = a + w * (b - a)
    return np.clip(out, np.minimum(a, b), np.maximum(a, b))


def _source_taps(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower tap, upper tap and fractional weight for each output index."""
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, src - lo


def bilinear_upsample(fmap: FeatureMap, out_h: int, out_w: int) -> FeatureMap:
    """Resize with half-pixel-centred, edge-clamped bilinear interpolation.

    Output sample ``i`` reads source coordinate ``(i + 0.5) * in / out - 0.5``
    clamped to ``[0, in - 1]``. Channels are interpolated independently and
    the computation is done in float64.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be positive, got {out_h}x{out_w}")
    height, width, _ = fmap.shape
    if out_h < height or out_w < width:
        raise ValueError(f"cannot upsample {height}x{width} to smaller size {out_h}x{out_w}")
    values = fmap.values.astype(np.float64)
    if (out_h, out_w) == (height, width):
        return FeatureMap(values)

    lo, hi, w = _source_taps(height, out_h)
    rows = _lerp(values[lo], values[hi], w[:, None, None])
    lo, hi, w = _source_taps(width, out_w)
    out = _lerp(rows[:, lo], rows[:, hi], w[None, :, None])
    return FeatureMap(out)


@dataclass(frozen=True, eq=False)
class LocalFeatureMatrix:
    """Per-pixel local descriptors of an image.

    ``descriptors[i]`` is the C-dim descriptor of pixel ``coord_of(i)``;
    pixels are enumerated in row-major order. ``descriptors.T`` is the
    column-per-descriptor layout (C x m).
    """

    descriptors: np.ndarray
    height: int
    width: int

    @property
    def m(self) -> int:
        return self.descriptors.shape[0]

    @property
    def channels(self) -> int:
        return self.descriptors.shape[1]

    def coord_of(self, i: int) -> tuple[int, int]:
        if not 0 <= i < self.m:
            raise IndexError(f"descriptor index {i} out of range for m={self.m}")
        return divmod(int(i), self.width)

    def index_of(self, row: int, col: int) -> int:
        return row * self.width + col

    def to_feature_map(self) -> FeatureMap:
        return FeatureMap(self.descriptors.reshape(self.height, self.width, self.channels))


def flatten_local_features(fmap: FeatureMap) -> LocalFeatureMatrix:
    height, width, channels = fmap.shape
    descriptors = fmap.values.reshape(height * width, channels)
    return LocalFeatureMatrix(descriptors, height, width)


def local_features(fmap: FeatureMap, out_h: int, out_w: int) -> LocalFeatureMatrix:
    """ReLU, then upsample to ``out_h x out_w``, then flatten.

    The order matters: upsampling before ReLU would interpolate across sign
    changes and give different descriptors.
    """
    return flatten_local_features(bilinear_upsample(relu(fmap), out_h, out_w))
