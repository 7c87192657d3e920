"""Classical global descriptors used as retrieval baselines.

Each descriptor maps a :class:`~recnn.dataio.RasterImage` to a fixed-length
float64 vector:

============  ======  =====================================================
scheme        length  contents
============  ======  =====================================================
``stats``          6  per-channel mean and population std of RGB / 255
``color``         96  32-bin histogram per channel, each summing to 1
``lbp``           10  rotation-invariant uniform LBP (P=8, R=1) histogram
``glcm``          16  contrast, correlation, energy, homogeneity x 4 offsets
============  ======  =====================================================
"""
from __future__ import annotations

import numpy as np

from .dataio import RasterImage

BASELINE_SCHEMES = ("stats", "color", "lbp", "glcm")
DESCRIPTOR_LENGTHS = {"stats": 6, "color": 96, "lbp": 10, "glcm": 16}

GLCM_OFFSETS = ((0, 1), (1, 0), (1, 1), (1, -1))
# per offset: contrast, correlation, energy, homogeneity of a constant image
_GLCM_CONSTANT = (0.0, 1.0, 1.0, 1.0)


def luma(img: RasterImage) -> np.ndarray:
    """8-bit grayscale ``round_half_up(0.299 R + 0.587 G + 0.114 B)``.

    Computed in integer arithmetic so the rounding is exact.
    """
    rgb = img.pixels.astype(np.int64)
    weighted = 299 * rgb[..., 0] + 587 * rgb[..., 1] + 114 * rgb[..., 2]
    return ((weighted + 500) // 1000).astype(np.uint8)


def stats_descriptor(img: RasterImage) -> np.ndarray:
    rgb = img.pixels.reshape(-1, 3).astype(np.float64) / 255.0
    return np.concatenate([rgb.mean(axis=0), rgb.std(axis=0)])


def color_histogram(img: RasterImage, bins: int = 32) -> np.ndarray:
    if 256 % bins:
        raise ValueError("bins must divide 256")
    width = 256 // bins
    rgb = img.pixels.reshape(-1, 3)
    n = rgb.shape[0]
    hists = [np.bincount(rgb[:, ch] // width, minlength=bins) / n for ch in range(3)]
    return np.concatenate(hists)


# -- LBP --------------------------------------------------------------------


def _bilinear_sample(gray: np.ndarray, dy: float, dx: float, margin: int) -> np.ndarray:
    """Sample ``gray`` at (r + dy, c + dx) for every pixel at least ``margin`` from the border."""
    h, w = gray.shape
    y0, x0 = int(np.floor(dy)), int(np.floor(dx))
    fy, fx = dy - y0, dx - x0
    y1 = y0 + 1 if fy else y0
    x1 = x0 + 1 if fx else x0

    def tap(oy, ox):
        return gray[margin + oy : h - margin + oy, margin + ox : w - margin + ox]

    tl, tr, bl, br = tap(y0, x0), tap(y0, x1), tap(y1, x0), tap(y1, x1)
    # a + t*(b - a) keeps equal samples exact, so flat areas compare equal to the centre
    top = tl + fx * (tr - tl)
    bot = bl + fx * (br - bl)
    return top + fy * (bot - top)


def _circle_offsets(points: int, radius: float) -> list[tuple[float, float]]:
    offsets = []
    for p in range(points):
        theta = 2.0 * np.pi * p / points
        dy, dx = -radius * np.sin(theta), radius * np.cos(theta)
        # snap cos(pi/2)-style residue so axis-aligned neighbours are exact pixels
        dy = float(np.round(dy)) if abs(dy - np.round(dy)) < 1e-9 else float(dy)
        dx = float(np.round(dx)) if abs(dx - np.round(dx)) < 1e-9 else float(dx)
        offsets.append((dy, dx))
    return offsets


# Interpolated samples of 8-bit data that equal the centre in exact arithmetic
# can land a few ulps below it; for R=1 any non-tie differs by far more than this.
_LBP_TIE_TOL = 1e-6


def lbp_codes(gray: np.ndarray, points: int = 8, radius: float = 1.0) -> np.ndarray:
    """riu2 code for every interior pixel: number of ones if uniform, else ``points + 1``.

    A neighbour contributes a one when its bilinear sample is >= the centre.
    """
    h, w = gray.shape
    margin = int(np.ceil(radius))
    side = 2 * margin + 1
    if h < side or w < side:
        raise ValueError(f"LBP with radius {radius} needs an image of at least {side}x{side}, got {h}x{w}")
    g = gray.astype(np.float64)
    centre = g[margin : h - margin, margin : w - margin]
    bits = np.stack(
        [_bilinear_sample(g, dy, dx, margin) >= centre - _LBP_TIE_TOL for dy, dx in _circle_offsets(points, radius)]
    )
    ones = bits.sum(axis=0)
    transitions = (bits != np.roll(bits, -1, axis=0)).sum(axis=0)
    return np.where(transitions <= 2, ones, points + 1)


def lbp_descriptor(img: RasterImage, points: int = 8, radius: float = 1.0) -> np.ndarray:
    codes = lbp_codes(luma(img), points, radius)
    return np.bincount(codes.ravel(), minlength=points + 2) / codes.size


# -- GLCM -------------------------------------------------------------------


def cooccurrence(levels: np.ndarray, offset: tuple[int, int], n_levels: int) -> np.ndarray | None:
    """Symmetric normalised co-occurrence matrix, or None if no pixel pair fits."""
    dr, dc = offset
    h, w = levels.shape
    r0, r1 = max(0, -dr), min(h, h - dr)
    c0, c1 = max(0, -dc), min(w, w - dc)
    if r1 <= r0 or c1 <= c0:
        return None
    a = levels[r0:r1, c0:c1].ravel().astype(np.intp)
    b = levels[r0 + dr : r1 + dr, c0 + dc : c1 + dc].ravel().astype(np.intp)
    counts = np.bincount(a * n_levels + b, minlength=n_levels * n_levels).reshape(n_levels, n_levels)
    counts = counts + counts.T
    return counts / counts.sum()


def glcm_properties(p: np.ndarray) -> tuple[float, float, float, float]:
    """Contrast, correlation, energy and homogeneity of a normalised GLCM.

    Correlation of a zero-variance matrix is defined as 1.
    """
    n = p.shape[0]
    i, j = np.indices((n, n), dtype=np.float64)
    contrast = float(np.sum(p * (i - j) ** 2))
    mu_i, mu_j = np.sum(i * p), np.sum(j * p)
    sd_i = np.sqrt(np.sum(p * (i - mu_i) ** 2))
    sd_j = np.sqrt(np.sum(p * (j - mu_j) ** 2))
    if sd_i < 1e-15 or sd_j < 1e-15:
        correlation = 1.0
    else:
        correlation = float(np.sum(p * (i - mu_i) * (j - mu_j)) / (sd_i * sd_j))
    energy = float(np.sum(p**2))
    homogeneity = float(np.sum(p / (1.0 + np.abs(i - j))))
    return contrast, correlation, energy, homogeneity


def glcm_descriptor(img: RasterImage, levels: int = 32, offsets=GLCM_OFFSETS) -> np.ndarray:
    """GLCM texture features, offset-major.

    An offset with no in-bounds pixel pair (image too small) yields the
    constant-image values (0, 1, 1, 1).
    """
    if 256 % levels:
        raise ValueError("levels must divide 256")
    quant = luma(img) // (256 // levels)
    feats = []
    for offset in offsets:
        p = cooccurrence(quant, offset, levels)
        feats.extend(_GLCM_CONSTANT if p is None else glcm_properties(p))
    return np.asarray(feats, dtype=np.float64)


DESCRIPTORS = {
    "stats": stats_descriptor,
    "color": color_histogram,
    "lbp": lbp_descriptor,
    "glcm": glcm_descriptor,
}


def compute_baselines(img: RasterImage, schemes=BASELINE_SCHEMES) -> dict[str, np.ndarray]:
    return {name: DESCRIPTORS[name](img) for name in schemes}
