"""Connected regions of a segmentation and region-wise max pooling.

Each connected region of same-class pixels gets one descriptor: the
elementwise maximum of the local descriptors of its member pixels. Max
pooling those region descriptors again gives the single image vector used
by the ``recnn+`` scheme. When every pixel belongs to some retained region,
that equals max pooling the local feature matrix directly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .dataio import IGNORE_LABEL, LabelMap
from .tensorops import LocalFeatureMatrix


@dataclass(frozen=True)
class Region:
    id: int
    class_id: int
    pixel_count: int
    bbox: tuple[int, int, int, int] | None = None  # (min_row, min_col, max_row, max_col)


@dataclass(frozen=True, eq=False)
class RegionFeatureSet:
    """``descriptors[j]`` is the pooled descriptor of ``regions[j]``."""

    regions: tuple[Region, ...]
    descriptors: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.descriptors)
        if d.ndim != 2 or d.shape[0] != len(self.regions):
            raise ValueError(f"descriptor array of shape {d.shape} does not match {len(self.regions)} regions")
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "descriptors", d)

    def __len__(self) -> int:
        return len(self.regions)

    @property
    def dim(self) -> int:
        return self.descriptors.shape[1]


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _union(parent, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    # smaller provisional label wins so each root is its component's first pixel
    if ra < rb:
        parent[rb] = ra
    elif rb < ra:
        parent[ra] = rb


@numba.njit(cache=True)
def _two_pass(labels, eight, ignore):
    h, w = labels.shape
    out = np.zeros((h, w), dtype=np.uint32)
    parent = np.zeros(h * w + 1, dtype=np.int64)
    nxt = 1
    for r in range(h):
        for c in range(w):
            v = labels[r, c]
            if v == ignore:
                continue
            cur = 0
            # already-visited neighbours: W, NW, N, NE
            if c > 0 and labels[r, c - 1] == v:
                cur = out[r, c - 1]
            if r > 0:
                if labels[r - 1, c] == v:
                    if cur == 0:
                        cur = out[r - 1, c]
                    else:
                        _union(parent, cur, out[r - 1, c])
                if eight:
                    if c > 0 and labels[r - 1, c - 1] == v:
                        if cur == 0:
                            cur = out[r - 1, c - 1]
                        else:
                            _union(parent, cur, out[r - 1, c - 1])
                    if c + 1 < w and labels[r - 1, c + 1] == v:
                        if cur == 0:
                            cur = out[r - 1, c + 1]
                        else:
                            _union(parent, cur, out[r - 1, c + 1])
            if cur == 0:
                parent[nxt] = nxt
                cur = nxt
                nxt += 1
            out[r, c] = cur

    # roots are minimal provisional labels, which were issued in raster order,
    # so numbering roots in increasing order gives first-pixel raster order
    final = np.zeros(nxt, dtype=np.uint32)
    n = 0
    for lab in range(1, nxt):
        root = _find(parent, lab)
        if root == lab:
            n += 1
            final[lab] = n
    for lab in range(1, nxt):
        final[lab] = final[_find(parent, lab)]
    for r in range(h):
        for c in range(w):
            out[r, c] = final[out[r, c]]
    return out, n


def connected_components(labelmap: LabelMap, connectivity: int = 8) -> tuple[np.ndarray, list[Region]]:
    """Label connected regions of equal class.

    Returns the (H, W) ``uint32`` region-id map, with 0 for ignored pixels and
    regions numbered 1..n in raster order of their first pixel, together with
    the per-region metadata.
    """
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels = np.ascontiguousarray(labelmap.labels, dtype=np.uint8)
    rmap, n = _two_pass(labels, connectivity == 8, IGNORE_LABEL)
    return rmap, describe_regions(rmap, labels, n)


def describe_regions(rmap: np.ndarray, labels: np.ndarray, n: int | None = None) -> list[Region]:
    if n is None:
        n = int(rmap.max())
    flat = rmap.ravel()
    counts = np.bincount(flat, minlength=n + 1)
    if n == 0:
        return []
    rows, cols = np.divmod(np.arange(flat.size), rmap.shape[1])
    order = np.argsort(flat, kind="stable")
    starts = np.searchsorted(flat[order], np.arange(1, n + 1))
    min_row = np.minimum.reduceat(rows[order], starts)
    max_row = np.maximum.reduceat(rows[order], starts)
    min_col = np.minimum.reduceat(cols[order], starts)
    max_col = np.maximum.reduceat(cols[order], starts)
    first_class = labels.ravel()[order[starts]]
    return [
        Region(
            id=j + 1,
            class_id=int(first_class[j]),
            pixel_count=int(counts[j + 1]),
            bbox=(int(min_row[j]), int(min_col[j]), int(max_row[j]), int(max_col[j])),
        )
        for j in range(n)
    ]


def region_max_pool(
    features: LocalFeatureMatrix,
    rmap: np.ndarray,
    regions: list[Region],
    min_region_px: int = 1,
) -> RegionFeatureSet:
    """Max-pool local descriptors inside each region.

    Regions smaller than ``min_region_px`` pixels are dropped; the output keeps
    region-id order.
    """
    if rmap.shape != (features.height, features.width):
        raise ValueError(
            f"region map {rmap.shape} does not match feature grid {(features.height, features.width)}"
        )
    if min_region_px < 1:
        raise ValueError("min_region_px must be >= 1")
    kept = [r for r in regions if r.pixel_count >= min_region_px]
    if not kept:
        return RegionFeatureSet((), np.empty((0, features.channels), dtype=features.descriptors.dtype))

    flat = rmap.ravel()
    n = len(regions)
    counts = np.bincount(flat, minlength=n + 1)
    if (
        counts.size != n + 1
        or any(r.id != j + 1 for j, r in enumerate(regions))
        or np.any(counts[1:] != [r.pixel_count for r in regions])
    ):
        raise ValueError("region metadata does not match the region map")
    order = np.argsort(flat, kind="stable")
    # ignore pixels (id 0) sort to the front; region j occupies [starts[j-1], starts[j])
    starts = np.cumsum(counts)[:-1]
    pooled_all = np.maximum.reduceat(features.descriptors[order], starts, axis=0)
    pooled = pooled_all[[r.id - 1 for r in kept]]
    return RegionFeatureSet(tuple(kept), pooled)


def global_max_pool(features: LocalFeatureMatrix | np.ndarray) -> np.ndarray:
    """Elementwise maximum over all local descriptors (the ``recnn+`` vector)."""
    desc = features.descriptors if isinstance(features, LocalFeatureMatrix) else np.asarray(features)
    if desc.ndim != 2 or desc.shape[0] == 0:
        raise ValueError("cannot max-pool an empty descriptor matrix")
    return desc.max(axis=0)


def extract_region_features(
    features: LocalFeatureMatrix,
    labelmap: LabelMap,
    connectivity: int = 8,
    min_region_px: int = 1,
) -> RegionFeatureSet:
    rmap, regions = connected_components(labelmap, connectivity)
    return region_max_pool(features, rmap, regions, min_region_px)
