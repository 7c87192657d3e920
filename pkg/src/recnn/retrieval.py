"""Archive index, RIX1 persistence, exhaustive ranked queries and evaluation.

Schemes and their distances:

* ``recnn``: region-set distance between region descriptor sets (query first)
* ``recnn+``: L1 between globally max-pooled vectors
* ``color``: L1
* ``stats``, ``lbp``, ``glcm``: L2

Rankings sort by ascending distance; ties go to the smaller image id. The
query itself is part of every ranking and counts as relevant.

RIX1 layout (little-endian)::

    b"RIX1" | u32 version | u32 entry_count | u32 feature_dim
    per entry:
        u16 len + UTF-8 id | u16 len + UTF-8 class | u32 multi-label bitset
        u32 region_count, per region: u8 class_id, u32 pixel_count, C x f32
        C x f32 recnn+ vector
        per baseline (stats, color, lbp, glcm): u8 present, u32 length, length x f32
"""
from __future__ import annotations

import struct
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import baselines
from .dataio import (
    DataIOError,
    FormatError,
    ManifestRecord,
    derive_multilabels,
    load_manifest,
    read_fmap,
    read_image,
    read_labelmap,
)
from .metrics import DEFAULT_K, MetricsReport, evaluate_rankings
from .regionfeat import Region, RegionFeatureSet, connected_components, global_max_pool, region_max_pool
from .similarity import distances_to, region_set_distance
from .tensorops import local_features

SCHEMES = ("recnn", "recnn+", "stats", "color", "lbp", "glcm")
VECTOR_NORMS = {"recnn+": "L1", "color": "L1", "stats": "L2", "lbp": "L2", "glcm": "L2"}

RIX_MAGIC = b"RIX1"
RIX_VERSION = 1
MAX_BITSET_CLASSES = 32


class IndexBuildError(DataIOError):
    def __init__(self, image_id: str, message: str):
        super().__init__(f"image {image_id!r}: {message}")
        self.image_id = image_id


@dataclass(frozen=True)
class IndexConfig:
    connectivity: int = 8
    min_region_px: int = 1
    num_classes: int = 17
    multilabel_min_pixels: int = 1
    baseline_schemes: tuple[str, ...] = baselines.BASELINE_SCHEMES

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.min_region_px < 1 or self.multilabel_min_pixels < 1:
            raise ValueError("pixel thresholds must be >= 1")
        if not 1 <= self.num_classes <= MAX_BITSET_CLASSES:
            raise ValueError(f"num_classes must lie in [1, {MAX_BITSET_CLASSES}] to fit the label bitset")
        unknown = set(self.baseline_schemes) - set(baselines.BASELINE_SCHEMES)
        if unknown:
            raise ValueError(f"unknown baseline schemes {sorted(unknown)}")


@dataclass(eq=False)
class IndexEntry:
    image_id: str
    class_label: str
    multi_labels: frozenset[int]
    recnn: RegionFeatureSet
    recnn_plus: np.ndarray
    baselines: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(eq=False)
class RetrievalIndex:
    entries: list[IndexEntry]
    feature_dim: int
    config: IndexConfig | None = None

    def __post_init__(self):
        self.entries = sorted(self.entries, key=lambda e: e.image_id)
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image ids in index")
        self._position = {image_id: i for i, image_id in enumerate(ids)}
        self._stacked: dict[str, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def ids(self) -> list[str]:
        return [e.image_id for e in self.entries]

    def __contains__(self, image_id) -> bool:
        return image_id in self._position

    def entry(self, image_id: str) -> IndexEntry:
        try:
            return self.entries[self._position[image_id]]
        except KeyError:
            raise KeyError(f"image id {image_id!r} is not in the index") from None

    def vectors(self, scheme: str) -> np.ndarray:
        """Stacked (N, d) descriptor matrix for a vector scheme, cached."""
        if scheme not in self._stacked:
            if scheme == "recnn+":
                rows = [e.recnn_plus for e in self.entries]
            else:
                missing = [e.image_id for e in self.entries if scheme not in e.baselines]
                if missing:
                    raise ValueError(f"scheme {scheme!r} was not computed for {missing[0]!r}")
                rows = [e.baselines[scheme] for e in self.entries]
            self._stacked[scheme] = np.stack(rows).astype(np.float64)
        return self._stacked[scheme]


# -- building ----------------------------------------------------------------


def _as_f32(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=np.float32)


def describe_image(record: ManifestRecord, config: IndexConfig) -> IndexEntry:
    """Run the full per-image pipeline for one manifest record."""
    image = read_image(record.image_path)
    labelmap = read_labelmap(record.label_path, config.num_classes)
    fmap = read_fmap(record.feature_path)
    if (image.height, image.width) != (labelmap.height, labelmap.width):
        raise ValueError(
            f"raster is {image.height}x{image.width} but label map is {labelmap.height}x{labelmap.width}"
        )
    local = local_features(fmap, labelmap.height, labelmap.width)
    rmap, regions = connected_components(labelmap, config.connectivity)
    pooled = region_max_pool(local, rmap, regions, config.min_region_px)
    if len(pooled) == 0:
        raise ValueError(f"no region has at least {config.min_region_px} pixels")
    # only class and size are persisted; renumber so a reloaded index compares equal
    kept = tuple(Region(j + 1, r.class_id, r.pixel_count) for j, r in enumerate(pooled.regions))
    return IndexEntry(
        image_id=record.image_id,
        class_label=record.class_label,
        multi_labels=derive_multilabels(labelmap, config.multilabel_min_pixels),
        recnn=RegionFeatureSet(kept, _as_f32(pooled.descriptors)),
        recnn_plus=_as_f32(global_max_pool(local)),
        baselines={k: _as_f32(v) for k, v in baselines.compute_baselines(image, config.baseline_schemes).items()},
    )


def build_index(manifest, config: IndexConfig | None = None, out_path=None) -> RetrievalIndex:
    """Describe every image of a manifest (path or record list) and optionally save the index."""
    config = config or IndexConfig()
    records = load_manifest(manifest) if isinstance(manifest, (str, Path)) else list(manifest)
    if not records:
        raise DataIOError("manifest is empty")
    entries = []
    for record in records:
        try:
            entries.append(describe_image(record, config))
        except (ValueError, OSError) as exc:
            raise IndexBuildError(record.image_id, str(exc)) from exc
    dims = {e.recnn_plus.shape[0] for e in entries}
    if len(dims) != 1:
        raise DataIOError(f"feature maps disagree on channel count: {sorted(dims)}")
    index = RetrievalIndex(entries, dims.pop(), config)
    if out_path is not None:
        save_index(index, out_path)
    return index


# -- RIX1 --------------------------------------------------------------------


def _bitset(labels: Iterable[int]) -> int:
    bits = 0
    for c in labels:
        if not 0 <= c < MAX_BITSET_CLASSES:
            raise ValueError(f"class id {c} does not fit the 32-bit label set")
        bits |= 1 << c
    return bits


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for RIX1")
    return struct.pack("<H", len(raw)) + raw


def encode_index(index: RetrievalIndex) -> bytes:
    c = index.feature_dim
    parts = [RIX_MAGIC, struct.pack("<III", RIX_VERSION, len(index.entries), c)]
    for e in index.entries:
        parts += [_pack_str(e.image_id), _pack_str(e.class_label), struct.pack("<I", _bitset(e.multi_labels))]
        parts.append(struct.pack("<I", len(e.recnn)))
        for region, desc in zip(e.recnn.regions, e.recnn.descriptors):
            if desc.shape != (c,):
                raise ValueError(f"{e.image_id}: region descriptor has shape {desc.shape}, expected ({c},)")
            parts.append(struct.pack("<BI", region.class_id, region.pixel_count))
            parts.append(np.asarray(desc, dtype="<f4").tobytes())
        if e.recnn_plus.shape != (c,):
            raise ValueError(f"{e.image_id}: recnn+ vector has shape {e.recnn_plus.shape}, expected ({c},)")
        parts.append(np.asarray(e.recnn_plus, dtype="<f4").tobytes())
        for scheme in baselines.BASELINE_SCHEMES:
            vec = e.baselines.get(scheme)
            if vec is None:
                parts.append(struct.pack("<BI", 0, 0))
            else:
                parts.append(struct.pack("<BI", 1, vec.shape[0]))
                parts.append(np.asarray(vec, dtype="<f4").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError(f"truncated RIX1 stream while reading {what}", self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size, what))

    def floats(self, n: int, what: str) -> np.ndarray:
        return np.frombuffer(self.take(4 * n, what), dtype="<f4").astype(np.float32)

    def string(self, what: str) -> str:
        (n,) = self.unpack("<H", what)
        start = self.pos
        try:
            return self.take(n, what).decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError(f"invalid UTF-8 in {what}", start) from None


def decode_index(data: bytes) -> RetrievalIndex:
    reader = _Reader(data)
    if reader.take(4, "magic") != RIX_MAGIC:
        raise FormatError("bad RIX1 magic", 0)
    version, count, c = reader.unpack("<III", "header")
    if version != RIX_VERSION:
        raise FormatError(f"unsupported RIX1 version {version}", 4)
    if c == 0:
        raise FormatError("feature_dim must be >= 1", 12)
    entries = []
    for _ in range(count):
        image_id = reader.string("image id")
        label = reader.string("class label")
        (bits,) = reader.unpack("<I", "label bitset")
        (n_regions,) = reader.unpack("<I", "region count")
        regions, descs = [], []
        for j in range(n_regions):
            class_id, pixel_count = reader.unpack("<BI", "region header")
            regions.append(Region(j + 1, class_id, pixel_count))
            descs.append(reader.floats(c, "region descriptor"))
        desc_array = np.stack(descs) if descs else np.empty((0, c), dtype=np.float32)
        recnn_plus = reader.floats(c, "recnn+ vector")
        base = {}
        for scheme in baselines.BASELINE_SCHEMES:
            present, length = reader.unpack("<BI", "baseline header")
            if present:
                base[scheme] = reader.floats(length, f"{scheme} descriptor")
            elif length:
                raise FormatError(f"absent {scheme} descriptor with nonzero length", reader.pos - 4)
        entries.append(
            IndexEntry(
                image_id=image_id,
                class_label=label,
                multi_labels=frozenset(i for i in range(MAX_BITSET_CLASSES) if bits >> i & 1),
                recnn=RegionFeatureSet(tuple(regions), desc_array),
                recnn_plus=recnn_plus,
                baselines=base,
            )
        )
    if reader.pos != len(data):
        raise FormatError(f"{len(data) - reader.pos} trailing bytes after last entry", reader.pos)
    try:
        return RetrievalIndex(entries, c)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def save_index(index: RetrievalIndex, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_index(index))


def load_index(path) -> RetrievalIndex:
    with open(path, "rb") as fh:
        return decode_index(fh.read())


# -- querying ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RankedList:
    """Candidates in ascending distance order."""

    image_ids: tuple[str, ...]
    distances: np.ndarray

    def __len__(self) -> int:
        return len(self.image_ids)

    def __iter__(self):
        return zip(self.image_ids, (float(d) for d in self.distances))

    def top(self, k: int) -> list[tuple[str, float]]:
        return list(self)[:k]


def rank_by_distance(image_ids, distances) -> RankedList:
    """Sort candidates by distance, breaking ties by ascending image id."""
    ids = list(image_ids)
    distances = np.asarray(distances, dtype=np.float64)
    if distances.shape != (len(ids),):
        raise ValueError("need exactly one distance per candidate")
    order = sorted(range(len(ids)), key=lambda i: (distances[i], ids[i]))
    return RankedList(tuple(ids[i] for i in order), distances[order])


def _check_scheme(scheme: str) -> None:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {', '.join(SCHEMES)}")


def query_distances(
    index: RetrievalIndex,
    query_id: str,
    scheme: str,
    label_filter: bool = False,
    symmetric: bool = False,
) -> tuple[list[str], np.ndarray]:
    """Unsorted candidate ids (index order) and their distances to the query."""
    _check_scheme(scheme)
    if query_id not in index:
        raise ValueError(f"image id {query_id!r} is not in the index")
    query = index.entry(query_id)
    if label_filter:
        keep = [i for i, e in enumerate(index.entries) if e.multi_labels & query.multi_labels]
    else:
        keep = list(range(len(index)))
    ids = [index.entries[i].image_id for i in keep]
    if scheme == "recnn":
        dists = np.array(
            [region_set_distance(query.recnn, index.entries[i].recnn, symmetric) for i in keep], dtype=np.float64
        )
    else:
        matrix = index.vectors(scheme)
        qvec = matrix[index._position[query_id]]
        dists = distances_to(qvec, matrix[keep], VECTOR_NORMS[scheme])
    return ids, dists


def query_ranked(
    index: RetrievalIndex,
    query_id: str,
    scheme: str,
    label_filter: bool = False,
    symmetric: bool = False,
) -> RankedList:
    """Exhaustively rank the archive against one of its images.

    With ``label_filter`` on, candidates sharing no pixel class with the query
    are dropped before ranking.
    """
    return rank_by_distance(*query_distances(index, query_id, scheme, label_filter, symmetric))


def relevant_ids(index: RetrievalIndex, query_id: str) -> frozenset[str]:
    label = index.entry(query_id).class_label
    return frozenset(e.image_id for e in index.entries if e.class_label == label)


def evaluate_scheme(
    index: RetrievalIndex,
    scheme: str,
    k_list=DEFAULT_K,
    label_filter: bool = False,
    symmetric: bool = False,
    k_rule: str = "mpeg7",
) -> MetricsReport:
    """Use every entry once as a query and average the retrieval metrics.

    Relevance is an identical broad class label; the query is relevant to
    itself.
    """
    _check_scheme(scheme)
    if len(index) < 2 or len({e.class_label for e in index.entries}) < 2:
        raise ValueError("evaluation needs at least 2 entries and 2 classes")
    rankings = [query_ranked(index, e.image_id, scheme, label_filter, symmetric) for e in index.entries]
    relevant = [relevant_ids(index, e.image_id) for e in index.entries]
    return evaluate_rankings(rankings, relevant, scheme=scheme, k_list=k_list, k_rule=k_rule)
