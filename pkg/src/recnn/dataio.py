"""Readers and writers for rasters, label maps, feature tensors and manifests.

Formats
-------
* PPM ``P6`` (maxval 255) for RGB rasters.
* PGM ``P5`` (maxval 255) for per-pixel class-id label maps; 255 is the
  ignore label.
* FMAP for dense feature tensors: ``b"RFM1"``, then little-endian ``u32``
  height, width, channels, then ``H*W*C`` little-endian float32 values in
  row-major, channel-fastest order.
* JSON-lines manifest, one object per line with keys ``id``, ``class``,
  ``image``, ``labels`` and ``features``.

Netpbm headers with ``#`` comments are rejected so that the canonical byte
stream is unique.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IGNORE_LABEL = 255
FMAP_MAGIC = b"RFM1"
_FMAP_HEADER = struct.Struct("<4sIII")
_WHITESPACE = b" \t\n\r\v\f"


class DataIOError(ValueError):
    """Base class for every input/output validation failure."""


class FormatError(DataIOError):
    """Malformed byte stream. ``offset`` is the byte where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DataError(DataIOError):
    """Well-formed stream carrying values outside the allowed domain."""


class ManifestError(DataIOError):
    """Invalid manifest line; ``lines`` holds the 1-based line numbers involved."""

    def __init__(self, message: str, lines: tuple[int, ...] = ()):
        super().__init__(message)
        self.lines = lines


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class RasterImage:
    """An 8-bit RGB image, ``pixels`` has shape (H, W, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise DataError(f"RGB raster must have shape (H, W, 3), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise DataError("raster must be at least 1x1")
        object.__setattr__(self, "pixels", _frozen(pixels.astype(np.uint8, copy=False)))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class ids in ``[0, num_classes)``, or 255 for ignored pixels."""

    labels: np.ndarray
    num_classes: int = 17

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
            raise DataError(f"label map must be a non-empty 2-D array, got {labels.shape}")
        if not 1 <= self.num_classes <= IGNORE_LABEL:
            raise DataError(f"num_classes must lie in [1, 255], got {self.num_classes}")
        if labels.dtype != np.uint8:
            if labels.min() < 0 or labels.max() > IGNORE_LABEL:
                raise DataError("label values must fit in an unsigned byte")
            labels = labels.astype(np.uint8)
        bad = (labels >= self.num_classes) & (labels != IGNORE_LABEL)
        if bad.any():
            row, col = (int(v) for v in np.argwhere(bad)[0])
            raise DataError(
                f"label {int(labels[row, col])} at (row={row}, col={col}) is not a valid "
                f"class id for num_classes={self.num_classes} and is not the ignore label"
            )
        object.__setattr__(self, "labels", _frozen(labels))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Dense real-valued feature tensor of shape (H, W, C)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 3 or min(values.shape) < 1:
            raise DataError(f"feature map must have shape (H, W, C) with all sizes >= 1, got {values.shape}")
        if not np.issubdtype(values.dtype, np.floating):
            values = values.astype(np.float64)
        if not np.all(np.isfinite(values)):
            raise DataError("feature map contains non-finite values")
        object.__setattr__(self, "values", _frozen(values))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def channels(self) -> int:
        return self.values.shape[2]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape


@dataclass(frozen=True)
class ManifestRecord:
    image_id: str
    class_label: str
    image_path: Path
    label_path: Path
    feature_path: Path


# -- Netpbm -----------------------------------------------------------------


def _parse_netpbm_header(data: bytes, magic: bytes) -> tuple[int, int, int]:
    """Return ``(width, height, payload_offset)`` for a binary Netpbm stream."""
    if data[:2] != magic:
        raise FormatError(f"expected magic {magic.decode()!r}, got {data[:2]!r}", 0)
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        start = pos
        while pos < len(data) and data[pos] in _WHITESPACE:
            pos += 1
        if pos == start:
            raise FormatError(f"expected whitespace before {name}", pos)
        if pos < len(data) and data[pos : pos + 1] == b"#":
            raise FormatError("header comments are not supported", pos)
        start = pos
        while pos < len(data) and data[pos : pos + 1].isdigit():
            pos += 1
        if pos == start:
            raise FormatError(f"expected decimal {name}", pos)
        fields.append((int(data[start:pos]), start))
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise FormatError("expected a single whitespace byte after maxval", pos)
    pos += 1
    (width, _), (height, h_off), (maxval, m_off) = fields
    if width < 1:
        raise FormatError("width must be >= 1", fields[0][1])
    if height < 1:
        raise FormatError("height must be >= 1", h_off)
    if maxval != 255:
        raise FormatError(f"maxval must be 255, got {maxval}", m_off)
    return width, height, pos


def _netpbm_payload(data: bytes, offset: int, expected: int) -> bytes:
    available = len(data) - offset
    if available < expected:
        raise FormatError(f"truncated payload: expected {expected} bytes, found {available}", len(data))
    if available > expected:
        raise FormatError(f"{available - expected} trailing bytes after payload", offset + expected)
    return data[offset:]


def decode_image(data: bytes) -> RasterImage:
    """Decode a binary PPM (P6, maxval 255) stream."""
    width, height, offset = _parse_netpbm_header(data, b"P6")
    payload = _netpbm_payload(data, offset, width * height * 3)
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return RasterImage(pixels)


def encode_image(image: RasterImage) -> bytes:
    header = f"P6\n{image.width} {image.height}\n255\n".encode("ascii")
    return header + image.pixels.tobytes()


def decode_labelmap(data: bytes, num_classes: int = 17) -> LabelMap:
    """Decode a binary PGM (P5, maxval 255) label map and validate class ids."""
    width, height, offset = _parse_netpbm_header(data, b"P5")
    payload = _netpbm_payload(data, offset, width * height)
    labels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return LabelMap(labels, num_classes)


def encode_labelmap(labelmap: LabelMap) -> bytes:
    header = f"P5\n{labelmap.width} {labelmap.height}\n255\n".encode("ascii")
    return header + labelmap.labels.tobytes()


# -- FMAP -------------------------------------------------------------------


def decode_fmap(data: bytes) -> FeatureMap:
    if len(data) < _FMAP_HEADER.size:
        raise FormatError(f"FMAP header needs {_FMAP_HEADER.size} bytes, got {len(data)}", len(data))
    magic, height, width, channels = _FMAP_HEADER.unpack_from(data)
    if magic != FMAP_MAGIC:
        raise FormatError(f"bad FMAP magic {magic!r}", 0)
    count = height * width * channels
    if count == 0:
        raise FormatError(f"degenerate FMAP shape {height}x{width}x{channels}", 4)
    expected = _FMAP_HEADER.size + 4 * count
    if len(data) != expected:
        raise FormatError(
            f"FMAP size mismatch: header implies {expected} bytes, stream has {len(data)}",
            min(len(data), expected),
        )
    values = np.frombuffer(data, dtype="<f4", offset=_FMAP_HEADER.size)
    return FeatureMap(values.reshape(height, width, channels).astype(np.float32))


def encode_fmap(fmap: FeatureMap) -> bytes:
    height, width, channels = fmap.shape
    header = _FMAP_HEADER.pack(FMAP_MAGIC, height, width, channels)
    return header + np.ascontiguousarray(fmap.values, dtype="<f4").tobytes()


# -- path helpers -----------------------------------------------------------


def _read_bytes(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read()


def _write_bytes(path, data: bytes) -> None:
    with open(path, "wb") as fh:
        fh.write(data)


def read_image(path) -> RasterImage:
    return decode_image(_read_bytes(path))


def write_image(path, image: RasterImage) -> None:
    _write_bytes(path, encode_image(image))


def read_labelmap(path, num_classes: int = 17) -> LabelMap:
    return decode_labelmap(_read_bytes(path), num_classes)


def write_labelmap(path, labelmap: LabelMap) -> None:
    _write_bytes(path, encode_labelmap(labelmap))


def read_fmap(path) -> FeatureMap:
    return decode_fmap(_read_bytes(path))


def write_fmap(path, fmap: FeatureMap) -> None:
    _write_bytes(path, encode_fmap(fmap))


# -- manifest ---------------------------------------------------------------

_MANIFEST_FIELDS = ("id", "class", "image", "labels", "features")


def load_manifest(path, check_files: bool = True) -> list[ManifestRecord]:
    """Load a JSON-lines manifest, sorted by image id.

    Relative file paths are resolved against the manifest's directory.
    Blank lines are skipped.
    """
    path = Path(path)
    base = path.parent
    seen: dict[str, int] = {}
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: unreadable line: {exc.msg}", (lineno,)) from None
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: expected a JSON object", (lineno,))
            missing = [k for k in _MANIFEST_FIELDS if k not in obj]
            if missing:
                raise ManifestError(f"{path}:{lineno}: missing field(s) {', '.join(missing)}", (lineno,))
            image_id = str(obj["id"])
            if image_id in seen:
                first = seen[image_id]
                raise ManifestError(
                    f"{path}: duplicate id {image_id!r} on lines {first} and {lineno}", (first, lineno)
                )
            seen[image_id] = lineno
            record = ManifestRecord(
                image_id=image_id,
                class_label=str(obj["class"]),
                image_path=base / obj["image"],
                label_path=base / obj["labels"],
                feature_path=base / obj["features"],
            )
            if check_files:
                for p in (record.image_path, record.label_path, record.feature_path):
                    if not p.is_file():
                        raise ManifestError(f"{path}:{lineno}: referenced file {p} does not exist", (lineno,))
            records.append(record)
    records.sort(key=lambda r: r.image_id)
    return records


def write_manifest(path, records) -> None:
    """Write records as JSON lines; paths are stored relative to the manifest."""
    path = Path(path)
    base = path.parent
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            obj = {
                "id": r.image_id,
                "class": r.class_label,
                "image": Path(os.path.relpath(r.image_path, base)).as_posix(),
                "labels": Path(os.path.relpath(r.label_path, base)).as_posix(),
                "features": Path(os.path.relpath(r.feature_path, base)).as_posix(),
            }
            fh.write(json.dumps(obj, sort_keys=False) + "\n")


# -- multi-labels -----------------------------------------------------------


def derive_multilabels(labelmap: LabelMap, min_pixels: int = 1) -> frozenset[int]:
    """Class ids covering at least ``min_pixels`` pixels; the ignore label is never included."""
    if min_pixels < 1:
        raise ValueError("min_pixels must be >= 1")
    counts = np.bincount(labelmap.labels.ravel(), minlength=256)
    counts[IGNORE_LABEL] = 0
    return frozenset(int(c) for c in np.flatnonzero(counts >= min_pixels))
