"""On-disk formats: descriptor matrices, region geometry, dataset manifests.

Matrix file layout (all little-endian):

    offset 0   4 bytes   magic ``DMX1``
    offset 4   u32       rows
    offset 8   u32       cols
    offset 12  f32 * rows*cols   values, row-major

Geometry files reuse the same container: a ``(n_regions + 1) x 4``
matrix whose first row is ``(image_width, image_height, 0, 0)`` and
whose remaining rows are boxes ``(x_min, y_min, x_max, y_max)`` in
pixels.

A manifest is a UTF-8 JSON document::

    {"images": [{"id": ..., "regions": ..., "geometry": ..., "global": ...,
                 "label": ..., "split": ...}, ...],
     "junk": {query_id: [image ids], ...}}

File paths inside a manifest are resolved relative to the manifest's
own directory.  Region descriptor files hold one ``d x n_regions``
matrix per image (one descriptor per column); global descriptor files
hold a single ``d_global x 1`` column.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    DanglingReferenceError,
    InconsistentDimensionError,
    InconsistentRegionCountError,
    IoFailureError,
    MissingFileError,
    NonFiniteValueError,
    ParseError,
    TruncatedPayloadError,
    UnknownImageError,
)

MAGIC = b"DMX1"
_HEADER = struct.Struct("<II")
HEADER_SIZE = len(MAGIC) + _HEADER.size  # 12 bytes before the payload

VALID_SPLITS = ("train", "test", "database", "query")


def save_matrix(values, path) -> None:
    """Write a 2-D array as a DMX1 file (values stored as float32)."""
    arr = np.asarray(values)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise TruncatedPayloadError(f"cannot save shape {arr.shape}: need a non-empty 2-D matrix")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValueError(f"refusing to save non-finite values to {path}")
    payload = np.ascontiguousarray(arr, dtype="<f4")
    rows, cols = payload.shape
    try:
        with open(path, "wb") as handle:
            handle.write(MAGIC)
            handle.write(_HEADER.pack(rows, cols))
            handle.write(payload.tobytes())
    except OSError as exc:
        raise IoFailureError(f"failed to write {path}: {exc}") from exc


def load_matrix(path) -> np.ndarray:
    """Read a DMX1 file, returning a float32 array of shape (rows, cols)."""
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such matrix file: {path}")
    data = path.read_bytes()
    if len(data) < HEADER_SIZE:
        raise TruncatedPayloadError(f"{path}: only {len(data)} bytes, header needs {HEADER_SIZE}")
    if data[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    rows, cols = _HEADER.unpack_from(data, 4)
    if rows < 1 or cols < 1:
        raise TruncatedPayloadError(f"{path}: degenerate shape ({rows}, {cols}) in header")
    expected = HEADER_SIZE + 4 * rows * cols
    if len(data) != expected:
        raise TruncatedPayloadError(
            f"{path}: payload is {len(data)} bytes, {rows}x{cols} header implies {expected}"
        )
    values = np.frombuffer(data, dtype="<f4", offset=HEADER_SIZE).reshape(rows, cols).copy()
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values.ravel()))[0])
        offset = HEADER_SIZE + 4 * bad
        raise NonFiniteValueError(f"{path}: non-finite value at byte offset {offset}")
    return values


@dataclass
class RegionGeometry:
    """Pixel boxes for one image's regions."""

    boxes: np.ndarray  # (n_regions, 4): x_min, y_min, x_max, y_max
    image_width: float
    image_height: float

    def __post_init__(self):
        self.boxes = np.asarray(self.boxes, dtype=np.float64).reshape(-1, 4)
        self.validate()

    def validate(self):
        if self.image_width <= 0 or self.image_height <= 0:
            raise ParseError(f"invalid image size {self.image_width}x{self.image_height}")
        x0, y0, x1, y1 = self.boxes.T
        ok = (
            np.all(x0 >= 0)
            and np.all(y0 >= 0)
            and np.all(x0 < x1)
            and np.all(y0 < y1)
            and np.all(x1 <= self.image_width)
            and np.all(y1 <= self.image_height)
        )
        if not ok:
            raise ParseError("geometry boxes violate 0 <= min < max <= image bounds")

    @property
    def n_regions(self) -> int:
        return self.boxes.shape[0]

    def centers(self) -> np.ndarray:
        """(n_regions, 2) box centers."""
        return np.column_stack(
            ((self.boxes[:, 0] + self.boxes[:, 2]) / 2.0,
             (self.boxes[:, 1] + self.boxes[:, 3]) / 2.0)
        )


def save_geometry(geometry: RegionGeometry, path) -> None:
    header = np.array([[geometry.image_width, geometry.image_height, 0.0, 0.0]])
    save_matrix(np.vstack([header, geometry.boxes]), path)


def load_geometry(path) -> RegionGeometry:
    values = load_matrix(path)
    if values.shape[1] != 4 or values.shape[0] < 2:
        raise ParseError(f"{path}: geometry needs a 4-column matrix with a size row plus boxes")
    width, height = float(values[0, 0]), float(values[0, 1])
    return RegionGeometry(boxes=values[1:], image_width=width, image_height=height)


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    regions_path: Path
    geometry_path: Path
    global_path: Path
    label: str | None
    split: str


@dataclass
class DatasetManifest:
    """A validated dataset: image records plus per-query junk sets."""

    images: list[ImageRecord]
    junk: dict[str, tuple[str, ...]]
    root: Path
    region_dim: int
    regions_per_image: int
    global_dim: int
    _by_id: dict[str, ImageRecord] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        self._by_id = {rec.image_id: rec for rec in self.images}

    def ids(self, split: str | None = None) -> list[str]:
        if split is None:
            return [rec.image_id for rec in self.images]
        return [rec.image_id for rec in self.images if rec.split == split]

    def record(self, image_id: str) -> ImageRecord:
        try:
            return self._by_id[image_id]
        except KeyError:
            raise UnknownImageError(f"unknown image id {image_id!r}") from None

    def label(self, image_id: str) -> str | None:
        return self.record(image_id).label

    def load_regions(self, image_id: str) -> np.ndarray:
        """(region_dim, regions_per_image) float64 descriptors for one image."""
        return load_matrix(self.record(image_id).regions_path).astype(np.float64)

    def load_geometry(self, image_id: str) -> RegionGeometry:
        return load_geometry(self.record(image_id).geometry_path)

    def load_global(self, image_id: str) -> np.ndarray:
        """(global_dim,) float64 whole-image descriptor."""
        return load_matrix(self.record(image_id).global_path).astype(np.float64)[:, 0]

    def junk_for(self, query_id: str) -> frozenset[str]:
        return frozenset(self.junk.get(query_id, ()))


def _require(condition, exc_type, message):
    if not condition:
        raise exc_type(message)


def load_manifest(path) -> DatasetManifest:
    """Parse and fully validate a manifest document.

    Every referenced file is opened once: missing files raise
    ``DanglingReferenceError``, dimension disagreements raise
    ``InconsistentDimensionError``, and region/geometry count
    disagreements raise ``InconsistentRegionCountError``.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such manifest: {path}")
    root = path.parent
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from exc
    _require(isinstance(doc, dict) and isinstance(doc.get("images"), list),
             ParseError, f"{path}: manifest must be an object with an 'images' list")

    records: list[ImageRecord] = []
    seen: set[str] = set()
    for entry in doc["images"]:
        _require(isinstance(entry, dict), ParseError, f"{path}: image entries must be objects")
        try:
            image_id = str(entry["id"])
            split = str(entry["split"])
            rec = ImageRecord(
                image_id=image_id,
                regions_path=root / str(entry["regions"]),
                geometry_path=root / str(entry["geometry"]),
                global_path=root / str(entry["global"]),
                label=None if entry.get("label") is None else str(entry["label"]),
                split=split,
            )
        except KeyError as exc:
            raise ParseError(f"{path}: image entry missing key {exc}") from exc
        _require(split in VALID_SPLITS, ParseError,
                 f"{path}: invalid split {split!r} for image {image_id!r}")
        _require(image_id not in seen, ParseError, f"{path}: duplicate image id {image_id!r}")
        seen.add(image_id)
        records.append(rec)
    _require(records, ParseError, f"{path}: manifest lists no images")

    region_dim = regions_per_image = global_dim = None
    for rec in records:
        for file_path in (rec.regions_path, rec.geometry_path, rec.global_path):
            _require(file_path.is_file(), DanglingReferenceError,
                     f"{path}: image {rec.image_id!r} references missing file {file_path}")
        regions = load_matrix(rec.regions_path)
        if region_dim is None:
            region_dim, regions_per_image = regions.shape
        else:
            _require(regions.shape[0] == region_dim, InconsistentDimensionError,
                     f"{path}: image {rec.image_id!r} has descriptor dim {regions.shape[0]}, "
                     f"expected {region_dim}")
            _require(regions.shape[1] == regions_per_image, InconsistentRegionCountError,
                     f"{path}: image {rec.image_id!r} has {regions.shape[1]} regions, "
                     f"expected {regions_per_image}")
        geometry = load_geometry(rec.geometry_path)
        _require(geometry.n_regions == regions.shape[1], InconsistentRegionCountError,
                 f"{path}: image {rec.image_id!r} has {geometry.n_regions} boxes for "
                 f"{regions.shape[1]} descriptors")
        glob = load_matrix(rec.global_path)
        _require(glob.shape[1] == 1, ParseError,
                 f"{path}: global descriptor of {rec.image_id!r} must be a single column")
        if global_dim is None:
            global_dim = glob.shape[0]
        else:
            _require(glob.shape[0] == global_dim, InconsistentDimensionError,
                     f"{path}: image {rec.image_id!r} has global dim {glob.shape[0]}, "
                     f"expected {global_dim}")

    junk_doc = doc.get("junk") or {}
    _require(isinstance(junk_doc, dict), ParseError, f"{path}: 'junk' must be an object")
    junk: dict[str, tuple[str, ...]] = {}
    for query_id, members in junk_doc.items():
        _require(query_id in seen, DanglingReferenceError,
                 f"{path}: junk list for unknown image {query_id!r}")
        _require(isinstance(members, list), ParseError,
                 f"{path}: junk list of {query_id!r} must be an array")
        for member in members:
            _require(str(member) in seen, DanglingReferenceError,
                     f"{path}: junk entry {member!r} of query {query_id!r} is not in the dataset")
        junk[str(query_id)] = tuple(str(m) for m in members)

    return DatasetManifest(
        images=records,
        junk=junk,
        root=root,
        region_dim=int(region_dim),
        regions_per_image=int(regions_per_image),
        global_dim=int(global_dim),
    )


def write_manifest(document: dict, path) -> None:
    """Write a manifest JSON document (paths inside stay as given)."""
    try:
        Path(path).write_text(json.dumps(document, indent=2, sort_keys=True), encoding="utf-8")
    except OSError as exc:
        raise IoFailureError(f"failed to write {path}: {exc}") from exc
