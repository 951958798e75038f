"""Samples, distance matrices and their on-disk formats.

Images are held channel-last, ``(height, width, channels)``, as float32 with
intensities in [0, 1].  Distances are always float64.

File formats
------------
dataset manifest
    JSON ``{"shape": [H, W, C], "dtype": "u8" | "f32", "records": path,
    "labels": path}``.  ``records`` holds contiguous row-major tensors,
    ``labels`` one little-endian uint16 per record.  Relative paths resolve
    against the manifest's directory.
CIFAR-10 binary batch
    3073-byte records: one label byte, then the 1024 red, 1024 green and
    1024 blue bytes of a 32x32 image.
distance matrix
    little-endian uint64 ``n`` followed by ``n*n`` little-endian float64
    values in row-major order.
orbit manifest
    JSON mapping each sample index to a list of tensor files of the
    sample's shape, optionally wrapped as ``{"dtype": ..., "orbits": {...}}``.
    Tensor files are raw (same dtype rules as records) or ``.npy``.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

CIFAR_SHAPE = (32, 32, 3)
CIFAR_RECORD_BYTES = 1 + 32 * 32 * 3

_DTYPES = {"u8": np.dtype("u1"), "f32": np.dtype("<f4")}


class DataFormatError(ValueError):
    """A file on disk does not match its declared layout."""


@dataclass(frozen=True)
class TensorShape:
    height: int
    width: int
    channels: int

    def __post_init__(self):
        for name in ("height", "width", "channels"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")

    @property
    def size(self) -> int:
        return self.height * self.width * self.channels

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DataPoint:
    """A single tensor ``x``; ``values`` is the flat channel-last buffer."""

    values: np.ndarray
    shape: TensorShape

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        if values.size != self.shape.size:
            raise ValueError(
                f"expected {self.shape.size} values for shape {self.shape.as_tuple()}, "
                f"got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError("data point contains non-finite values")
        object.__setattr__(self, "values", _frozen(values))

    @classmethod
    def from_image(cls, image) -> "DataPoint":
        image = np.asarray(image, dtype=np.float32)
        if image.ndim == 2:
            image = image[:, :, None]
        return cls(image.reshape(-1), TensorShape(*image.shape))

    @property
    def image(self) -> np.ndarray:
        return self.values.reshape(self.shape.as_tuple())


@dataclass(frozen=True, eq=False)
class Sample:
    """An ordered, labelled set of equally shaped images.

    ``images`` has shape ``(n, H, W, C)``.  Both arrays are read-only.
    """

    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float32)
        if images.ndim == 3:
            images = images[..., None]
        if images.ndim != 4 or images.shape[0] == 0:
            raise ValueError("a sample needs at least one (H, W, C) image")
        if not np.all(np.isfinite(images)):
            raise ValueError("sample contains non-finite values")
        labels = np.asarray(self.labels)
        if labels.shape != (images.shape[0],):
            raise ValueError(
                f"label count mismatch: {labels.size} labels for {images.shape[0]} points")
        if labels.size and (not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0):
            raise ValueError("labels must be nonnegative integers")
        object.__setattr__(self, "images", _frozen(images))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))

    @classmethod
    def from_points(cls, points: Sequence[DataPoint], labels) -> "Sample":
        if not points:
            raise ValueError("a sample needs at least one point")
        shape = points[0].shape
        for i, p in enumerate(points):
            if p.shape != shape:
                raise ValueError(f"point {i} has shape {p.shape.as_tuple()}, expected {shape.as_tuple()}")
        return cls(np.stack([p.image for p in points]), labels)

    def __len__(self) -> int:
        return self.images.shape[0]

    def __getitem__(self, i: int) -> DataPoint:
        return DataPoint(self.images[i].reshape(-1), self.shape)

    def __eq__(self, other):
        if not isinstance(other, Sample):
            return NotImplemented
        return (self.images.shape == other.images.shape
                and np.array_equal(self.images, other.images)
                and np.array_equal(self.labels, other.labels))

    @property
    def shape(self) -> TensorShape:
        return TensorShape(*self.images.shape[1:])

    @property
    def points(self) -> list[DataPoint]:
        return [self[i] for i in range(len(self))]

    def flat(self) -> np.ndarray:
        """``(n, H*W*C)`` view of the images."""
        return self.images.reshape(len(self), -1)

    def subset(self, indices) -> "Sample":
        indices = np.asarray(indices, dtype=np.int64)
        return Sample(self.images[indices], self.labels[indices])


def subsample_indices(labels, size: int, seed: int, balanced: bool = False) -> np.ndarray:
    """Pick ``size`` distinct indices, optionally balanced across classes.

    Balanced draws take ``size // n_classes`` per class and hand the
    remainder to the lowest class ids.  The result is sorted.
    """
    labels = np.asarray(labels)
    n = labels.size
    if size < 1 or size > n:
        raise ValueError(f"subset size {size} outside [1, {n}]")
    rng = np.random.default_rng(seed)
    if not balanced:
        return np.sort(rng.choice(n, size=size, replace=False))
    classes = np.unique(labels)
    base, extra = divmod(size, classes.size)
    picked = []
    for rank, c in enumerate(classes):
        members = np.flatnonzero(labels == c)
        want = base + (1 if rank < extra else 0)
        if want > members.size:
            raise ValueError(f"class {c} has only {members.size} points, {want} requested")
        picked.append(rng.choice(members, size=want, replace=False))
    return np.sort(np.concatenate(picked))


# ---------------------------------------------------------------------------
# dataset manifests

def _resolve(base: Path, p: str) -> Path:
    p = Path(p)
    return p if p.is_absolute() else base / p


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except FileNotFoundError:
        raise DataFormatError(f"missing file: {path}") from None


def _decode_tensors(raw: bytes, dtype: str, shape: tuple, path: Path) -> np.ndarray:
    if dtype not in _DTYPES:
        raise DataFormatError(f"{path}: unknown dtype {dtype!r} (expected 'u8' or 'f32')")
    dt = _DTYPES[dtype]
    per_record = int(np.prod(shape)) * dt.itemsize
    if len(raw) % per_record:
        raise DataFormatError(
            f"{path}: shape mismatch, {len(raw)} bytes is not a multiple of the "
            f"{per_record}-byte record of shape {list(shape)}; record "
            f"{len(raw) // per_record} is truncated")
    arr = np.frombuffer(raw, dtype=dt).reshape((-1,) + tuple(shape))
    if dtype == "u8":
        return arr.astype(np.float32) / np.float32(255.0)
    return arr.astype(np.float32)


def _parse_shape(shape, path) -> tuple[int, int, int]:
    try:
        return TensorShape(*[int(s) for s in shape]).as_tuple()
    except (TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: bad shape {shape!r}: {exc}") from None


def load_manifest(path) -> Sample:
    path = Path(path)
    try:
        meta = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from None
    for key in ("shape", "dtype", "records", "labels"):
        if key not in meta:
            raise DataFormatError(f"{path}: manifest lacks field {key!r}")
    shape = _parse_shape(meta["shape"], path)
    rec_path = _resolve(path.parent, meta["records"])
    lab_path = _resolve(path.parent, meta["labels"])
    images = _decode_tensors(_read_bytes(rec_path), meta["dtype"], shape, rec_path)
    raw_labels = _read_bytes(lab_path)
    if len(raw_labels) % 2:
        raise DataFormatError(f"{lab_path}: odd byte count for uint16 labels")
    labels = np.frombuffer(raw_labels, dtype="<u2")
    if labels.size != images.shape[0]:
        raise DataFormatError(
            f"{lab_path}: label count mismatch, {labels.size} labels for "
            f"{images.shape[0]} records in {rec_path}")
    if images.shape[0] == 0:
        raise DataFormatError(f"{rec_path}: no records")
    return Sample(images, labels.astype(np.int64))


def save_manifest(sample: Sample, path, dtype: str = "f32") -> None:
    """Write ``sample`` as a manifest plus ``<stem>.records``/``<stem>.labels``.

    With ``dtype="u8"`` intensities are rounded to the nearest byte.
    """
    path = Path(path)
    stem = path.with_suffix("")
    rec, lab = stem.with_suffix(".records"), stem.with_suffix(".labels")
    if dtype == "u8":
        payload = np.rint(np.clip(sample.images, 0, 1) * 255).astype("u1")
    elif dtype == "f32":
        payload = sample.images.astype("<f4")
    else:
        raise ValueError(f"unknown dtype {dtype!r}")
    if sample.labels.max() > np.iinfo(np.uint16).max:
        raise ValueError("labels do not fit in uint16")
    rec.write_bytes(payload.tobytes())
    lab.write_bytes(sample.labels.astype("<u2").tobytes())
    path.write_text(json.dumps({
        "shape": list(sample.shape.as_tuple()),
        "dtype": dtype,
        "records": rec.name,
        "labels": lab.name,
    }, indent=2))


def load_cifar_batch(path) -> Sample:
    path = Path(path)
    raw = _read_bytes(path)
    if not raw or len(raw) % CIFAR_RECORD_BYTES:
        raise DataFormatError(
            f"{path}: {len(raw)} bytes is not a whole number of {CIFAR_RECORD_BYTES}-byte "
            f"CIFAR-10 records; record {len(raw) // CIFAR_RECORD_BYTES} is truncated")
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
    labels = rec[:, 0].astype(np.int64)
    planes = rec[:, 1:].reshape(-1, 3, 32, 32)
    images = planes.transpose(0, 2, 3, 1).astype(np.float32) / np.float32(255.0)
    return Sample(images, labels)


def load_cifar_batches(paths) -> Sample:
    parts = [load_cifar_batch(p) for p in paths]
    return Sample(np.concatenate([p.images for p in parts]),
                  np.concatenate([p.labels for p in parts]))


def load_dataset(path) -> Sample:
    """Load a manifest (``.json``), a CIFAR-10 batch file, or a CIFAR-10 directory.

    A directory is read as its ``data_batch_*.bin`` files in name order.
    """
    path = Path(path)
    if path.is_dir():
        batches = sorted(path.glob("data_batch_*.bin"))
        if not batches:
            raise DataFormatError(f"{path}: no data_batch_*.bin files")
        return load_cifar_batches(batches)
    if path.suffix.lower() == ".json":
        return load_manifest(path)
    return load_cifar_batch(path)


def load_orbit_manifest(path, shape: tuple[int, int, int] | None = None,
                        dtype: str = "u8") -> dict[int, np.ndarray]:
    """Read precomputed orbits as ``{sample index: (K, H, W, C) array}``."""
    path = Path(path)
    try:
        meta = json.loads(_read_bytes(path))
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: invalid JSON: {exc}") from None
    if "orbits" in meta:
        dtype = meta.get("dtype", dtype)
        if "shape" in meta:
            shape = _parse_shape(meta["shape"], path)
        mapping = meta["orbits"]
    else:
        mapping = meta
    out = {}
    for key, files in mapping.items():
        try:
            idx = int(key)
        except ValueError:
            raise DataFormatError(f"{path}: orbit key {key!r} is not a sample index") from None
        if not files:
            raise DataFormatError(f"{path}: empty orbit for sample {idx}")
        members = []
        for f in files:
            fp = _resolve(path.parent, f)
            if fp.suffix == ".npy":
                if not fp.exists():
                    raise DataFormatError(f"missing orbit file: {fp} (sample {idx})")
                stored = np.load(fp)
                arr = stored.astype(np.float32)
                if np.issubdtype(stored.dtype, np.integer):
                    arr /= np.float32(255.0)
                if arr.ndim == 2:
                    arr = arr[:, :, None]
            else:
                if shape is None:
                    raise DataFormatError(f"{path}: raw orbit files need a declared shape")
                arr = _decode_tensors(_read_bytes(fp), dtype, shape, fp)
                if arr.shape[0] != 1:
                    raise DataFormatError(f"{fp}: expected one tensor, found {arr.shape[0]}")
                arr = arr[0]
            if shape is not None and arr.shape != tuple(shape):
                raise DataFormatError(
                    f"{fp}: shape mismatch, {arr.shape} vs sample shape {tuple(shape)} (sample {idx})")
            members.append(arr)
        out[idx] = np.stack(members)
    return out


# ---------------------------------------------------------------------------
# distance matrices

@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """Symmetric, zero-diagonal, nonnegative, finite ``n x n`` float64 matrix."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1] or e.shape[0] == 0:
            raise ValueError(f"distance matrix must be square and nonempty, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(e < 0):
            raise ValueError("distance matrix has negative entries")
        if np.any(np.diag(e) != 0):
            raise ValueError("distance matrix has a nonzero diagonal")
        if not np.array_equal(e, e.T):
            raise ValueError("distance matrix is not symmetric")
        object.__setattr__(self, "entries", _frozen(e))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __len__(self) -> int:
        return self.n

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, DistanceMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)


def as_matrix(d) -> np.ndarray:
    return d.entries if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=np.float64)


def save_distance_matrix(m, path) -> None:
    m = m if isinstance(m, DistanceMatrix) else DistanceMatrix(m)
    path = Path(path)
    tmp = path.with_name(path.name + f".tmp{os.getpid()}")
    with open(tmp, "wb") as fh:
        fh.write(np.uint64(m.n).astype("<u8").tobytes())
        fh.write(m.entries.astype("<f8").tobytes())
    os.replace(tmp, path)


def load_distance_matrix(path) -> DistanceMatrix:
    path = Path(path)
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise DataFormatError(f"{path}: truncated header")
    n = int(np.frombuffer(raw[:8], dtype="<u8")[0])
    body = len(raw) - 8
    if body != 8 * n * n:
        raise DataFormatError(
            f"{path}: header declares n={n} ({n * n} values) but the file holds "
            f"{body / 8:g} values")
    entries = np.frombuffer(raw[8:], dtype="<f8").reshape(n, n)
    try:
        return DistanceMatrix(entries)
    except ValueError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
