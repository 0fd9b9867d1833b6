"""Loading image datasets from their standard binary distributions.

IDX files (the MNIST family layout) and CIFAR-10 python-batch files are both
supported, gzipped or raw; color images are collapsed to grayscale at load
time so the rest of the package only ever sees square grayscale images in
[0, 1] with optional integer labels.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, FormatError

__all__ = [
    "Dataset",
    "load_idx",
    "load_cifar10",
    "rgb_to_gray",
    "split_by_class",
    "take",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD = 3073  # 1 label byte + 3 * 1024 channel bytes
N_CLASSES = 10


@dataclass
class Dataset:
    """Square grayscale images in [0, 1] with optional class labels."""

    name: str
    images: np.ndarray  # (n, side, side) float64
    labels: np.ndarray | None = None  # (n,) int64

    def __post_init__(self):
        if self.images.ndim != 3 or self.images.shape[1] != self.images.shape[2]:
            raise ValueError(f"images must be (n, side, side), got {self.images.shape}")
        if self.labels is not None and len(self.labels) != len(self.images):
            raise ConsistencyError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return self.images.shape[0]

    @property
    def side(self) -> int:
        return self.images.shape[1]

    def vectors(self) -> np.ndarray:
        """Images flattened row-major to (n, side*side)."""
        return self.images.reshape(len(self), -1)

    def subset(self, indices, name: str | None = None) -> "Dataset":
        indices = np.asarray(indices)
        return Dataset(
            name if name is not None else self.name,
            self.images[indices],
            None if self.labels is None else self.labels[indices],
        )


def _read_bytes(path) -> bytes:
    """Read a file, decompressing transparently when it starts with the gzip
    magic."""
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def _parse_idx_labels(raw: bytes, path) -> np.ndarray:
    if len(raw) < 8:
        raise FormatError(f"{path}: truncated label header")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(f"{path}: bad label magic 0x{magic:08x}")
    if len(raw) != 8 + count:
        raise FormatError(f"{path}: label payload is {len(raw) - 8} bytes, expected {count}")
    labels = np.frombuffer(raw, dtype=np.uint8, offset=8)
    if labels.size and labels.max() >= N_CLASSES:
        raise FormatError(f"{path}: label {labels.max()} out of range 0..{N_CLASSES - 1}")
    return labels.astype(np.int64)


def load_idx(images_path, labels_path=None, name: str | None = None) -> Dataset:
    """Load an IDX image file (and optionally its label file).

    Both files may be gzipped.  Images must be square; pixels are scaled from
    0..255 to [0, 1].  A label count that disagrees with the image count is a
    consistency error.
    """
    raw = _read_bytes(images_path)
    if len(raw) < 16:
        raise FormatError(f"{images_path}: truncated image header")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(f"{images_path}: bad image magic 0x{magic:08x}")
    if rows != cols:
        raise FormatError(f"{images_path}: images are {rows}x{cols}, expected square")
    if len(raw) != 16 + count * rows * cols:
        raise FormatError(
            f"{images_path}: image payload is {len(raw) - 16} bytes, "
            f"expected {count * rows * cols}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    images = pixels.reshape(count, rows, cols).astype(np.float64) / 255.0

    labels = None
    if labels_path is not None:
        labels = _parse_idx_labels(_read_bytes(labels_path), labels_path)
        if len(labels) != count:
            raise ConsistencyError(
                f"{images_path} has {count} images but {labels_path} has "
                f"{len(labels)} labels"
            )
    if name is None:
        name = Path(images_path).name.split(".")[0]
    return Dataset(name, images, labels)


def rgb_to_gray(r, g, b):
    """Luma grayscale of 0..255 channel values, rounded half up.

    Accepts scalars or arrays; returns the same shape with integer values in
    0..255.
    """
    r = np.asarray(r, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    gray = np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5).astype(np.int64)
    if gray.ndim == 0:
        return int(gray)
    return gray


def load_cifar10(batch_paths, name: str = "cifar10") -> Dataset:
    """Load CIFAR-10 binary batches as 32x32 grayscale.

    Each batch is a sequence of 3073-byte records: one label byte followed by
    1024 red, 1024 green, and 1024 blue bytes in row-major order.  Batches
    are concatenated in the order given.
    """
    paths = list(batch_paths)
    if not paths:
        raise ValueError("need at least one batch path")
    all_images, all_labels = [], []
    for path in paths:
        raw = _read_bytes(path)
        if len(raw) == 0 or len(raw) % CIFAR_RECORD != 0:
            raise FormatError(
                f"{path}: {len(raw)} bytes is not a multiple of the "
                f"{CIFAR_RECORD}-byte record size"
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        labels = records[:, 0]
        if labels.max() >= N_CLASSES:
            raise FormatError(f"{path}: label {labels.max()} out of range 0..{N_CLASSES - 1}")
        channels = records[:, 1:].reshape(-1, 3, 32, 32)
        gray = rgb_to_gray(channels[:, 0], channels[:, 1], channels[:, 2])
        all_images.append(gray.astype(np.float64) / 255.0)
        all_labels.append(labels.astype(np.int64))
    return Dataset(name, np.concatenate(all_images), np.concatenate(all_labels))


def split_by_class(ds: Dataset) -> list[Dataset]:
    """One dataset per class id 0..9, preserving order within each class.

    Classes absent from the data yield empty datasets, so the list always has
    ten entries.
    """
    if ds.labels is None:
        raise ValueError(f"{ds.name} has no labels to split on")
    return [
        ds.subset(np.flatnonzero(ds.labels == c), name=f"{ds.name}[{c}]")
        for c in range(N_CLASSES)
    ]


def take(ds: Dataset, count: int, seed: int | None = None) -> Dataset:
    """First ``count`` examples, or a seeded random ``count``-subset.

    With a seed the subset is a prefix of a deterministic permutation keyed by
    that seed alone (stream 0), independent of everything else.
    """
    if not 0 < count <= len(ds):
        raise ValueError(f"count must be in [1, {len(ds)}], got {count}")
    if seed is None:
        return ds.subset(np.arange(count))
    from .numerics import make_rng

    return ds.subset(make_rng(seed, 0).permutation(len(ds))[:count])
