"""Shared fixtures: the vendored MNIST files and synthetic dataset writers."""

import gzip
import struct
from pathlib import Path

import numpy as np
import pytest

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "mnist"

MNIST_FILES = {
    "train_images": DATA_DIR / "train-images-idx3-ubyte.gz",
    "train_labels": DATA_DIR / "train-labels-idx1-ubyte.gz",
    "test_images": DATA_DIR / "t10k-images-idx3-ubyte.gz",
    "test_labels": DATA_DIR / "t10k-labels-idx1-ubyte.gz",
}

requires_mnist = pytest.mark.skipif(
    not all(p.exists() for p in MNIST_FILES.values()),
    reason="vendored MNIST files not present under data/mnist",
)


@pytest.fixture(scope="session")
def mnist_train():
    from hmpyramid import load_idx

    return load_idx(MNIST_FILES["train_images"], MNIST_FILES["train_labels"], "mnist")


@pytest.fixture(scope="session")
def mnist_test():
    from hmpyramid import load_idx

    return load_idx(MNIST_FILES["test_images"], MNIST_FILES["test_labels"], "mnist")


def write_idx_images(path, images: np.ndarray, compress: bool = False) -> Path:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    blob = struct.pack(">IIII", 0x00000803, n, rows, cols) + images.tobytes()
    if compress:
        blob = gzip.compress(blob)
    path = Path(path)
    path.write_bytes(blob)
    return path


def write_idx_labels(path, labels, compress: bool = False) -> Path:
    labels = [int(v) for v in labels]
    blob = struct.pack(">II", 0x00000801, len(labels)) + bytes(labels)
    if compress:
        blob = gzip.compress(blob)
    path = Path(path)
    path.write_bytes(blob)
    return path


def toy_class_images(n: int, side: int = 6, noise_seed: int | None = 0):
    """Tiny labeled image set with a visible class structure: class c draws a
    bright row and column whose position depends on c."""
    labels = np.arange(n) % 10
    images = np.zeros((n, side, side), dtype=np.uint8)
    for i, c in enumerate(labels):
        images[i, c % side, :] = 220
        images[i, :, (c // 2) % side] = 180
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        images = np.clip(
            images.astype(np.int64) + rng.integers(0, 30, images.shape), 0, 255
        ).astype(np.uint8)
    return images, labels


@pytest.fixture
def toy_idx_dir(tmp_path):
    """Directory holding a complete synthetic IDX train/test pair."""
    images, labels = toy_class_images(100)
    write_idx_images(tmp_path / "train-images", images)
    write_idx_labels(tmp_path / "train-labels", labels)
    write_idx_images(tmp_path / "test-images", images[:50])
    write_idx_labels(tmp_path / "test-labels", labels[:50])
    return tmp_path
