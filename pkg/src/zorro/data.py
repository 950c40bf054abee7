"""Dataset ingestion: MNIST IDX files, deterministic splits, synthetic blobs."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "IdxError",
    "BadMagicError",
    "TruncatedError",
    "CountMismatchError",
    "IMAGE_MAGIC",
    "LABEL_MAGIC",
    "load_idx",
    "write_idx",
    "split",
    "subset_split",
    "synth_blobs",
    "resolve_mnist",
]

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxError(ValueError):
    """Base class for IDX container parse failures."""


class BadMagicError(IdxError):
    pass


class TruncatedError(IdxError):
    pass


class CountMismatchError(IdxError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Feature matrix in [0,1] with integer class labels."""

    features: np.ndarray  # (N, D) float64
    labels: np.ndarray    # (N,) int64 in [0, class_count)
    class_count: int

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError("features must be a nonempty N x D matrix")
        if self.labels.shape != (self.features.shape[0],):
            raise ValueError("labels must be one per sample")
        if not np.all(np.isfinite(self.features)):
            raise ValueError("features must be finite")
        if self.features.min() < 0.0 or self.features.max() > 1.0:
            raise ValueError("features must lie in [0, 1]")
        if self.labels.min() < 0 or self.labels.max() >= self.class_count:
            raise ValueError("labels must lie in [0, class_count)")

    def __len__(self) -> int:
        return self.features.shape[0]

    def take(self, indices) -> "Dataset":
        return Dataset(self.features[indices], self.labels[indices], self.class_count)


def _read_exact(f, n, what):
    buf = f.read(n)
    if len(buf) != n:
        raise TruncatedError(f"truncated IDX file: expected {n} bytes of {what}, got {len(buf)}")
    return buf


def _open_maybe_gzip(path):
    # gzip accepted transparently, by extension
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def load_idx(images_path, labels_path) -> Dataset:
    """Load an MNIST-style image/label file pair; pixels scaled by 1/255."""
    with _open_maybe_gzip(images_path) as f:
        magic, n, rows, cols = struct.unpack(">iiii", _read_exact(f, 16, "image header"))
        if magic != IMAGE_MAGIC:
            raise BadMagicError(f"bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}")
        raw = _read_exact(f, n * rows * cols, "pixels")
    images = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols)

    with _open_maybe_gzip(labels_path) as f:
        magic, n_labels = struct.unpack(">ii", _read_exact(f, 8, "label header"))
        if magic != LABEL_MAGIC:
            raise BadMagicError(f"bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}")
        labels = np.frombuffer(_read_exact(f, n_labels, "labels"), dtype=np.uint8)

    if n != n_labels:
        raise CountMismatchError(f"image count {n} != label count {n_labels}")
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64), 10)


def write_idx(ds: Dataset, images_path, labels_path, rows: int, cols: int) -> None:
    """Write a dataset back to the IDX pair (features rescaled to bytes)."""
    n = len(ds)
    if rows * cols != ds.features.shape[1]:
        raise ValueError("rows * cols must equal the feature dimension")
    pixels = np.rint(ds.features * 255.0).astype(np.uint8)
    with open(images_path, "wb") as f:
        f.write(struct.pack(">iiii", IMAGE_MAGIC, n, rows, cols))
        f.write(pixels.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">ii", LABEL_MAGIC, n))
        f.write(ds.labels.astype(np.uint8).tobytes())


def split(ds: Dataset, train_fraction: float, seed: int) -> tuple:
    """Deterministic disjoint (train, val) split with floor(N*f) train rows."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(len(ds))
    n_train = int(len(ds) * train_fraction)
    return ds.take(perm[:n_train]), ds.take(perm[n_train:])


def subset_split(ds: Dataset, n_train: int, n_val: int, seed: int) -> tuple:
    """Deterministic disjoint subsets of the given sizes."""
    if n_train + n_val > len(ds):
        raise ValueError(f"subset {n_train}+{n_val} exceeds dataset size {len(ds)}")
    perm = np.random.default_rng(seed).permutation(len(ds))
    return ds.take(perm[:n_train]), ds.take(perm[n_train:n_train + n_val])


def synth_blobs(n_per_class: int, class_count: int, spread: float, seed: int) -> Dataset:
    """Gaussian clusters at distinct centers in [0,1]^2, clipped to [0,1]."""
    if n_per_class < 1 or class_count < 2:
        raise ValueError("need n_per_class >= 1 and class_count >= 2")
    rng = np.random.default_rng(seed)
    angles = 2.0 * np.pi * np.arange(class_count) / class_count
    centers = 0.5 + 0.35 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    feats = []
    labels = []
    for c in range(class_count):
        pts = centers[c] + spread * rng.standard_normal((n_per_class, 2))
        feats.append(np.clip(pts, 0.0, 1.0))
        labels.append(np.full(n_per_class, c, dtype=np.int64))
    return Dataset(np.concatenate(feats), np.concatenate(labels), class_count)


def resolve_mnist(data_dir, which: str = "train") -> tuple:
    """Locate the image/label pair in a directory, accepting .gz variants."""
    data_dir = Path(data_dir)
    images_name, labels_name = MNIST_FILES[which]
    pair = []
    for name in (images_name, labels_name):
        plain, gz = data_dir / name, data_dir / (name + ".gz")
        if plain.exists():
            pair.append(plain)
        elif gz.exists():
            pair.append(gz)
        else:
            raise FileNotFoundError(f"missing {name}[.gz] under {data_dir}")
    return tuple(pair)
