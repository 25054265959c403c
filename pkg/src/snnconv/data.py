"""Synthetic 2-D tasks, IDX image loading and train/test splitting."""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import TRAIN_DTYPE, Rng, rand_uniform

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
TEST_FRACTION = 0.25


class DataError(ValueError):
    pass


class BadMagicError(DataError):
    pass


class TruncationError(DataError):
    pass


class LengthMismatchError(DataError):
    pass


@dataclass
class Dataset:
    inputs: np.ndarray  # (n, d)
    labels: np.ndarray  # (n,)
    n_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=TRAIN_DTYPE)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or len(self.inputs) != len(self.labels):
            raise DataError(f"inputs {self.inputs.shape} do not match {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise DataError(f"labels outside [0, {self.n_classes})")

    def __len__(self):
        return len(self.labels)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.n_classes)


def gen_blobs(seed, n=400, classes=2, spread=0.5, radius=3.0) -> Dataset:
    """Isotropic Gaussian clusters with centres evenly spaced on a circle."""
    rng = Rng(seed)
    labels = np.arange(n) % classes
    angles = 2 * np.pi * np.arange(classes) / classes
    centres = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    x = centres[labels] + spread * rng.normal((n, 2))
    perm = rng.permutation(n)
    return Dataset(x[perm], labels[perm], classes)


def gen_spirals(seed, n=400, turns=1.5, noise=0.08) -> Dataset:
    """Two interleaved Archimedean spirals (class 0 and its point reflection)."""
    rng = Rng(seed)
    labels = np.arange(n) % 2
    r = np.sqrt(rand_uniform(rng, n, 0.0, 1.0)) * 0.95 + 0.05
    angle = 2 * np.pi * turns * r
    x = np.stack([r * np.cos(angle), r * np.sin(angle)], axis=1)
    x[labels == 1] *= -1
    x = 2.0 * x + noise * rng.normal((n, 2))
    perm = rng.permutation(n)
    return Dataset(x[perm], labels[perm], 2)


def split(data: Dataset, seed, test_fraction=TEST_FRACTION) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, then the last ``test_fraction`` is held out."""
    n = len(data)
    perm = Rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return data.subset(np.sort(perm[n_test:])), data.subset(np.sort(perm[:n_test]))


def _read_header(raw: bytes, magic: int, ndim: int, path):
    size = 4 + 4 * ndim
    if len(raw) < 4:
        raise TruncationError(f"{path}: file too short for an IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < size:
        raise TruncationError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", raw[4:size])
    count = int(np.prod(dims))
    if len(raw) - size < count:
        raise TruncationError(f"{path}: expected {count} data bytes, found {len(raw) - size}")
    return dims, np.frombuffer(raw, dtype=np.uint8, count=count, offset=size)


def load_idx(images_path, labels_path, n_classes=10) -> Dataset:
    """Read an IDX (MNIST-style) image/label pair; pixels scaled to [0, 1] and flattened."""
    img_raw = Path(images_path).read_bytes()
    lbl_raw = Path(labels_path).read_bytes()
    (n_img, rows, cols), pixels = _read_header(img_raw, IDX_IMAGES_MAGIC, 3, images_path)
    (n_lbl,), labels = _read_header(lbl_raw, IDX_LABELS_MAGIC, 1, labels_path)
    if n_img != n_lbl:
        raise LengthMismatchError(f"{n_img} images but {n_lbl} labels")
    x = pixels.reshape(n_img, rows * cols).astype(TRAIN_DTYPE) / 255.0
    return Dataset(x, labels.astype(np.int64), max(n_classes, int(labels.max(initial=0)) + 1))


def write_idx(images, labels, images_path, labels_path):
    """Write uint8 images (n, rows, cols) and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    Path(images_path).write_bytes(
        struct.pack(">4I", IDX_IMAGES_MAGIC, *images.shape) + images.tobytes()
    )
    Path(labels_path).write_bytes(struct.pack(">2I", IDX_LABELS_MAGIC, len(labels)) + labels.tobytes())
