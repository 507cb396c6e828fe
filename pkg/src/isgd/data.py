"""Datasets, MNIST IDX I/O, synthetic clusters and fixed-cycle batch sampling."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int

    def __post_init__(self):
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D (n, dim) array")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError(
                f"{self.features.shape[0]} feature rows but {self.labels.shape[0]} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.n_classes)


@dataclass(frozen=True)
class Batch:
    features: np.ndarray
    labels: np.ndarray
    index: int

    def __len__(self):
        return self.labels.shape[0]


def permute_dataset(ds: Dataset, seed: int) -> Dataset:
    perm = np.random.default_rng(seed).permutation(len(ds))
    return ds.take(perm)


def batches_per_epoch(n_d: int, n_b: int) -> int:
    if n_b < 1:
        raise ValueError("batch size must be positive")
    n = n_d // n_b
    if n < 1:
        raise ValueError(f"batch size {n_b} exceeds dataset size {n_d}")
    return n


def fcpr_index(j: int, n_d: int, n_b: int) -> int:
    """Batch ordinal for iteration ``j`` under fixed-cycle sampling.

    A trailing partial batch is dropped, so the cycle length is ``n_d // n_b``.
    """
    if j < 0:
        raise ValueError("iteration counter must be nonnegative")
    return j % batches_per_epoch(n_d, n_b)


def slice_batches(ds: Dataset, n_b: int) -> list[Batch]:
    n = batches_per_epoch(len(ds), n_b)
    return [Batch(ds.features[t * n_b:(t + 1) * n_b], ds.labels[t * n_b:(t + 1) * n_b], t)
            for t in range(n)]


class FcprSampler:
    """Cycles through fixed slices of an already permuted dataset."""

    def __init__(self, ds: Dataset, batch_size: int):
        self.dataset = ds
        self.batch_size = batch_size
        self.batches = slice_batches(ds, batch_size)

    def __len__(self):
        return len(self.batches)

    def __getitem__(self, j: int) -> Batch:
        return self.batches[fcpr_index(j, len(self.dataset), self.batch_size)]


# ---------------------------------------------------------------- IDX format

def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path, expected_magic: int) -> np.ndarray:
    """Read an unsigned-byte IDX file into an array of its declared shape."""
    with _open(path) as f:
        raw = f.read()
    if len(raw) < 4:
        raise ValueError(f"{path}: truncated header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise ValueError(f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise ValueError(f"{path}: truncated header")
    shape = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(shape))
    if len(raw) - header < size:
        raise ValueError(f"{path}: truncated data, {len(raw) - header} of {size} bytes")
    return np.frombuffer(raw, dtype=np.uint8, count=size, offset=header).reshape(shape)


def write_idx(path, array: np.ndarray) -> None:
    """Write an unsigned-byte array as IDX (used for fixtures and exports)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as f:
        f.write(struct.pack(">I", magic))
        f.write(struct.pack(f">{array.ndim}I", *array.shape))
        f.write(array.tobytes())


def load_mnist_idx(images_path, labels_path) -> Dataset:
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise ValueError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    X = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    return Dataset(X, labels.astype(np.int64), 10)


# ---------------------------------------------------------------- synthetic

def class_means(classes: int, dim: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((classes, dim))


def synth_gaussian(classes: int, per_class: int, dim: int, spread: float, seed: int,
                   means: np.ndarray | None = None) -> Dataset:
    """Isotropic Gaussian clusters, ``per_class`` points per class.

    Class means are standard-normal draws unless ``means`` is given.
    Examples come out grouped by class; permute before training.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    rng = np.random.default_rng(seed)
    if means is None:
        means = class_means(classes, dim, rng.integers(2**63))
    means = np.asarray(means, dtype=np.float64)
    if means.shape != (classes, dim):
        raise ValueError(f"means must have shape ({classes}, {dim})")
    labels = np.repeat(np.arange(classes), per_class)
    noise = rng.standard_normal((classes * per_class, dim))
    X = means[labels] + spread * noise
    return Dataset(X, labels, classes)


def synth_train_test(classes: int, per_class: int, dim: int, spread: float, seed: int,
                     test_per_class: int = 0) -> tuple[Dataset, Dataset | None]:
    """Train/held-out pair sharing the same cluster means."""
    means = class_means(classes, dim, seed)
    train = synth_gaussian(classes, per_class, dim, spread, seed + 1, means)
    test = None
    if test_per_class:
        test = synth_gaussian(classes, test_per_class, dim, spread, seed + 2, means)
    return train, test


def single_class_order(ds: Dataset, per_batch: int, seed: int) -> Dataset:
    """Reorder so every slice of ``per_batch`` examples holds one class.

    Batch ``c`` draws ``per_batch`` examples of class ``c``; order within a
    batch is shuffled.
    """
    rng = np.random.default_rng(seed)
    idx = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if len(members) < per_batch:
            raise ValueError(f"class {c} has {len(members)} examples, need {per_batch}")
        idx.append(rng.choice(members, size=per_batch, replace=False))
    return ds.take(np.concatenate(idx))


def iid_order(ds: Dataset, per_class_per_batch: int, n_batches: int, seed: int) -> Dataset:
    """Reorder so every batch holds ``per_class_per_batch`` examples of each class."""
    rng = np.random.default_rng(seed)
    need = per_class_per_batch * n_batches
    pools = []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.labels == c)
        if len(members) < need:
            raise ValueError(f"class {c} has {len(members)} examples, need {need}")
        pools.append(rng.permutation(members)[:need].reshape(n_batches, per_class_per_batch))
    idx = []
    for t in range(n_batches):
        b = np.concatenate([p[t] for p in pools])
        idx.append(rng.permutation(b))
    return ds.take(np.concatenate(idx))
