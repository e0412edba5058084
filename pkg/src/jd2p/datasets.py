"""Dataset ingestion: IDX image/label containers and synthetic Gaussian classes."""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DatasetError(ValueError):
    """Malformed dataset container or inconsistent generator parameters."""


@dataclass(frozen=True)
class RawDataset:
    """Raw samples (n, D) in [0, 1]-ish units with integer class labels."""

    data: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.data.shape[0] != self.labels.shape[0]:
            raise DatasetError("image/label count mismatch")

    @property
    def num_samples(self) -> int:
        return int(self.data.shape[0])

    @property
    def dim(self) -> int:
        return int(self.data.shape[1])

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def select(self, indices) -> "RawDataset":
        return RawDataset(data=self.data[indices], labels=self.labels[indices])

    def filter_classes(self, class_pair) -> "RawDataset":
        """Keep two classes and relabel them 0/1 (first item of the pair -> 0)."""
        a, b = class_pair
        mask = (self.labels == a) | (self.labels == b)
        data = self.data[mask]
        labels = np.where(self.labels[mask] == a, 0, 1)
        return RawDataset(data=data, labels=labels)

    def split(self, test_fraction: float, seed: int):
        """Disjoint train/test split, seeded shuffle."""
        if not 0.0 < test_fraction < 1.0:
            raise DatasetError("test fraction must lie in (0, 1)")
        rng = np.random.default_rng(seed)
        perm = rng.permutation(self.num_samples)
        n_test = max(1, int(round(self.num_samples * test_fraction)))
        return self.select(perm[n_test:]), self.select(perm[:n_test])

    def subsample(self, count: int, seed: int) -> "RawDataset":
        if count >= self.num_samples:
            return self
        rng = np.random.default_rng(seed)
        return self.select(rng.choice(self.num_samples, size=count, replace=False))


def _read_exact(path, count, offset, what):
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < offset:
        raise DatasetError(f"unexpected end of file in {what}: header truncated")
    if len(blob) < offset + count:
        raise DatasetError(f"unexpected end of file in {what}")
    return blob


def load_idx(images_path, labels_path) -> RawDataset:
    """Load an IDX image/label pair; pixel intensities scale to [0, 1]."""
    blob = _read_exact(images_path, 0, 16, "image file")
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    if magic != IDX_IMAGE_MAGIC:
        raise DatasetError(f"bad magic 0x{magic:08x} in image file (expected 0x{IDX_IMAGE_MAGIC:08x})")
    blob = _read_exact(images_path, count * rows * cols, 16, "image file")
    pixels = np.frombuffer(blob, dtype=np.uint8, count=count * rows * cols, offset=16)
    data = pixels.reshape(count, rows * cols).astype(float) / 255.0

    blob = _read_exact(labels_path, 0, 8, "label file")
    magic, label_count = struct.unpack(">II", blob[:8])
    if magic != IDX_LABEL_MAGIC:
        raise DatasetError(f"bad magic 0x{magic:08x} in label file (expected 0x{IDX_LABEL_MAGIC:08x})")
    blob = _read_exact(labels_path, label_count, 8, "label file")
    labels = np.frombuffer(blob, dtype=np.uint8, count=label_count, offset=8).astype(int)

    if count != label_count:
        raise DatasetError(f"image/label count mismatch: {count} images vs {label_count} labels")
    return RawDataset(data=data, labels=labels)


def write_idx(dataset: RawDataset, images_path, labels_path, rows: int, cols: int):
    """Write a dataset back to IDX containers (intensities re-quantized to uint8)."""
    if rows * cols != dataset.dim:
        raise DatasetError(f"rows*cols={rows * cols} does not match dimension {dataset.dim}")
    pixels = np.clip(np.rint(dataset.data * 255.0), 0, 255).astype(np.uint8)
    with open(images_path, "wb") as handle:
        handle.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, dataset.num_samples, rows, cols))
        handle.write(pixels.tobytes())
    with open(labels_path, "wb") as handle:
        handle.write(struct.pack(">II", IDX_LABEL_MAGIC, dataset.num_samples))
        handle.write(dataset.labels.astype(np.uint8).tobytes())


def gen_synthetic(means, covariances, counts, seed: int = 0) -> RawDataset:
    """Seeded Gaussian class-conditional sampler.

    means: (C, D); covariances: (C, D, D) or one shared (D, D); counts: per-class
    sample counts. Covariances must be symmetric positive-definite.
    """
    means = np.asarray(means, dtype=float)
    if means.ndim != 2 or means.shape[0] < 2:
        raise DatasetError("need at least 2 classes of mean vectors")
    n_classes, dim = means.shape
    covariances = np.asarray(covariances, dtype=float)
    if covariances.ndim == 2:
        covariances = np.broadcast_to(covariances, (n_classes, dim, dim))
    if covariances.shape != (n_classes, dim, dim):
        raise DatasetError("covariances must be (C, D, D) or a shared (D, D)")
    counts = [int(c) for c in counts]
    if len(counts) != n_classes or any(c < 1 for c in counts):
        raise DatasetError("need a positive sample count per class")

    cholesky = []
    for c in range(n_classes):
        cov = covariances[c]
        if not np.allclose(cov, cov.T, atol=1e-10):
            raise DatasetError("covariance must be symmetric positive-definite")
        try:
            cholesky.append(np.linalg.cholesky(cov))
        except np.linalg.LinAlgError as err:
            raise DatasetError("covariance must be symmetric positive-definite") from err

    rng = np.random.default_rng(seed)
    blocks, labels = [], []
    for c in range(n_classes):
        noise = rng.standard_normal((counts[c], dim))
        blocks.append(means[c] + noise @ cholesky[c].T)
        labels.append(np.full(counts[c], c))
    return RawDataset(data=np.vstack(blocks), labels=np.concatenate(labels))
