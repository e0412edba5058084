"""PCA embedding with importance-ordered features and depth-limited reconstruction.

The embedding is fit once on a training set; features come out sorted by
component eigenvalue (descending), so feature index doubles as importance
rank. Reconstruction at depth k uses the first k features and treats the
rest as zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class EmbeddingModel:
    """Linear embedding: unit-norm orthogonal rows sorted by explained variance.

    mean        -- (D,) training mean, raw-data units
    components  -- (F, D), row i is the i-th most important direction
    eigenvalues -- (F,), non-increasing, sample-covariance units (divisor n-1)
    """

    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def raw_dim(self) -> int:
        return int(self.mean.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.components.shape[0])


@dataclass(frozen=True)
class EmbeddedSample:
    """A labeled sample expressed as an importance-ordered feature vector."""

    id: int
    label: int
    features: np.ndarray


def fit_pca(raw_samples, num_features: int) -> EmbeddingModel:
    """Fit the embedding on raw samples (n, D).

    Components are the top eigenvectors of the sample covariance (divisor
    n-1) of the centered data. Each component is sign-flipped so its
    largest-magnitude entry is positive, which keeps outputs reproducible
    across platforms.
    """
    X = np.asarray(raw_samples, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"raw samples must be 2-D (n, D), got shape {X.shape}")
    n, dim = X.shape
    if n < 2:
        raise ValueError("need at least 2 samples to fit the embedding")
    if not 1 <= num_features < dim:
        raise ValueError(f"num_features must satisfy 1 <= F < D={dim}, got {num_features}")

    mean = X.mean(axis=0)
    centered = X - mean
    if not np.any(np.abs(centered) > 0.0):
        raise ValueError("zero variance: all samples identical")
    cov = centered.T @ centered / (n - 1)

    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order][:num_features]
    components = eigenvectors[:, order][:, :num_features].T

    # sign convention: largest-magnitude entry of each component positive
    pivot = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(num_features), pivot])
    signs[signs == 0] = 1.0
    components = components * signs[:, None]

    return EmbeddingModel(mean=mean, components=components, eigenvalues=eigenvalues)


def embed(model: EmbeddingModel, raw) -> np.ndarray:
    """Project raw data (..., D) onto the model's components, returning (..., F)."""
    raw = np.asarray(raw, dtype=float)
    if raw.shape[-1] != model.raw_dim:
        raise ValueError(f"raw dimension {raw.shape[-1]} != model dimension {model.raw_dim}")
    return (raw - model.mean) @ model.components.T


def reconstruct(model: EmbeddingModel, features, depth: int) -> np.ndarray:
    """Map features (..., >=depth) back to raw space using the first `depth` components.

    Features beyond `depth` are ignored (treated as zero).
    """
    features = np.asarray(features, dtype=float)
    if not 1 <= depth <= model.num_features:
        raise ValueError(f"depth must satisfy 1 <= k <= F={model.num_features}, got {depth}")
    if features.shape[-1] < depth:
        raise ValueError(f"need at least {depth} features, got {features.shape[-1]}")
    return model.mean + features[..., :depth] @ model.components[:depth]


def as_samples(features: np.ndarray, labels: np.ndarray) -> list[EmbeddedSample]:
    """Wrap an embedded feature matrix into per-sample records."""
    return [
        EmbeddedSample(id=i, label=int(labels[i]), features=features[i])
        for i in range(features.shape[0])
    ]
