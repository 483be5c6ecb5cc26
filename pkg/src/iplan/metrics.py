"""Distribution distances between layout corpora.

Three Fréchet distances: over rendered-image features, per-type mean room
areas, and per-type room counts. The default image features are a
deterministic 16x16 average pool of the grayscale render; a learned
extractor can be plugged in via the ``extractor`` argument.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import RESOLUTION, Layout, RoomTypeRegistry, render_layout
from .errors import DataError, ShapeError

SHRINKAGE = 1e-6

FeatureExtractor = Callable[[np.ndarray], np.ndarray]


def grayscale_pool_features(img: np.ndarray) -> np.ndarray:
    """Average-pool the grayscale render to 16x16 and flatten to [0, 1]."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    if arr.shape != (RESOLUTION, RESOLUTION):
        raise ShapeError(f"expected {RESOLUTION}x{RESOLUTION} image, got {arr.shape}")
    block = RESOLUTION // 16
    pooled = arr.reshape(16, block, 16, block).mean(axis=(1, 3))
    return (pooled / 255.0).reshape(-1)


grayscale_pool_features.extractor_id = "gray-avgpool-16x16"


@dataclass
class CorpusFeatures:
    """Feature matrix of one corpus with its Gaussian moments."""

    kind: str
    vectors: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    @classmethod
    def from_vectors(cls, kind: str, vectors: np.ndarray) -> "CorpusFeatures":
        v = np.asarray(vectors, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise DataError(f"need an (n, d) feature matrix, got shape {v.shape}")
        mu = v.mean(axis=0)
        if v.shape[0] > 1:
            sigma = np.cov(v, rowvar=False, ddof=1).reshape(v.shape[1], v.shape[1])
        else:
            sigma = np.zeros((v.shape[1], v.shape[1]))
        # shrinkage keeps small-n covariances PSD and full rank
        sigma = sigma + SHRINKAGE * np.eye(v.shape[1])
        return cls(kind=kind, vectors=v, mu=mu, sigma=sigma)

    @classmethod
    def from_moments(cls, kind: str, mu, sigma) -> "CorpusFeatures":
        mu = np.asarray(mu, dtype=np.float64).reshape(-1)
        sigma = np.asarray(sigma, dtype=np.float64)
        return cls(kind=kind, vectors=np.empty((0, mu.shape[0])), mu=mu, sigma=sigma)


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    sym = (m + m.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(sym)
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(a: CorpusFeatures, b: CorpusFeatures) -> float:
    """Squared Fréchet distance between the Gaussians fitted to a and b."""
    if a.mu.shape != b.mu.shape:
        raise ShapeError(f"feature dims differ: {a.mu.shape} vs {b.mu.shape}")
    diff = a.mu - b.mu
    sqrt_a = _psd_sqrt(a.sigma)
    cross = _psd_sqrt(sqrt_a @ b.sigma @ sqrt_a)
    value = float(diff @ diff + np.trace(a.sigma + b.sigma - 2.0 * cross))
    # exact zero on identical corpora can round slightly negative
    return max(value, 0.0)


def area_vector(layout: Layout, registry: RoomTypeRegistry) -> np.ndarray:
    """Mean box area per room type; zero where the type is absent."""
    totals = np.zeros(registry.size)
    counts = np.zeros(registry.size)
    for room in layout.rooms:
        k = registry.check_type_id(room.type_id)
        totals[k] += room.area
        counts[k] += 1
    out = np.zeros(registry.size)
    present = counts > 0
    out[present] = totals[present] / counts[present]
    return out


def type_vector(layout: Layout, registry: RoomTypeRegistry) -> np.ndarray:
    return layout.type_count(registry).to_array().astype(np.float64)


def _check_corpora(gen: Sequence[Layout], real: Sequence[Layout]) -> None:
    if len(gen) < 1 or len(real) < 1:
        raise DataError("both corpora must be non-empty")


def fid_img(
    gen: Sequence[Layout],
    real: Sequence[Layout],
    extractor: FeatureExtractor | None = None,
) -> float:
    _check_corpora(gen, real)
    extract = extractor or grayscale_pool_features
    fa = CorpusFeatures.from_vectors("img", np.stack([extract(render_layout(l)) for l in gen]))
    fb = CorpusFeatures.from_vectors("img", np.stack([extract(render_layout(l)) for l in real]))
    return frechet_distance(fa, fb)


def fid_area(gen: Sequence[Layout], real: Sequence[Layout], registry: RoomTypeRegistry) -> float:
    _check_corpora(gen, real)
    fa = CorpusFeatures.from_vectors("area", np.stack([area_vector(l, registry) for l in gen]))
    fb = CorpusFeatures.from_vectors("area", np.stack([area_vector(l, registry) for l in real]))
    return frechet_distance(fa, fb)


def fid_type(gen: Sequence[Layout], real: Sequence[Layout], registry: RoomTypeRegistry) -> float:
    _check_corpora(gen, real)
    fa = CorpusFeatures.from_vectors("type", np.stack([type_vector(l, registry) for l in gen]))
    fb = CorpusFeatures.from_vectors("type", np.stack([type_vector(l, registry) for l in real]))
    return frechet_distance(fa, fb)


def extractor_id(extractor: FeatureExtractor | None) -> str:
    if extractor is None:
        return grayscale_pool_features.extractor_id
    return getattr(extractor, "extractor_id", getattr(extractor, "__name__", "custom"))
