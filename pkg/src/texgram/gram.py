"""Gram-matrix texture representation of a feature map.

For a feature map with N channels and M spatial samples, the Gram matrix
is G[i, j] = sum_m F[i, m] * F[j, m]: the channel-by-channel inner
product that discards all spatial arrangement.  Entries are raw sums
(no division by M); any normalization happens downstream in the loss
weighting or as an explicit RDM option.
"""

from __future__ import annotations

import numpy as np

from texgram.errors import NumericalError


def _as_feature_matrix(F) -> np.ndarray:
    """Accept a FeatureMap-like object (with .data) or a 2-D array."""
    data = getattr(F, "data", F)
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError(f"feature map must be 2-D (channels x samples), got {data.shape}")
    return data


def gram_matrix(F) -> np.ndarray:
    """Channel correlation matrix of a channels x samples feature map.

    Inner products are accumulated in float64 (M can reach tens of
    thousands of terms) and the result is mirrored so that symmetry is
    exact bitwise.
    """
    data = _as_feature_matrix(F)
    if not np.all(np.isfinite(data)):
        raise NumericalError("feature map contains non-finite values")
    work = data.astype(np.float64, copy=False)
    G = work @ work.T
    iu, ju = np.triu_indices(G.shape[0], k=1)
    G[ju, iu] = G[iu, ju]
    return G


def gram_vectorize(G: np.ndarray) -> np.ndarray:
    """Upper triangle (including diagonal) of G in row-major order."""
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"Gram matrix must be square, got {G.shape}")
    iu = np.triu_indices(G.shape[0])
    return G[iu].copy()


def gram_devectorize(v: np.ndarray, n: int) -> np.ndarray:
    """Inverse of :func:`gram_vectorize`; reconstructs the full matrix."""
    v = np.asarray(v)
    expected = n * (n + 1) // 2
    if v.size != expected:
        raise ValueError(f"vector length {v.size} != n(n+1)/2 = {expected}")
    G = np.zeros((n, n), dtype=v.dtype)
    iu = np.triu_indices(n)
    G[iu] = v
    G.T[iu] = v
    return G


def gram_vector_length(n: int) -> int:
    """Number of entries in the vectorized form: n(n+1)/2."""
    return n * (n + 1) // 2
