"""Representational dissimilarity matrices over Gram vectors.

An RDM holds the Euclidean distance between the Gram representations of
every pair of images.  Distances are computed in float64; the on-disk
format (see :mod:`texgram.storage`) stores float32, which is far below
the tolerance of anything computed from these matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from texgram.errors import NumericalError


@dataclass
class RDM:
    values: np.ndarray
    item_ids: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return self.values.shape[0]


def compute_rdm(vectors, item_ids=None) -> RDM:
    """All-pairs Euclidean distance matrix between representation vectors.

    ``vectors`` is a sequence of equal-length 1-D arrays (or an S x d
    matrix).  Each off-diagonal entry is computed once (a < b) and
    mirrored; the diagonal is exactly zero.  The row-block evaluation
    below is bit-identical to the naive per-pair ``sqrt(((va-vb)**2).sum())``.
    """
    V = np.asarray(vectors, dtype=np.float64)
    if V.ndim != 2:
        raise ValueError(f"expected S x d vectors, got shape {V.shape}")
    S = V.shape[0]
    if S < 2:
        raise ValueError("need at least two vectors")
    if not np.all(np.isfinite(V)):
        raise NumericalError("representation vectors contain non-finite values")
    values = np.zeros((S, S), dtype=np.float64)
    for a in range(S - 1):
        diff = V[a + 1 :] - V[a]
        d = np.sqrt((diff**2).sum(axis=1))
        values[a, a + 1 :] = d
        values[a + 1 :, a] = d
    if item_ids is None:
        item_ids = [str(i) for i in range(S)]
    elif len(item_ids) != S:
        raise ValueError(f"{len(item_ids)} item ids for {S} vectors")
    return RDM(values=values, item_ids=list(item_ids))


def sort_by_class(rdm: RDM, labels) -> RDM:
    """Permute an RDM so images of the same class sit next to each other.

    The permutation is a stable sort on (class id, original index), so
    already-sorted labels yield the identity.  Values are carried along
    unchanged.
    """
    labels = np.asarray(labels)
    if labels.shape[0] != rdm.size:
        raise ValueError(f"{labels.shape[0]} labels for RDM of size {rdm.size}")
    order = np.argsort(labels, kind="stable")
    values = rdm.values[np.ix_(order, order)]
    item_ids = [rdm.item_ids[i] for i in order]
    return RDM(values=values, item_ids=item_ids)
