"""Agglomerative Ward clustering over a precomputed distance matrix.

The merge tree is built with the nearest-neighbor-chain algorithm over
the Lance-Williams recurrence

    d(k, i+j) = sqrt( ((n_i+n_k) d(k,i)^2 + (n_j+n_k) d(k,j)^2
                      - n_k d(i,j)^2) / (n_i+n_j+n_k) )

which is exact for Ward linkage and O(n^2) instead of the naive O(n^3).
With Euclidean input distances this is equivalent to Ward's
variance-minimizing criterion on the underlying vectors; merge heights
come out as sqrt(2 * increase in within-cluster sum of squares).

Chains start at the lowest-index live cluster and nearest-neighbor ties
resolve to the lowest index, so the merge tree is deterministic.  The
raw merge list is sorted by height into the canonical nondecreasing
order (a stable sort, which for Ward is a valid linear extension of the
merge-tree partial order).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np


@dataclass
class Dendrogram:
    """Merge tree: row i merges ids (left, right) at the given height.

    Ids 0..n_items-1 are original items; merge i creates id n_items+i.
    """

    merges: np.ndarray  # (n_items-1, 4): left, right, height, merged size
    n_items: int

    def __post_init__(self):
        self.merges = np.asarray(self.merges, dtype=np.float64)
        if self.merges.shape != (self.n_items - 1, 4):
            raise ValueError(
                f"expected {self.n_items - 1} merges, got shape {self.merges.shape}"
            )
        if np.any(self.merges[:, 2] < 0):
            raise ValueError("negative merge height")
        if self.n_items >= 2 and int(self.merges[-1, 3]) != self.n_items:
            raise ValueError("final merge does not cover all items")

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]


@dataclass
class ClusterAssignment:
    labels: np.ndarray  # per-item cluster id in [0, k)
    k: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        present = np.unique(self.labels)
        if present.size != self.k or present[0] != 0 or present[-1] != self.k - 1:
            raise ValueError(f"labels do not cover exactly [0, {self.k})")


def _validated_distances(distances) -> np.ndarray:
    D = np.asarray(getattr(distances, "values", distances), dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    if not np.array_equal(D, D.T):
        raise ValueError("asymmetric distance matrix")
    if np.any(D < 0):
        raise ValueError("negative distances")
    return D.copy()


def ward_linkage(distances) -> Dendrogram:
    """Ward merge tree of a Euclidean distance matrix (RDM or ndarray)."""
    D = _validated_distances(distances)
    n = D.shape[0]
    if n < 2:
        raise ValueError("need at least two items")
    np.fill_diagonal(D, np.inf)

    size = np.ones(n)
    alive = np.ones(n, dtype=bool)
    raw = np.empty((n - 1, 3))  # slot_a, slot_b, height (pre-canonical order)
    chain = []
    start = 0

    for m in range(n - 1):
        if not chain:
            while not alive[start]:
                start += 1
            chain.append(start)
        while True:
            tip = chain[-1]
            row = D[tip]
            nxt = int(np.argmin(row))  # lowest index wins ties
            if len(chain) >= 2 and row[chain[-2]] == row[nxt]:
                nxt = chain[-2]  # reciprocal pair on tie: terminate the chain
            if len(chain) >= 2 and nxt == chain[-2]:
                break
            chain.append(nxt)
        b = chain.pop()
        a = chain.pop()
        h = D[a, b]
        raw[m] = (a, b, h)

        # Lance-Williams update: b's slot absorbs a
        na, nb = size[a], size[b]
        nk = size[alive]
        d2 = np.where(np.isinf(D[b]), 0.0, D[b]) ** 2
        d1 = np.where(np.isinf(D[a]), 0.0, D[a]) ** 2
        num = (na + nk) * d1[alive] + (nb + nk) * d2[alive] - nk * h * h
        new = np.sqrt(np.maximum(num, 0.0) / (na + nb + nk))
        D[b, alive] = new
        D[alive, b] = new
        D[b, b] = np.inf
        alive[a] = False
        D[a, :] = np.inf
        D[:, a] = np.inf
        size[b] = na + nb
        size[a] = 0

    # canonical order: nondecreasing height, then relabel via union-find
    order = np.argsort(raw[:, 2], kind="stable")
    parent = np.arange(2 * n - 1)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    merges = np.empty((n - 1, 4))
    csize = np.ones(2 * n - 1)
    for out_i, raw_i in enumerate(order):
        a, b, h = raw[raw_i]
        ra, rb = find(int(a)), find(int(b))
        left, right = (ra, rb) if ra < rb else (rb, ra)
        new_id = n + out_i
        parent[ra] = new_id
        parent[rb] = new_id
        csize[new_id] = csize[ra] + csize[rb]
        merges[out_i] = (left, right, h, csize[new_id])
    return Dendrogram(merges=merges, n_items=n)


def cut_tree(tree: Dendrogram, k: int) -> ClusterAssignment:
    """Cut the dendrogram into k clusters (undo the last k-1 merges).

    Cluster ids are contiguous, assigned by order of each cluster's
    smallest member index.
    """
    n = tree.n_items
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    parent = np.arange(2 * n - 1)
    for i in range(n - k):
        left, right = int(tree.merges[i, 0]), int(tree.merges[i, 1])
        parent[left] = n + i
        parent[right] = n + i

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    roots = np.array([find(i) for i in range(n)])
    _, first_index, inverse = np.unique(roots, return_index=True, return_inverse=True)
    # np.unique orders roots by id; reorder so cluster 0 has the smallest member
    rank = np.argsort(np.argsort(first_index, kind="stable"), kind="stable")
    labels = rank[inverse]
    return ClusterAssignment(labels=labels, k=k)


def save_dendrogram_csv(path, tree: Dendrogram) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["merge_index", "left", "right", "height", "size"])
        for i, (left, right, h, s) in enumerate(tree.merges):
            w.writerow([i, int(left), int(right), repr(float(h)), int(s)])


def save_assignment_csv(path, assignment: ClusterAssignment, item_ids) -> None:
    if len(item_ids) != assignment.labels.shape[0]:
        raise ValueError("item id count does not match assignment length")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["item_id", "cluster"])
        for item, lab in zip(item_ids, assignment.labels):
            w.writerow([item, int(lab)])
