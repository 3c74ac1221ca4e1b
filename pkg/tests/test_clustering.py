import numpy as np
import pytest
from scipy.spatial.distance import pdist, squareform

from oracles import brute_force_ward, naive_lance_williams
from texgram.clustering import (
    ClusterAssignment,
    Dendrogram,
    cut_tree,
    save_assignment_csv,
    save_dendrogram_csv,
    ward_linkage,
)
from texgram.infotheory import contingency_table, mutual_information, plugin_entropy


def euclidean(points):
    return squareform(pdist(np.asarray(points, dtype=np.float64)))


def test_separated_pairs_merge_first():
    tree = ward_linkage(euclidean([[0.0], [1.0], [10.0], [11.0]]))
    first_two = {tuple(sorted(tree.merges[0, :2])), tuple(sorted(tree.merges[1, :2]))}
    assert first_two == {(0.0, 1.0), (2.0, 3.0)}


def test_two_items_height_is_input_distance():
    tree = ward_linkage(np.array([[0.0, 2.5], [2.5, 0.0]]))
    assert tree.merges.shape == (1, 4)
    assert tree.merges[0, 2] == 2.5


def test_matches_exhaustive_ward_on_random_instances():
    rng = np.random.default_rng(20)
    for _ in range(40):
        n = int(rng.integers(3, 11))
        X = rng.normal(size=(n, 2))
        mine = ward_linkage(euclidean(X))
        ref = brute_force_ward(X)
        assert np.array_equal(mine.merges[:, :2], ref[:, :2])
        assert np.allclose(mine.merges[:, 2], ref[:, 2], rtol=1e-9)
        assert np.array_equal(mine.merges[:, 3], ref[:, 3])


def test_matches_naive_lance_williams_heights():
    rng = np.random.default_rng(21)
    X = rng.normal(size=(60, 3))
    D = euclidean(X)
    mine = ward_linkage(D)
    ref = naive_lance_williams(D)
    assert np.allclose(mine.merges[:, 2], ref[:, 2], rtol=1e-9)
    assert np.array_equal(mine.merges[:, :2], ref[:, :2])


def test_cut_tree_extremes():
    rng = np.random.default_rng(22)
    tree = ward_linkage(euclidean(rng.normal(size=(7, 2))))
    singles = cut_tree(tree, 7)
    assert np.array_equal(singles.labels, np.arange(7))
    one = cut_tree(tree, 1)
    assert np.array_equal(one.labels, np.zeros(7, dtype=np.int64))


def test_cut_tree_separated_pairs():
    tree = ward_linkage(euclidean([[0.0], [1.0], [10.0], [11.0]]))
    cut = cut_tree(tree, 2)
    assert np.array_equal(cut.labels, [0, 0, 1, 1])


def test_cut_tree_contiguous_ids_by_smallest_member():
    # clusters {1, 2} and {0, 3}: cluster containing item 0 gets id 0
    points = [[10.0], [0.0], [1.0], [11.0]]
    tree = ward_linkage(euclidean(points))
    cut = cut_tree(tree, 2)
    assert np.array_equal(cut.labels, [0, 1, 1, 0])


def test_cut_tree_range_check():
    tree = ward_linkage(euclidean([[0.0], [1.0]]))
    for bad_k in (0, 3):
        with pytest.raises(ValueError):
            cut_tree(tree, bad_k)


def test_relabeling_invariance_under_input_permutation():
    rng = np.random.default_rng(23)
    X = rng.normal(size=(24, 3))
    perm = rng.permutation(24)
    a = cut_tree(ward_linkage(euclidean(X)), 4).labels
    b_perm = cut_tree(ward_linkage(euclidean(X[perm])), 4).labels
    b = np.empty_like(b_perm)
    b[perm] = b_perm
    # same partition up to renaming: MI equals both marginal entropies
    table = contingency_table(a, b)
    mi = mutual_information(table, method="plugin").value
    assert mi == pytest.approx(plugin_entropy(np.bincount(a)).value, abs=1e-12)
    assert mi == pytest.approx(plugin_entropy(np.bincount(b)).value, abs=1e-12)


def test_distance_scaling_scales_heights_only():
    rng = np.random.default_rng(24)
    D = euclidean(rng.normal(size=(15, 2)))
    base = ward_linkage(D)
    scaled = ward_linkage(3.0 * D)
    assert np.allclose(scaled.merges[:, 2], 3.0 * base.merges[:, 2], rtol=1e-12)
    assert np.array_equal(scaled.merges[:, :2], base.merges[:, :2])
    for k in (2, 5, 9):
        assert np.array_equal(cut_tree(base, k).labels, cut_tree(scaled, k).labels)


def test_rejects_asymmetric_and_negative():
    with pytest.raises(ValueError):
        ward_linkage(np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(ValueError):
        ward_linkage(np.array([[0.0, -1.0], [-1.0, 0.0]]))


def test_dendrogram_validation():
    with pytest.raises(ValueError):
        Dendrogram(merges=np.zeros((3, 4)), n_items=3)  # wrong row count
    with pytest.raises(ValueError):
        ClusterAssignment(labels=np.array([0, 2]), k=2)  # id 1 missing


def test_csv_exports(tmp_path):
    rng = np.random.default_rng(25)
    tree = ward_linkage(euclidean(rng.normal(size=(6, 2))))
    cut = cut_tree(tree, 3)
    dpath = tmp_path / "dendrogram.csv"
    apath = tmp_path / "assignment.csv"
    save_dendrogram_csv(dpath, tree)
    save_assignment_csv(apath, cut, [f"item{i}" for i in range(6)])
    dlines = dpath.read_text().strip().splitlines()
    assert dlines[0] == "merge_index,left,right,height,size"
    assert len(dlines) == 6  # header + 5 merges
    alines = apath.read_text().strip().splitlines()
    assert alines[0] == "item_id,cluster"
    assert len(alines) == 7
