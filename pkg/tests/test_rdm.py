import numpy as np
import pytest

from oracles import naive_rdm
from texgram.errors import NumericalError
from texgram.rdm import RDM, compute_rdm, sort_by_class


def test_identical_vectors_zero_distance():
    rdm = compute_rdm([[1.0, 2.0, 3.0], [1.0, 2.0, 3.0]])
    assert rdm.values[0, 1] == 0.0
    assert rdm.values[1, 0] == 0.0


def test_three_four_five():
    rdm = compute_rdm([[0.0, 0.0], [3.0, 4.0]])
    assert rdm.values[0, 1] == 5.0


def test_matches_naive_double_loop_exactly():
    rng = np.random.default_rng(10)
    V = rng.normal(size=(50, 37))
    rdm = compute_rdm(V)
    assert np.array_equal(rdm.values, naive_rdm(V))


def test_diagonal_exactly_zero_and_symmetric_bitwise():
    rng = np.random.default_rng(11)
    rdm = compute_rdm(rng.normal(size=(30, 8)))
    assert np.all(np.diag(rdm.values) == 0.0)
    assert np.array_equal(rdm.values, rdm.values.T)


def test_full_scale_shape():
    rng = np.random.default_rng(12)
    rdm = compute_rdm(rng.normal(size=(5640, 2)).astype(np.float64))
    assert rdm.values.shape == (5640, 5640)


def test_triangle_inequality():
    rng = np.random.default_rng(13)
    rdm = compute_rdm(rng.normal(size=(40, 6)))
    D = rdm.values
    for _ in range(500):
        a, b, c = rng.choice(40, size=3, replace=False)
        assert D[a, c] <= D[a, b] + D[b, c] + 1e-9 * D[a, c]


def test_coordinate_permutation_invariance():
    rng = np.random.default_rng(14)
    V = rng.normal(size=(12, 9))
    perm = rng.permutation(9)
    assert np.allclose(
        compute_rdm(V).values, compute_rdm(V[:, perm]).values, rtol=1e-12
    )


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        compute_rdm([[1.0, 2.0]])  # single vector
    with pytest.raises(ValueError):
        compute_rdm(np.ones(5))  # not 2-D
    with pytest.raises(NumericalError):
        compute_rdm([[1.0, np.inf], [0.0, 0.0]])


def test_sort_by_class_identity_on_sorted_labels():
    rng = np.random.default_rng(15)
    rdm = compute_rdm(rng.normal(size=(6, 3)))
    out = sort_by_class(rdm, [0, 0, 1, 1, 2, 2])
    assert np.array_equal(out.values, rdm.values)
    assert out.item_ids == rdm.item_ids


def test_sort_by_class_stable_permutation():
    rng = np.random.default_rng(16)
    rdm = compute_rdm(rng.normal(size=(4, 3)), item_ids=list("abcd"))
    out = sort_by_class(rdm, [1, 0, 1, 0])
    # stable sort on (class, original index): order b, d, a, c
    assert out.item_ids == ["b", "d", "a", "c"]
    perm = [1, 3, 0, 2]
    assert np.array_equal(out.values, rdm.values[np.ix_(perm, perm)])


def test_sort_by_class_preserves_value_multiset():
    rng = np.random.default_rng(17)
    rdm = compute_rdm(rng.normal(size=(15, 4)))
    labels = rng.integers(0, 4, size=15)
    out = sort_by_class(rdm, labels)
    iu = np.triu_indices(15, k=1)
    assert np.array_equal(np.sort(out.values[iu]), np.sort(rdm.values[iu]))


def test_sort_by_class_length_mismatch():
    rdm = compute_rdm(np.eye(3))
    with pytest.raises(ValueError):
        sort_by_class(rdm, [0, 1])


def test_rdm_size_property():
    rdm = RDM(values=np.zeros((7, 7)), item_ids=[str(i) for i in range(7)])
    assert rdm.size == 7
