import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from texgram.errors import NumericalError
from texgram.gram import (
    gram_devectorize,
    gram_matrix,
    gram_vector_length,
    gram_vectorize,
)


def test_orthogonal_rows():
    F = np.array([[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
    assert np.array_equal(gram_matrix(F), np.array([[2.0, 0.0], [0.0, 2.0]]))


def test_hand_computed_two_by_two():
    # double-loop sums: [1,2].[1,2]=5, [1,2].[3,4]=11, [3,4].[3,4]=25
    F = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(gram_matrix(F), np.array([[5.0, 11.0], [11.0, 25.0]]))


@pytest.mark.parametrize("n,expected", [(64, 2080), (128, 8256)])
def test_vector_lengths(n, expected):
    rng = np.random.default_rng(0)
    F = rng.normal(size=(n, 10))
    vec = gram_vectorize(gram_matrix(F))
    assert vec.shape == (expected,)
    assert gram_vector_length(n) == expected


def test_vectorize_readoff():
    v = gram_vectorize(np.array([[2.0, 0.0], [0.0, 2.0]]))
    assert np.array_equal(v, np.array([2.0, 0.0, 2.0]))


def test_devectorize_roundtrip():
    rng = np.random.default_rng(1)
    F = rng.normal(size=(9, 17))
    G = gram_matrix(F)
    assert np.array_equal(gram_devectorize(gram_vectorize(G), 9), G)


def test_symmetry_bitwise():
    rng = np.random.default_rng(2)
    G = gram_matrix(rng.normal(size=(31, 257)))
    assert np.array_equal(G, G.T)


def test_positive_semidefinite():
    rng = np.random.default_rng(3)
    G = gram_matrix(rng.normal(size=(20, 50)))
    norm = np.linalg.norm(G)
    for _ in range(50):
        v = rng.normal(size=20)
        v /= np.linalg.norm(v)
        assert v @ G @ v >= -1e-6 * norm


def test_channel_permutation_equivariance():
    rng = np.random.default_rng(4)
    F = rng.normal(size=(12, 40))
    perm = rng.permutation(12)
    G = gram_matrix(F)
    # equal up to last-ulp BLAS accumulation differences
    assert np.allclose(gram_matrix(F[perm]), G[np.ix_(perm, perm)], rtol=1e-12, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_spatial_shuffle_invariance(seed):
    # the representation discards all spatial arrangement
    rng = np.random.default_rng(seed)
    F = rng.normal(size=(5, 23))
    shuffled = F[:, rng.permutation(23)]
    assert np.allclose(gram_matrix(shuffled), gram_matrix(F), rtol=1e-12, atol=1e-9)


def test_rejects_non_finite():
    F = np.array([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(NumericalError):
        gram_matrix(F)


def test_accepts_feature_map_objects():
    from texgram.engine.graph import FeatureMap

    fm = FeatureMap(layer_name="x", data=np.array([[1.0, 2.0], [3.0, 4.0]]))
    assert np.array_equal(gram_matrix(fm), gram_matrix(fm.data))


def test_float32_input_accumulates_in_float64():
    # n large enough that float32 accumulation would visibly drift
    rng = np.random.default_rng(5)
    F32 = rng.normal(size=(4, 50000)).astype(np.float32)
    G = gram_matrix(F32)
    exact = F32.astype(np.float64) @ F32.astype(np.float64).T
    assert np.allclose(G, exact, rtol=1e-12)
