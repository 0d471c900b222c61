import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsegain.blockmat import (
    Partition,
    SparsityStructure,
    bcard,
    block,
    block_frobenius,
    conforms,
    phi,
    structure_of,
)


def test_partition_offsets_and_sizes():
    part = Partition((1, 2), (3, 1, 2))
    assert part.k == 2 and part.l == 3
    assert part.m == 3 and part.n == 6
    assert part.row_offsets == (0, 1, 3)
    assert part.col_offsets == (0, 3, 4, 6)


def test_partition_rejects_nonpositive_sizes():
    with pytest.raises(ValueError):
        Partition((1, 0), (2,))
    with pytest.raises(ValueError):
        Partition((), (2,))


def test_check_shape_mismatch():
    part = Partition((1, 1), (2,))
    with pytest.raises(ValueError):
        part.check_shape(np.zeros((3, 2)))


def test_block_extraction_is_one_based():
    part = Partition((1, 2), (2, 1))
    M = np.arange(9, dtype=float).reshape(3, 3)
    np.testing.assert_array_equal(block(M, 1, 1, part), [[0.0, 1.0]])
    np.testing.assert_array_equal(block(M, 2, 2, part), [[5.0], [8.0]])
    with pytest.raises(ValueError):
        block(M, 0, 1, part)
    with pytest.raises(ValueError):
        block(M, 1, 4, part)


def test_blocks_tile_the_matrix():
    part = Partition((2, 1, 2), (1, 3))
    rng = np.random.default_rng(3)
    M = rng.standard_normal((part.m, part.n))
    rebuilt = np.zeros_like(M)
    for i, j in part.iter_blocks():
        rebuilt[part.row_slice(i), part.col_slice(j)] = block(M, i, j, part)
    np.testing.assert_array_equal(rebuilt, M)


def test_phi_indicator():
    assert phi(0.0) == 0
    assert phi(1e-12) == 0
    assert phi(1e-3) == 1
    assert phi(0.5, zero_tol=0.5) == 0


def test_bcard_counts_nonzero_blocks():
    part = Partition((1, 1), (1, 1))
    M = np.array([[1.0, 0.0], [0.0, 2.0]])
    assert bcard(M, part) == 2
    assert bcard(np.zeros((2, 2)), part) == 0
    assert bcard(M, part, zero_tol=3.0) == 0


def test_block_frobenius_matches_norm():
    part = Partition((2,), (2, 1))
    M = np.array([[3.0, 0.0, 1.0], [4.0, 0.0, 1.0]])
    assert block_frobenius(M, 1, 1, part) == pytest.approx(5.0)
    assert block_frobenius(M, 1, 2, part) == pytest.approx(np.sqrt(2.0))


def test_structure_of_and_conforms():
    part = Partition((1, 1), (1, 1))
    M = np.array([[1.0, 0.0], [0.0, 0.0]])
    sig = structure_of(M, part)
    assert sig.ones_count() == 1
    assert conforms(M, sig)
    bigger = SparsityStructure(np.ones((2, 2), dtype=bool), part)
    assert conforms(M, bigger)
    smaller = SparsityStructure(np.zeros((2, 2), dtype=bool), part)
    assert not conforms(M, smaller)


def test_structure_ordering():
    part = Partition((1, 1), (1,))
    lo = SparsityStructure(np.array([[True], [False]]), part)
    hi = SparsityStructure(np.array([[True], [True]]), part)
    assert lo <= hi
    assert not hi <= lo


@st.composite
def partitioned_matrix(draw):
    p = tuple(draw(st.lists(st.integers(1, 3), min_size=1, max_size=3)))
    q = tuple(draw(st.lists(st.integers(1, 3), min_size=1, max_size=3)))
    part = Partition(p, q)
    flat = draw(
        st.lists(
            st.floats(-10, 10, allow_nan=False),
            min_size=part.m * part.n,
            max_size=part.m * part.n,
        )
    )
    return part, np.array(flat).reshape(part.m, part.n)


@given(partitioned_matrix())
@settings(max_examples=60, deadline=None)
def test_matrix_conforms_to_its_own_structure(case):
    part, M = case
    sig = structure_of(M, part)
    assert conforms(M, sig)
    assert bcard(M, part) == sig.ones_count()


@given(partitioned_matrix())
@settings(max_examples=60, deadline=None)
def test_zeroing_a_block_never_raises_bcard(case):
    part, M = case
    before = bcard(M, part)
    M2 = M.copy()
    M2[part.row_slice(1), part.col_slice(1)] = 0.0
    assert bcard(M2, part) <= before
