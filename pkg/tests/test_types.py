import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from onmf.types import (
    UNASSIGNED,
    OrthogonalH,
    SolverConfig,
    SparseMatrix,
    as_dense,
    h_change_norm,
    orthogonal_h_to_dense,
)


def random_h(rng, r, n, p_unassigned=0.0):
    a = rng.integers(0, r, size=n)
    a[rng.random(n) < p_unassigned] = UNASSIGNED
    return OrthogonalH(r, a, rng.random(n))


def test_to_dense_identity():
    h = OrthogonalH(2, [0, 1], [1.0, 1.0])
    np.testing.assert_array_equal(orthogonal_h_to_dense(h), np.eye(2))


def test_to_dense_unassigned_is_zero():
    h = OrthogonalH.unassigned(2, 1)
    np.testing.assert_array_equal(h.to_dense(), np.zeros((2, 1)))


def test_row_norms_after_expansion():
    h = OrthogonalH(2, [0, 0, 1], [0.6, 0.8, 1.0])
    np.testing.assert_allclose(np.linalg.norm(h.to_dense(), axis=1), [1.0, 1.0], atol=1e-15)


def test_scale_rows_gives_orthonormal_rows():
    rng = np.random.default_rng(1)
    h = OrthogonalH(4, np.arange(30) % 4, rng.random(30) + 0.1).scale_rows()
    d = h.to_dense()
    assert np.max(np.abs(d @ d.T - np.eye(4))) <= 1e-12
    assert h.row_scale.shape == (4,)


def test_scale_rows_skips_empty_rows():
    h = OrthogonalH(3, [0, 0, 2], [3.0, 4.0, 2.0]).scale_rows()
    np.testing.assert_allclose(h.value, [0.6, 0.8, 1.0])
    np.testing.assert_allclose(h.row_scale, [5.0, 0.0, 2.0])


def test_h_change_identical_is_zero():
    h = OrthogonalH(3, [0, 1, 2, 1], [0.5, 0.2, 1.0, 0.3])
    assert h_change_norm(h, h) == 0.0


def test_h_change_orthogonal_columns():
    a = OrthogonalH(2, [0], [1.0])
    b = OrthogonalH(2, [1], [1.0])
    assert h_change_norm(a, b) == pytest.approx(np.sqrt(2.0), abs=1e-15)


def test_h_change_dimension_mismatch():
    with pytest.raises(ValueError):
        h_change_norm(OrthogonalH(2, [0], [1.0]), OrthogonalH(3, [0], [1.0]))


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 6), st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_h_change_matches_dense(r, n, seed):
    rng = np.random.default_rng(seed)
    a, b = random_h(rng, r, n, 0.2), random_h(rng, r, n, 0.2)
    expected = np.linalg.norm(a.to_dense() - b.to_dense())
    assert h_change_norm(a, b) == pytest.approx(expected, abs=1e-12)


def test_orthogonal_h_rejects_negative():
    with pytest.raises(ValueError):
        OrthogonalH(2, [0], [-1.0])


def test_as_dense_rejects_nan():
    with pytest.raises(ValueError):
        as_dense([[1.0, np.nan]])


class TestSparseMatrix:
    def test_from_triples_sums_duplicates(self):
        x = SparseMatrix.from_triples((2, 2), [0, 0, 1], [1, 1, 0], [1.0, 2.0, 5.0])
        np.testing.assert_array_equal(x.toarray(), [[0, 3], [5, 0]])

    def test_rejects_unsorted_rows(self):
        with pytest.raises(ValueError):
            SparseMatrix((3, 1), [0, 2], [2, 0], [1.0, 1.0])

    def test_rejects_bad_pointers(self):
        with pytest.raises(ValueError):
            SparseMatrix((3, 2), [0, 2, 1], [0, 1], [1.0, 1.0])

    def test_rejects_row_out_of_range(self):
        with pytest.raises(ValueError):
            SparseMatrix((2, 1), [0, 1], [2], [1.0])

    def test_empty_columns_allowed(self):
        x = SparseMatrix((3, 3), [0, 0, 2, 2], [0, 2], [1.0, 2.0])
        assert x.nnz == 2
        np.testing.assert_array_equal(x.col_sums(), [0, 3, 0])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 30), st.integers(1, 30), st.floats(0.0, 1.0), st.integers(0, 2**31 - 1))
    def test_triples_round_trip(self, m, n, density, seed):
        x = SparseMatrix.from_scipy(sp.random(m, n, density=density, random_state=seed, format="csc"))
        trip = list(x.triples())
        rows, cols, vals = zip(*trip) if trip else ((), (), ())
        assert SparseMatrix.from_triples(x.shape, rows, cols, vals) == x


def test_solver_config_validation():
    SolverConfig("kl", 3)
    for bad in ({"rank": 0}, {"maxiter": 0}, {"delta": 0.0}, {"epsilon": -1.0}):
        with pytest.raises(ValueError):
            SolverConfig(**{"divergence": "fro", "rank": 2, **bad})
    with pytest.raises(ValueError):
        SolverConfig("bregman", 2)
