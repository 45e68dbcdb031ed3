import io

import numpy as np
import pytest

from threadclust.sparse import *

from .utils import *


def test_build_sums_duplicates_and_drops_zeros():
	m = build_sparse([(0, 1, 2.0), (1, 0, 1.0), (0, 1, 3.0), (1, 1, 4.0), (1, 1, -4.0)], 2, 3)

	assert m.shape == (2, 3)
	assert m.nnz() == 2
	assert list(m.entries()) == [(0, 1, 5.0), (1, 0, 1.0)]


def test_build_independent_of_triplet_order():
	triplets = [(2, 0, 0.1), (0, 1, 0.2), (2, 0, 0.3), (1, 2, 1e-17), (0, 1, 0.7)]
	a = build_sparse(triplets, 3, 3)
	b = build_sparse(reversed(triplets), 3, 3)

	assert a.same_as(b)


def test_build_rejects_bad_triplets():
	with pytest.raises(TripletIndexError) as exc:
		build_sparse([(0, 0, 1.0), (2, 0, 1.0)], 2, 2)
	assert exc.value.triplet == (2, 0, 1.0)

	with pytest.raises(TripletIndexError):
		build_sparse([(0, -1, 1.0)], 2, 2)

	with pytest.raises(TripletIndexError) as exc:
		build_sparse([(0, 0, float('nan'))], 2, 2)
	assert 'not finite' in str(exc.value)


def test_empty_matrix():
	m = build_sparse([], 3, 4)

	assert m.shape == (3, 4)
	assert m.nnz() == 0
	assert m.min_value() == 0.0
	assert np.array_equal(m.matvec(np.ones(4)), np.zeros(3))


def test_kernels_match_dense():
	m = random_sparse(7, 5, seed=1, nonnegative=False)
	d = m.to_dense()
	rng = np.random.default_rng(2)
	v, u = rng.standard_normal(5), rng.standard_normal(7)
	vv, uu = rng.standard_normal((5, 3)), rng.standard_normal((7, 3))

	assert np.allclose(m.matvec(v), d @ v)
	assert np.allclose(m.rmatvec(u), d.T @ u)
	assert np.allclose(m.matmat(vv), d @ vv)
	assert np.allclose(m.rmatmat(uu), d.T @ uu)
	assert np.allclose(matvec(m, v), d @ v)
	assert np.allclose(rmatvec(m, u), d.T @ u)


def test_kernel_dimension_checks():
	m = random_sparse(4, 3)

	with pytest.raises(DimensionError):
		m.matvec(np.ones(4))
	with pytest.raises(DimensionError):
		m.rmatvec(np.ones(3))
	with pytest.raises(DimensionError):
		m.matvec(np.ones((3, 1)))
	with pytest.raises(DimensionError):
		m.matmat(np.ones((4, 2)))


def test_center_columns():
	m = random_sparse(6, 4, seed=3)
	c = center_columns(m)
	d = dense_centered(m.to_dense())

	assert c.is_centered
	assert np.allclose(c.to_dense(), d)
	assert np.allclose(c.to_dense().sum(axis=0), 0)
	assert np.allclose(c.matvec(np.arange(4.0)), d @ np.arange(4.0))
	assert np.allclose(c.rmatvec(np.arange(6.0)), d.T @ np.arange(6.0))

	v = np.random.default_rng(4).standard_normal((4, 2))
	assert np.allclose(c.matmat(v), d @ v)
	assert np.allclose(c.rmatmat(np.ones((6, 2))), d.T @ np.ones((6, 2)))
	assert np.allclose(c.column_block(1, 3), d[:, 1:3])


def test_center_twice_is_noop():
	m = random_sparse(5, 5, seed=5)
	once = center_columns(m)
	twice = center_columns(once)

	assert np.allclose(once.to_dense(), twice.to_dense())


def test_center_single_row():
	c = center_columns(SparseMatrix.from_dense([[1.0, 2.0, 0.0]]))
	assert np.allclose(c.to_dense(), 0)


def test_center_zero_rows():
	with pytest.raises(DimensionError):
		center_columns(SparseMatrix.empty(0, 3))


def test_identity_transform():
	m = random_sparse(4, 4, seed=6)
	c = CenteredMatrix.identity(m)

	assert not c.is_centered
	assert np.array_equal(c.to_dense(), m.to_dense())


def test_scale_rows_cols():
	a = np.array([
		[1.0, 3.0, 0.0],
		[0.0, 0.0, 0.0],
		[2.0, 0.0, 0.0],
	])
	s = scale_rows_cols(SparseMatrix.from_dense(a))
	rows, cols = a.sum(axis=1), a.sum(axis=0)

	assert s.zero_rows == (1,)
	assert s.zero_cols == (2,)
	assert np.isclose(s.to_dense()[0, 0], 1 / np.sqrt(rows[0] * cols[0]))
	assert np.isclose(s.to_dense()[2, 0], 2 / np.sqrt(rows[2] * cols[0]))
	assert np.isclose(s.to_dense()[0, 1], 3 / np.sqrt(rows[0] * cols[1]))

	# Centering keeps the scale factors
	c = center_columns(s)
	assert np.allclose(c.to_dense(), dense_centered(s.to_dense()))


def test_scale_rejects_negative():
	with pytest.raises(NegativeEntryError):
		scale_rows_cols(SparseMatrix.from_dense([[1.0, -1.0]]))


def test_triplet_file_round_trip(tmp_path):
	m = random_sparse(9, 4, seed=7, nonnegative=False)
	path = tmp_path / 'm.txt'
	write_triplets(m, path)

	assert path.read_text().splitlines()[0] == f'9 4 {m.nnz()}'
	assert read_triplets(path).same_as(m)


def test_triplet_file_format():
	buf = io.StringIO()
	write_triplets(SparseMatrix.from_dense([[0.0, 0.1], [2.0, 0.0]]), buf)
	assert buf.getvalue() == '2 2 2\n0 1 0.1\n1 0 2.0\n'


def test_triplet_file_errors(tmp_path):
	path = tmp_path / 'bad.txt'

	for content, lineno in (
			('2 2\n', 1),
			('2 2 1\n0 0\n', 2),
			('2 2 1\n0 0 x\n', 2),
			('2 2 1\n\n5 0 1.0\n', 3),
			('2 2 1\n0 0 1.0\n1 1 1.0\n', 3),
			('2 2 1\n0 0 inf\n', 2)):
		path.write_text(content)
		with pytest.raises(SparseFormatError) as exc:
			read_triplets(path)
		assert exc.value.lineno == lineno

	path.write_text('2 2 3\n0 0 1.0\n')
	with pytest.raises(SparseFormatError) as exc:
		read_triplets(path)
	assert 'declared 3' in str(exc.value)
