import numpy as np
import pytest

from scipy.linalg import subspace_angles

from threadclust.spectral import *
from threadclust.sparse import SparseMatrix, center_columns

from .utils import *


def _known_spectrum(sigma, n=30, m=20, seed=0):
	rng = np.random.default_rng(seed)
	u, _ = np.linalg.qr(rng.standard_normal((n, len(sigma))))
	v, _ = np.linalg.qr(rng.standard_normal((m, len(sigma))))
	return u @ np.diag(sigma) @ v.T


def test_diagonal_operator():
	op = SparseMatrix.from_dense(np.diag([3.0, 2.0, 1.0]))

	for method in METHODS:
		emb = truncated_svd(op, 2, method=method)
		assert np.allclose(emb.sigma, [3.0, 2.0])
		assert emb.k == 2
		assert emb.u_c.shape == (3, 2)
		assert emb.u_p.shape == (3, 2)


def test_rank_one_operator():
	u = np.array([1.0, 2.0, 2.0, 0.0])
	v = np.array([3.0, 4.0, 0.0])
	emb = truncated_svd(np.outer(u, v), 3)

	assert np.isclose(emb.sigma[0], 15.0)
	assert np.allclose(emb.sigma[1:], 0, atol=1e-10)
	assert np.allclose(np.abs(emb.u_c[:, 0]), u / 3)


def test_random_operator_matches_dense_svd():
	m = random_sparse(100, 60, 0.1, seed=1)
	expected = np.linalg.svd(m.to_dense(), compute_uv=False)[:4]

	for method in METHODS:
		emb = truncated_svd(m, 4, seed=2, method=method)
		assert np.allclose(emb.sigma, expected, rtol=1e-8)

	# Singular pairs, not just values
	emb = truncated_svd(m, 4, seed=2)
	assert np.allclose(m.to_dense() @ emb.u_p, emb.u_c * emb.sigma, atol=1e-6)
	assert np.all(emb.residuals <= 1e-8 * emb.sigma[0])


def test_subspaces_match_dense_svd():
	m = _known_spectrum([10.0, 8.0, 6.0, 4.0, 1.0, 0.5], n=80, m=50, seed=3)
	u, _, vt = np.linalg.svd(m)

	for method in METHODS:
		emb = truncated_svd(SparseMatrix.from_dense(m), 4, seed=4, method=method)
		assert np.max(subspace_angles(emb.u_c, u[:, :4])) < 1e-6
		assert np.max(subspace_angles(emb.u_p, vt[:4].T)) < 1e-6


def test_centered_operator():
	c = center_columns(random_sparse(40, 25, 0.2, seed=3))
	expected = np.linalg.svd(c.to_dense(), compute_uv=False)[:3]

	assert np.allclose(truncated_svd(c, 3).sigma, expected, rtol=1e-8)


def test_signs_are_fixed():
	d = _known_spectrum([5.0, 3.0, 1.0])
	emb = truncated_svd(d, 3, seed=4)

	for j in range(3):
		col = emb.u_c[:, j]
		assert col[np.argmax(np.abs(col))] > 0

	# Flipping the operator flips the right vectors only
	neg = truncated_svd(-d, 3, seed=4)
	assert np.allclose(neg.u_c, emb.u_c, atol=1e-8)
	assert np.allclose(neg.u_p, -emb.u_p, atol=1e-8)


def test_deterministic_given_seed():
	m = random_sparse(50, 40, 0.2, seed=5)
	a = truncated_svd(m, 3, seed=7)
	b = truncated_svd(m, 3, seed=7)

	assert np.array_equal(a.sigma, b.sigma)
	assert np.array_equal(a.u_c, b.u_c)
	assert np.array_equal(a.u_p, b.u_p)


def test_svd_errors():
	m = random_sparse(5, 4)

	with pytest.raises(DimensionError):
		truncated_svd(m, 0)
	with pytest.raises(DimensionError):
		truncated_svd(m, 5)
	with pytest.raises(ValueError):
		truncated_svd(m, 2, method='qr')


def test_non_convergence():
	m = random_sparse(60, 50, 0.3, seed=6)

	with pytest.raises(ConvergenceError) as exc:
		truncated_svd(m, 5, tol=1e-300, max_iter=2, oversample=0, power_iters=0)
	assert len(exc.value.residuals) == 5


def test_normalize_rows():
	emb = SpectralEmbedding(np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]]),
		np.array([[0.0, -2.0], [1.0, 1.0]]), np.array([2.0, 1.0]))
	n = normalize_rows(emb)

	assert not emb.normalized
	assert n.normalized
	assert np.allclose(n.u_c_star, [[0.6, 0.8], [0.0, 0.0], [1.0, 0.0]])
	assert np.allclose(n.u_p_star, [[0.0, -1.0], [2 ** -0.5, 2 ** -0.5]])
	assert n.zero_rows == ((1,), ())
	assert np.array_equal(n.u_c, emb.u_c)


def test_normalize_random_rows():
	rows = np.random.default_rng(8).standard_normal((100, 4))
	out, zero = normalize_matrix_rows(rows)

	assert zero == ()
	assert np.abs(np.linalg.norm(out, axis=1) - 1).max() < 1e-10


def test_scree_known_spectrum():
	sigma = scree(_known_spectrum([1.0, 0.5, 0.1]), 3, seed=9)
	assert np.allclose(sigma, [1.0, 0.5, 0.1])


def test_gap_ratios():
	assert np.allclose(gap_ratios([4.0, 2.0, 1.0]), [2.0, 2.0])
	assert gap_ratios([1.0]).size == 0
	assert np.isinf(gap_ratios([1.0, 0.0])[0])
	assert np.isnan(gap_ratios([0.0, 0.0])[0])


def test_suggest_k():
	assert suggest_k([10.0, 9.0, 2.0, 1.9]) == 2
	assert suggest_k([5.0, 1.0, 0.9]) == 1
	assert suggest_k([1.0, 0.0, 0.0]) == 1
	assert suggest_k([1.0]) is None


def test_singular_values_file(tmp_path):
	path = tmp_path / 'sv.tsv'
	write_singular_values(np.array([4.0, 2.0, 0.5]), path)

	assert path.read_text().splitlines() == ['k\tsigma\tgap', '1\t4.0\t2.0', '2\t2.0\t4.0', '3\t0.5\t']
	assert np.array_equal(read_singular_values(path), [4.0, 2.0, 0.5])


def test_embedding_file(tmp_path):
	path = tmp_path / 'emb.tsv'
	write_embedding(np.array([[0.6, 0.8], [0.0, 0.0]]), (1,), path, ['a', 'b'])

	assert path.read_text().splitlines() == [
		'node\tkey\tu1\tu2\tflagged',
		'0\ta\t0.6\t0.8\t0',
		'1\tb\t0.0\t0.0\t1',
	]
