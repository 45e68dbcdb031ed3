#
# Matrix-free truncated SVD and row normalization of the singular vectors.
#
# Anything with a shape and matvec/rmatvec (SparseMatrix, CenteredMatrix,
# SimilarityOperator, scipy LinearOperator, dense arrays) can be decomposed:
# only products with the operator and its transpose are ever computed.
#

import logging

from typing import Optional, Sequence, Tuple

import numpy as np

from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, aslinearoperator, svds

from .sparse import DimensionError
from .type_hints import PathLike, Vector
from .utils import ThreadclustError, high_verbosity, log_flagged

METHODS      = ('randomized', 'lanczos')
ZERO_ROW_EPS = 1e-12

class ConvergenceError(ThreadclustError, RuntimeError):
	def __init__(self, msg: str, residuals: Sequence[float]):
		super().__init__(msg)
		self.residuals = np.asarray(residuals)

class SpectralEmbedding:
	'''Top K singular triplets of an operator S (S ~ u_c @ diag(sigma) @ u_p.T)
	and, once normalize_rows() has been applied, the row-normalized copies.
	'''
	__slots__ = (
		'u_c', 'u_p', 'sigma', 'u_c_star', 'u_p_star',
		'zero_rows_c', 'zero_rows_p', 'residuals', 'iterations', 'method'
	)

	def __init__(self, u_c: np.ndarray, u_p: np.ndarray, sigma: Vector,
			residuals: Vector = None, iterations: int = 0, method: str = 'randomized'):
		self.u_c         = u_c
		self.u_p         = u_p
		self.sigma       = sigma
		self.u_c_star    = None
		self.u_p_star    = None
		self.zero_rows_c = ()
		self.zero_rows_p = ()
		self.residuals   = residuals if residuals is not None else np.zeros_like(sigma)
		self.iterations  = iterations
		self.method      = method

	@property
	def k(self) -> int:
		return self.sigma.shape[0]

	@property
	def normalized(self) -> bool:
		return self.u_c_star is not None

	@property
	def zero_rows(self) -> Tuple[Tuple[int,...],Tuple[int,...]]:
		return self.zero_rows_c, self.zero_rows_p

	def __repr__(s):
		return (f'SpectralEmbedding({s.u_c.shape[0]}x{s.u_p.shape[0]}, k={s.k}, '
			f'sigma={np.array2string(s.sigma, precision=4)})')

def as_operator(op) -> LinearOperator:
	if isinstance(op, LinearOperator):
		return op

	if hasattr(op, 'matmat') and hasattr(op, 'rmatmat'):
		# SparseMatrix and CenteredMatrix only take 1-D vectors in matvec
		return LinearOperator(op.shape,
			matvec=lambda v: op.matvec(np.ravel(v)),
			rmatvec=lambda u: op.rmatvec(np.ravel(u)),
			matmat=op.matmat, rmatmat=op.rmatmat, dtype=np.float64)

	return aslinearoperator(op)

def _orthonormal(m: np.ndarray) -> np.ndarray:
	q, _ = np.linalg.qr(m, mode='reduced')
	return q

def fix_signs(u: np.ndarray, v: np.ndarray):
	'''Flip singular vector pairs in place so that the largest-magnitude entry
	of each left vector is positive (first one wins on ties).
	'''
	if u.shape[0] == 0:
		return

	idx = np.argmax(np.abs(u), axis=0)
	signs = np.sign(u[idx, np.arange(u.shape[1])])
	signs[signs == 0] = 1
	u *= signs
	v *= signs

def _residuals(op: LinearOperator, u: np.ndarray, sigma: Vector, v: np.ndarray) -> Vector:
	return np.linalg.norm(op.matmat(v) - u * sigma, axis=0)

def _randomized(op: LinearOperator, k: int, rng: np.random.Generator, tol: float,
		max_iter: int, oversample: int, power_iters: int):
	n, m = op.shape
	width = min(k + oversample, n, m)

	q = _orthonormal(op.matmat(rng.standard_normal((m, width))))
	it = 0

	while True:
		if it >= power_iters:
			b = op.rmatmat(q).T
			ub, sigma, vt = np.linalg.svd(b, full_matrices=False)
			u = q @ ub[:, :k]
			v = vt[:k].T.copy()
			sigma = sigma[:k]

			res = _residuals(op, u, sigma, v)
			bound = tol * sigma[0] if sigma.size else 0
			if high_verbosity():
				logging.debug('Subspace iteration %d: max residual %.3e (bound %.3e)', it, res.max(), bound)

			if np.all(res <= bound):
				return u, sigma, v, res, it

			if it >= max_iter:
				raise ConvergenceError(f'truncated SVD did not converge in {max_iter} '
					f'iterations (max residual {res.max():.3e} > {bound:.3e})', res)

		q = _orthonormal(op.matmat(_orthonormal(op.rmatmat(q))))
		it += 1

def _lanczos(op: LinearOperator, k: int, rng: np.random.Generator, tol: float, max_iter: int):
	n, m = op.shape
	v0 = rng.standard_normal(min(n, m))

	try:
		u, sigma, vt = svds(op, k=k, tol=tol, maxiter=max_iter, v0=v0, solver='arpack')
	except ArpackNoConvergence as e:
		raise ConvergenceError(f'Lanczos SVD did not converge in {max_iter} iterations: {e}',
			np.full(k, np.inf)) from None

	order = np.argsort(-sigma, kind='stable')
	u, sigma, v = u[:, order], sigma[order], vt[order].T.copy()
	return u, sigma, v, _residuals(op, u, sigma, v), max_iter

def truncated_svd(op, k: int, seed: int = 0, tol: float = 1e-8, max_iter: int = 500,
		oversample: int = 10, power_iters: int = 4, method: str = 'randomized') -> SpectralEmbedding:
	'''Compute the top k singular triplets of op using only products with op and
	its transpose.

	The default method is randomized subspace iteration: a Gaussian sketch of
	width k + oversample, power_iters power iterations, then more iterations
	until every retained triplet has residual ||op v_i - sigma_i u_i|| at most
	tol * sigma_1, giving up after max_iter iterations with a ConvergenceError
	carrying the last residuals. The "lanczos" method uses ARPACK through
	scipy's svds() instead and requires k < min(op.shape).

	Signs are fixed so that the largest-magnitude entry of each left singular
	vector is positive. Results only depend on op and seed.
	'''
	op = as_operator(op)
	n, m = op.shape

	if not 1 <= k <= min(n, m):
		raise DimensionError('number of singular triplets', f'1..{min(n, m)}', k)
	if method not in METHODS:
		raise ValueError(f'unknown SVD method {method!r}, expected one of {", ".join(METHODS)}')

	rng = np.random.default_rng(seed)

	if method == 'lanczos' and k < min(n, m):
		u, sigma, v, res, it = _lanczos(op, k, rng, tol, max_iter)
	else:
		if method == 'lanczos':
			logging.warning('Lanczos needs k < %d, using randomized subspace iteration', min(n, m))
			method = 'randomized'

		u, sigma, v, res, it = _randomized(op, k, rng, tol, max_iter, oversample, power_iters)

	fix_signs(u, v)
	logging.debug('Truncated SVD (%s, k=%d): sigma = %s after %d iterations',
		method, k, np.array2string(sigma, precision=6), it)
	return SpectralEmbedding(u, v, sigma, res, it, method)

def normalize_matrix_rows(m: np.ndarray, eps: float = ZERO_ROW_EPS) -> Tuple[np.ndarray,Tuple[int,...]]:
	'''Scale each row of m to unit Euclidean norm. Rows with norm below eps are
	returned as zero rows, and their indices are returned as well.
	'''
	norms = np.linalg.norm(m, axis=1)
	small = norms < eps
	out = np.zeros_like(m, dtype=np.float64)

	keep = ~small
	out[keep] = m[keep] / norms[keep, None]
	return out, tuple(map(int, np.flatnonzero(small)))

def normalize_rows(emb: SpectralEmbedding, eps: float = ZERO_ROW_EPS) -> SpectralEmbedding:
	'''Return a copy of emb with u_c_star and u_p_star filled with the
	row-normalized singular vectors. Rows with norm below eps (typically
	isolated nodes) stay zero and are listed in zero_rows_c / zero_rows_p.
	'''
	res = SpectralEmbedding(emb.u_c, emb.u_p, emb.sigma, emb.residuals, emb.iterations, emb.method)
	res.u_c_star, res.zero_rows_c = normalize_matrix_rows(emb.u_c, eps)
	res.u_p_star, res.zero_rows_p = normalize_matrix_rows(emb.u_p, eps)

	log_flagged('Citizen rows with zero embedding', res.zero_rows_c)
	log_flagged('Post rows with zero embedding', res.zero_rows_p)
	return res

def scree(op, k_max: int, seed: int = 0, **kwargs) -> Vector:
	'''Top k_max singular values of op, in decreasing order. Extra keyword
	arguments are passed to truncated_svd().
	'''
	return truncated_svd(op, k_max, seed, **kwargs).sigma

def gap_ratios(sigma: Vector) -> Vector:
	'''sigma_k / sigma_{k+1} for k = 1..len(sigma)-1. A ratio with a zero
	denominator is inf (or nan if both values are zero).
	'''
	sigma = np.asarray(sigma, dtype=np.float64)
	num, den = sigma[:-1], sigma[1:]

	with np.errstate(divide='ignore', invalid='ignore'):
		return num / den

def suggest_k(sigma: Vector) -> Optional[int]:
	'''Number of leading singular values before the largest gap, or None if
	there are fewer than two values.
	'''
	ratios = gap_ratios(sigma)
	if ratios.size == 0:
		return None

	ratios = np.where(np.isnan(ratios), -np.inf, ratios)
	return int(np.argmax(ratios)) + 1

def write_singular_values(sigma: Vector, path: PathLike):
	'''Write a "k sigma gap" table, gap being sigma_k / sigma_{k+1} (empty for
	the last value).
	'''
	ratios = gap_ratios(sigma)

	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('k\tsigma\tgap\n')

		for i, s in enumerate(sigma):
			gap = repr(float(ratios[i])) if i < ratios.size else ''
			f.write(f'{i + 1}\t{float(s)!r}\t{gap}\n')

def read_singular_values(path: PathLike) -> Vector:
	with open(path, encoding='utf-8') as f:
		next(f)
		return np.array([float(line.split('\t')[1]) for line in f if line.strip()])

def write_embedding(rows: np.ndarray, zero_rows: Sequence[int], path: PathLike,
		keys: Sequence[str] = None):
	'''Write an embedding as a table: node index, external key (if any), one
	column per coordinate and a 0/1 flag for zero rows.
	'''
	flagged = set(zero_rows)
	k = rows.shape[1]

	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		head = ['node'] + (['key'] if keys is not None else [])
		head += [f'u{j + 1}' for j in range(k)] + ['flagged']
		f.write('\t'.join(head) + '\n')

		for i, row in enumerate(rows):
			fields = [str(i)] + ([keys[i]] if keys is not None else [])
			fields += [repr(float(x)) for x in row] + [str(int(i in flagged))]
			f.write('\t'.join(fields) + '\n')
