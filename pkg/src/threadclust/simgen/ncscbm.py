#
# Node-contextualized stochastic co-blockmodel: A_ij ~ Bernoulli([Z_C B Z_P^T]_ij)
# (optionally degree corrected), X = Z_C E_C + noise, Y = Z_P E_P + noise.
#

import logging

from typing import Optional, Sequence

import numpy as np

from ..sparse import SparseMatrix
from ..type_hints import Labels
from ..utils import derive_seed
from .model_base import BlockModel, Instance, ModelSpecError

# Seed derivation paths for a single sample
SEED_CITIZEN_LABELS = 0
SEED_POST_LABELS    = 1
SEED_GRAPH          = 2
SEED_CITIZEN_NOISE  = 3
SEED_POST_NOISE     = 4

# Maximum number of probabilities materialized at once when sampling A
CHUNK_ENTRIES = 1 << 22

class BlockModelSpec:
	'''Parameters of a co-blockmodel. Memberships are either explicit 1-based
	label vectors or block probabilities (uniform by default) from which
	labels are drawn independently.
	'''
	__slots__ = (
		'n_c', 'n_p', 'k_c', 'k_p', 'b', 'e_c', 'e_p', 'citizen_labels',
		'post_labels', 'citizen_probs', 'post_probs', 'noise', 'theta_c',
		'theta_p', 'sig_g', 'sig_t'
	)

	def __init__(self, n_c: int, n_p: int, b: np.ndarray, e_c: np.ndarray, e_p: np.ndarray,
			citizen_labels: Labels = None, post_labels: Labels = None,
			citizen_probs: Sequence[float] = None, post_probs: Sequence[float] = None,
			noise: float = 1.0, theta_c: np.ndarray = None, theta_p: np.ndarray = None,
			sig_g: Optional[float] = None, sig_t: Optional[float] = None):
		self.b              = np.atleast_2d(np.asarray(b, dtype=np.float64))
		self.k_c, self.k_p  = self.b.shape
		self.n_c            = n_c
		self.n_p            = n_p
		self.e_c            = np.atleast_2d(np.asarray(e_c, dtype=np.float64))
		self.e_p            = np.atleast_2d(np.asarray(e_p, dtype=np.float64))
		self.citizen_labels = None if citizen_labels is None else np.asarray(citizen_labels, dtype=np.int64)
		self.post_labels    = None if post_labels is None else np.asarray(post_labels, dtype=np.int64)
		self.citizen_probs  = _probs(citizen_probs, self.k_c)
		self.post_probs     = _probs(post_probs, self.k_p)
		self.noise          = noise
		self.theta_c        = None if theta_c is None else np.asarray(theta_c, dtype=np.float64)
		self.theta_p        = None if theta_p is None else np.asarray(theta_p, dtype=np.float64)
		self.sig_g          = sig_g
		self.sig_t          = sig_t
		self.validate()

	@property
	def m_c(self) -> int:
		return self.e_c.shape[1]

	@property
	def m_p(self) -> int:
		return self.e_p.shape[1]

	def validate(self):
		if self.n_c < 1 or self.n_p < 1:
			raise ModelSpecError(f'need at least one citizen and one post, got {self.n_c}x{self.n_p}')

		bad = np.argwhere(~((self.b >= 0) & (self.b <= 1)))
		if bad.size:
			raise ModelSpecError('block probability outside [0, 1]', tuple(map(int, bad[0])))

		if self.e_c.shape[0] != self.k_c:
			raise ModelSpecError(f'E_C must have {self.k_c} rows, got {self.e_c.shape[0]}')
		if self.e_p.shape[0] != self.k_p:
			raise ModelSpecError(f'E_P must have {self.k_p} rows, got {self.e_p.shape[0]}')
		if self.noise < 0:
			raise ModelSpecError(f'noise scale must be nonnegative, got {self.noise}')

		_check_labels(self.citizen_labels, self.n_c, self.k_c, 'citizen')
		_check_labels(self.post_labels, self.n_p, self.k_p, 'post')
		_check_theta(self.theta_c, self.n_c, 'citizen')
		_check_theta(self.theta_p, self.n_p, 'post')

		rank = np.linalg.matrix_rank(self.b)
		if rank < min(self.k_c, self.k_p):
			logging.warning('B has rank %d < %d: blocks are not identifiable', rank,
				min(self.k_c, self.k_p))

	def draw_labels(self, seed: int) -> tuple:
		'''Citizen and post labels (1-based): explicit ones if given, otherwise
		drawn independently from the block probabilities.
		'''
		zc = self.citizen_labels
		zp = self.post_labels

		if zc is None:
			rng = np.random.default_rng(derive_seed(seed, SEED_CITIZEN_LABELS))
			zc = rng.choice(self.k_c, size=self.n_c, p=self.citizen_probs) + 1
			_check_labels(zc, self.n_c, self.k_c, 'citizen')
		if zp is None:
			rng = np.random.default_rng(derive_seed(seed, SEED_POST_LABELS))
			zp = rng.choice(self.k_p, size=self.n_p, p=self.post_probs) + 1
			_check_labels(zp, self.n_p, self.k_p, 'post')

		return zc, zp

	def edge_probabilities(self, zc: Labels, zp: Labels, rows: slice = slice(None)) -> np.ndarray:
		'''Dense block of theta_i theta_j B[z_C(i), z_P(j)] for the given citizen
		rows.
		'''
		p = self.b[zc[rows] - 1][:, zp - 1]
		if self.theta_c is not None:
			p = p * self.theta_c[rows, None]
		if self.theta_p is not None:
			p = p * self.theta_p[None, :]
		return p

	def __repr__(s):
		return f'BlockModelSpec(n_c={s.n_c}, n_p={s.n_p}, k_c={s.k_c}, k_p={s.k_p}, m_c={s.m_c}, m_p={s.m_p}, noise={s.noise})'

def _probs(p: Optional[Sequence[float]], k: int) -> np.ndarray:
	if p is None:
		return np.full(k, 1 / k)

	p = np.asarray(p, dtype=np.float64)
	if p.shape != (k,) or (p < 0).any() or not np.isclose(p.sum(), 1):
		raise ModelSpecError(f'block probabilities must be {k} nonnegative numbers summing to 1')
	return p

def _check_labels(z: Optional[Labels], n: int, k: int, what: str):
	if z is None:
		return
	if z.shape != (n,):
		raise ModelSpecError(f'expected {n} {what} labels, got {z.shape[0]}')
	if z.min() < 1 or z.max() > k:
		raise ModelSpecError(f'{what} labels must be in 1..{k}')

	counts = np.bincount(z - 1, minlength=k)
	empty = np.flatnonzero(counts == 0)
	if empty.size:
		raise ModelSpecError(f'{what} block {int(empty[0]) + 1} is empty')

def _check_theta(theta: Optional[np.ndarray], n: int, what: str):
	if theta is None:
		return
	if theta.shape != (n,) or (theta < 0).any():
		raise ModelSpecError(f'{what} degree parameters must be {n} nonnegative numbers')

def sample_bernoulli(spec: BlockModelSpec, zc: Labels, zp: Labels, rng: np.random.Generator) -> SparseMatrix:
	'''Sample A row chunk by row chunk without ever holding the whole n_C x n_P
	probability matrix.
	'''
	chunk = max(1, CHUNK_ENTRIES // spec.n_p)
	rows, cols = [], []

	for start in range(0, spec.n_c, chunk):
		stop = min(start + chunk, spec.n_c)
		p = spec.edge_probabilities(zc, zp, slice(start, stop))

		bad = np.argwhere(p > 1)
		if bad.size:
			i, j = map(int, bad[0])
			raise ModelSpecError('edge probability above 1', (start + i, j))

		r, c = np.nonzero(rng.random(p.shape) < p)
		rows.append(r + start)
		cols.append(c)

	rows = np.concatenate(rows)
	cols = np.concatenate(cols)
	return SparseMatrix.from_coo(rows, cols, np.ones(rows.size), spec.n_c, spec.n_p)

def _covariates(means: np.ndarray, z: Labels, noise: float, seed: int) -> SparseMatrix:
	m = means[z - 1]
	if noise > 0:
		m = m + noise * np.random.default_rng(seed).standard_normal(m.shape)
	return SparseMatrix.from_dense(m)

def sample_ncscbm(spec: BlockModelSpec, seed: int = 0) -> Instance:
	'''Draw (A, X, Y, citizen labels, post labels) from the model. Covariates
	are their block means plus independent Gaussian noise of scale spec.noise.
	'''
	zc, zp = spec.draw_labels(seed)
	a = sample_bernoulli(spec, zc, zp, np.random.default_rng(derive_seed(seed, SEED_GRAPH)))
	x = _covariates(spec.e_c, zc, spec.noise, derive_seed(seed, SEED_CITIZEN_NOISE))
	y = _covariates(spec.e_p, zp, spec.noise, derive_seed(seed, SEED_POST_NOISE))

	logging.debug('Sampled %r: %d edges', spec, a.nnz())
	return Instance(a, x, y, zc, zp)

def planted_spec(n_c: int = 500, n_p: int = 500, k: int = 2, p_in: float = 0.1,
		p_out: float = 0.02, terms_per_block: int = 5, text_signal: float = 1.0,
		noise: float = 1.0) -> BlockModelSpec:
	'''Planted partition with k blocks on both sides: B = p_out + (p_in - p_out) I
	and each block owns terms_per_block terms whose mean is text_signal.
	'''
	b = np.full((k, k), p_out) + (p_in - p_out) * np.eye(k)
	e = text_signal * np.kron(np.eye(k), np.ones(terms_per_block))
	return BlockModelSpec(n_c, n_p, b, e, e.copy(), noise=noise)

class NCScBM(BlockModel):
	name = 'ncscbm'
	description = 'planted co-blockmodel with Gaussian node covariates'

	def __init__(self, n_c: int = 500, n_p: int = 500, k: int = 2, p_in: float = 0.1,
			p_out: float = 0.02, terms_per_block: int = 5, text_signal: float = 1.0,
			noise: float = 1.0):
		self.__params = dict(n_c=n_c, n_p=n_p, k=k, p_in=p_in, p_out=p_out,
			terms_per_block=terms_per_block, text_signal=text_signal, noise=noise)
		self.spec = planted_spec(**self.__params)

	def sample(self, seed: int) -> Instance:
		return sample_ncscbm(self.spec, seed)

	def params(self) -> dict:
		return dict(self.__params)
