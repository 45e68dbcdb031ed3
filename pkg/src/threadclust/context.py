#
# Graph and text context operators: the regularized Laplacian L, the
# call-response matrix W = X^T L Y with its hard threshold T(W), and the
# matrix-free similarity operator S = L + h X T(W) Y^T.
#

import logging
import math

from enum import Enum
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from scipy.sparse.linalg import LinearOperator

from .sparse import CenteredMatrix, DimensionError, MatrixLike, NegativeEntryError, SparseMatrix
from .spectral import scree
from .type_hints import PathLike, Vector
from .utils import ThreadclustError, log_flagged, ordered_map

DEFAULT_BLOCK_SIZE    = 256
DENSE_LIMIT           = 10**7
THRESHOLD_POPULATIONS = ('nonzero', 'all')
CALIBRATIONS          = ('none', 'sigma1', 'sigma2')

class ThresholdError(ThreadclustError, ValueError):
	pass

class DenseAllocationError(ThreadclustError, RuntimeError):
	def __init__(self, shape: tuple, limit: int):
		super().__init__(f'refusing to densify a {shape[0]}x{shape[1]} operator '
			f'({shape[0] * shape[1]} entries, limit {limit})')
		self.shape = shape
		self.limit = limit

class Mode(Enum):
	GRAPH_ONLY = 'graph_only'
	COMBINED   = 'combined'
	TEXT_ONLY  = 'text_only'
	ALL_ONE    = 'all_one'

def _as_centered(m: MatrixLike) -> CenteredMatrix:
	if isinstance(m, SparseMatrix):
		return CenteredMatrix.identity(m)
	return m

class RegularizedLaplacian:
	'''L = D_C^-1/2 A D_P^-1/2 where D_C and D_P hold row and column degrees
	plus the regularizers tau_c and tau_p. L itself is kept as a sparse matrix
	with the same pattern as A.
	'''
	__slots__ = ('a', 'tau_c', 'tau_p', 'd_c_inv_sqrt', 'd_p_inv_sqrt', 'matrix')

	def __init__(self, a: SparseMatrix, tau_c: float, tau_p: float):
		self.a     = a
		self.tau_c = tau_c
		self.tau_p = tau_p

		self.d_c_inv_sqrt = _inv_sqrt(a.row_sums() + tau_c)
		self.d_p_inv_sqrt = _inv_sqrt(a.col_sums() + tau_p)
		self.matrix = SparseMatrix.from_scipy(
			sp.diags(self.d_c_inv_sqrt) @ a.csr @ sp.diags(self.d_p_inv_sqrt))

	@property
	def shape(self) -> tuple:
		return self.a.shape

	def matvec(self, v: Vector) -> Vector:
		return self.matrix.matvec(v)

	def rmatvec(self, u: Vector) -> Vector:
		return self.matrix.rmatvec(u)

	def matmat(self, v: np.ndarray) -> np.ndarray:
		return self.matrix.matmat(v)

	def rmatmat(self, u: np.ndarray) -> np.ndarray:
		return self.matrix.rmatmat(u)

	def to_dense(self) -> np.ndarray:
		return self.matrix.to_dense()

	def __repr__(s):
		return f'RegularizedLaplacian({s.shape[0]}x{s.shape[1]}, tau_c={s.tau_c:.6g}, tau_p={s.tau_p:.6g})'

def _inv_sqrt(d: Vector) -> Vector:
	# Zero degree with no regularization: the row (column) is empty anyway
	with np.errstate(divide='ignore'):
		return np.where(d > 0, 1 / np.sqrt(d), 0.0)

def laplacian(a: SparseMatrix, tau_c: Optional[float] = None, tau_p: Optional[float] = None) -> RegularizedLaplacian:
	'''Regularized graph Laplacian of the bipartite adjacency matrix a.
	Regularizers default to the mean row degree (tau_c) and the mean column
	degree (tau_p).
	'''
	if a.min_value() < 0:
		raise NegativeEntryError('adjacency matrix has negative entries')

	if tau_c is None:
		tau_c = float(a.row_sums().mean()) if a.n_rows else 0.0
	if tau_p is None:
		tau_p = float(a.col_sums().mean()) if a.n_cols else 0.0

	if tau_c < 0 or tau_p < 0:
		raise ValueError(f'regularizers must be nonnegative, got tau_c={tau_c}, tau_p={tau_p}')

	log_flagged('Citizens with zero degree', np.flatnonzero(a.row_sums() == 0))
	log_flagged('Posts with zero degree', np.flatnonzero(a.col_sums() == 0))

	res = RegularizedLaplacian(a, tau_c, tau_p)
	logging.debug('%r', res)
	return res

class CallResponse:
	'''The call-response matrix W (citizen-words x thread-words), either as
	computed or after hard thresholding (then omega and alpha are set).
	'''
	__slots__ = ('w', 'omega', 'alpha', 'population', 'signed', 'empty')

	def __init__(self, w: SparseMatrix, omega: Optional[float] = None,
			alpha: Optional[float] = None, population: str = 'nonzero',
			signed: bool = False, empty: bool = False):
		self.w          = w
		self.omega      = omega
		self.alpha      = alpha
		self.population = population
		self.signed     = signed
		self.empty      = empty

	@property
	def thresholded(self) -> bool:
		return self.omega is not None

	@property
	def shape(self) -> tuple:
		return self.w.shape

	def __repr__(s):
		extra = f', omega={s.omega:.6g}, alpha={s.alpha}' if s.thresholded else ''
		return f'CallResponse({s.shape[0]}x{s.shape[1]}, nnz={s.w.nnz()}{extra})'

def call_response(x: MatrixLike, l: RegularizedLaplacian, y: MatrixLike,
		block_size: int = DEFAULT_BLOCK_SIZE, workers: int = 1) -> CallResponse:
	'''Compute W = X^T L Y one block of block_size thread-word columns at a
	time: W[:, block] = X^T (L (Y[:, block])). Blocks may be computed on
	several worker threads, they are assembled in column order.
	'''
	x, y = _as_centered(x), _as_centered(y)
	n_c, n_p = l.shape

	if x.n_rows != n_c:
		raise DimensionError('citizen-term matrix rows', n_c, x.n_rows)
	if y.n_rows != n_p:
		raise DimensionError('post-term matrix rows', n_p, y.n_rows)
	if block_size < 1:
		raise ValueError(f'block size must be positive, got {block_size}')

	starts = range(0, y.n_cols, block_size)

	def block(start: int) -> sp.csc_matrix:
		stop = min(start + block_size, y.n_cols)
		return sp.csc_matrix(x.rmatmat(l.matmat(y.column_block(start, stop))))

	blocks = ordered_map(block, starts, workers)
	if blocks:
		w = SparseMatrix.from_scipy(sp.hstack(blocks, format='csr'))
	else:
		w = SparseMatrix.empty(x.n_cols, y.n_cols)

	logging.info('Call-response matrix: %dx%d, %d nonzero entries', w.n_rows, w.n_cols, w.nnz())
	return CallResponse(w)

def threshold_value(magnitudes: Vector, alpha: float, n_total: Optional[int] = None) -> float:
	'''Nearest-rank (1 - alpha) quantile of the given nonnegative magnitudes.
	With n_total larger than len(magnitudes), the missing values are zeros.
	'''
	mags = np.sort(np.asarray(magnitudes, dtype=np.float64))
	n = len(mags) if n_total is None else n_total
	if n == 0:
		return 0.0

	rank = max(1, math.ceil((1 - alpha) * n - 1e-9))
	n_zeros = n - len(mags)
	if rank <= n_zeros:
		return 0.0
	return float(mags[rank - n_zeros - 1])

def threshold(w: CallResponse, alpha: float, population: str = 'nonzero',
		signed: bool = False) -> CallResponse:
	'''Hard-threshold W: omega is the nearest-rank (1 - alpha) quantile of |W|
	over its nonzero entries (or over all entries with population="all") and
	only entries with |W| > omega survive. With signed=True the test is
	W > omega, so negative entries never survive.

	An all-zero W gives omega = 0 and an empty result flagged as such.
	'''
	if not 0 < alpha <= 1:
		raise ThresholdError(f'alpha must be in (0, 1], got {alpha}')
	if population not in THRESHOLD_POPULATIONS:
		raise ThresholdError(f'unknown threshold population {population!r}')

	csr = w.w.csr
	n_total = w.shape[0] * w.shape[1] if population == 'all' else None

	if csr.nnz == 0:
		logging.warning('Call-response matrix is all zero, thresholded matrix is empty')
		return CallResponse(SparseMatrix.empty(*w.shape), 0.0, alpha, population, signed, empty=True)

	omega = threshold_value(np.abs(csr.data), alpha, n_total)
	keep = (csr.data > omega) if signed else (np.abs(csr.data) > omega)

	res = csr.copy()
	res.data = np.where(keep, res.data, 0.0)
	tw = SparseMatrix.from_scipy(res)

	empty = tw.nnz() == 0
	if empty:
		logging.warning('No call-response entry above omega = %g', omega)

	logging.info('Threshold omega = %.6g (alpha = %g, %s): %d of %d entries kept',
		omega, alpha, population, tw.nnz(), csr.nnz)
	return CallResponse(tw, omega, alpha, population, signed, empty)

class SimilarityOperator(LinearOperator):
	'''Matrix-free S = L + h X T(W) Y^T, shape citizens x posts.

	Products are evaluated right to left (X (T(W) (Y^T v))), the n_C x n_P
	text part is never formed. In text_only mode the L term is dropped and
	the text part has weight 1; in all_one mode T(W) is replaced by the
	all-ones matrix. The text weight actually applied is h * scale, scale
	coming from calibration against L.
	'''
	def __init__(self, l: RegularizedLaplacian, x: CenteredMatrix, y: CenteredMatrix,
			tw: Optional[SparseMatrix], h: float, mode: Mode, scale: float = 1.0):
		super().__init__(dtype=np.float64, shape=l.shape)
		self.l     = l
		self.x     = x
		self.y     = y
		self.tw    = tw
		self.h     = h
		self.mode  = mode
		self.scale = scale

	@property
	def use_graph(self) -> bool:
		return self.mode is not Mode.TEXT_ONLY and not (self.mode is Mode.ALL_ONE and math.isinf(self.h))

	@property
	def text_weight(self) -> float:
		if self.mode is Mode.GRAPH_ONLY:
			return 0.0
		if not self.use_graph:
			return 1.0
		return self.h * self.scale

	def _text(self, v: np.ndarray) -> np.ndarray:
		t = self.y.rmatmat(v)
		if self.mode is Mode.ALL_ONE:
			t = np.broadcast_to(t.sum(axis=0), (self.x.n_cols, t.shape[1]))
		else:
			t = self.tw.matmat(t)
		return self.x.matmat(np.ascontiguousarray(t))

	def _rtext(self, u: np.ndarray) -> np.ndarray:
		t = self.x.rmatmat(u)
		if self.mode is Mode.ALL_ONE:
			t = np.broadcast_to(t.sum(axis=0), (self.y.n_cols, t.shape[1]))
		else:
			t = self.tw.rmatmat(t)
		return self.y.matmat(np.ascontiguousarray(t))

	def _matmat(self, v: np.ndarray) -> np.ndarray:
		v = np.asarray(v, dtype=np.float64)
		wt = self.text_weight
		out = self.l.matmat(v) if self.use_graph else np.zeros((self.shape[0], v.shape[1]))
		if wt:
			out = out + wt * self._text(v)
		return out

	def _rmatmat(self, u: np.ndarray) -> np.ndarray:
		u = np.asarray(u, dtype=np.float64)
		wt = self.text_weight
		out = self.l.rmatmat(u) if self.use_graph else np.zeros((self.shape[1], u.shape[1]))
		if wt:
			out = out + wt * self._rtext(u)
		return out

	def _matvec(self, v: np.ndarray) -> np.ndarray:
		return self._matmat(np.reshape(v, (-1, 1))).ravel()

	def _rmatvec(self, u: np.ndarray) -> np.ndarray:
		return self._rmatmat(np.reshape(u, (-1, 1))).ravel()

	def text_part(self) -> 'SimilarityOperator':
		'''The text term X T(W) Y^T alone, with weight 1.
		'''
		mode = Mode.ALL_ONE if self.mode is Mode.ALL_ONE else Mode.TEXT_ONLY
		return SimilarityOperator(self.l, self.x, self.y, self.tw, math.inf, mode)

	def todense(self, limit: int = DENSE_LIMIT) -> np.ndarray:
		'''Densify the operator (for tests and small instances only).
		'''
		n, m = self.shape
		if n * m > limit:
			raise DenseAllocationError(self.shape, limit)
		return self._matmat(np.eye(m))

	def __repr__(s):
		return (f'SimilarityOperator({s.shape[0]}x{s.shape[1]}, mode={s.mode.value}, '
			f'h={s.h:g}, scale={s.scale:.6g})')

def resolve_mode(h: float, mode: Union[Mode,str,None]) -> Mode:
	'''Infer the mode from h when not given: 0 is graph_only, infinity is
	text_only, anything else combined. An explicit combined mode with h = 0
	or h = infinity is reduced the same way.
	'''
	if mode is not None:
		mode = Mode(mode)
		if mode is not Mode.COMBINED:
			return mode
	if h == 0:
		return Mode.GRAPH_ONLY
	if math.isinf(h):
		return Mode.TEXT_ONLY
	return Mode.COMBINED

def similarity(l: RegularizedLaplacian, x: MatrixLike, y: MatrixLike,
		tw: Union[CallResponse,SparseMatrix,None], h: float = 0.0,
		mode: Union[Mode,str,None] = None, calibrate: str = 'none',
		seed: int = 0, **svd_kwargs) -> SimilarityOperator:
	'''Build the similarity operator S = L + h X T(W) Y^T.

	With calibrate="sigma2" (or "sigma1") the text part is rescaled so that
	h = 1 would give it the same second (first) singular value as L; h is
	then expressed relative to L. Calibration only applies to the combined
	and all_one modes with finite h. Extra keyword arguments go to the SVD
	used for calibration.
	'''
	x, y = _as_centered(x), _as_centered(y)
	if isinstance(tw, CallResponse):
		tw = tw.w

	if h < 0 or math.isnan(h):
		raise ValueError(f'text weight h must be nonnegative, got {h}')
	if calibrate not in CALIBRATIONS:
		raise ValueError(f'unknown calibration {calibrate!r}, expected one of {", ".join(CALIBRATIONS)}')

	mode = resolve_mode(h, mode)
	if mode is Mode.GRAPH_ONLY:
		h = 0.0
	elif mode is Mode.TEXT_ONLY:
		h = math.inf

	n_c, n_p = l.shape
	if x.n_rows != n_c:
		raise DimensionError('citizen-term matrix rows', n_c, x.n_rows)
	if y.n_rows != n_p:
		raise DimensionError('post-term matrix rows', n_p, y.n_rows)

	if mode is not Mode.ALL_ONE and mode is not Mode.GRAPH_ONLY:
		if tw is None:
			raise ValueError(f'mode {mode.value} needs a thresholded call-response matrix')
		if tw.shape != (x.n_cols, y.n_cols):
			raise DimensionError('thresholded call-response shape', (x.n_cols, y.n_cols), tw.shape)

	op = SimilarityOperator(l, x, y, tw, h, mode)

	if calibrate != 'none' and op.use_graph and op.text_weight:
		op.scale = calibration_scale(l, op.text_part(), calibrate, seed, **svd_kwargs)
		logging.info('Text part scaled by %.6g (%s calibration), effective weight %.6g',
			op.scale, calibrate, op.text_weight)

	logging.debug('%r', op)
	return op

def calibration_scale(l: RegularizedLaplacian, text: LinearOperator, calibrate: str,
		seed: int = 0, **svd_kwargs) -> float:
	'''Ratio sigma_k(L) / sigma_k(text) with k = 2 for "sigma2" and k = 1 for
	"sigma1". A zero text singular value gives a scale of 1.
	'''
	k = 2 if calibrate == 'sigma2' else 1
	if k > min(l.shape):
		logging.warning('Operator too small for sigma2 calibration, using sigma1')
		k = 1

	s_l = scree(l, k, seed, **svd_kwargs)[k - 1]
	s_t = scree(text, k, seed, **svd_kwargs)[k - 1]

	if s_t <= 0:
		logging.warning('Text part has sigma_%d = 0, calibration skipped', k)
		return 1.0

	logging.debug('Calibration: sigma_%d(L) = %.6g, sigma_%d(text) = %.6g', k, s_l, k, s_t)
	return float(s_l / s_t)

def write_call_response(w: CallResponse, path: PathLike,
		citizen_terms: Sequence[str] = None, thread_terms: Sequence[str] = None):
	'''Write the stored entries of W as a tab-separated table of row, column,
	citizen-word, thread-word and value, largest |value| first.
	'''
	entries = sorted(w.w.entries(), key=lambda e: (-abs(e[2]), e[0], e[1]))

	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('row\tcol\tcitizen_word\tthread_word\tvalue\n')

		for i, j, v in entries:
			ct = citizen_terms[i] if citizen_terms is not None else ''
			tt = thread_terms[j] if thread_terms is not None else ''
			f.write(f'{i}\t{j}\t{ct}\t{tt}\t{v!r}\n')
