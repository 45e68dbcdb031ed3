#
# Population (expected value) counterpart of the similarity matrix, used as an
# oracle for what the sample-side operator estimates.
#

import numpy as np

from ..utils import ThreadclustError
from .ncscbm import BlockModelSpec

SIZE_GUARD   = 10**6
OMEGA_MODES  = ('population', 'all_one')

class SizeGuardError(ThreadclustError, ValueError):
	def __init__(self, n_c: int, n_p: int, limit: int = SIZE_GUARD):
		super().__init__(f'population matrix {n_c}x{n_p} exceeds {limit} entries')
		self.shape = (n_c, n_p)
		self.limit = limit

def population_laplacian(spec: BlockModelSpec, zc: np.ndarray, zp: np.ndarray) -> np.ndarray:
	'''D_C^-1/2 A D_P^-1/2 of the expected adjacency, with population degrees
	regularized by their means.
	'''
	a = spec.edge_probabilities(zc, zp)
	d_c = a.sum(axis=1)
	d_p = a.sum(axis=0)
	d_c = d_c + d_c.mean()
	d_p = d_p + d_p.mean()

	with np.errstate(divide='ignore'):
		s_c = np.where(d_c > 0, 1 / np.sqrt(d_c), 0.0)
		s_p = np.where(d_p > 0, 1 / np.sqrt(d_p), 0.0)
	return s_c[:, None] * a * s_p[None, :]

def population_similarity(spec: BlockModelSpec, h: float = 0.0, omega_mode: str = 'population',
		seed: int = 0) -> np.ndarray:
	'''Dense population similarity L + h X W Y^T with X = Z_C E_C, Y = Z_P E_P
	and W = X^T L Y (or the all-ones matrix with omega_mode "all_one"). No
	centering and no thresholding is applied. Labels drawn from block
	probabilities use the same seed as sample_ncscbm().
	'''
	if h < 0:
		raise ValueError(f'h must be nonnegative, got {h}')
	if omega_mode not in OMEGA_MODES:
		raise ValueError(f'omega_mode must be one of {", ".join(OMEGA_MODES)}, got {omega_mode!r}')
	if spec.n_c * spec.n_p > SIZE_GUARD:
		raise SizeGuardError(spec.n_c, spec.n_p)

	zc, zp = spec.draw_labels(seed)
	l = population_laplacian(spec, zc, zp)
	if h == 0:
		return l

	x = spec.e_c[zc - 1]
	y = spec.e_p[zp - 1]

	if omega_mode == 'population':
		w = x.T @ l @ y
	else:
		w = np.ones((spec.m_c, spec.m_p))

	return l + h * (x @ w @ y.T)
