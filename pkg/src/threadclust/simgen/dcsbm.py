#
# Degree corrected blockmodel for documents with links and words. Two blocks
# of documents and two blocks of words, link and word templates 0.1 + sig I,
# scaled so that a document has 20 links and 200 words in expectation.
#

import logging

from typing import Tuple

import numpy as np

from ..sparse import SparseMatrix
from ..type_hints import Labels
from ..utils import derive_seed
from .model_base import BlockModel, CalibrationError, Instance, ModelSpecError

N_BLOCKS       = 2
BASE_RATE      = 0.1
LINKS_PER_DOC  = 20
WORDS_PER_DOC  = 200
THETA_MODES    = ('ones', 'powerlaw')
CHUNK_ENTRIES  = 1 << 22

SEED_DOC_LABELS  = 0
SEED_WORD_LABELS = 1
SEED_DOC_THETA   = 2
SEED_WORD_THETA  = 3
SEED_LINKS       = 4
SEED_WORDS       = 5

def signal_template(sig: float, k: int = N_BLOCKS) -> np.ndarray:
	return np.full((k, k), BASE_RATE) + sig * np.eye(k)

def link_scale(n_docs: int, sig_g: float, links: float = LINKS_PER_DOC) -> float:
	'''Constant c such that c (0.1 + sig_g I) gives links expected links per
	document when document labels are uniform over two blocks and the degree
	parameters have mean 1.
	'''
	# A row of the template averages (0.2 + sig) / 2 over a uniform partner
	return 2 * links / ((n_docs - 1) * (2 * BASE_RATE + sig_g))

def word_scale(n_words: int, sig_t: float, words: float = WORDS_PER_DOC) -> float:
	return 2 * words / (n_words * (2 * BASE_RATE + sig_t))

def degree_parameters(n: int, mode: str, exponent: float, rng: np.random.Generator) -> np.ndarray:
	'''All ones, or power-law (Pareto with the given tail exponent) normalized
	to mean 1.
	'''
	if mode == 'ones':
		return np.ones(n)
	if mode != 'powerlaw':
		raise ModelSpecError(f'theta must be one of {", ".join(THETA_MODES)}, got {mode!r}')
	if exponent <= 2:
		raise ModelSpecError(f'power-law exponent must be greater than 2, got {exponent}')

	theta = rng.pareto(exponent - 1, size=n) + 1
	return theta / theta.mean()

def _max_pair(theta: np.ndarray) -> float:
	if theta.size < 2:
		return float(theta.max() ** 2)
	top = np.partition(theta, -2)[-2:]
	return float(top[0] * top[1])

def _sample_links(z: Labels, theta: np.ndarray, b: np.ndarray, rng: np.random.Generator) -> SparseMatrix:
	n = z.size
	chunk = max(1, CHUNK_ENTRIES // n)
	rows, cols = [], []

	for start in range(0, n, chunk):
		stop = min(start + chunk, n)
		p = b[z[start:stop]][:, z] * theta[start:stop, None] * theta[None, :]
		hit = rng.random(p.shape) < p
		# Upper triangle only, the graph is undirected without self loops
		hit &= np.arange(n)[None, :] > np.arange(start, stop)[:, None]

		r, c = np.nonzero(hit)
		rows.append(r + start)
		cols.append(c)

	r = np.concatenate(rows)
	c = np.concatenate(cols)
	return SparseMatrix.from_coo(np.concatenate((r, c)), np.concatenate((c, r)),
		np.ones(2 * r.size), n, n)

def _sample_words(z: Labels, theta: np.ndarray, zw: Labels, theta_w: np.ndarray,
		b: np.ndarray, rng: np.random.Generator) -> SparseMatrix:
	n, m = z.size, zw.size
	chunk = max(1, CHUNK_ENTRIES // m)
	rows, cols = [], []

	for start in range(0, n, chunk):
		stop = min(start + chunk, n)
		p = b[z[start:stop]][:, zw] * theta[start:stop, None] * theta_w[None, :]
		r, c = np.nonzero(rng.random(p.shape) < p)
		rows.append(r + start)
		cols.append(c)

	r = np.concatenate(rows)
	return SparseMatrix.from_coo(r, np.concatenate(cols), np.ones(r.size), n, m)

def sample_dcsbm_docs(n_docs: int = 1000, n_words: int = 1000, sig_g: float = 0.0,
		sig_t: float = 0.0, seed: int = 0, theta: str = 'ones',
		exponent: float = 2.5) -> Tuple[SparseMatrix,SparseMatrix,Labels]:
	'''Sample a symmetric document link matrix, a binary document-word matrix
	and the 1-based document block labels. Document and word labels are
	independent and uniform over the two blocks.
	'''
	if sig_g < 0 or sig_t < 0:
		raise ModelSpecError(f'signals must be nonnegative, got sig_g={sig_g}, sig_t={sig_t}')
	if n_docs < 2 or n_words < 1:
		raise ModelSpecError(f'need at least 2 documents and 1 word, got {n_docs} and {n_words}')

	rng = lambda path: np.random.default_rng(derive_seed(seed, path))

	z  = rng(SEED_DOC_LABELS).integers(N_BLOCKS, size=n_docs)
	zw = rng(SEED_WORD_LABELS).integers(N_BLOCKS, size=n_words)
	th = degree_parameters(n_docs, theta, exponent, rng(SEED_DOC_THETA))
	tw = degree_parameters(n_words, theta, exponent, rng(SEED_WORD_THETA))

	b  = link_scale(n_docs, sig_g) * signal_template(sig_g)
	bt = word_scale(n_words, sig_t) * signal_template(sig_t)

	if b.max() * _max_pair(th) > 1:
		raise CalibrationError('link probability above 1', sig_g)
	if bt.max() * th.max() * tw.max() > 1:
		raise CalibrationError('word probability above 1', sig_t)

	a = _sample_links(z, th, b, rng(SEED_LINKS))
	x = _sample_words(z, th, zw, tw, bt, rng(SEED_WORDS))

	logging.debug('Sampled %d documents (sig_g=%g, sig_t=%g): %.1f links/doc, %.1f words/doc',
		n_docs, sig_g, sig_t, a.nnz() / n_docs, x.nnz() / n_docs)
	return a, x, z + 1

class DCSBMDocs(BlockModel):
	name = 'dcsbm'
	description = 'degree corrected documents with links and words, two blocks'

	def __init__(self, n_docs: int = 1000, n_words: int = 1000, sig_g: float = 1.0,
			sig_t: float = 1.0, theta: str = 'ones', exponent: float = 2.5):
		self.n_docs   = n_docs
		self.n_words  = n_words
		self.sig_g    = sig_g
		self.sig_t    = sig_t
		self.theta    = theta
		self.exponent = exponent

	def sample(self, seed: int) -> Instance:
		'''Documents play both roles: citizens and posts are the same nodes and
		share the document-word matrix.
		'''
		a, x, z = sample_dcsbm_docs(self.n_docs, self.n_words, self.sig_g, self.sig_t,
			seed, self.theta, self.exponent)
		return Instance(a, x, x, z, z)

	def params(self) -> dict:
		return dict(n_docs=self.n_docs, n_words=self.n_words, sig_g=self.sig_g,
			sig_t=self.sig_t, theta=self.theta, exponent=self.exponent)
