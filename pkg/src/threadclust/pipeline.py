#
# End-to-end co-clustering: ingested matrices on disk -> term matrix
# transforms -> L, W, T(W) -> similarity operator -> SVD -> k-means, with
# every intermediate result computed lazily and cached.
#

import logging
import math

from collections import namedtuple
from pathlib import Path
from time import monotonic
from typing import Dict, Optional

import numpy as np

from .cluster import CoClustering, fit, write_labels, write_truth
from .config import ConfigError, RunConfig, make_manifest, save_config, write_manifest
from .context import CallResponse, Mode, RegularizedLaplacian, SimilarityOperator
from .context import call_response, laplacian, similarity, threshold, write_call_response
from .corpus import ThreadCorpus, build_adjacency, build_citizen_terms, build_thread_terms
from .corpus import citizen_vocabulary, read_id_map, read_terms, tfidf_weight
from .corpus import thread_vocabulary, write_corpus, write_id_map, write_vocabulary
from .sparse import CenteredMatrix, DimensionError, SparseMatrix, center_columns
from .sparse import read_triplets, scale_rows_cols, write_triplets
from .spectral import SpectralEmbedding, normalize_rows, scree, truncated_svd
from .spectral import write_embedding, write_singular_values
from .type_hints import PathLike
from .utils import SEED_CALIBRATION, SEED_SVD, available_workers, derive_seed
from .utils import format_duration

# On-disk layout shared by ingest, simulate, fit and diagnose
A_FILE             = 'A.txt'
X_FILE             = 'X.txt'
Y_FILE             = 'Y.txt'
X_TFIDF_FILE       = 'X_tfidf.txt'
Y_TFIDF_FILE       = 'Y_tfidf.txt'
CITIZENS_FILE      = 'citizens.tsv'
POSTS_FILE         = 'posts.tsv'
CITIZEN_VOCAB_FILE = 'citizen_vocab.tsv'
THREAD_VOCAB_FILE  = 'thread_vocab.tsv'
CORPUS_FILE        = 'corpus.tsv'
TRUTH_CITIZENS     = 'truth_citizens.tsv'
TRUTH_POSTS        = 'truth_posts.tsv'

CITIZEN_LABELS_FILE    = 'citizen_labels.tsv'
POST_LABELS_FILE       = 'post_labels.tsv'
CITIZEN_EMBEDDING_FILE = 'citizen_embedding.tsv'
POST_EMBEDDING_FILE    = 'post_embedding.tsv'
SINGULAR_VALUES_FILE   = 'singular_values.tsv'
SCREE_FILE             = 'scree.tsv'
CALL_RESPONSE_FILE     = 'call_response.tsv'
CONFIG_FILE            = 'config.txt'
MANIFEST_FILE          = 'manifest.json'

Inputs = namedtuple('Inputs', (
	'a', 'x', 'y', 'x_tfidf', 'y_tfidf', 'citizen_keys', 'post_keys',
	'post_walls', 'wall_keys', 'citizen_terms', 'thread_terms'
))

def ingest(corpus: ThreadCorpus, outdir: PathLike, cutoff: float = 0.001):
	'''Build A, X, Y (raw counts) and their TF-IDF versions from a corpus and
	write them to outdir along with id maps, vocabularies and a copy of the
	corpus.
	'''
	outdir = Path(outdir)
	outdir.mkdir(parents=True, exist_ok=True)

	cvocab = citizen_vocabulary(corpus, cutoff)
	tvocab = thread_vocabulary(corpus, cutoff)
	x_w, y_w = tfidf_weight(corpus, cvocab, tvocab)

	write_triplets(build_adjacency(corpus), outdir / A_FILE)
	write_triplets(build_citizen_terms(corpus, cvocab), outdir / X_FILE)
	write_triplets(build_thread_terms(corpus, tvocab), outdir / Y_FILE)
	write_triplets(x_w, outdir / X_TFIDF_FILE)
	write_triplets(y_w, outdir / Y_TFIDF_FILE)
	write_vocabulary(cvocab, outdir / CITIZEN_VOCAB_FILE)
	write_vocabulary(tvocab, outdir / THREAD_VOCAB_FILE)
	write_id_map(corpus.citizen_keys, outdir / CITIZENS_FILE)

	walls = [corpus.wall_keys[w] for w in corpus.post_wall]
	write_id_map(corpus.post_keys, outdir / POSTS_FILE, walls, 'wall')
	write_corpus(corpus, outdir / CORPUS_FILE)

	logging.info('Ingested %r into %s', corpus, outdir)

def load_inputs(indir: PathLike) -> Inputs:
	'''Load what ingest() (or a simulation) wrote. TF-IDF matrices, id maps
	and vocabularies are optional.
	'''
	indir = Path(indir)

	def optional(name, reader):
		path = indir / name
		return reader(path) if path.is_file() else None

	a = read_triplets(indir / A_FILE)
	x = read_triplets(indir / X_FILE)
	y = read_triplets(indir / Y_FILE)

	citizens = optional(CITIZENS_FILE, read_id_map)
	posts = optional(POSTS_FILE, read_id_map)
	citizen_keys = citizens[0] if citizens else None
	post_keys, walls = posts if posts else (None, None)

	if walls is None:
		post_walls, wall_keys = np.zeros(a.n_cols, dtype=np.int64), ['all']
	else:
		wall_keys = sorted(set(walls), key=walls.index)
		index = {w: i for i, w in enumerate(wall_keys)}
		post_walls = np.array([index[w] for w in walls], dtype=np.int64)

	inputs = Inputs(a, x, y,
		optional(X_TFIDF_FILE, read_triplets), optional(Y_TFIDF_FILE, read_triplets),
		citizen_keys, post_keys, post_walls, wall_keys,
		optional(CITIZEN_VOCAB_FILE, read_terms), optional(THREAD_VOCAB_FILE, read_terms))

	check_inputs(inputs)
	return inputs

def check_inputs(inp: Inputs):
	n_c, n_p = inp.a.shape
	if inp.x.n_rows != n_c:
		raise DimensionError(f'{X_FILE} rows (citizens)', n_c, inp.x.n_rows)
	if inp.y.n_rows != n_p:
		raise DimensionError(f'{Y_FILE} rows (posts)', n_p, inp.y.n_rows)
	if inp.citizen_keys is not None and len(inp.citizen_keys) != n_c:
		raise DimensionError(f'{CITIZENS_FILE} entries', n_c, len(inp.citizen_keys))
	if inp.post_keys is not None and len(inp.post_keys) != n_p:
		raise DimensionError(f'{POSTS_FILE} entries', n_p, len(inp.post_keys))

def transform_terms(m: SparseMatrix, weighted: Optional[SparseMatrix], scaling: str) -> CenteredMatrix:
	'''Apply a scaling mode to a raw term matrix: "plain" leaves it as is,
	"center" centers columns, "row_col_scale" scales rows and columns then
	centers, "tfidf" centers the TF-IDF weighted matrix.
	'''
	if scaling == 'plain':
		return CenteredMatrix.identity(m)
	if scaling == 'center':
		return center_columns(m)
	if scaling == 'row_col_scale':
		return center_columns(scale_rows_cols(m))
	if scaling == 'tfidf':
		if weighted is None:
			raise ConfigError('scaling "tfidf" needs TF-IDF matrices, re-run ingest on the corpus')
		return center_columns(weighted)
	raise ConfigError(f'unknown scaling {scaling!r}')

class Pipeline:
	'''One co-clustering run. Every stage is a lazily computed property, so
	asking for .clustering runs everything it depends on, and nothing else.
	'''
	__x            = None
	__y            = None
	__laplacian    = None
	__w            = None
	__tw           = None
	__operator     = None
	__embedding    = None
	__clustering   = None
	__scree        = None

	def __init__(self, cfg: RunConfig, a: SparseMatrix, x: SparseMatrix, y: SparseMatrix,
			x_tfidf: SparseMatrix = None, y_tfidf: SparseMatrix = None):
		self.cfg     = cfg.validate()
		self.a       = a
		self.raw_x   = x
		self.raw_y   = y
		self.x_tfidf = x_tfidf
		self.y_tfidf = y_tfidf
		self.workers = available_workers(cfg.workers)
		self.timings: Dict[str,float] = {}

	@classmethod
	def from_inputs(cls, cfg: RunConfig, inp: Inputs) -> 'Pipeline':
		return cls(cfg, inp.a, inp.x, inp.y, inp.x_tfidf, inp.y_tfidf)

	def __timed(self, what: str, fn):
		start = monotonic()
		res = fn()
		self.timings[what] = monotonic() - start
		logging.info('%s done in %s', what, format_duration(self.timings[what]))
		return res

	@property
	def mode(self) -> Mode:
		h_mode = self.cfg.h_mode
		if h_mode == 'graph_only' or (h_mode == 'value' and self.cfg.h == 0):
			return Mode.GRAPH_ONLY
		if h_mode == 'text_only' or (h_mode == 'value' and math.isinf(self.cfg.h)):
			return Mode.TEXT_ONLY
		if h_mode == 'all_one':
			return Mode.ALL_ONE
		return Mode.COMBINED

	@property
	def needs_threshold(self) -> bool:
		return self.mode in (Mode.COMBINED, Mode.TEXT_ONLY)

	@property
	def x(self) -> CenteredMatrix:
		if self.__x is None:
			self.__x = transform_terms(self.raw_x, self.x_tfidf, self.cfg.scaling)
		return self.__x

	@property
	def y(self) -> CenteredMatrix:
		if self.__y is None:
			self.__y = transform_terms(self.raw_y, self.y_tfidf, self.cfg.scaling)
		return self.__y

	@property
	def laplacian(self) -> RegularizedLaplacian:
		if self.__laplacian is None:
			self.__laplacian = laplacian(self.a, self.cfg.tau_c, self.cfg.tau_p)
		return self.__laplacian

	@property
	def call_response(self) -> CallResponse:
		if self.__w is None:
			self.__w = self.__timed('Call-response matrix', lambda: call_response(
				self.x, self.laplacian, self.y, self.cfg.block_size, self.workers))
		return self.__w

	@property
	def thresholded(self) -> Optional[CallResponse]:
		if self.__tw is None and self.needs_threshold:
			self.__tw = threshold(self.call_response, self.cfg.alpha,
				self.cfg.threshold_population, self.cfg.threshold_signed)
		return self.__tw

	@property
	def operator(self) -> SimilarityOperator:
		if self.__operator is None:
			cfg = self.cfg
			self.__operator = similarity(self.laplacian, self.x, self.y, self.thresholded,
				cfg.effective_h, self.mode, cfg.calibrate, derive_seed(cfg.seed, SEED_CALIBRATION),
				**cfg.svd_kwargs)
		return self.__operator

	@property
	def embedding(self) -> SpectralEmbedding:
		if self.__embedding is None:
			cfg = self.cfg
			emb = self.__timed('Truncated SVD', lambda: truncated_svd(self.operator, cfg.k,
				derive_seed(cfg.seed, SEED_SVD), **cfg.svd_kwargs))
			self.__embedding = normalize_rows(emb)
		return self.__embedding

	@property
	def clustering(self) -> CoClustering:
		if self.__clustering is None:
			cfg = self.cfg
			self.__clustering = self.__timed('k-means', lambda: fit(self.embedding, cfg.k_c,
				cfg.k_p, cfg.restarts, cfg.seed, cfg.kmeans_max_iter, cfg.kmeans_tol, self.workers))
		return self.__clustering

	@property
	def scree(self) -> Optional[np.ndarray]:
		'''Leading scree_k singular values of the operator, if requested.
		'''
		if self.__scree is None and self.cfg.scree_k:
			k = self.cfg.scree_k
			if k <= self.cfg.k:
				self.__scree = self.embedding.sigma[:k]
			else:
				self.__scree = scree(self.operator, k, derive_seed(self.cfg.seed, SEED_SVD),
					**self.cfg.svd_kwargs)
		return self.__scree

	def run(self) -> CoClustering:
		return self.clustering

	def seeds(self) -> Dict[str,int]:
		s = self.cfg.seed
		return {
			'svd'        : derive_seed(s, SEED_SVD),
			'calibration': derive_seed(s, SEED_CALIBRATION),
			'kmeans'     : s,
		}

	def write(self, outdir: PathLike, inp: Inputs = None):
		'''Write labels, embeddings, singular values, the thresholded
		call-response matrix, the configuration and a manifest to outdir.
		'''
		outdir = Path(outdir)
		outdir.mkdir(parents=True, exist_ok=True)
		cc = self.clustering
		emb = self.embedding

		ckeys = inp.citizen_keys if inp else None
		pkeys = inp.post_keys if inp else None

		write_labels(cc, 'citizen', outdir / CITIZEN_LABELS_FILE, ckeys)
		write_labels(cc, 'post', outdir / POST_LABELS_FILE, pkeys)
		write_embedding(emb.u_c_star, emb.zero_rows_c, outdir / CITIZEN_EMBEDDING_FILE, ckeys)
		write_embedding(emb.u_p_star, emb.zero_rows_p, outdir / POST_EMBEDDING_FILE, pkeys)
		write_singular_values(emb.sigma, outdir / SINGULAR_VALUES_FILE)

		if self.scree is not None:
			write_singular_values(self.scree, outdir / SCREE_FILE)

		if self.thresholded is not None:
			write_call_response(self.thresholded, outdir / CALL_RESPONSE_FILE,
				inp.citizen_terms if inp else None, inp.thread_terms if inp else None)

		save_config(self.cfg, outdir / CONFIG_FILE)
		write_manifest(self.manifest(), outdir / MANIFEST_FILE)

	def manifest(self) -> dict:
		op = self.operator
		extra = {
			'fit': {
				'mode'        : self.mode.value,
				'tau_c'       : self.laplacian.tau_c,
				'tau_p'       : self.laplacian.tau_p,
				'omega'       : self.thresholded.omega if self.thresholded else None,
				'text_scale'  : op.scale,
				'text_weight' : op.text_weight,
				'sigma'       : [float(s) for s in self.embedding.sigma],
				'inertia'     : self.clustering.inertia,
			}
		}
		return make_manifest('fit', self.cfg, self.seeds(), extra)

def co_cluster(cfg: RunConfig, a: SparseMatrix, x: SparseMatrix, y: SparseMatrix) -> CoClustering:
	return Pipeline(cfg, a, x, y).run()

def write_instance(a: SparseMatrix, x: SparseMatrix, y: SparseMatrix, outdir: PathLike,
		citizen_labels=None, post_labels=None):
	'''Write a simulated instance in the layout of ingest(): synthetic citizen,
	post and term keys, every post on a single wall, plus truth label files.
	'''
	outdir = Path(outdir)
	outdir.mkdir(parents=True, exist_ok=True)

	write_triplets(a, outdir / A_FILE)
	write_triplets(x, outdir / X_FILE)
	write_triplets(y, outdir / Y_FILE)
	write_id_map([f'c{i}' for i in range(a.n_rows)], outdir / CITIZENS_FILE)
	write_id_map([f'p{j}' for j in range(a.n_cols)], outdir / POSTS_FILE, ['all'] * a.n_cols, 'wall')

	for m, name, prefix in ((x, CITIZEN_VOCAB_FILE, 'u'), (y, THREAD_VOCAB_FILE, 'v')):
		df = np.diff(m.csc.indptr)
		with open(outdir / name, 'w', encoding='utf-8', newline='\n') as f:
			f.writelines(f'{prefix}{j}\t{int(n)}\n' for j, n in enumerate(df))

	if citizen_labels is not None:
		write_truth(citizen_labels, outdir / TRUTH_CITIZENS)
	if post_labels is not None:
		write_truth(post_labels, outdir / TRUTH_POSTS)
