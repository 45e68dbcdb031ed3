#
# Interpretive statistics for a co-clustering: attention-ratio of citizens
# towards walls, cluster/wall and cluster/cluster interaction matrices,
# keyword scores and central conversations.
#

import logging

from collections import namedtuple
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .corpus import ThreadCorpus
from .cluster import CoClustering, central_members
from .sparse import SparseMatrix
from .spectral import gap_ratios, suggest_k
from .type_hints import Labels, PathLike, Vector
from .utils import SEED_ATTENTION, ThreadclustError, derive_seed, log_flagged

ATTENTION_MIN_DEGREE = 10
ATTENTION_BIN_WIDTH  = 0.1
INTERACTION_KINDS    = ('psi_c', 'psi_p', 'psi', 'psi_focus')
UNDEFINED_FOCUS      = 'undefined'

AttentionRatio = namedtuple('AttentionRatio', ('ratios', 'focus', 'degrees', 'undefined'))
KeywordScore   = namedtuple('KeywordScore', ('term', 'score'))
Conversation   = namedtuple('Conversation', ('node', 'key', 'centrality', 'documents'))

class DiagnosticsError(ThreadclustError, ValueError):
	pass

class InteractionMatrix:
	'''Ratio of interaction counts to the product of group sizes, one row per
	row group and one column per column group. Entries of an empty group are
	NaN and the group is listed in flagged_rows / flagged_cols.
	'''
	__slots__ = ('values', 'row_labels', 'col_labels', 'kind', 'flagged_rows', 'flagged_cols')

	def __init__(self, values: np.ndarray, row_labels: Sequence[str], col_labels: Sequence[str],
			kind: str, flagged_rows: Sequence[int] = (), flagged_cols: Sequence[int] = ()):
		self.values       = values
		self.row_labels   = list(row_labels)
		self.col_labels   = list(col_labels)
		self.kind         = kind
		self.flagged_rows = tuple(flagged_rows)
		self.flagged_cols = tuple(flagged_cols)

	@property
	def shape(self) -> tuple:
		return self.values.shape

	def __repr__(s):
		return f'InteractionMatrix({s.kind}, {s.shape[0]}x{s.shape[1]})'

def _indicator(labels: Sequence[int], k: int) -> sp.csr_matrix:
	labels = np.asarray(labels, dtype=np.int64)
	n = labels.shape[0]
	return sp.csr_matrix((np.ones(n), (np.arange(n), labels)), shape=(n, k))

def _groups(labels: Labels, k: Optional[int], one_based: bool, what: str) -> Tuple[np.ndarray,int]:
	labels = np.asarray(labels, dtype=np.int64)
	base = 1 if one_based else 0
	idx = labels - base

	if idx.size and idx.min() < 0:
		raise DiagnosticsError(f'{what} labels must be >= {base}')

	if k is None:
		k = int(idx.max()) + 1 if idx.size else 0
	elif idx.size and idx.max() >= k:
		raise DiagnosticsError(f'{what} label {int(idx.max()) + base} exceeds {k} groups')

	return idx, k

def _ratio(counts: np.ndarray, row_sizes: Vector, col_sizes: Vector, kind: str,
		row_labels: Sequence[str], col_labels: Sequence[str]) -> InteractionMatrix:
	den = np.outer(row_sizes, col_sizes).astype(np.float64)

	with np.errstate(divide='ignore', invalid='ignore'):
		values = np.where(den > 0, counts / den, np.nan)

	flagged_rows = np.flatnonzero(row_sizes == 0)
	flagged_cols = np.flatnonzero(col_sizes == 0)
	log_flagged(f'{kind}: empty row groups', [row_labels[i] for i in flagged_rows])
	log_flagged(f'{kind}: empty column groups', [col_labels[j] for j in flagged_cols])
	return InteractionMatrix(values, row_labels, col_labels, kind, flagged_rows, flagged_cols)

def _wall_labels(n_walls: int, wall_keys: Optional[Sequence[str]]) -> List[str]:
	return list(wall_keys) if wall_keys is not None else [str(i) for i in range(n_walls)]

def attention_ratio(a: SparseMatrix, wall_of_post: Sequence[int], seed: int = 0,
		n_walls: Optional[int] = None) -> AttentionRatio:
	'''For each citizen, the fraction of their comments that go to their most
	commented wall, and that wall (their focus). Ties between favorite walls
	are broken uniformly at random with a generator seeded by seed. Citizens
	without comments get ratio NaN and focus -1 and are listed as undefined.
	'''
	walls, n_walls = _groups(wall_of_post, n_walls, False, 'wall')
	if walls.shape[0] != a.n_cols:
		raise DiagnosticsError(f'{walls.shape[0]} wall ids for {a.n_cols} posts')

	zeta = (a.csr @ _indicator(walls, n_walls)).toarray()
	degrees = zeta.sum(axis=1)
	top = zeta.max(axis=1) if n_walls else np.zeros(a.n_rows)

	undefined = np.flatnonzero(degrees == 0)
	with np.errstate(divide='ignore', invalid='ignore'):
		ratios = np.where(degrees > 0, top / degrees, np.nan)

	focus = np.argmax(zeta, axis=1) if n_walls else np.full(a.n_rows, -1)
	ties = np.flatnonzero((zeta == top[:, None]).sum(axis=1) > 1)
	rng = np.random.default_rng(seed)

	for i in ties:
		if degrees[i] > 0:
			focus[i] = rng.choice(np.flatnonzero(zeta[i] == top[i]))

	focus[undefined] = -1
	log_flagged('Citizens without comments (attention-ratio undefined)', undefined)
	return AttentionRatio(ratios, focus, degrees, tuple(map(int, undefined)))

def attention_histogram(att: AttentionRatio, min_degree: int = ATTENTION_MIN_DEGREE,
		width: float = ATTENTION_BIN_WIDTH, focus: Optional[int] = None) -> Tuple[np.ndarray,np.ndarray]:
	'''Histogram of attention-ratios over [0, 1] with bins of the given width,
	restricted to citizens with at least min_degree comments (and focusing on
	the given wall, if any). Returns (bin edges, counts).
	'''
	mask = (att.degrees >= min_degree) & ~np.isnan(att.ratios)
	if focus is not None:
		mask &= att.focus == focus

	n_bins = int(round(1 / width))
	# arange / n keeps edges such as 0.6 exact, linspace does not
	edges = np.arange(n_bins + 1) / n_bins
	counts, _ = np.histogram(att.ratios[mask], bins=edges)
	return edges, counts

def focus_partition(att: AttentionRatio, n_walls: Optional[int] = None) -> Tuple[Labels,int]:
	'''Citizens grouped by the wall they focus on, as 1-based labels usable as
	a citizen partition: wall w is group w + 1. Citizens without comments go
	to an extra last group. Returns the labels and the number of groups.
	'''
	focus = np.asarray(att.focus, dtype=np.int64)
	if n_walls is None:
		n_walls = int(focus.max()) + 1 if focus.size else 0
	elif focus.size and focus.max() >= n_walls:
		raise DiagnosticsError(f'focus wall {int(focus.max())} exceeds {n_walls} walls')

	labels = focus + 1
	k = n_walls
	if att.undefined:
		k += 1
		labels[list(att.undefined)] = k
	return labels, k

def psi_focus(a: SparseMatrix, att: AttentionRatio, wall_of_post: Sequence[int],
		n_walls: Optional[int] = None, wall_keys: Optional[Sequence[str]] = None) -> InteractionMatrix:
	'''Psi_C of the focus partition: one row per wall the citizens focus on
	(plus a row for citizens without comments), one column per wall.
	'''
	walls, n_walls = _groups(wall_of_post, n_walls, False, 'wall')
	labels, k = focus_partition(att, n_walls)
	m = psi_c(a, labels, walls, k, n_walls, wall_keys)

	rows = _wall_labels(n_walls, wall_keys)[:k] + [UNDEFINED_FOCUS] * (k - n_walls)
	return InteractionMatrix(m.values, rows, m.col_labels, 'psi_focus', m.flagged_rows, m.flagged_cols)

def psi_c(a: SparseMatrix, citizen_labels: Labels, wall_of_post: Sequence[int],
		k_c: Optional[int] = None, n_walls: Optional[int] = None,
		wall_keys: Optional[Sequence[str]] = None) -> InteractionMatrix:
	'''Citizen-cluster / wall matrix: comments from citizens of cluster a under
	posts on wall b, divided by (citizens in a) * (posts on b). Citizen labels
	are 1-based, wall ids 0-based.
	'''
	cl, k_c = _groups(citizen_labels, k_c, True, 'citizen')
	walls, n_walls = _groups(wall_of_post, n_walls, False, 'wall')
	if cl.shape[0] != a.n_rows or walls.shape[0] != a.n_cols:
		raise DiagnosticsError('label vectors do not match the adjacency matrix')

	counts = (_indicator(cl, k_c).T @ a.csr @ _indicator(walls, n_walls)).toarray()
	return _ratio(counts, np.bincount(cl, minlength=k_c), np.bincount(walls, minlength=n_walls),
		'psi_c', [str(i + 1) for i in range(k_c)], _wall_labels(n_walls, wall_keys))

def psi_p(post_labels: Labels, wall_of_post: Sequence[int], k_p: Optional[int] = None,
		n_walls: Optional[int] = None, wall_keys: Optional[Sequence[str]] = None) -> InteractionMatrix:
	'''Post-cluster / wall matrix: posts of cluster a on wall b, divided by
	(posts in a) * (posts on b).
	'''
	pl, k_p = _groups(post_labels, k_p, True, 'post')
	walls, n_walls = _groups(wall_of_post, n_walls, False, 'wall')
	if pl.shape != walls.shape:
		raise DiagnosticsError(f'{pl.shape[0]} post labels for {walls.shape[0]} posts')

	counts = (_indicator(pl, k_p).T @ _indicator(walls, n_walls)).toarray()
	return _ratio(counts, np.bincount(pl, minlength=k_p), np.bincount(walls, minlength=n_walls),
		'psi_p', [str(i + 1) for i in range(k_p)], _wall_labels(n_walls, wall_keys))

def psi(a: SparseMatrix, citizen_labels: Labels, post_labels: Labels,
		k_c: Optional[int] = None, k_p: Optional[int] = None) -> InteractionMatrix:
	'''Citizen-cluster / post-cluster matrix: comments from citizens of a under
	posts of b, divided by (citizens in a) * (posts in b).
	'''
	cl, k_c = _groups(citizen_labels, k_c, True, 'citizen')
	pl, k_p = _groups(post_labels, k_p, True, 'post')
	if cl.shape[0] != a.n_rows or pl.shape[0] != a.n_cols:
		raise DiagnosticsError('label vectors do not match the adjacency matrix')

	counts = (_indicator(cl, k_c).T @ a.csr @ _indicator(pl, k_p)).toarray()
	return _ratio(counts, np.bincount(cl, minlength=k_c), np.bincount(pl, minlength=k_p),
		'psi', [str(i + 1) for i in range(k_c)], [str(i + 1) for i in range(k_p)])

def keyword_score_vector(term_matrix: SparseMatrix, labels: Labels, k: int) -> Tuple[Vector,Tuple[int,...]]:
	'''Observed over expected counts of every term in cluster k (1-based), the
	expected count of entry (i, j) being rowsum_i * colsum_j / total. Terms
	with zero expected count get NaN and are returned as flagged.
	'''
	labels = np.asarray(labels)
	if labels.shape[0] != term_matrix.n_rows:
		raise DiagnosticsError(f'{labels.shape[0]} labels for {term_matrix.n_rows} rows')
	if term_matrix.min_value() < 0:
		raise DiagnosticsError('keyword scores need a nonnegative count matrix')

	members = labels == k
	if not members.any():
		raise DiagnosticsError(f'cluster {k} is empty')

	rows = term_matrix.row_sums()
	cols = term_matrix.col_sums()
	total = rows.sum()

	observed = np.asarray(term_matrix.csr[np.flatnonzero(members)].sum(axis=0)).ravel()
	expected = rows[members].sum() * cols / total if total > 0 else np.zeros_like(cols)

	with np.errstate(divide='ignore', invalid='ignore'):
		scores = np.where(expected > 0, observed / expected, np.nan)

	flagged = tuple(map(int, np.flatnonzero(expected <= 0)))
	return scores, flagged

def keyword_scores(term_matrix: SparseMatrix, labels: Labels, k: int, top_n: Optional[int] = None,
		terms: Optional[Sequence[str]] = None) -> List[KeywordScore]:
	'''The top_n terms of cluster k by decreasing score, ties in lexicographic
	order of the term. Terms with zero expected count are left out (and
	logged). Use raw count matrices: scores compare counts to their
	expectation under independence.
	'''
	scores, flagged = keyword_score_vector(term_matrix, labels, k)
	names = list(terms) if terms is not None else [str(j) for j in range(len(scores))]
	if len(names) != len(scores):
		raise DiagnosticsError(f'{len(names)} term names for {len(scores)} columns')

	if flagged:
		logging.debug('Cluster %d: %d terms with zero expected count', k, len(flagged))

	ok = np.flatnonzero(~np.isnan(scores))
	ranked = sorted(ok, key=lambda j: (-scores[j], names[j]))
	return [KeywordScore(names[j], float(scores[j])) for j in ranked[:top_n]]

def _matching(tokens: Sequence[str], keywords: Optional[set]) -> bool:
	return keywords is None or not keywords.isdisjoint(tokens)

def central_conversations(corpus: ThreadCorpus, cc: CoClustering, cluster: int, side: str = 'citizen',
		top_n: int = 10, keywords: Optional[Iterable[str]] = None) -> List[Conversation]:
	'''Documents written around the most central members of a cluster: the
	comments of each central citizen, or for a post cluster the post itself
	followed by the comments of its thread. With keywords, only documents
	containing at least one of them are listed.
	'''
	keywords = set(keywords) if keywords is not None else None
	res = []

	for node in central_members(cc, cluster, top_n, side):
		rho = float(cc.centrality(side)[node])

		if side == 'citizen':
			key = corpus.citizen_keys[node]
			idx = np.flatnonzero(corpus.comment_citizen == node)
			docs = [corpus.comments[i].key for i in idx if _matching(corpus.comment_tokens[i], keywords)]
		else:
			key = corpus.post_keys[node]
			docs = [key] if _matching(corpus.post_tokens[node], keywords) else []
			idx = np.flatnonzero(corpus.comment_post == node)
			docs += [corpus.comments[i].key for i in idx if _matching(corpus.comment_tokens[i], keywords)]

		res.append(Conversation(node, key, rho, docs))

	return res

def write_interaction(m: InteractionMatrix, path: PathLike):
	'''Write an interaction matrix as a table with one row per row group. NaN
	(empty group) entries are written as "nan".
	'''
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('\t'.join(['cluster'] + m.col_labels) + '\n')

		for label, row in zip(m.row_labels, m.values):
			f.write('\t'.join([label] + [repr(float(v)) for v in row]) + '\n')

def write_keywords(table: Iterable[Tuple[int,Sequence[KeywordScore]]], path: PathLike):
	'''Write (cluster, keyword list) pairs as a "cluster rank term score" table.
	'''
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('cluster\trank\tterm\tscore\n')

		for k, scores in table:
			for rank, (term, score) in enumerate(scores, 1):
				f.write(f'{k}\t{rank}\t{term}\t{score!r}\n')

def write_histogram(edges: np.ndarray, counts: np.ndarray, path: PathLike):
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('low\thigh\tcount\n')

		for lo, hi, n in zip(edges[:-1], edges[1:], counts):
			f.write(f'{lo:.2f}\t{hi:.2f}\t{int(n)}\n')

def diagnose(inp, cc: CoClustering, sigma: Optional[Vector] = None,
		corpus: Optional[ThreadCorpus] = None, top_n: int = 10,
		min_degree: int = ATTENTION_MIN_DEGREE, seed: int = 0) -> dict:
	'''Every diagnostic of a fit on ingested inputs (as returned by
	pipeline.load_inputs()): interaction matrices (including Psi_C of the
	attention focus partition), attention-ratio histogram, keyword tables on
	the raw count matrices, the scree table and, when the corpus is available,
	the central conversations of every cluster. Keyword tables are left empty
	for a term matrix with negative entries.
	'''
	k_c, k_p = cc.k_c, cc.k_p
	n_walls = len(inp.wall_keys)
	att = attention_ratio(inp.a, inp.post_walls, derive_seed(seed, SEED_ATTENTION), n_walls)
	edges, counts = attention_histogram(att, min_degree)

	keywords = {}
	for side, m, labels, k, terms in (
			('citizen', inp.x, cc.citizen_labels, k_c, inp.citizen_terms),
			('post', inp.y, cc.post_labels, k_p, inp.thread_terms)):
		table = []
		keywords[side] = table

		# Simulated covariates carry Gaussian noise, scores need counts
		if m.min_value() < 0:
			logging.warning('%s term matrix has negative entries, no %s keywords',
				side.capitalize(), side)
			continue

		for c in range(1, k + 1):
			if (labels == c).any():
				table.append((c, keyword_scores(m, labels, c, top_n, terms)))
			else:
				logging.warning('%s cluster %d is empty, no keywords', side.capitalize(), c)

	report = {
		'clusters': {
			'k_c'             : k_c,
			'k_p'             : k_p,
			'citizen_sizes'   : np.bincount(cc.citizen_labels, minlength=k_c + 1)[1:],
			'post_sizes'      : np.bincount(cc.post_labels, minlength=k_p + 1)[1:],
			'low_confidence_c': list(cc.low_confidence_c or ()),
			'low_confidence_p': list(cc.low_confidence_p or ()),
		},
		'interaction': {
			'psi_c'    : psi_c(inp.a, cc.citizen_labels, inp.post_walls, k_c, n_walls, inp.wall_keys),
			'psi_p'    : psi_p(cc.post_labels, inp.post_walls, k_p, n_walls, inp.wall_keys),
			'psi'      : psi(inp.a, cc.citizen_labels, cc.post_labels, k_c, k_p),
			'psi_focus': psi_focus(inp.a, att, inp.post_walls, n_walls, inp.wall_keys),
		},
		'attention': {
			'min_degree': min_degree,
			'edges'     : edges,
			'counts'    : counts,
			'undefined' : len(att.undefined),
		},
		'keywords': keywords,
		'scree': None,
		'conversations': None,
	}

	if sigma is not None and len(sigma):
		report['scree'] = {
			'sigma'      : np.asarray(sigma),
			'gaps'       : gap_ratios(sigma),
			'suggested_k': suggest_k(sigma),
		}

	if corpus is not None:
		report['conversations'] = {
			side: [(c, central_conversations(corpus, cc, c, side, top_n))
				for c in range(1, k + 1) if (cc.labels(side) == c).any()]
			for side, k in (('citizen', k_c), ('post', k_p))
		}

	return report

def write_report_files(report: dict, outdir: PathLike):
	'''Delimited-text exports of a report: one file per interaction matrix,
	keyword tables, the attention-ratio histogram.
	'''
	outdir = Path(outdir)
	outdir.mkdir(parents=True, exist_ok=True)

	for kind, m in report['interaction'].items():
		write_interaction(m, outdir / f'{kind}.tsv')

	write_keywords(report['keywords']['citizen'], outdir / 'citizen_keywords.tsv')
	write_keywords(report['keywords']['post'], outdir / 'post_keywords.tsv')
	write_histogram(report['attention']['edges'], report['attention']['counts'],
		outdir / 'attention_histogram.tsv')
