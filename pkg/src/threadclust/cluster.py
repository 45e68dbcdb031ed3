#
# k-means on the row-normalized singular vectors and cluster-centrality.
#

import logging

from collections import namedtuple
from typing import List, Optional, Sequence, Tuple

import numpy as np

from sklearn.cluster import kmeans_plusplus
from sklearn.metrics.pairwise import euclidean_distances

from .context import laplacian
from .sparse import SparseMatrix
from .spectral import SpectralEmbedding, normalize_rows, truncated_svd
from .type_hints import Labels, PathLike, Vector
from .utils import SEED_KMEANS_C, SEED_KMEANS_P, SEED_SVD, ThreadclustError
from .utils import derive_seed, high_verbosity, ordered_map

SIDES = ('citizen', 'post')

KMeansResult = namedtuple('KMeansResult', ('labels', 'centroids', 'inertia', 'restart', 'iterations'))

class ClusterError(ThreadclustError, ValueError):
	pass

def _sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
	# n x k, never n x k x d
	return euclidean_distances(x, c, squared=True)

def _assign(x: np.ndarray, c: np.ndarray) -> Tuple[Labels,np.ndarray]:
	'''Nearest centroid of every row (lowest index on ties). Empty clusters are
	repaired by moving into them the point farthest from its own centroid.
	'''
	d2 = _sq_distances(x, c)
	labels = np.argmin(d2, axis=1)
	k = c.shape[0]
	counts = np.bincount(labels, minlength=k)

	if (counts == 0).any():
		own = d2[np.arange(len(x)), labels].copy()

		for j in np.flatnonzero(counts == 0):
			movable = counts[labels] > 1
			cand = np.where(movable, own, -1.0)
			i = int(np.argmax(cand))

			counts[labels[i]] -= 1
			counts[j] += 1
			labels[i] = j
			own[i] = -1.0

	return labels, d2

def _centroids(x: np.ndarray, labels: Labels, k: int) -> np.ndarray:
	sums = np.zeros((k, x.shape[1]))
	np.add.at(sums, labels, x)
	counts = np.bincount(labels, minlength=k)
	return sums / np.maximum(counts, 1)[:, None]

def _lloyd(x: np.ndarray, k: int, seed: int, max_iter: int, tol: float) -> Tuple[Labels,np.ndarray,float,int]:
	c, _ = kmeans_plusplus(x, k, random_state=seed)
	it = 0

	while True:
		labels, _ = _assign(x, c)
		new = _centroids(x, labels, k)
		shift = np.sqrt(((new - c) ** 2).sum(axis=1)).max()
		c = new
		it += 1

		if shift < tol or it >= max_iter:
			break

	# Final partition and inertia are those of the returned centroids
	labels, _ = _assign(x, c)
	inertia = float(((x - c[labels]) ** 2).sum())
	return labels, c, inertia, it

def kmeans(rows: np.ndarray, k: int, restarts: int = 50, seed: int = 0,
		max_iter: int = 300, tol: float = 1e-9, workers: int = 1) -> KMeansResult:
	'''Lloyd's k-means with k-means++ seeding, best of restarts runs by
	within-cluster sum of squares. Restart r is seeded with derive_seed(seed, r)
	and the winner is the lowest (inertia, restart index), so the result does
	not depend on how restarts are scheduled on the workers. Labels are
	0-based.
	'''
	rows = np.asarray(rows, dtype=np.float64)
	n = rows.shape[0]

	if k < 1:
		raise ClusterError(f'number of clusters must be positive, got {k}')
	if k > n:
		raise ClusterError(f'cannot make {k} clusters out of {n} points')
	if restarts < 1:
		raise ClusterError(f'number of restarts must be positive, got {restarts}')

	def run(r: int):
		res = _lloyd(rows, k, derive_seed(seed, r), max_iter, tol)
		if high_verbosity():
			logging.debug('k-means restart %d: inertia %.12g after %d iterations', r, res[2], res[3])
		return res

	results = ordered_map(run, range(restarts), workers)
	best = min(range(restarts), key=lambda r: (results[r][2], r))
	labels, c, inertia, it = results[best]
	return KMeansResult(labels, c, inertia, best, it)

class CoClustering:
	'''Citizen and post partitions. Labels are 1-based cluster ids, every node
	has one; nodes with a zero embedding row are flagged as low-confidence.
	'''
	__slots__ = (
		'citizen_labels', 'post_labels', 'citizen_centroids', 'post_centroids',
		'citizen_centrality', 'post_centrality', 'citizen_inertia', 'post_inertia',
		'low_confidence_c', 'low_confidence_p', 'n_restarts', 'seed', 'embedding'
	)

	def __init__(self, **kwargs):
		for name in self.__slots__:
			setattr(self, name, kwargs.get(name))

	@property
	def inertia(self) -> float:
		return self.citizen_inertia + self.post_inertia

	@property
	def k_c(self) -> int:
		if self.citizen_centroids is not None:
			return self.citizen_centroids.shape[0]
		return int(self.citizen_labels.max())

	@property
	def k_p(self) -> int:
		if self.post_centroids is not None:
			return self.post_centroids.shape[0]
		return int(self.post_labels.max())

	def labels(self, side: str) -> Labels:
		return self.citizen_labels if _side(side) == 0 else self.post_labels

	def centrality(self, side: str) -> Vector:
		return self.citizen_centrality if _side(side) == 0 else self.post_centrality

	def low_confidence(self, side: str) -> Tuple[int,...]:
		return self.low_confidence_c if _side(side) == 0 else self.low_confidence_p

	def __repr__(s):
		return (f'CoClustering({len(s.citizen_labels)} citizens in {s.k_c} clusters, '
			f'{len(s.post_labels)} posts in {s.k_p} clusters, inertia={s.inertia:.6g})')

def _side(side: str) -> int:
	try:
		return SIDES.index(side)
	except ValueError:
		raise ValueError(f'side must be one of {", ".join(SIDES)}, got {side!r}') from None

def _cluster_side(rows: np.ndarray, zero_rows: Sequence[int], k: int, restarts: int,
		seed: int, max_iter: int, tol: float, workers: int, what: str):
	n = rows.shape[0]
	mask = np.ones(n, dtype=bool)
	mask[list(zero_rows)] = False

	km = kmeans(rows[mask], k, restarts, seed, max_iter, tol, workers)
	labels = np.empty(n, dtype=np.int64)
	labels[mask] = km.labels

	if zero_rows:
		# Nearest centroid to the zero vector: smallest norm, lowest index on ties
		labels[list(zero_rows)] = int(np.argmin((km.centroids ** 2).sum(axis=1)))

	centrality = np.einsum('ij,ij->i', rows, km.centroids[labels])
	logging.info('Clustered %d %ss into %d clusters (inertia %.6g, best restart %d)',
		n, what, k, km.inertia, km.restart)
	return labels + 1, km.centroids, centrality, km.inertia

def fit(embedding: SpectralEmbedding, k_c: int, k_p: int, restarts: int = 50,
		seed: int = 0, max_iter: int = 300, tol: float = 1e-9, workers: int = 1) -> CoClustering:
	'''Cluster the rows of the normalized citizen embedding into k_c clusters
	and those of the post embedding into k_p clusters, independently.
	Centrality of a node is the inner product of its normalized row with the
	centroid of its cluster.
	'''
	if not embedding.normalized:
		embedding = normalize_rows(embedding)

	lc, cc, rc, ic = _cluster_side(embedding.u_c_star, embedding.zero_rows_c, k_c, restarts,
		derive_seed(seed, SEED_KMEANS_C), max_iter, tol, workers, 'citizen')
	lp, cp, rp, ip = _cluster_side(embedding.u_p_star, embedding.zero_rows_p, k_p, restarts,
		derive_seed(seed, SEED_KMEANS_P), max_iter, tol, workers, 'post')

	return CoClustering(
		citizen_labels=lc, post_labels=lp,
		citizen_centroids=cc, post_centroids=cp,
		citizen_centrality=rc, post_centrality=rp,
		citizen_inertia=ic, post_inertia=ip,
		low_confidence_c=embedding.zero_rows_c, low_confidence_p=embedding.zero_rows_p,
		n_restarts=restarts, seed=seed, embedding=embedding
	)

def central_members(cc: CoClustering, cluster: int, top_n: Optional[int] = None,
		side: str = 'citizen') -> List[int]:
	'''Members of a cluster (1-based id) sorted by decreasing centrality, ties
	by node index, at most top_n of them.
	'''
	labels = cc.labels(side)
	k = cc.k_c if _side(side) == 0 else cc.k_p

	if not 1 <= cluster <= k:
		raise ClusterError(f'unknown {side} cluster {cluster}, expected 1..{k}')

	members = np.flatnonzero(labels == cluster)
	rho = cc.centrality(side)[members]
	order = np.lexsort((members, -rho))
	return [int(i) for i in members[order][:top_n]]

def disim(a: SparseMatrix, k_c: int, k_p: int, tau_c: float = None, tau_p: float = None,
		seed: int = 0, restarts: int = 50, svd_kwargs: dict = None, max_iter: int = 300,
		tol: float = 1e-9, workers: int = 1) -> CoClustering:
	'''Graph-only co-clustering: SVD of the regularized Laplacian of a, row
	normalization and k-means on both sides.
	'''
	l = laplacian(a, tau_c, tau_p)
	emb = truncated_svd(l, min(k_c, k_p), derive_seed(seed, SEED_SVD), **(svd_kwargs or {}))
	return fit(normalize_rows(emb), k_c, k_p, restarts, seed, max_iter, tol, workers)

def write_labels(cc: CoClustering, side: str, path: PathLike, keys: Sequence[str] = None):
	'''Write a "node key cluster centrality flagged" table for one side.
	'''
	labels = cc.labels(side)
	rho = cc.centrality(side)
	flagged = set(cc.low_confidence(side))

	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('node\tkey\tcluster\tcentrality\tflagged\n')

		for i, (lab, r) in enumerate(zip(labels, rho)):
			key = keys[i] if keys is not None else ''
			f.write(f'{i}\t{key}\t{lab}\t{float(r)!r}\t{int(i in flagged)}\n')

def read_labels(path: PathLike) -> Labels:
	'''Read the cluster column of a label table, or a single column of labels
	(as written for simulation truth files).
	'''
	header, rows = _read_table(path)
	col = header.index('cluster') if 'cluster' in header else 0

	try:
		return np.array([int(r[col]) for r in rows], dtype=np.int64)
	except (ValueError, IndexError):
		raise ClusterError(f'{path}: malformed label table') from None

def write_truth(labels: Labels, path: PathLike):
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('cluster\n')
		f.writelines(f'{int(l)}\n' for l in labels)

def _read_table(path: PathLike):
	with open(path, encoding='utf-8') as f:
		header = f.readline().rstrip('\n').split('\t')
		rows = [line.rstrip('\n').split('\t') for line in f if line.strip()]
	return header, rows

def read_clustering(citizen_path: PathLike, post_path: PathLike) -> CoClustering:
	'''Rebuild a CoClustering (without centroids and embedding) from the label
	tables written by write_labels().
	'''
	sides = []

	for path in (citizen_path, post_path):
		header, rows = _read_table(path)
		try:
			c, r, fl = (header.index(x) for x in ('cluster', 'centrality', 'flagged'))
			labels = np.array([int(row[c]) for row in rows], dtype=np.int64)
			rho = np.array([float(row[r]) for row in rows])
			flagged = tuple(i for i, row in enumerate(rows) if row[fl] == '1')
		except (ValueError, IndexError):
			raise ClusterError(f'{path}: malformed label table') from None

		sides.append((labels, rho, flagged))

	(lc, rc, fc), (lp, rp, fp) = sides
	return CoClustering(citizen_labels=lc, post_labels=lp, citizen_centrality=rc,
		post_centrality=rp, low_confidence_c=fc, low_confidence_p=fp)
