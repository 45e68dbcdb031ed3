import csv
import math

from pathlib import Path
from typing import Sequence

import numpy as np

from threadclust.sparse import SparseMatrix

# Citizen degrees (3, 4, 1), post degrees (5, 3): tau_c = 8/3, tau_p = 4
TOY_A = np.array([
	[2.0, 1.0],
	[3.0, 1.0],
	[0.0, 1.0],
])

# Two walls, two topics: "money" posts on wall w1, "green" posts on wall w2
TOY_CORPUS = [
	('post'   , 'p1', 'w1', ''  , 'Taxes and the economy, jobs first!'),
	('post'   , 'p2', 'w1', ''  , 'Economy growth and taxes in 2024'),
	('post'   , 'p3', 'w2', ''  , 'Climate action: solar energy now'),
	('post'   , 'p4', 'w2', ''  , 'Energy transition and climate'),
	('comment', 'c1', 'p1', 'u1', 'lower taxes please'),
	('comment', 'c2', 'p2', 'u1', 'the economy needs jobs'),
	('comment', 'c3', 'p1', 'u2', 'taxes kill jobs'),
	('comment', 'c4', 'p2', 'u2', 'economy economy economy'),
	('comment', 'c5', 'p3', 'u3', 'solar is the future'),
	('comment', 'c6', 'p4', 'u3', 'climate and energy matter'),
	('comment', 'c7', 'p3', 'u4', 'energy from the sun'),
	('comment', 'c8', 'p4', 'u4', 'climate first'),
	('comment', 'c9', 'p4', 'u1', 'climate taxes'),
]

def toy_adjacency() -> SparseMatrix:
	return SparseMatrix.from_dense(TOY_A)

def write_corpus_file(path: Path, records: Sequence[tuple] = TOY_CORPUS) -> Path:
	with open(path, 'w', encoding='utf-8', newline='') as f:
		w = csv.writer(f, delimiter='\t', lineterminator='\n')
		w.writerow(('kind', 'id', 'parent', 'author', 'text'))
		w.writerows(records)
	return path

def random_sparse(n_rows: int, n_cols: int, density: float = 0.3, seed: int = 0,
		nonnegative: bool = True, integer: bool = False) -> SparseMatrix:
	rng = np.random.default_rng(seed)
	mask = rng.random((n_rows, n_cols)) < density

	if integer:
		vals = rng.integers(1, 4, size=(n_rows, n_cols)).astype(np.float64)
	else:
		vals = rng.random((n_rows, n_cols)) + 0.1
		if not nonnegative:
			vals *= rng.choice((-1, 1), size=(n_rows, n_cols))

	return SparseMatrix.from_dense(np.where(mask, vals, 0.0))

def dense_laplacian(a: np.ndarray, tau_c: float = None, tau_p: float = None) -> np.ndarray:
	d_c = a.sum(axis=1)
	d_p = a.sum(axis=0)
	tau_c = d_c.mean() if tau_c is None else tau_c
	tau_p = d_p.mean() if tau_p is None else tau_p
	return a / np.sqrt(np.outer(d_c + tau_c, d_p + tau_p))

def dense_centered(m: np.ndarray) -> np.ndarray:
	return m - m.mean(axis=0)

def dense_threshold(w: np.ndarray, alpha: float) -> np.ndarray:
	mags = np.sort(np.abs(w[w != 0]))
	rank = max(1, math.ceil((1 - alpha) * mags.size - 1e-9))
	omega = mags[rank - 1]
	return np.where(np.abs(w) > omega, w, 0.0)

def dense_similarity(l: np.ndarray, x: np.ndarray, y: np.ndarray, tw: np.ndarray,
		h: float) -> np.ndarray:
	return l + h * (x @ tw @ y.T)

def planted_labels(n: int, k: int) -> np.ndarray:
	'''Balanced 1-based labels 1, 1, ..., 2, 2, ... of length n.'''
	return np.repeat(np.arange(1, k + 1), -(-n // k))[:n]

def two_block_graph(n: int = 40, p_in: float = 0.6, p_out: float = 0.05, seed: int = 0) -> SparseMatrix:
	'''A square bipartite graph with two planted blocks on both sides.'''
	z = planted_labels(n, 2)
	p = np.where(z[:, None] == z[None, :], p_in, p_out)
	rng = np.random.default_rng(seed)
	return SparseMatrix.from_dense((rng.random((n, n)) < p).astype(np.float64))

def agreement(a: np.ndarray, b: np.ndarray) -> float:
	'''Fraction of node pairs put together (or apart) by both labelings.'''
	same_a = a[:, None] == a[None, :]
	same_b = b[:, None] == b[None, :]
	return float((same_a == same_b).mean())
