from itertools import permutations

import numpy as np

from scipy.optimize import linear_sum_assignment

from ..sparse import DimensionError
from ..type_hints import Labels

# Up to this many clusters every label permutation is tried
EXHAUSTIVE_MAX_K = 6

def confusion_matrix(estimated: Labels, truth: Labels) -> np.ndarray:
	'''Square contingency table (estimated cluster x true cluster) over the
	union of the label values, padded with zero rows or columns.
	'''
	_, est = np.unique(estimated, return_inverse=True)
	_, tru = np.unique(truth, return_inverse=True)
	k = max(est.max(initial=-1), tru.max(initial=-1)) + 1

	conf = np.zeros((k, k), dtype=np.int64)
	np.add.at(conf, (est, tru), 1)
	return conf

def misclustering_rate(estimated: Labels, truth: Labels) -> float:
	'''Fraction of nodes whose cluster disagrees with the truth, minimized over
	relabelings of the estimate.
	'''
	estimated = np.asarray(estimated).ravel()
	truth = np.asarray(truth).ravel()

	if estimated.size != truth.size:
		raise DimensionError('number of labels', truth.size, estimated.size)
	if truth.size == 0:
		return 0.0

	conf = confusion_matrix(estimated, truth)
	k = conf.shape[0]

	if k <= EXHAUSTIVE_MAX_K:
		rows = np.arange(k)
		matched = max(conf[rows, list(p)].sum() for p in permutations(range(k)))
	else:
		rows, cols = linear_sum_assignment(conf, maximize=True)
		matched = conf[rows, cols].sum()

	return float(1 - matched / truth.size)
