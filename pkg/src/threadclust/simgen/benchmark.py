#
# Mis-clustering rates of the co-clustering methods over a grid of graph and
# text signal levels, on simulated documents.
#

import logging
import math

from collections import namedtuple
from time import monotonic
from typing import Dict, List, Sequence

import numpy as np

from ..config import RunConfig, make_manifest, write_manifest
from ..pipeline import Pipeline
from ..type_hints import PathLike, SignalPair
from ..utils import ThreadclustError, derive_seed, eprint, ordered_map, silent
from .dcsbm import sample_dcsbm_docs
from .metrics import misclustering_rate

METHODS = ('combined', 'graph_only', 'text_only', 'all_one')
AXES    = ('both', 'graph', 'text')

# h_mode of the fit run for each method
METHOD_H_MODES = {
	'combined'  : 'value',
	'graph_only': 'graph_only',
	'text_only' : 'text_only',
	'all_one'   : 'all_one',
}

# Fit configuration the methods start from: two clusters on each side, h = 1
# with first singular value calibration, 10^4 k-means restarts. Options set
# by the user replace these, only h_mode is chosen per method.
DEFAULT_BASE = RunConfig(h=1.0, calibrate='sigma1', k_c=2, k_p=2, restarts=10_000)

Failure = namedtuple('Failure', ('cell', 'rep', 'method', 'error'))

def full_signal_levels() -> np.ndarray:
	'''10^-1.8, 10^-1.6, ..., 10^3.
	'''
	return 10 ** (np.arange(-9, 16) / 5)

def signal_grid(levels: Sequence[float], axis: str = 'both') -> List[SignalPair]:
	'''(sig_g, sig_t) cells along one axis: both signals equal, graph signal
	only or text signal only.
	'''
	if axis == 'both':
		return [(float(s), float(s)) for s in levels]
	if axis == 'graph':
		return [(float(s), 0.0) for s in levels]
	if axis == 'text':
		return [(0.0, float(s)) for s in levels]
	raise ValueError(f'axis must be one of {", ".join(AXES)}, got {axis!r}')

def benchmark_config(method: str, base: RunConfig = None) -> RunConfig:
	'''Fit configuration of one method: the base configuration (DEFAULT_BASE
	if not given) with the h_mode of the method.
	'''
	base = base or DEFAULT_BASE
	return base.with_options(h_mode=METHOD_H_MODES[method])

class BenchmarkResult:
	'''Rates and run times indexed by (cell, method, rep); NaN where the rep
	failed.
	'''
	__slots__ = ('grid', 'methods', 'n_reps', 'rates', 'seconds', 'failures')

	def __init__(self, grid: Sequence[SignalPair], methods: Sequence[str], n_reps: int):
		self.grid     = list(grid)
		self.methods  = tuple(methods)
		self.n_reps   = n_reps
		self.rates    = np.full((len(self.grid), len(self.methods), n_reps), np.nan)
		self.seconds  = np.full_like(self.rates, np.nan)
		self.failures: List[Failure] = []

	def _stat(self, fn) -> np.ndarray:
		out = np.full(self.rates.shape[:2], np.nan)
		for idx in np.ndindex(*out.shape):
			vals = self.rates[idx][~np.isnan(self.rates[idx])]
			if vals.size:
				out[idx] = fn(vals)
		return out

	def mean(self) -> np.ndarray:
		return self._stat(np.mean)

	def std(self) -> np.ndarray:
		'''Sample standard deviation, 0 when a cell has a single valid rep.
		'''
		return self._stat(lambda v: np.std(v, ddof=1) if v.size > 1 else 0.0)

	def n_valid(self) -> np.ndarray:
		return (~np.isnan(self.rates)).sum(axis=2)

	def rows(self):
		mean, std, valid = self.mean(), self.std(), self.n_valid()
		for c, (sg, st) in enumerate(self.grid):
			for m, method in enumerate(self.methods):
				yield sg, st, method, mean[c, m], std[c, m], int(valid[c, m])

	def __repr__(s):
		return (f'BenchmarkResult({len(s.grid)} cells, methods={",".join(s.methods)}, '
			f'n_reps={s.n_reps}, failures={len(s.failures)})')

def run_benchmark(grid: Sequence[SignalPair], n_reps: int = 100,
		methods: Sequence[str] = ('combined',), seed: int = 0, n_docs: int = 1000,
		n_words: int = 1000, theta: str = 'ones', base: RunConfig = None,
		workers: int = 1) -> BenchmarkResult:
	'''Simulate n_reps document sets per grid cell and co-cluster each with
	every method. Rep r of cell c uses the seed derive_seed(seed, c, r) for
	both simulation and fit. A failing rep is recorded and the run goes on.
	'''
	unknown = set(methods) - set(METHODS)
	if unknown:
		raise ValueError(f'unknown method(s): {", ".join(sorted(unknown))}')
	if n_reps < 1:
		raise ValueError(f'number of reps must be positive, got {n_reps}')

	res = BenchmarkResult(grid, methods, n_reps)
	configs = [benchmark_config(m, base).with_options(workers=1) for m in methods]
	jobs = [(c, r) for c in range(len(res.grid)) for r in range(n_reps)]

	def run(job):
		c, r = job
		sig_g, sig_t = res.grid[c]
		rep_seed = derive_seed(seed, c, r)
		out = []

		try:
			a, x, z = sample_dcsbm_docs(n_docs, n_words, sig_g, sig_t, rep_seed, theta)
		except ThreadclustError as e:
			return [(math.nan, math.nan, str(e))] * len(configs)

		for cfg in configs:
			start = monotonic()
			try:
				cc = Pipeline(cfg.with_options(seed=rep_seed), a, x, x).run()
				out.append((misclustering_rate(cc.citizen_labels, z), monotonic() - start, None))
			except (ThreadclustError, np.linalg.LinAlgError, ValueError) as e:
				out.append((math.nan, math.nan, str(e)))

		if not silent():
			eprint(f'Cell {c + 1}/{len(res.grid)} (sig_g={sig_g:g}, sig_t={sig_t:g}) rep {r + 1}/{n_reps} done')
		return out

	for (c, r), out in zip(jobs, ordered_map(run, jobs, workers)):
		for m, (rate, secs, err) in enumerate(out):
			res.rates[c, m, r] = rate
			res.seconds[c, m, r] = secs
			if err is not None:
				res.failures.append(Failure(c, r, res.methods[m], err))
				logging.warning('Cell %d rep %d method %s failed: %s', c, r, res.methods[m], err)

	return res

def _fmt(v: float) -> str:
	return 'nan' if math.isnan(v) else repr(float(v))

def write_benchmark(res: BenchmarkResult, path: PathLike):
	'''Per-cell table of mean and standard deviation of the rate. Run times go
	to a separate file (write_timings) so that this one is reproducible.
	'''
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('sig_g\tsig_t\tmethod\tmean_rate\tstd_rate\tn_reps\n')
		for sg, st, method, mean, std, n in res.rows():
			f.write(f'{_fmt(sg)}\t{_fmt(st)}\t{method}\t{_fmt(mean)}\t{_fmt(std)}\t{n}\n')

def write_timings(res: BenchmarkResult, path: PathLike):
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('sig_g\tsig_t\tmethod\tseconds\n')
		for c, (sg, st) in enumerate(res.grid):
			for m, method in enumerate(res.methods):
				secs = res.seconds[c, m]
				total = float(secs[~np.isnan(secs)].sum())
				f.write(f'{_fmt(sg)}\t{_fmt(st)}\t{method}\t{total:.3f}\n')

def write_failures(res: BenchmarkResult, path: PathLike):
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		f.write('sig_g\tsig_t\trep\tmethod\terror\n')
		for fail in res.failures:
			sg, st = res.grid[fail.cell]
			err = fail.error.replace('\t', ' ').replace('\n', ' ')
			f.write(f'{_fmt(sg)}\t{_fmt(st)}\t{fail.rep}\t{fail.method}\t{err}\n')

def benchmark_manifest(res: BenchmarkResult, seed: int, params: Dict, base: RunConfig) -> dict:
	bench = dict(params, grid=[list(cell) for cell in res.grid], methods=list(res.methods),
		n_reps=res.n_reps, seed=seed)
	return make_manifest('benchmark', base or DEFAULT_BASE, {'master': seed}, {'benchmark': bench})

def write_benchmark_manifest(res: BenchmarkResult, seed: int, params: Dict, base: RunConfig,
		path: PathLike):
	write_manifest(benchmark_manifest(res, seed, params, base), path)
