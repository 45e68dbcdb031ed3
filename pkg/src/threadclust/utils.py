import os
import sys
import logging

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, TypeVar

import numpy as np

T = TypeVar('T')
R = TypeVar('R')

class ThreadclustError(Exception):
	'''Base class for every error raised on purpose by threadclust. The command
	line front end treats these as user errors (exit code 1).
	'''
	pass

SILENT = False
HIGH_VERBOSITY = False

# Seed derivation paths, see derive_seed()
SEED_SVD         = 0
SEED_KMEANS_C    = 1
SEED_KMEANS_P    = 2
SEED_ATTENTION   = 3
SEED_CALIBRATION = 4

def high_verbosity() -> bool:
	'''Return whether high verbosity is enabled (True if a lot of -v are given).
	'''
	return HIGH_VERBOSITY

def enable_high_verbosity():
	'''Enable high verbosity: per-iteration logging of iterative solvers and
	per-restart logging of k-means.
	'''
	# Solvers would otherwise flood the output with one line per iteration
	global HIGH_VERBOSITY
	HIGH_VERBOSITY = True

def silent() -> bool:
	'''Return whether silent mode is enabled (True if a lot of -q are given).
	'''
	return SILENT

def enable_silent():
	'''Enable silent mode: output to standard error of any kind is disabled.'''
	global SILENT
	SILENT = True

def eprint(*a, **kwa):
	'''print() wrapper that prints on standard error and flushes after printing,
	only if not in silent mode.
	'''
	if not SILENT:
		print(*a, **kwa, file=sys.stderr, flush=True)

def format_duration(s: float) -> str:
	'''Convert a duration in seconds to a human readable string specifying
	hours, minutes and seconds. Sub-second durations keep two decimals.
	'''
	if s < 1:
		return f'{s:.2f}s'

	s = round(s)
	h = s // 3600
	s %= 3600
	m = s // 60
	s %= 60

	if h > 0:
		return f'{h}h {m:02d}m {s:02d}s'
	if m > 0:
		return f'{m}m {s:02d}s'
	return f'{s}s'

def derive_seed(master: int, *path: int) -> int:
	'''Derive a 32-bit sub-seed from a master seed and a path of integers (e.g.
	benchmark cell and replication index). The result only depends on the
	arguments, never on scheduling or on how many seeds were derived before.
	'''
	ss = np.random.SeedSequence([int(master) & 0xffffffff, *map(int, path)])
	return int(ss.generate_state(1)[0])

def available_workers(requested: int = 0) -> int:
	'''Number of worker threads to use: the requested amount if positive,
	otherwise the number of CPUs this process is allowed to run on.
	'''
	if requested > 0:
		return requested

	try:
		return len(os.sched_getaffinity(0))
	except AttributeError:
		# Not available on every platform
		return os.cpu_count() or 1

def ordered_map(fn: Callable[[T], R], items: Iterable[T], workers: int = 1) -> List[R]:
	'''Apply fn to every item, possibly on a thread pool, and return results in
	input order. With workers <= 1 everything runs in the calling thread.
	'''
	items = list(items)
	if workers <= 1 or len(items) <= 1:
		return list(map(fn, items))

	with ThreadPoolExecutor(max_workers=workers) as pool:
		return list(pool.map(fn, items))

def plural(n: int, word: str) -> str:
	return f'{n} {word}' + ('s' if n != 1 else '')

def log_flagged(what: str, indices: Iterable[int], limit: int = 10):
	'''Log a warning listing (at most limit of) the given flagged indices.
	'''
	indices = list(indices)
	if not indices:
		return

	shown = ', '.join(map(str, indices[:limit]))
	more  = f' (and {len(indices) - limit} more)' if len(indices) > limit else ''
	logging.warning('%s: %s%s', what, shown, more)
