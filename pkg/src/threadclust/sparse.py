#
# Sparse matrix storage and the matrix-vector kernels used everywhere else.
#
# SparseMatrix is an immutable wrapper around a canonical scipy CSR matrix
# (sorted indices, no duplicates, no explicit zeros) with a CSC twin for
# column-major traversal. CenteredMatrix represents
#
#     M = diag(row_scales) @ base @ diag(col_scales) - 1 @ col_offsets^T
#
# without ever materializing the dense rank-one correction.
#

import logging
import math

from pathlib import Path
from typing import Iterable, Optional, Sequence, TextIO, Union

import numpy as np
import scipy.sparse as sp

from .type_hints import PathLike, Triplet, Vector
from .utils import ThreadclustError, log_flagged

class SparseFormatError(ThreadclustError, ValueError):
	def __init__(self, msg: str, path: Optional[PathLike] = None, lineno: Optional[int] = None):
		where = ''
		if path is not None:
			where = f'{path}:{lineno}: ' if lineno is not None else f'{path}: '
		super().__init__(where + msg)
		self.path   = path
		self.lineno = lineno

class TripletIndexError(ThreadclustError, ValueError):
	def __init__(self, triplet: Triplet, shape: tuple, reason: str):
		super().__init__(f'Bad triplet {triplet!r} for shape {shape[0]}x{shape[1]}: {reason}')
		self.triplet = triplet
		self.shape   = shape

class DimensionError(ThreadclustError, ValueError):
	def __init__(self, what: str, expected, got):
		super().__init__(f'{what}: expected {expected}, got {got}')
		self.expected = expected
		self.got      = got

class NegativeEntryError(ThreadclustError, ValueError):
	pass

class SparseMatrix:
	'''Immutable sparse real matrix in canonical compressed form.
	'''
	__slots__ = ('csr', 'csc')

	def __init__(self, csr: sp.csr_matrix):
		'''Wrap an already canonical CSR matrix. Use build_sparse() or the
		from_*() constructors instead of calling this directly.
		'''
		self.csr = csr
		self.csc = csr.tocsc()
		self.csc.sort_indices()

	@classmethod
	def from_coo(cls, rows: np.ndarray, cols: np.ndarray, vals: np.ndarray,
			n_rows: int, n_cols: int) -> 'SparseMatrix':
		'''Build from coordinate arrays: duplicates are summed in a fixed order
		(lexicographic on row, column, value) so that the result does not depend
		on the order of the input, and zeros are dropped.
		'''
		rows = np.asarray(rows, dtype=np.int64)
		cols = np.asarray(cols, dtype=np.int64)
		vals = np.asarray(vals, dtype=np.float64)

		if rows.size:
			order = np.lexsort((vals, cols, rows))
			rows, cols, vals = rows[order], cols[order], vals[order]

		m = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
		m.sum_duplicates()
		m.eliminate_zeros()
		m.sort_indices()
		return cls(m)

	@classmethod
	def from_scipy(cls, m: sp.spmatrix) -> 'SparseMatrix':
		coo = sp.coo_matrix(m, dtype=np.float64)
		return cls.from_coo(coo.row, coo.col, coo.data, *coo.shape)

	@classmethod
	def from_dense(cls, a: np.ndarray) -> 'SparseMatrix':
		a = np.atleast_2d(np.asarray(a, dtype=np.float64))
		rows, cols = np.nonzero(a)
		return cls.from_coo(rows, cols, a[rows, cols], *a.shape)

	@classmethod
	def empty(cls, n_rows: int, n_cols: int) -> 'SparseMatrix':
		return cls(sp.csr_matrix((n_rows, n_cols), dtype=np.float64))

	@property
	def n_rows(self) -> int:
		return self.csr.shape[0]

	@property
	def n_cols(self) -> int:
		return self.csr.shape[1]

	@property
	def shape(self) -> tuple:
		return self.csr.shape

	def nnz(self) -> int:
		return self.csr.nnz

	def entries(self) -> Iterable[Triplet]:
		'''Iterate over stored entries as (row, col, value) in row-major order.
		'''
		indptr, indices, data = self.csr.indptr, self.csr.indices, self.csr.data
		for i in range(self.n_rows):
			for p in range(indptr[i], indptr[i + 1]):
				yield i, int(indices[p]), float(data[p])

	def row_sums(self) -> Vector:
		return np.asarray(self.csr.sum(axis=1)).ravel()

	def col_sums(self) -> Vector:
		return np.asarray(self.csc.sum(axis=0)).ravel()

	def min_value(self) -> float:
		return float(self.csr.data.min()) if self.csr.nnz else 0.0

	def to_dense(self) -> np.ndarray:
		return self.csr.toarray()

	def matvec(self, v: Vector) -> Vector:
		v = _check_vector(v, self.n_cols, 'matvec')
		return self.csr @ v

	def rmatvec(self, u: Vector) -> Vector:
		u = _check_vector(u, self.n_rows, 'rmatvec')
		return self.csc.T @ u

	def matmat(self, v: np.ndarray) -> np.ndarray:
		_check_rows(v, self.n_cols, 'matmat')
		return np.asarray(self.csr @ v)

	def rmatmat(self, u: np.ndarray) -> np.ndarray:
		_check_rows(u, self.n_rows, 'rmatmat')
		return np.asarray(self.csc.T @ u)

	def same_as(self, other: 'SparseMatrix') -> bool:
		'''Exact structural and numerical equality.
		'''
		a, b = self.csr, other.csr
		return (
			a.shape == b.shape
			and np.array_equal(a.indptr, b.indptr)
			and np.array_equal(a.indices, b.indices)
			and np.array_equal(a.data, b.data)
		)

	def __repr__(s):
		return f'SparseMatrix({s.n_rows}x{s.n_cols}, nnz={s.nnz()})'

class CenteredMatrix:
	'''A sparse matrix with an implicit per-column offset and optional per-row
	and per-column scale factors. Entry (i, j) is

	    row_scales[i] * col_scales[j] * base[i, j] - col_offsets[j]

	and is never materialized: matvec/rmatvec apply the rank-one correction
	on the fly.
	'''
	__slots__ = (
		'base', 'col_offsets', 'row_scales', 'col_scales',
		'zero_rows', 'zero_cols', 'scaled'
	)

	def __init__(self, base: SparseMatrix, col_offsets: Vector = None,
			row_scales: Vector = None, col_scales: Vector = None,
			zero_rows: Sequence[int] = (), zero_cols: Sequence[int] = ()):
		n, m = base.shape
		self.base        = base
		self.col_offsets = _vector_or(col_offsets, m, 0.0)
		self.row_scales  = _vector_or(row_scales, n, 1.0)
		self.col_scales  = _vector_or(col_scales, m, 1.0)
		self.zero_rows   = tuple(map(int, zero_rows))
		self.zero_cols   = tuple(map(int, zero_cols))

		if np.any(self.row_scales <= 0) or np.any(self.col_scales <= 0):
			raise ValueError('scale factors must be positive')

		if np.all(self.row_scales == 1) and np.all(self.col_scales == 1):
			self.scaled = base
		else:
			r = sp.diags(self.row_scales)
			c = sp.diags(self.col_scales)
			self.scaled = SparseMatrix.from_scipy(r @ base.csr @ c)

	@classmethod
	def identity(cls, base: SparseMatrix) -> 'CenteredMatrix':
		'''Wrap base with the identity transform (no offsets, unit scales).
		'''
		return cls(base)

	@property
	def n_rows(self) -> int:
		return self.base.n_rows

	@property
	def n_cols(self) -> int:
		return self.base.n_cols

	@property
	def shape(self) -> tuple:
		return self.base.shape

	@property
	def is_centered(self) -> bool:
		return bool(np.any(self.col_offsets != 0))

	def with_offsets(self, col_offsets: Vector) -> 'CenteredMatrix':
		return CenteredMatrix(self.base, col_offsets, self.row_scales,
			self.col_scales, self.zero_rows, self.zero_cols)

	def matvec(self, v: Vector) -> Vector:
		v = _check_vector(v, self.n_cols, 'matvec')
		return self.scaled.csr @ v - np.dot(self.col_offsets, v)

	def rmatvec(self, u: Vector) -> Vector:
		u = _check_vector(u, self.n_rows, 'rmatvec')
		return self.scaled.csc.T @ u - self.col_offsets * math.fsum(u)

	def matmat(self, v: np.ndarray) -> np.ndarray:
		_check_rows(v, self.n_cols, 'matmat')
		return np.asarray(self.scaled.csr @ v) - (self.col_offsets @ v)[None, :]

	def rmatmat(self, u: np.ndarray) -> np.ndarray:
		_check_rows(u, self.n_rows, 'rmatmat')
		return np.asarray(self.scaled.csc.T @ u) - np.outer(self.col_offsets, u.sum(axis=0))

	def column_block(self, start: int, stop: int) -> np.ndarray:
		'''Dense copy of columns [start, stop) of the implicit matrix.
		'''
		block = self.scaled.csc[:, start:stop].toarray()
		return block - self.col_offsets[start:stop][None, :]

	def row_sums(self) -> Vector:
		return self.scaled.row_sums() - self.col_offsets.sum()

	def to_dense(self) -> np.ndarray:
		return self.scaled.to_dense() - self.col_offsets[None, :]

	def __repr__(s):
		return (f'CenteredMatrix({s.n_rows}x{s.n_cols}, nnz={s.base.nnz()}, '
			f'centered={s.is_centered})')

MatrixLike = Union[SparseMatrix, CenteredMatrix]

def _vector_or(v: Optional[Vector], n: int, fill: float) -> Vector:
	if v is None:
		return np.full(n, fill, dtype=np.float64)

	v = np.asarray(v, dtype=np.float64)
	if v.shape != (n,):
		raise DimensionError('transform vector length', n, v.shape)
	return v

def _check_vector(v: Vector, n: int, what: str) -> Vector:
	v = np.asarray(v, dtype=np.float64)
	if v.ndim != 1 or v.shape[0] != n:
		raise DimensionError(f'{what} vector length', n, v.shape)
	return v

def _check_rows(v: np.ndarray, n: int, what: str):
	if v.ndim != 2 or v.shape[0] != n:
		raise DimensionError(f'{what} operand rows', n, v.shape)

def build_sparse(triplets: Iterable[Triplet], n_rows: int, n_cols: int) -> SparseMatrix:
	'''Build a SparseMatrix from (row, col, value) triplets. Duplicates are
	summed, resulting zeros dropped. Raise TripletIndexError naming the first
	offending triplet if an index is out of range or a value is not finite.
	'''
	triplets = list(triplets)
	shape = (n_rows, n_cols)

	if n_rows < 0 or n_cols < 0:
		raise ValueError(f'invalid shape {n_rows}x{n_cols}')

	if not triplets:
		return SparseMatrix.empty(n_rows, n_cols)

	rows = np.fromiter((t[0] for t in triplets), dtype=np.int64, count=len(triplets))
	cols = np.fromiter((t[1] for t in triplets), dtype=np.int64, count=len(triplets))
	vals = np.fromiter((t[2] for t in triplets), dtype=np.float64, count=len(triplets))

	bad = (rows < 0) | (rows >= n_rows) | (cols < 0) | (cols >= n_cols)
	if bad.any():
		raise TripletIndexError(tuple(triplets[int(np.argmax(bad))]), shape, 'index out of range')

	bad = ~np.isfinite(vals)
	if bad.any():
		raise TripletIndexError(tuple(triplets[int(np.argmax(bad))]), shape, 'value not finite')

	return SparseMatrix.from_coo(rows, cols, vals, n_rows, n_cols)

def center_columns(m: MatrixLike) -> CenteredMatrix:
	'''Center a matrix by column: offsets are the column means of the (scaled)
	matrix, so the implicit result has all column sums equal to zero. Scale
	factors of a CenteredMatrix input are kept; centering twice is a no-op.
	'''
	if isinstance(m, SparseMatrix):
		m = CenteredMatrix.identity(m)

	if m.n_rows < 1:
		raise DimensionError('center_columns rows', '>= 1', m.n_rows)

	offsets = m.scaled.col_sums() / m.n_rows
	return m.with_offsets(offsets)

def scale_rows_cols(m: SparseMatrix) -> CenteredMatrix:
	'''Replace each entry m[i, j] by m[i, j] / sqrt(rowsum_i * colsum_j).
	Rows or columns summing to zero keep scale 1 and are flagged.
	'''
	if m.min_value() < 0:
		raise NegativeEntryError('row/column scaling is defined for nonnegative (count) data')

	rowsum = m.row_sums()
	colsum = m.col_sums()
	zero_rows = np.flatnonzero(rowsum <= 0)
	zero_cols = np.flatnonzero(colsum <= 0)

	with np.errstate(divide='ignore'):
		row_scales = np.where(rowsum > 0, 1 / np.sqrt(rowsum), 1.0)
		col_scales = np.where(colsum > 0, 1 / np.sqrt(colsum), 1.0)

	log_flagged('Rows with zero sum left unscaled', zero_rows)
	log_flagged('Columns with zero sum left unscaled', zero_cols)
	return CenteredMatrix(m, None, row_scales, col_scales, zero_rows, zero_cols)

def matvec(m: MatrixLike, v: Vector) -> Vector:
	return m.matvec(v)

def rmatvec(m: MatrixLike, u: Vector) -> Vector:
	return m.rmatvec(u)

def write_triplets(m: SparseMatrix, dest: Union[PathLike,TextIO]):
	'''Write m in the plain-text triplet format: a "rows cols nnz" header line,
	then one "row col value" line per stored entry in row-major order, 0-based
	indices, values in Python's shortest round-trip float representation.
	'''
	if not hasattr(dest, 'write'):
		with open(dest, 'w', encoding='utf-8', newline='\n') as f:
			write_triplets(m, f)
		return

	dest.write(f'{m.n_rows} {m.n_cols} {m.nnz()}\n')
	for i, j, v in m.entries():
		dest.write(f'{i} {j} {v!r}\n')

def read_triplets(path: PathLike) -> SparseMatrix:
	'''Read a matrix written by write_triplets(). Malformed content raises
	SparseFormatError with the offending line number.
	'''
	path = Path(path)

	with path.open(encoding='utf-8') as f:
		header = f.readline().split()
		if len(header) != 3 or not all(x.isdigit() for x in header):
			raise SparseFormatError('expected header "rows cols nnz"', path, 1)

		n_rows, n_cols, nnz = map(int, header)
		rows = np.empty(nnz, dtype=np.int64)
		cols = np.empty(nnz, dtype=np.int64)
		vals = np.empty(nnz, dtype=np.float64)
		k = 0

		for lineno, line in enumerate(f, 2):
			if not line.strip():
				continue

			fields = line.split()
			if len(fields) != 3 or k >= nnz:
				raise SparseFormatError('expected "row col value"' if len(fields) != 3
					else f'more entries than the declared {nnz}', path, lineno)

			try:
				i, j, v = int(fields[0]), int(fields[1]), float(fields[2])
			except ValueError:
				raise SparseFormatError(f'cannot parse entry {line.strip()!r}', path, lineno) from None

			if not (0 <= i < n_rows and 0 <= j < n_cols) or not math.isfinite(v):
				raise SparseFormatError(f'entry {line.strip()!r} out of range or not finite', path, lineno)

			rows[k], cols[k], vals[k] = i, j, v
			k += 1

	if k != nnz:
		raise SparseFormatError(f'declared {nnz} entries, found {k}', path)

	logging.debug('Read %dx%d matrix with %d entries from %s', n_rows, n_cols, nnz, path)
	return SparseMatrix.from_coo(rows, cols, vals, n_rows, n_cols)
