from abc import ABC, abstractmethod
from collections import namedtuple

from ..utils import ThreadclustError

# Sampled instance: A, X, Y as SparseMatrix, labels 1-based
Instance = namedtuple('Instance', ('a', 'x', 'y', 'citizen_labels', 'post_labels'))

class ModelSpecError(ThreadclustError, ValueError):
	'''Invalid block model specification. cell is the offending (row, col) of
	the matrix named in the message, if any.
	'''
	def __init__(self, msg: str, cell: tuple = None):
		super().__init__(msg if cell is None else f'{msg} at {cell}')
		self.cell = cell

class CalibrationError(ThreadclustError, ValueError):
	'''Calibrating a template to the target expected degrees pushed some
	probability above 1 at the given signal level.
	'''
	def __init__(self, msg: str, signal: float):
		super().__init__(f'{msg} (signal {signal!r})')
		self.signal = signal

class BlockModel(ABC):
	# Short name of the model, as accepted by model_from_name()
	name: str = None

	# Human readable description, shown in --help
	description: str = None

	@abstractmethod
	def sample(self, seed: int) -> Instance:
		'''Draw one instance. The result only depends on the model parameters
		and the seed.
		'''
		pass

	@abstractmethod
	def params(self) -> dict:
		'''Parameters needed to rebuild this model with model_from_name(),
		written to the manifest of a simulation.
		'''
		pass

	def __repr__(s):
		args = ', '.join(f'{k}={v!r}' for k, v in s.params().items())
		return f'{s.__class__.__name__}({args})'
