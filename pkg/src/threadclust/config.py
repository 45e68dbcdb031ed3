#
# Run configuration: a flat set of options read from and written to a plain
# KEY=VALUE text file, and the JSON manifest written next to every result.
#

import json
import logging
import math
import platform

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Union, get_args, get_origin

import numpy as np
import scipy
import sklearn

from .type_hints import PathLike
from .utils import ThreadclustError
from .version import VERSION

SCALINGS     = ('plain', 'center', 'row_col_scale', 'tfidf')
H_MODES      = ('graph_only', 'value', 'text_only', 'all_one')
CALIBRATIONS = ('none', 'sigma1', 'sigma2')
POPULATIONS  = ('nonzero', 'all')
SVD_METHODS  = ('randomized', 'lanczos')

class ConfigError(ThreadclustError, ValueError):
	pass

@dataclass(frozen=True)
class RunConfig:
	input_dir: str = ''
	output_dir: str = ''
	cutoff: float = 0.001
	scaling: str = 'center'
	h_mode: str = 'value'
	h: float = 0.035
	calibrate: str = 'sigma2'
	alpha: float = 0.05
	threshold_population: str = 'nonzero'
	threshold_signed: bool = False
	tau_c: Optional[float] = None
	tau_p: Optional[float] = None
	k_c: int = 4
	k_p: int = 4
	svd_method: str = 'randomized'
	svd_k: Optional[int] = None
	scree_k: Optional[int] = None
	svd_tol: float = 1e-8
	svd_max_iter: int = 500
	oversample: int = 10
	power_iters: int = 4
	restarts: int = 50
	kmeans_max_iter: int = 300
	kmeans_tol: float = 1e-9
	block_size: int = 256
	workers: int = 0
	seed: int = 0

	@property
	def k(self) -> int:
		'''Embedding dimension: svd_k if set, otherwise min(k_c, k_p).
		'''
		return self.svd_k if self.svd_k is not None else min(self.k_c, self.k_p)

	@property
	def effective_h(self) -> float:
		if self.h_mode == 'graph_only':
			return 0.0
		if self.h_mode in ('text_only', 'all_one'):
			return math.inf
		return self.h

	@property
	def svd_kwargs(self) -> Dict[str,Any]:
		return dict(tol=self.svd_tol, max_iter=self.svd_max_iter, oversample=self.oversample,
			power_iters=self.power_iters, method=self.svd_method)

	def validate(self) -> 'RunConfig':
		'''Check every option, raise ConfigError on the first invalid one.
		'''
		for name, choices in (('scaling', SCALINGS), ('h_mode', H_MODES),
				('calibrate', CALIBRATIONS), ('threshold_population', POPULATIONS),
				('svd_method', SVD_METHODS)):
			if getattr(self, name) not in choices:
				raise ConfigError(f'{name} must be one of {", ".join(choices)}, got {getattr(self, name)!r}')

		if not 0 < self.alpha <= 1:
			raise ConfigError(f'alpha must be in (0, 1], got {self.alpha}')
		if not 0 < self.cutoff <= 1:
			raise ConfigError(f'cutoff must be in (0, 1], got {self.cutoff}')
		if self.h < 0 or math.isnan(self.h):
			raise ConfigError(f'h must be nonnegative, got {self.h}')

		for name in ('tau_c', 'tau_p'):
			v = getattr(self, name)
			if v is not None and v < 0:
				raise ConfigError(f'{name} must be nonnegative, got {v}')

		for name in ('k_c', 'k_p', 'svd_max_iter', 'restarts', 'kmeans_max_iter', 'block_size'):
			if getattr(self, name) < 1:
				raise ConfigError(f'{name} must be positive, got {getattr(self, name)}')

		for name in ('oversample', 'power_iters', 'workers'):
			if getattr(self, name) < 0:
				raise ConfigError(f'{name} must be nonnegative, got {getattr(self, name)}')

		if self.svd_k is not None and self.svd_k < 1:
			raise ConfigError(f'svd_k must be positive, got {self.svd_k}')
		if self.scree_k is not None and self.scree_k < 1:
			raise ConfigError(f'scree_k must be positive, got {self.scree_k}')
		if self.svd_tol <= 0 or self.kmeans_tol < 0:
			raise ConfigError('tolerances must be positive')

		return self

	def with_options(self, **kwargs) -> 'RunConfig':
		'''Copy with the given options replaced (None values are ignored).
		'''
		unknown = set(kwargs) - set(OPTION_NAMES)
		if unknown:
			raise ConfigError(f'unknown option(s): {", ".join(sorted(unknown))}')
		return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

	def to_text(self) -> str:
		lines = [f'# threadclust {VERSION} run configuration']
		for f in fields(self):
			lines.append(f'{f.name}={format_value(getattr(self, f.name))}')
		return '\n'.join(lines) + '\n'

	@classmethod
	def from_text(cls, text: str, source: str = '<config>') -> 'RunConfig':
		'''Parse KEY=VALUE lines. Blank lines and lines starting with "#" are
		ignored, unknown keys are an error, missing keys keep their default.
		'''
		values = {}

		for lineno, line in enumerate(text.splitlines(), 1):
			line = line.strip()
			if not line or line.startswith('#'):
				continue

			if '=' not in line:
				raise ConfigError(f'{source}:{lineno}: expected KEY=VALUE, got {line!r}')

			name, val = map(str.strip, line.split('=', 1))
			if name not in OPTION_NAMES:
				raise ConfigError(f'{source}:{lineno}: unknown option {name!r}')

			values[name] = parse_value(name, val, f'{source}:{lineno}')

		return cls(**values).validate()

	@classmethod
	def from_dict(cls, d: Dict[str,Any], source: str = '<manifest>') -> 'RunConfig':
		unknown = set(d) - set(OPTION_NAMES)
		if unknown:
			raise ConfigError(f'{source}: unknown option(s): {", ".join(sorted(unknown))}')

		values = {}
		for name, val in d.items():
			values[name] = val if val is None else parse_value(name, format_value(val), source)
		return cls(**values).validate()

	def to_dict(self) -> Dict[str,Any]:
		return asdict(self)

OPTION_NAMES = tuple(f.name for f in fields(RunConfig))

OPTION_HELP = {
	'input_dir'           : 'directory holding ingested matrices (A.txt, X.txt, Y.txt, ...)',
	'output_dir'          : 'directory where results are written',
	'cutoff'              : 'minimum fraction of documents a vocabulary term must appear in',
	'scaling'             : 'transform of the term matrices: ' + ', '.join(SCALINGS),
	'h_mode'              : 'text weighting: ' + ', '.join(H_MODES),
	'h'                   : 'weight of the text part when h_mode is "value"',
	'calibrate'           : 'scale the text part to match L\'s first or second singular value: ' + ', '.join(CALIBRATIONS),
	'alpha'               : 'fraction of call-response entries kept by the threshold',
	'threshold_population': 'entries the threshold quantile is taken over: ' + ', '.join(POPULATIONS),
	'threshold_signed'    : 'keep only W > omega instead of |W| > omega',
	'tau_c'               : 'citizen degree regularizer (default: mean citizen degree)',
	'tau_p'               : 'post degree regularizer (default: mean post degree)',
	'k_c'                 : 'number of citizen clusters',
	'k_p'                 : 'number of post clusters',
	'svd_method'          : 'truncated SVD algorithm: ' + ', '.join(SVD_METHODS),
	'svd_k'               : 'embedding dimension (default: min(k_c, k_p))',
	'scree_k'             : 'also compute this many leading singular values for a scree table',
	'svd_tol'             : 'SVD residual tolerance relative to the top singular value',
	'svd_max_iter'        : 'maximum SVD iterations',
	'oversample'          : 'extra sketch columns for the randomized SVD',
	'power_iters'         : 'power iterations before the first convergence check',
	'restarts'            : 'k-means restarts',
	'kmeans_max_iter'     : 'maximum Lloyd iterations per restart',
	'kmeans_tol'          : 'stop k-means when centroids move less than this',
	'block_size'          : 'columns per block when computing the call-response matrix',
	'workers'             : 'worker threads (0 = all CPUs available)',
	'seed'                : 'master random seed',
}

def _field_type(name: str) -> type:
	t = RunConfig.__dataclass_fields__[name].type
	if get_origin(t) is Union:
		t = next(a for a in get_args(t) if a is not type(None))
	return t

def _optional(name: str) -> bool:
	t = RunConfig.__dataclass_fields__[name].type
	return get_origin(t) is Union and type(None) in get_args(t)

def _parse_bool(val: str) -> bool:
	v = val.lower()
	if v in ('1', 'true', 'yes', 'y', 'on'):
		return True
	if v in ('0', 'false', 'no', 'n', 'off'):
		return False
	raise ValueError(f'not a boolean: {val!r}')

PARSERS: Dict[type,Callable[[str],Any]] = {
	bool : _parse_bool,
	int  : int,
	float: float,
	str  : str,
}

def parse_value(name: str, val: str, where: str = '') -> Any:
	if val == '' and _optional(name):
		return None

	try:
		return PARSERS[_field_type(name)](val)
	except ValueError as e:
		raise ConfigError(f'{where}: bad value for {name}: {e}') from None

def format_value(val: Any) -> str:
	if val is None:
		return ''
	if isinstance(val, bool):
		return 'true' if val else 'false'
	if isinstance(val, float):
		return repr(val)
	return str(val)

def load_config(path: PathLike) -> RunConfig:
	path = Path(path)
	logging.debug('Reading configuration from %s', path)
	return RunConfig.from_text(path.read_text(encoding='utf-8'), str(path))

def save_config(cfg: RunConfig, path: PathLike):
	Path(path).write_text(cfg.to_text(), encoding='utf-8')

def library_versions() -> Dict[str,str]:
	return {
		'threadclust' : VERSION,
		'numpy'       : np.__version__,
		'scipy'       : scipy.__version__,
		'scikit-learn': sklearn.__version__,
		'python'      : platform.python_version(),
	}

def make_manifest(command: str, cfg: RunConfig, seeds: Dict[str,int] = None,
		extra: Dict[str,Any] = None) -> Dict[str,Any]:
	'''Everything needed to re-run a command: the resolved configuration, the
	derived seeds and the versions of the numerical libraries.
	'''
	manifest = {
		'command' : command,
		'config'  : cfg.to_dict(),
		'seeds'   : seeds or {},
		'versions': library_versions(),
	}

	if extra:
		manifest.update(extra)
	return manifest

def write_manifest(manifest: Dict[str,Any], path: PathLike):
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		json.dump(manifest, f, sort_keys=True, indent='\t')
		f.write('\n')

def read_manifest(path: PathLike) -> Dict[str,Any]:
	try:
		with open(path, encoding='utf-8') as f:
			manifest = json.load(f)
	except json.JSONDecodeError as e:
		raise ConfigError(f'{path}: invalid manifest: {e.msg}') from None

	if not isinstance(manifest, dict) or 'config' not in manifest:
		raise ConfigError(f'{path}: manifest has no config')
	return manifest

def config_from_manifest(path: PathLike) -> RunConfig:
	return RunConfig.from_dict(read_manifest(path)['config'], str(path))
