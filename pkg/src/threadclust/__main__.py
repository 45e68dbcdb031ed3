import argparse
import logging
import signal
import sys

from pathlib import Path
from textwrap import TextWrapper
from time import monotonic
from typing import Dict, List

import numpy as np

from .cluster import read_clustering, read_labels
from .config import OPTION_HELP, OPTION_NAMES, ConfigError, RunConfig, load_config
from .config import config_from_manifest, make_manifest, parse_value, read_manifest
from .config import save_config, write_manifest
from .corpus import DEFAULT_CUTOFF, load_stemmer, load_stopwords, read_corpus
from .diagnostics import ATTENTION_MIN_DEGREE, diagnose, write_report_files
from .output import output_report
from .pipeline import CITIZEN_LABELS_FILE, CONFIG_FILE, CORPUS_FILE, MANIFEST_FILE
from .pipeline import POST_LABELS_FILE, SCREE_FILE, SINGULAR_VALUES_FILE, TRUTH_CITIZENS
from .pipeline import TRUTH_POSTS, Pipeline, ingest, load_inputs, write_instance
from .simgen import SUPPORTED_MODELS, SUPPORTED_MODELS_HELP, model_from_name
from .simgen import misclustering_rate
from .simgen.benchmark import AXES, DEFAULT_BASE, METHODS, full_signal_levels
from .simgen.benchmark import run_benchmark, signal_grid, write_benchmark
from .simgen.benchmark import write_benchmark_manifest, write_failures, write_timings
from .spectral import read_singular_values
from .utils import ThreadclustError, available_workers, eprint, enable_high_verbosity
from .utils import enable_silent, format_duration, plural
from .version import VERSION_HELP

def sigint_handler(_, __):
	sys.stderr.write('Caught SIGINT, stopping\n')
	sys.exit(1)

def wrap_help(body: str) -> str:
	'''Wrap a string to 65 columns without breaking words for a nice --help
	output of the tool.
	'''
	tx = TextWrapper(65, break_long_words=False, replace_whitespace=False)
	return '\n'.join(tx.fill(line) for line in body.splitlines() if line.strip())

class ArgumentParser(argparse.ArgumentParser):
	# Bad arguments are a user error like any other: exit code 1, not 2
	def error(self, message: str):
		self.print_usage(sys.stderr)
		eprint(f'{self.prog}: error: {message}')
		sys.exit(1)

def option_flag(name: str) -> str:
	return '--' + name.replace('_', '-')

def add_common_args(ap: argparse.ArgumentParser):
	ap.add_argument('-q', '--quiet', action='count', default=0,
		help=wrap_help('quietness level:\n'
		'  -q = no info, -qq = no warnings, -qqq = no errors\n'
		'  -qqqq = no standard error output whatsoever'))
	ap.add_argument('-v', '--verbose', action='count', default=0,
		help=wrap_help('verbosity level:\n  -v = info, -vv = debug, -vvv = more debug'))

def add_config_args(ap: argparse.ArgumentParser, names=OPTION_NAMES):
	'''One flag per configuration option, plus --config and --manifest. Values
	are parsed later by build_config() so that every source of configuration
	goes through the same validation.
	'''
	ap.add_argument('-c', '--config', metavar='FILE',
		help=wrap_help('read options from a KEY=VALUE configuration file; '
			'flags given on the command line take precedence'))
	ap.add_argument('-m', '--manifest', metavar='FILE',
		help=wrap_help('re-run with the configuration stored in a manifest.json; '
			'flags given on the command line take precedence'))

	grp = ap.add_argument_group('configuration options')
	for name in names:
		flags = [option_flag(name)]
		if name == 'input_dir':
			flags.insert(0, '-i')
		elif name == 'output_dir':
			flags.insert(0, '-o')

		grp.add_argument(*flags, dest=name, metavar='VALUE', help=wrap_help(OPTION_HELP[name]))

def parse_args(argv: List[str] = None) -> argparse.Namespace:
	'''Parse and partially validate command line arguments through argparse.
	'''
	ap = ArgumentParser(
		prog='threadclust',
		description='Co-cluster citizens and posts of discussion threads using '
			'the reply graph and the text',
		formatter_class=argparse.RawTextHelpFormatter
	)
	ap.add_argument('-V', '--version', action='version', version=VERSION_HELP,
		help=wrap_help('show version information and exit'))

	sub = ap.add_subparsers(dest='command', metavar='COMMAND')
	sub.required = True
	fmt = argparse.RawTextHelpFormatter

	p = sub.add_parser('ingest', formatter_class=fmt,
		help='build adjacency and term matrices from a corpus file')
	p.add_argument('corpus', metavar='CORPUS',
		help=wrap_help('corpus file, tab-separated with a header or .jsonl'))
	p.add_argument('-o', '--output-dir', dest='output_dir', metavar='OUTDIR', required=True,
		help=wrap_help('directory where matrices and id maps are written'))
	p.add_argument('--cutoff', type=float, default=DEFAULT_CUTOFF,
		help=wrap_help(OPTION_HELP['cutoff'] + f' (default: {DEFAULT_CUTOFF})'))
	p.add_argument('--stopwords', metavar='FILE',
		help=wrap_help('file with one stopword per line'))
	p.add_argument('--stemmer', metavar='MODULE:FUNC',
		help=wrap_help('stemming function to import, taking and returning a token'))
	p.add_argument('--workers', type=int, default=0,
		help=wrap_help(OPTION_HELP['workers']))
	add_common_args(p)

	p = sub.add_parser('fit', formatter_class=fmt,
		help='co-cluster ingested (or simulated) matrices')
	p.add_argument('--truth', metavar='DIR', nargs='?', const='',
		help=wrap_help(f'compare labels against {TRUTH_CITIZENS} and {TRUTH_POSTS} '
			'in DIR (default: the input directory)'))
	add_config_args(p)
	add_common_args(p)

	p = sub.add_parser('diagnose', formatter_class=fmt,
		help='interaction matrices, keywords and attention-ratios of a fit')
	p.add_argument('fit_dir', metavar='FITDIR', help=wrap_help('output directory of fit'))
	p.add_argument('-i', '--input-dir', dest='input_dir', metavar='DIR',
		help=wrap_help('ingested inputs (default: the input directory of the fit)'))
	p.add_argument('-f', '--format', metavar='FMT', choices=('text', 'json', 'html'), default='text',
		help=wrap_help('output format: text, json or html (default: text)'))
	p.add_argument('-e', '--export', metavar='DIR',
		help=wrap_help('also write tab-separated tables to DIR'))
	p.add_argument('-n', '--top', type=int, default=10,
		help=wrap_help('keywords and central members per cluster (default: 10)'))
	p.add_argument('--min-degree', type=int, default=ATTENTION_MIN_DEGREE,
		help=wrap_help('minimum comments of citizens in the attention-ratio '
			f'histogram (default: {ATTENTION_MIN_DEGREE})'))
	p.add_argument('--no-conversations', action='store_true',
		help=wrap_help('do not list central conversations even if the corpus is available'))
	add_common_args(p)

	p = sub.add_parser('benchmark', formatter_class=fmt,
		help='mis-clustering rates on simulated documents over a signal grid')
	p.add_argument('--axis', choices=AXES, default='both',
		help=wrap_help('signal axis: both (equal signals), graph (text signal 0) or '
			'text (graph signal 0) (default: both)'))
	p.add_argument('--levels', metavar='LIST', default='full',
		help=wrap_help('comma-separated signal levels, or "full" for '
			'10^-1.8, 10^-1.6, ..., 10^3 (default: full)'))
	p.add_argument('--reps', type=int, default=100,
		help=wrap_help('simulated data sets per signal level (default: 100)'))
	p.add_argument('--methods', metavar='LIST', default='combined',
		help=wrap_help('comma-separated methods among ' + ', '.join(METHODS) +
			' (default: combined)'))
	p.add_argument('--n-docs', type=int, default=1000,
		help=wrap_help('documents per data set (default: 1000)'))
	p.add_argument('--n-words', type=int, default=1000,
		help=wrap_help('words per data set (default: 1000)'))
	p.add_argument('--theta', choices=('ones', 'powerlaw'), default='ones',
		help=wrap_help('degree parameters of the documents and words (default: ones)'))
	add_config_args(p)
	add_common_args(p)

	p = sub.add_parser('simulate', formatter_class=fmt,
		help='sample an instance of a block model in the layout of ingest')
	p.add_argument('-M', '--model', metavar='MODEL', required=True,
		help=wrap_help('simulation model; pass "help" for a list'))
	p.add_argument('-p', '--param', metavar='KEY=VALUE', action='append', default=[],
		help=wrap_help('model parameter, can be given multiple times'))
	p.add_argument('-o', '--output-dir', dest='output_dir', metavar='OUTDIR',
		help=wrap_help('directory where the instance is written'))
	p.add_argument('-s', '--seed', type=int, default=0,
		help=wrap_help('random seed (default: 0)'))
	add_common_args(p)

	return ap.parse_args(argv)

def setup_logging(quietness: int, verbosity: int, colors: bool = True):
	'''Setup logging verbosity on the root logger based on the given quietness
	and verbosity levels from command line arguments (number of -q and -v
	options given). Enable colored logs with ANSI escape codes if color=True.
	'''
	orig_factory = logging.getLogRecordFactory()

	if verbosity > 0:
		quietness = 0
		if verbosity >= 3:
			enable_high_verbosity()

	if quietness >= 1:
		quietness -= 1
		enable_silent()

	if colors:
		fmt = '%(color)s[%(levelname)s] %(message)s\x1b[0m'
		level_colors = {
			logging.CRITICAL: '\x1b[1;31m',
			logging.ERROR   : '\x1b[31m',
			logging.WARNING : '\x1b[33m',
			logging.INFO    : '\x1b[32m',
			logging.DEBUG   : '\x1b[34m',
		}

		def record_factory(*args, **kwargs):
			record = orig_factory(*args, **kwargs)
			lvl = record.levelno
			record.color = level_colors.get(lvl, '')
			record.levelname = 'FATAL' if lvl == logging.CRITICAL else record.levelname[0]
			return record
	else:
		fmt = '[%(levelname)s] %(message)s'

		def record_factory(*args, **kwargs):
			record = orig_factory(*args, **kwargs)
			record.levelname = 'FATAL' if record.levelno == logging.CRITICAL else record.levelname[0]
			return record

	adj = quietness - verbosity
	logging.basicConfig(level=max(30 + 10 * adj, 0), format=fmt)
	logging.setLogRecordFactory(record_factory)

def build_config(args: argparse.Namespace, base: RunConfig = RunConfig()) -> RunConfig:
	'''Resolve the configuration of a run: defaults, then --config or
	--manifest, then command line flags.
	'''
	if args.config and args.manifest:
		raise ConfigError('--config and --manifest are mutually exclusive')

	cfg = base
	if args.config:
		cfg = load_config(args.config)
	elif args.manifest:
		cfg = config_from_manifest(args.manifest)

	overrides = {}
	for name in OPTION_NAMES:
		val = getattr(args, name, None)
		if val is not None:
			overrides[name] = parse_value(name, val, option_flag(name))

	cfg = cfg.with_options(**overrides).validate()
	logging.debug('Resolved configuration: %r', cfg)
	return cfg

def parse_params(pairs: List[str]) -> Dict[str,object]:
	'''KEY=VALUE model parameters, values converted to int or float when
	possible.
	'''
	params = {}

	for pair in pairs:
		if '=' not in pair:
			raise ConfigError(f'expected KEY=VALUE, got {pair!r}')

		key, val = map(str.strip, pair.split('=', 1))
		for conv in (int, float):
			try:
				val = conv(val)
				break
			except ValueError:
				pass

		params[key] = val

	return params

def cmd_ingest(args: argparse.Namespace) -> int:
	stopwords = load_stopwords(args.stopwords) if args.stopwords else frozenset()
	kwargs = dict(stopwords=stopwords, workers=available_workers(args.workers))
	if args.stemmer:
		kwargs['stemmer'] = load_stemmer(args.stemmer)

	eprint('Reading corpus from', args.corpus)
	corpus = read_corpus(args.corpus, **kwargs)
	eprint(f'Read {plural(corpus.n_posts, "post")} on {plural(corpus.n_walls, "wall")}, '
		f'{plural(len(corpus.comments), "comment")} by {plural(corpus.n_citizens, "citizen")}')

	ingest(corpus, args.output_dir, args.cutoff)
	eprint('Matrices written to', args.output_dir)
	return 0

def cmd_fit(args: argparse.Namespace) -> int:
	cfg = build_config(args)
	if not cfg.input_dir or not cfg.output_dir:
		eprint('Need to specify an input directory (-i) and an output directory (-o)')
		return 1

	inp = load_inputs(cfg.input_dir)
	eprint(f'Loaded {inp.a.n_rows}x{inp.a.n_cols} graph with {inp.a.nnz()} edges, '
		f'{inp.x.n_cols} citizen-words, {inp.y.n_cols} thread-words')

	pipe = Pipeline.from_inputs(cfg, inp)
	start = monotonic()
	cc = pipe.run()
	eprint(f'Fit ({pipe.mode.value}) took', format_duration(monotonic() - start))

	pipe.write(cfg.output_dir, inp)
	eprint(f'{cc!r}')
	eprint('Results written to', cfg.output_dir)

	if args.truth is not None:
		truth_dir = Path(args.truth or cfg.input_dir)
		out = Path(cfg.output_dir) / 'misclustering.tsv'

		with open(out, 'w', encoding='utf-8', newline='\n') as f:
			f.write('side\trate\n')
			for side, fname, labels in (('citizen', TRUTH_CITIZENS, cc.citizen_labels),
					('post', TRUTH_POSTS, cc.post_labels)):
				rate = misclustering_rate(labels, read_labels(truth_dir / fname))
				f.write(f'{side}\t{rate!r}\n')
				eprint(f'Mis-clustering rate ({side}s): {rate:.4f}')

	return 0

def cmd_diagnose(args: argparse.Namespace) -> int:
	fit_dir = Path(args.fit_dir)
	cfg = load_config(fit_dir / CONFIG_FILE)
	input_dir = args.input_dir or cfg.input_dir
	if not input_dir:
		eprint('Need to specify the input directory of the fit (-i)')
		return 1

	inp = load_inputs(input_dir)
	cc = read_clustering(fit_dir / CITIZEN_LABELS_FILE, fit_dir / POST_LABELS_FILE)
	if cc.citizen_labels.size != inp.a.n_rows or cc.post_labels.size != inp.a.n_cols:
		raise ConfigError(f'labels in {fit_dir} do not match the inputs in {input_dir}')

	scree_path = fit_dir / SCREE_FILE
	if not scree_path.is_file():
		scree_path = fit_dir / SINGULAR_VALUES_FILE
	sigma = read_singular_values(scree_path) if scree_path.is_file() else None

	corpus = None
	corpus_path = Path(input_dir) / CORPUS_FILE
	if not args.no_conversations and corpus_path.is_file():
		corpus = read_corpus(corpus_path)
		if (corpus.n_citizens, corpus.n_posts) != inp.a.shape:
			logging.warning('Corpus in %s does not match the inputs, no central conversations', input_dir)
			corpus = None

	report = diagnose(inp, cc, sigma, corpus, args.top, args.min_degree, cfg.seed)

	if args.export:
		write_report_files(report, args.export)
		eprint('Tables written to', args.export)

	output_report(report, args.format)
	return 0

def cmd_benchmark(args: argparse.Namespace) -> int:
	params = dict(n_docs=args.n_docs, n_words=args.n_words, theta=args.theta)

	if args.manifest:
		manifest = read_manifest(args.manifest)
		bench = manifest.get('benchmark')
		if manifest.get('command') != 'benchmark' or not bench:
			raise ConfigError(f'{args.manifest} is not a benchmark manifest')

		grid = [tuple(cell) for cell in bench['grid']]
		methods = bench['methods']
		n_reps = bench['n_reps']
		params = {k: bench[k] for k in params}
	else:
		methods = [m.strip() for m in args.methods.split(',') if m.strip()]
		n_reps = args.reps

		if args.levels == 'full':
			levels = full_signal_levels()
		else:
			try:
				levels = [float(v) for v in args.levels.split(',')]
			except ValueError:
				raise ConfigError(f'bad signal levels: {args.levels!r}') from None

		grid = signal_grid(levels, args.axis)

	base = build_config(args, DEFAULT_BASE)
	if not base.output_dir:
		eprint('Need to specify an output directory (-o)')
		return 1

	eprint(f'Benchmarking {", ".join(methods)} on {plural(len(grid), "signal level")}, '
		f'{plural(n_reps, "rep")} each')

	start = monotonic()
	res = run_benchmark(grid, n_reps, methods, base.seed, params['n_docs'], params['n_words'],
		params['theta'], base, available_workers(base.workers))
	eprint('Benchmark took', format_duration(monotonic() - start))

	out = Path(base.output_dir)
	out.mkdir(parents=True, exist_ok=True)
	write_benchmark(res, out / 'results.tsv')
	write_timings(res, out / 'timings.tsv')
	write_benchmark_manifest(res, base.seed, params, base, out / MANIFEST_FILE)

	if res.failures:
		write_failures(res, out / 'failures.tsv')
		eprint(f'{plural(len(res.failures), "run")} failed, see', out / 'failures.tsv')

	eprint('Results written to', out)
	return 0

def cmd_simulate(args: argparse.Namespace) -> int:
	name = args.model.lower()

	if name not in SUPPORTED_MODELS:
		if name not in ('help', '?'):
			eprint(f'Unsupported model: {name}')
			eprint(f"See '{sys.argv[0]} simulate --model help' for a list")
			return 1

		eprint(SUPPORTED_MODELS_HELP)
		return 0

	if not args.output_dir:
		eprint('Need to specify an output directory (-o)')
		return 1

	params = parse_params(args.param)
	try:
		model = model_from_name(name, **params)
	except TypeError as e:
		raise ConfigError(f'bad parameters for model {name}: {e}') from None

	inst = model.sample(args.seed)
	write_instance(inst.a, inst.x, inst.y, args.output_dir, inst.citizen_labels, inst.post_labels)

	cfg = RunConfig(input_dir=str(args.output_dir), seed=args.seed,
		k_c=int(np.max(inst.citizen_labels)), k_p=int(np.max(inst.post_labels)))
	save_config(cfg, Path(args.output_dir) / CONFIG_FILE)
	write_manifest(make_manifest('simulate', cfg, {'master': args.seed},
		{'model': {'name': model.name, 'params': model.params()}}),
		Path(args.output_dir) / MANIFEST_FILE)

	eprint(f'Sampled {model!r}: {inst.a.n_rows}x{inst.a.n_cols} graph with {inst.a.nnz()} edges')
	eprint('Instance written to', args.output_dir)
	return 0

COMMAND_FUNCS = {
	'ingest'   : cmd_ingest,
	'fit'      : cmd_fit,
	'diagnose' : cmd_diagnose,
	'benchmark': cmd_benchmark,
	'simulate' : cmd_simulate,
}

def main(argv: List[str] = None) -> int:
	signal.signal(signal.SIGINT, sigint_handler)

	args = parse_args(argv)
	setup_logging(args.quiet, args.verbose, sys.stderr.isatty())
	logging.debug('Command line arguments: %r', sys.argv[1:] if argv is None else argv)

	try:
		return COMMAND_FUNCS[args.command](args)
	except (ThreadclustError, OSError) as e:
		logging.error('%s', e)
		return 1
	except Exception as e:
		logging.critical('Internal error: %s: %s', e.__class__.__name__, e)
		logging.debug('Traceback:', exc_info=True)
		return 2

# NOTE: this is NOT executed in a normal install, because the `threadclust`
# command will point to a script that imports and directly calls the main()
# function above.
if __name__ == '__main__':
	sys.exit(main())
