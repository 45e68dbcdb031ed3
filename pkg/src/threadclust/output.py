import math
import sys

from itertools import starmap
from json import JSONEncoder, dump
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from .diagnostics import InteractionMatrix
from .utils import eprint
from .version import VERSION, VERSION_COPY

def _finite(v) -> Optional[float]:
	v = float(v)
	return v if math.isfinite(v) else None

class ReportJSONEncoder(JSONEncoder):
	def default(self, o):
		if isinstance(o, InteractionMatrix):
			return {
				'kind'        : o.kind,
				'rows'        : o.row_labels,
				'cols'        : o.col_labels,
				# NaN (empty group) is not valid JSON
				'values'      : [[_finite(v) for v in row] for row in o.values],
				'flagged_rows': [int(i) for i in o.flagged_rows],
				'flagged_cols': [int(i) for i in o.flagged_cols],
			}

		if isinstance(o, np.ndarray):
			if o.dtype.kind == 'f':
				return [_finite(v) for v in o]
			return o.tolist()

		if isinstance(o, np.integer):
			return int(o)
		if isinstance(o, np.floating):
			return _finite(o)
		if isinstance(o, Path):
			return str(o)

		return super().default(o)

def _plain(report: dict) -> dict:
	'''Turn the namedtuples of a report into dicts, JSONEncoder would make them
	lists otherwise.
	'''
	out = dict(report)
	out['keywords'] = {
		side: [{'cluster': k, 'terms': [s._asdict() for s in scores]} for k, scores in table]
		for side, table in report['keywords'].items()
	}

	if report['conversations'] is not None:
		out['conversations'] = {
			side: [{'cluster': k, 'members': [c._asdict() for c in convs]} for k, convs in table]
			for side, table in report['conversations'].items()
		}

	return out

def _fmt(v: float, prec: int = 4) -> str:
	return 'nan' if math.isnan(v) else f'{v:.{prec}g}'

def print_table(table: List[Optional[Sequence[str]]], spacing: int = 2):
	'''Print rows of strings as left-aligned columns, None rows as blank lines.
	'''
	widths = [max(len(row[i]) if row else 0 for row in table) for i in range(len(table[0]))]
	sep = ' ' * spacing

	for row in table:
		if row:
			print(sep.join(starmap(lambda c, w: c.ljust(w), zip(row, widths))).rstrip())
		else:
			print()

def _print_interaction(title: str, m: InteractionMatrix):
	print(title)
	table = [['cluster'] + m.col_labels]
	table += [[label] + [_fmt(v) for v in row] for label, row in zip(m.row_labels, m.values)]
	print_table(table)
	print()

def output_report_text(report: dict):
	cl = report['clusters']
	print(f'Citizen clusters: {cl["k_c"]}, sizes {", ".join(map(str, cl["citizen_sizes"]))}')
	print(f'Post clusters: {cl["k_p"]}, sizes {", ".join(map(str, cl["post_sizes"]))}')

	if cl['low_confidence_c'] or cl['low_confidence_p']:
		print(f'Low-confidence nodes: {len(cl["low_confidence_c"])} citizens, '
			f'{len(cl["low_confidence_p"])} posts')
	print()

	inter = report['interaction']
	_print_interaction('Citizen clusters x walls (psi_c)', inter['psi_c'])
	_print_interaction('Post clusters x walls (psi_p)', inter['psi_p'])
	_print_interaction('Citizen clusters x post clusters (psi)', inter['psi'])
	_print_interaction('Citizens by focus wall x walls (psi_focus)', inter['psi_focus'])

	att = report['attention']
	print(f'Attention-ratio of citizens with at least {att["min_degree"]} comments')
	table = [('RATIO', 'CITIZENS')]
	for lo, hi, n in zip(att['edges'][:-1], att['edges'][1:], att['counts']):
		table.append((f'{lo:.2f}-{hi:.2f}', str(int(n))))
	print_table(table)
	print()

	for side in ('citizen', 'post'):
		print(f'Top {side} keywords')
		table = [('CLUSTER', 'RANK', 'TERM', 'SCORE')]
		for k, scores in report['keywords'][side]:
			table.append(None)
			table += [(str(k), str(r), term, _fmt(score)) for r, (term, score) in enumerate(scores, 1)]
		print_table(table)
		print()

	if report['scree'] is not None:
		sc = report['scree']
		print('Singular values')
		table = [('K', 'SIGMA', 'GAP')]
		for i, s in enumerate(sc['sigma']):
			gap = _fmt(sc['gaps'][i]) if i < len(sc['gaps']) else ''
			table.append((str(i + 1), _fmt(s, 8), gap))
		print_table(table)

		if sc['suggested_k'] is not None:
			print(f'Largest gap after K = {sc["suggested_k"]}')
		print()

	if report['conversations'] is not None:
		for side in ('citizen', 'post'):
			print(f'Central {side}s and their documents')
			table = [('CLUSTER', 'NODE', 'KEY', 'CENTRALITY', 'DOCUMENTS')]
			for k, convs in report['conversations'][side]:
				table.append(None)
				table += [(str(k), str(c.node), c.key, _fmt(c.centrality), ' '.join(c.documents))
					for c in convs]
			print_table(table)
			print()

	sys.stdout.flush()

def output_report_json(report: dict):
	data = dict(_plain(report), threadclust_version=VERSION)
	dump(data, sys.stdout, cls=ReportJSONEncoder, sort_keys=True, indent='\t')
	sys.stdout.write('\n')

def output_report_html(report: dict):
	try:
		from jinja2 import Environment, PackageLoader
	except ImportError:
		eprint('HTML output not supported, could not import needed dependencies.')
		eprint('Install the threadclust[html] or threadclust[full] package through pip.')
		sys.exit(1)

	env = Environment(loader=PackageLoader('threadclust'), line_statement_prefix='#', autoescape=True)
	env.filters['num'] = _fmt
	env.globals['zip'] = zip
	template = env.get_template('report.html')

	template.stream(
		report=report,
		threadclust_version=VERSION,
		threadclust_copy=VERSION_COPY.strip().replace('\n', ' - ')
	).dump(sys.stdout)

def output_report(report: dict, fmt: str):
	if fmt == 'text':
		output_report_text(report)
	elif fmt == 'json':
		output_report_json(report)
	elif fmt == 'html':
		output_report_html(report)
	else:
		sys.exit('Output format not implemented!')
