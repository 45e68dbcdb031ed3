import json
import math

import pytest

from threadclust.config import *


def test_defaults():
	cfg = RunConfig().validate()

	assert cfg.scaling == 'center'
	assert cfg.alpha == 0.05
	assert cfg.k == 4
	assert cfg.effective_h == 0.035
	assert cfg.svd_kwargs['method'] == 'randomized'


def test_derived_values():
	assert RunConfig(k_c=3, k_p=5).k == 3
	assert RunConfig(k_c=3, k_p=5, svd_k=6).k == 6
	assert RunConfig(h_mode='graph_only', h=2.0).effective_h == 0.0
	assert math.isinf(RunConfig(h_mode='text_only').effective_h)
	assert math.isinf(RunConfig(h_mode='all_one').effective_h)


@pytest.mark.parametrize('options', [
	dict(scaling='log'),
	dict(h_mode='auto'),
	dict(calibrate='sigma3'),
	dict(alpha=0.0),
	dict(alpha=1.5),
	dict(cutoff=0.0),
	dict(h=-1.0),
	dict(tau_c=-0.5),
	dict(k_c=0),
	dict(restarts=0),
	dict(workers=-1),
	dict(svd_k=0),
	dict(svd_tol=0.0),
])
def test_validate_rejects(options):
	with pytest.raises(ConfigError):
		RunConfig(**options).validate()


def test_with_options():
	cfg = RunConfig().with_options(k_c=2, h=None, seed=7)

	assert cfg.k_c == 2
	assert cfg.h == RunConfig().h
	assert cfg.seed == 7

	with pytest.raises(ConfigError):
		RunConfig().with_options(k=3)


def test_text_round_trip():
	cfg = RunConfig(input_dir='in', h=0.1, tau_c=2.5, threshold_signed=True, scree_k=10)
	assert RunConfig.from_text(cfg.to_text()) == cfg


def test_from_text():
	text = '''
	# comment
	k_c = 3
	threshold_signed=yes
	tau_p=
	h=1e-2
	'''
	cfg = RunConfig.from_text(text)

	assert cfg.k_c == 3
	assert cfg.threshold_signed is True
	assert cfg.tau_p is None
	assert cfg.h == 0.01


def test_from_text_errors():
	with pytest.raises(ConfigError) as exc:
		RunConfig.from_text('k_c=3\nnonsense\n', 'cfg.txt')
	assert 'cfg.txt:2' in str(exc.value)

	with pytest.raises(ConfigError) as exc:
		RunConfig.from_text('colour=blue\n')
	assert 'colour' in str(exc.value)

	with pytest.raises(ConfigError):
		RunConfig.from_text('k_c=three\n')
	with pytest.raises(ConfigError):
		RunConfig.from_text('threshold_signed=maybe\n')
	with pytest.raises(ConfigError):
		RunConfig.from_text('k_c=\n')
	with pytest.raises(ConfigError):
		RunConfig.from_text('alpha=2\n')


def test_parse_and_format_value():
	assert parse_value('k_c', '7') == 7
	assert parse_value('tau_c', '') is None
	assert parse_value('threshold_signed', 'off') is False
	assert format_value(None) == ''
	assert format_value(True) == 'true'
	assert format_value(0.1) == '0.1'
	assert format_value('x') == 'x'


def test_config_file(tmp_path):
	cfg = RunConfig(k_c=2, k_p=3, seed=11)
	save_config(cfg, tmp_path / 'config.txt')

	assert (tmp_path / 'config.txt').read_text().startswith('# threadclust')
	assert load_config(tmp_path / 'config.txt') == cfg


def test_manifest(tmp_path):
	cfg = RunConfig(k_c=2, h_mode='all_one', tau_c=1.5)
	manifest = make_manifest('fit', cfg, {'svd': 1}, {'fit': {'omega': 0.5}})

	assert manifest['command'] == 'fit'
	assert manifest['seeds'] == {'svd': 1}
	assert manifest['fit'] == {'omega': 0.5}
	assert set(manifest['versions']) >= {'threadclust', 'numpy', 'scipy', 'scikit-learn'}

	path = tmp_path / 'manifest.json'
	write_manifest(manifest, path)

	assert json.loads(path.read_text())['config']['k_c'] == 2
	assert read_manifest(path)['command'] == 'fit'
	assert config_from_manifest(path) == cfg


def test_manifest_errors(tmp_path):
	path = tmp_path / 'manifest.json'

	path.write_text('{not json')
	with pytest.raises(ConfigError):
		read_manifest(path)

	path.write_text('[]')
	with pytest.raises(ConfigError):
		read_manifest(path)

	path.write_text(json.dumps({'config': {'k_c': 2, 'bogus': 1}}))
	with pytest.raises(ConfigError):
		config_from_manifest(path)


def test_option_help_covers_every_option():
	assert set(OPTION_HELP) == set(OPTION_NAMES)
