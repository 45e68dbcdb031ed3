import math

import numpy as np
import pytest

from threadclust.cluster import CoClustering
from threadclust.corpus import read_corpus
from threadclust.diagnostics import *
from threadclust.pipeline import ingest, load_inputs
from threadclust.sparse import SparseMatrix

from .utils import *


def _walls_graph():
	# Citizen 0: (6, 3, 1) comments on walls (0, 1, 2), citizen 1: (3, 3, 0),
	# citizen 2: no comments, citizen 3: 7 comments on wall 2
	a = np.array([
		[4.0, 2.0, 3.0, 1.0],
		[1.0, 2.0, 3.0, 0.0],
		[0.0, 0.0, 0.0, 0.0],
		[0.0, 0.0, 0.0, 7.0],
	])
	return SparseMatrix.from_dense(a), np.array([0, 0, 1, 2])


def test_attention_ratio():
	a, walls = _walls_graph()
	att = attention_ratio(a, walls, seed=1)

	assert att.ratios[0] == pytest.approx(0.6)
	assert att.focus[0] == 0
	assert att.ratios[1] == pytest.approx(0.5)
	assert att.focus[1] in (0, 1)
	assert math.isnan(att.ratios[2])
	assert att.focus[2] == -1
	assert att.undefined == (2,)
	assert att.ratios[3] == 1.0
	assert att.focus[3] == 2
	assert np.array_equal(att.degrees, [10, 6, 0, 7])


def test_attention_ratio_tie_break_is_seeded():
	a, walls = _walls_graph()
	assert attention_ratio(a, walls, seed=5).focus[1] == attention_ratio(a, walls, seed=5).focus[1]

	foci = {int(attention_ratio(a, walls, seed=s).focus[1]) for s in range(40)}
	assert foci == {0, 1}


def test_attention_ratio_errors():
	a, _ = _walls_graph()
	with pytest.raises(DiagnosticsError):
		attention_ratio(a, [0, 1, 2])
	with pytest.raises(DiagnosticsError):
		attention_ratio(a, [0, 1, 2, -1])


def test_attention_histogram():
	a, walls = _walls_graph()
	att = attention_ratio(a, walls)

	edges, counts = attention_histogram(att, min_degree=1)
	assert len(edges) == 11
	assert np.isclose(edges[1], 0.1)
	assert counts.sum() == 3
	assert counts[5] == 1 and counts[6] == 1 and counts[9] == 1

	_, counts = attention_histogram(att, min_degree=7)
	assert counts.sum() == 2

	_, counts = attention_histogram(att, min_degree=1, focus=2)
	assert counts.sum() == 1


def test_focus_partition():
	a, walls = _walls_graph()
	att = attention_ratio(a, walls, seed=1)
	labels, k = focus_partition(att, 3)

	assert k == 4
	assert labels[0] == 1 and labels[2] == 4 and labels[3] == 3
	assert labels[1] in (1, 2)

	labels, k = focus_partition(att._replace(focus=np.array([0, 1, 2, 2]), undefined=()))
	assert k == 3
	assert list(labels) == [1, 2, 3, 3]

	with pytest.raises(DiagnosticsError):
		focus_partition(att, 2)


def test_psi_focus():
	a, walls = _walls_graph()
	att = attention_ratio(a, walls, seed=1)
	m = psi_focus(a, att, walls, wall_keys=['x', 'y', 'z'])
	labels, k = focus_partition(att, 3)

	assert m.kind == 'psi_focus'
	assert m.row_labels == ['x', 'y', 'z', UNDEFINED_FOCUS]
	assert m.col_labels == ['x', 'y', 'z']
	assert np.array_equal(m.values, psi_c(a, labels, walls, k, 3).values, equal_nan=True)

	# Citizen 3 alone focuses on z, with 7 comments under its single post
	assert m.values[2, 2] == 7.0
	assert np.all(m.values[3] == 0.0)


def test_psi_c_single_cluster():
	# 5 citizens, 2 posts on one wall, 10 comments
	a = SparseMatrix.from_dense(np.array([[1, 1], [2, 0], [0, 2], [1, 1], [2, 0]], dtype=float))
	m = psi_c(a, np.ones(5, dtype=int), [0, 0])

	assert m.kind == 'psi_c'
	assert m.shape == (1, 1)
	assert m.values[0, 0] == pytest.approx(1.0)


def test_psi_c_matches_formula():
	a, walls = _walls_graph()
	labels = np.array([1, 1, 2, 2])
	m = psi_c(a, labels, walls, wall_keys=['x', 'y', 'z'])

	d = a.to_dense()
	for k in (1, 2):
		for w in (0, 1, 2):
			count = d[labels == k][:, walls == w].sum()
			assert m.values[k - 1, w] == pytest.approx(count / ((labels == k).sum() * (walls == w).sum()))

	assert m.col_labels == ['x', 'y', 'z']
	assert m.row_labels == ['1', '2']
	assert m.values[1, 1] == 0.0


def test_psi_c_empty_cluster_flagged():
	a, walls = _walls_graph()
	m = psi_c(a, np.array([1, 1, 3, 3]), walls)

	assert m.shape == (3, 3)
	assert m.flagged_rows == (1,)
	assert np.all(np.isnan(m.values[1]))


def test_psi_p():
	walls = np.array([0, 0, 1, 1, 1])
	m = psi_p(np.array([1, 1, 2, 2, 2]), walls)

	assert m.values[0, 0] == pytest.approx(2 / (2 * 2))
	assert m.values[1, 1] == pytest.approx(3 / (3 * 3))
	assert m.values[0, 1] == 0.0

	with pytest.raises(DiagnosticsError):
		psi_p(np.array([1, 2]), walls)


def test_psi():
	a, _ = _walls_graph()
	cl = np.array([1, 2, 2, 1])
	pl = np.array([1, 1, 2, 2])
	m = psi(a, cl, pl)
	d = a.to_dense()

	assert m.shape == (2, 2)
	for i in (1, 2):
		for j in (1, 2):
			expected = d[cl == i][:, pl == j].sum() / ((cl == i).sum() * (pl == j).sum())
			assert m.values[i - 1, j - 1] == pytest.approx(expected)

	with pytest.raises(DiagnosticsError):
		psi(a, np.array([0, 1, 1, 1]), pl)


def test_keyword_score_toy():
	x = SparseMatrix.from_dense([[4.0, 0.0], [0.0, 4.0]])
	scores, flagged = keyword_score_vector(x, np.array([1, 2]), 1)

	assert np.allclose(scores, [2.0, 0.0])
	assert flagged == ()


def test_keyword_score_single_cluster_is_one():
	x = random_sparse(10, 6, 0.5, seed=1, integer=True)
	labels = np.ones(10, dtype=int)
	scores, _ = keyword_score_vector(x, labels, 1)
	nonzero = x.col_sums() > 0

	assert np.allclose(scores[nonzero], 1.0, atol=1e-12)
	assert np.all(np.isnan(scores[~nonzero]))


def test_keyword_score_weighted_average():
	x = random_sparse(12, 8, 0.5, seed=2, integer=True)
	labels = np.array([1, 2, 3] * 4)
	d = x.to_dense()
	rows, cols, total = d.sum(axis=1), d.sum(axis=0), d.sum()

	for k in (1, 2, 3):
		scores, _ = keyword_score_vector(x, labels, k)
		expected = rows[labels == k].sum() * cols / total
		ok = expected > 0
		assert np.isclose((scores[ok] * expected[ok]).sum(), d[labels == k].sum())


def test_keyword_scores_ranking():
	x = SparseMatrix.from_dense([
		[3.0, 1.0, 1.0, 0.0],
		[3.0, 1.0, 1.0, 0.0],
		[0.0, 1.0, 1.0, 4.0],
	])
	top = keyword_scores(x, np.array([1, 1, 2]), 1, 3, ['d', 'c', 'b', 'a'])

	assert [s.term for s in top] == ['d', 'b', 'c']
	assert top[0].score > 1
	assert top[1].score == top[2].score


def test_keyword_scores_errors():
	x = SparseMatrix.from_dense([[1.0, 2.0]])

	with pytest.raises(DiagnosticsError):
		keyword_scores(x, np.array([1]), 2)
	with pytest.raises(DiagnosticsError):
		keyword_scores(x, np.array([1, 1]), 1)
	with pytest.raises(DiagnosticsError):
		keyword_scores(SparseMatrix.from_dense([[-1.0]]), np.array([1]), 1)
	with pytest.raises(DiagnosticsError):
		keyword_scores(x, np.array([1]), 1, terms=['a'])


def _toy_fit(tmp_path):
	corpus = read_corpus(write_corpus_file(tmp_path / 'corpus.tsv'))
	ingest(corpus, tmp_path / 'in', cutoff=0.1)
	inp = load_inputs(tmp_path / 'in')

	# u1, u2 talk money, u3, u4 green; p1, p2 are money posts
	cc = CoClustering(
		citizen_labels=np.array([1, 1, 2, 2]), post_labels=np.array([1, 1, 2, 2]),
		citizen_centrality=np.array([0.9, 1.0, 0.8, 0.7]), post_centrality=np.array([1.0, 0.5, 0.6, 0.9]),
		low_confidence_c=(), low_confidence_p=(3,)
	)
	return corpus, inp, cc


def test_central_conversations(tmp_path):
	corpus, _, cc = _toy_fit(tmp_path)

	convs = central_conversations(corpus, cc, 1, 'citizen', 2)
	assert [c.key for c in convs] == ['u2', 'u1']
	assert convs[0].documents == ['c3', 'c4']
	assert convs[1].documents == ['c1', 'c2', 'c9']

	convs = central_conversations(corpus, cc, 1, 'citizen', 1, keywords=['climat', 'climate'])
	assert convs[0].documents == []

	convs = central_conversations(corpus, cc, 2, 'post', 1)
	assert convs[0].key == 'p4'
	assert convs[0].documents == ['p4', 'c6', 'c8', 'c9']


def test_diagnose(tmp_path):
	corpus, inp, cc = _toy_fit(tmp_path)
	report = diagnose(inp, cc, np.array([3.0, 1.0, 0.9]), corpus, top_n=2, min_degree=1)

	assert report['clusters']['k_c'] == 2
	assert list(report['clusters']['citizen_sizes']) == [2, 2]
	assert report['clusters']['low_confidence_p'] == [3]
	assert set(report['interaction']) == set(INTERACTION_KINDS)
	assert report['interaction']['psi_c'].col_labels == ['w1', 'w2']
	assert report['interaction']['psi_focus'].row_labels == ['w1', 'w2']
	assert report['attention']['counts'].sum() == 4
	assert report['attention']['undefined'] == 0

	for side in ('citizen', 'post'):
		assert [k for k, _ in report['keywords'][side]] == [1, 2]
		assert all(len(scores) <= 2 for _, scores in report['keywords'][side])

	assert report['keywords']['post'][1][1][0].term not in ('taxes', 'economy', 'jobs', 'growth')
	assert report['scree']['suggested_k'] == 1
	assert len(report['conversations']['citizen']) == 2

	no_extras = diagnose(inp, cc)
	assert no_extras['scree'] is None
	assert no_extras['conversations'] is None


def test_write_report_files(tmp_path):
	corpus, inp, cc = _toy_fit(tmp_path)
	report = diagnose(inp, cc, top_n=3)
	out = tmp_path / 'report'
	write_report_files(report, out)

	for name in ('psi_c.tsv', 'psi_p.tsv', 'psi.tsv', 'citizen_keywords.tsv',
			'post_keywords.tsv', 'attention_histogram.tsv'):
		assert (out / name).is_file()

	assert (out / 'psi_c.tsv').read_text().splitlines()[0] == 'cluster\tw1\tw2'
	assert (out / 'citizen_keywords.tsv').read_text().startswith('cluster\trank\tterm\tscore\n1\t1\t')
	assert (out / 'attention_histogram.tsv').read_text().splitlines()[1] == '0.00\t0.10\t0'


def test_diagnose_signed_term_matrix(tmp_path):
	_, inp, cc = _toy_fit(tmp_path)
	signed = inp._replace(x=SparseMatrix.from_dense(inp.x.to_dense() - 0.5))
	report = diagnose(signed, cc, np.array([2.0, 1.0]))

	assert report['keywords']['citizen'] == []
	assert [k for k, _ in report['keywords']['post']] == [1, 2]
	assert set(report['interaction']) == set(INTERACTION_KINDS)
	assert report['scree']['sigma'].size == 2

	write_report_files(report, tmp_path / 'report')
	assert (tmp_path / 'report' / 'citizen_keywords.tsv').read_text() == 'cluster\trank\tterm\tscore\n'
