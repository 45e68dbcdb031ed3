import itertools

import numpy as np
import pytest

from threadclust.cluster import *
from threadclust.cluster import _sq_distances
from threadclust.spectral import SpectralEmbedding, normalize_rows
from threadclust.simgen import misclustering_rate

from .utils import *


def _clouds(seed=0):
	rng = np.random.default_rng(seed)
	a = rng.normal(0, 0.1, (20, 2)) + [5, 5]
	b = rng.normal(0, 0.1, (15, 2)) - [5, 5]
	return np.vstack((a, b))


def test_kmeans_separated_clouds():
	x = _clouds()
	res = kmeans(x, 2, restarts=5, seed=1)
	truth = np.repeat([0, 1], (20, 15))

	assert misclustering_rate(res.labels, truth) == 0.0

	within = sum(((x[truth == j] - x[truth == j].mean(axis=0)) ** 2).sum() for j in (0, 1))
	assert np.isclose(res.inertia, within)


def test_kmeans_identical_points():
	res = kmeans(np.ones((6, 3)), 2, restarts=3)

	assert res.inertia == 0.0
	assert sorted(np.bincount(res.labels)) == [1, 5]


def test_kmeans_cube_corners():
	x = np.array(list(itertools.product((0.0, 1.0), repeat=3)))
	res = kmeans(x, 8, restarts=2)

	assert res.inertia == pytest.approx(0.0)
	assert len(set(res.labels)) == 8


def test_kmeans_brute_force_optimum():
	x = np.random.default_rng(2).standard_normal((9, 2))
	res = kmeans(x, 2, restarts=50, seed=3)

	best = min(
		sum(((x[m] - x[m].mean(axis=0)) ** 2).sum() for m in (mask, ~mask))
		for mask in (np.array(bits, dtype=bool) for bits in itertools.product((0, 1), repeat=9))
		if mask.any() and not mask.all()
	)
	assert res.inertia == pytest.approx(best)


def test_kmeans_labels_match_returned_centroids():
	x = np.random.default_rng(9).standard_normal((60, 3))
	res = kmeans(x, 4, restarts=3, seed=10, max_iter=1)
	d2 = ((x[:, None, :] - res.centroids[None, :, :]) ** 2).sum(axis=2)

	assert res.iterations == 1
	assert np.array_equal(res.labels, np.argmin(d2, axis=1))
	assert res.inertia == pytest.approx(d2.min(axis=1).sum())


def test_sq_distances():
	rng = np.random.default_rng(11)
	x, c = rng.standard_normal((50, 4)), rng.standard_normal((3, 4))
	d2 = _sq_distances(x, c)

	assert d2.shape == (50, 3)
	assert np.all(d2 >= 0)
	assert np.allclose(d2, ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2))
	assert np.all(_sq_distances(c, c).diagonal() < 1e-12)


def test_kmeans_deterministic_across_workers():
	x = _clouds(4)
	a = kmeans(x, 3, restarts=8, seed=5, workers=1)
	b = kmeans(x, 3, restarts=8, seed=5, workers=4)

	assert np.array_equal(a.labels, b.labels)
	assert a.inertia == b.inertia
	assert a.restart == b.restart


def test_kmeans_errors():
	x = np.zeros((3, 2))

	with pytest.raises(ClusterError):
		kmeans(x, 4)
	with pytest.raises(ClusterError):
		kmeans(x, 0)
	with pytest.raises(ClusterError):
		kmeans(x, 2, restarts=0)


def _embedding():
	rng = np.random.default_rng(6)
	u_c = np.vstack((rng.normal([1, 0], 0.05, (6, 2)), rng.normal([0, 1], 0.05, (4, 2)), [[0, 0]]))
	u_p = np.vstack((rng.normal([1, 0], 0.05, (3, 2)), rng.normal([0, 1], 0.05, (5, 2))))
	return SpectralEmbedding(u_c, u_p, np.array([2.0, 1.0]))


def test_fit_labels_and_centrality():
	cc = fit(_embedding(), 2, 2, restarts=5, seed=7)

	assert cc.k_c == 2 and cc.k_p == 2
	assert set(cc.citizen_labels) == {1, 2}
	assert misclustering_rate(cc.citizen_labels[:10], np.repeat([1, 2], (6, 4))) == 0.0
	assert misclustering_rate(cc.post_labels, np.repeat([1, 2], (3, 5))) == 0.0

	# Zero row: flagged, assigned, centrality 0
	assert cc.low_confidence_c == (10,)
	assert cc.low_confidence_p == ()
	assert cc.citizen_centrality[10] == 0.0
	assert np.all(cc.citizen_centrality[:10] > 0.9)
	assert cc.labels('post') is cc.post_labels
	assert cc.inertia == cc.citizen_inertia + cc.post_inertia


def test_fit_single_cluster():
	cc = fit(_embedding(), 1, 1, restarts=2)

	assert np.all(cc.citizen_labels == 1)
	assert np.all(cc.post_labels == 1)

	emb = normalize_rows(_embedding())
	centroid = emb.u_p_star.mean(axis=0)
	assert np.allclose(cc.post_centrality, emb.u_p_star @ centroid)


def test_fit_deterministic():
	a = fit(_embedding(), 2, 2, restarts=4, seed=8)
	b = fit(_embedding(), 2, 2, restarts=4, seed=8, workers=3)

	assert np.array_equal(a.citizen_labels, b.citizen_labels)
	assert np.array_equal(a.post_centrality, b.post_centrality)


def test_central_members():
	cc = fit(_embedding(), 2, 2, restarts=5, seed=9)

	for side, k in (('citizen', cc.k_c), ('post', cc.k_p)):
		for c in range(1, k + 1):
			members = central_members(cc, c, side=side)
			rho = cc.centrality(side)[members]

			assert sorted(members) == list(np.flatnonzero(cc.labels(side) == c))
			assert np.all(np.diff(rho) <= 0)

	assert len(central_members(cc, 1, 2)) == 2

	with pytest.raises(ClusterError):
		central_members(cc, 3)
	with pytest.raises(ValueError):
		central_members(cc, 1, side='wall')


def test_central_members_ties():
	cc = CoClustering(citizen_labels=np.array([1, 1, 1, 2]), post_labels=np.array([1]),
		citizen_centrality=np.ones(4), post_centrality=np.ones(1))

	assert central_members(cc, 1) == [0, 1, 2]
	assert central_members(cc, 2) == [3]


def test_disim_two_blocks():
	a = two_block_graph(40, seed=10)
	cc = disim(a, 2, 2, restarts=5, seed=11)
	z = planted_labels(40, 2)

	assert misclustering_rate(cc.citizen_labels, z) == 0.0
	assert misclustering_rate(cc.post_labels, z) == 0.0


def test_label_files(tmp_path):
	cc = fit(_embedding(), 2, 2, restarts=3, seed=12)
	cpath, ppath = tmp_path / 'c.tsv', tmp_path / 'p.tsv'
	write_labels(cc, 'citizen', cpath, [f'u{i}' for i in range(11)])
	write_labels(cc, 'post', ppath)

	assert cpath.read_text().splitlines()[0] == 'node\tkey\tcluster\tcentrality\tflagged'
	assert cpath.read_text().splitlines()[1].startswith('0\tu0\t')
	assert np.array_equal(read_labels(cpath), cc.citizen_labels)

	back = read_clustering(cpath, ppath)
	assert np.array_equal(back.citizen_labels, cc.citizen_labels)
	assert np.array_equal(back.post_labels, cc.post_labels)
	assert np.array_equal(back.citizen_centrality, cc.citizen_centrality)
	assert back.low_confidence_c == (10,)
	assert back.k_c == cc.k_c


def test_truth_files(tmp_path):
	path = tmp_path / 't.tsv'
	write_truth(np.array([2, 1, 1]), path)

	assert path.read_text() == 'cluster\n2\n1\n1\n'
	assert np.array_equal(read_labels(path), [2, 1, 1])

	path.write_text('cluster\nx\n')
	with pytest.raises(ClusterError):
		read_labels(path)
