import numpy as np
import pytest

from bril.clustering import (ClusterConfig, centroids, cluster_sizes, dbscan, dbscan_with_cores, labels_csv,
                             read_labels_csv, save_labels_csv)
from bril.errors import ContractError
from oracles import reference_dbscan


def test_two_separated_blobs():
    rng = np.random.default_rng(0)
    eps = 0.5
    a = rng.uniform(0, eps, size=(40, 2))
    b = a + [10 * eps, 0]
    labels = dbscan(np.vstack([a, b]), ClusterConfig(eps, 5))
    assert set(labels) == {0, 1}
    assert (labels[:40] == 0).all() and (labels[40:] == 1).all()


def test_sparse_points_all_noise():
    pts = np.array([[i * 2.0, 0.0] for i in range(10)])
    assert (dbscan(pts, ClusterConfig(1.0, 2)) == -1).all()


def test_min_pts_one_every_point_core():
    pts = np.array([[0.0, 0.0], [5.0, 5.0], [0.1, 0.0]])
    assert dbscan(pts, ClusterConfig(0.5, 1)).tolist() == [0, 1, 0]


def test_border_goes_to_first_cluster_in_scan_order():
    # 1-D: two dense groups with a border point (index 0) reachable from both
    right = [1.0, 1.05, 1.1, 1.15]
    left = [-x for x in right]
    pts = np.array([[0.0]] + [[x] for x in right + left])
    labels, core = dbscan_with_cores(pts, ClusterConfig(1.0, 4))
    assert not core[0] and core[1] and core[5]
    assert labels[0] == 0
    assert labels[1:5].tolist() == [0] * 4 and labels[5:].tolist() == [1] * 4


@pytest.mark.parametrize("eps,m", [(0.03, 3), (0.05, 5), (0.08, 10)])
def test_uniform_points_match_reference(eps, m):
    pts = np.random.default_rng(int(eps * 1000) + m).uniform(size=(500, 2))
    labels, core = dbscan_with_cores(pts, ClusterConfig(eps, m))
    ref, ref_core = reference_dbscan(pts, eps, m)
    np.testing.assert_array_equal(labels, ref)
    np.testing.assert_array_equal(core, ref_core)


def test_ids_contiguous_and_every_cluster_has_a_core():
    pts = np.random.default_rng(3).uniform(size=(300, 2))
    labels, core = dbscan_with_cores(pts, ClusterConfig(0.06, 4))
    ids = sorted(set(labels) - {-1})
    assert ids == list(range(len(ids)))
    for c in ids:
        assert core[labels == c].any()


def test_centroid_examples():
    assert centroids(np.array([[0.0, 0.0], [2.0, 0.0]]), [0, 0])[0].tolist() == [1.0, 0.0]
    assert centroids(np.zeros((3, 2)), [-1, -1, -1]) == {}


def test_centroids_match_direct_average():
    rng = np.random.default_rng(4)
    pts = rng.normal(size=(60, 2))
    labels = rng.integers(-1, 3, size=60)
    cents = centroids(pts, labels)
    for c in range(3):
        members = [pts[i] for i in range(60) if labels[i] == c]
        direct = [sum(p[k] for p in members) / len(members) for k in range(2)]
        np.testing.assert_allclose(cents[c], direct, atol=1e-12)
    assert cluster_sizes(labels) == {c: int((labels == c).sum()) for c in range(3)}


def test_centroids_length_mismatch():
    with pytest.raises(ContractError):
        centroids(np.zeros((3, 2)), [0, 0])


@pytest.mark.parametrize("eps,m", [(0.0, 3), (-1.0, 3), (float("inf"), 3), (0.1, 0)])
def test_bad_config(eps, m):
    with pytest.raises(ContractError):
        ClusterConfig(eps, m)


def test_labels_csv_round_trip(tmp_path):
    pts = np.random.default_rng(5).normal(size=(12, 2))
    labels = np.array([0, 1, -1] * 4)
    text = labels_csv(pts, labels)
    assert text.startswith("# format-version: 1\nindex,x,y,label\n")
    save_labels_csv(pts, labels, tmp_path / "l.csv")
    p2, l2 = read_labels_csv(tmp_path / "l.csv")
    np.testing.assert_array_equal(p2, pts)
    np.testing.assert_array_equal(l2, labels)


def test_labels_csv_malformed(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("index,x,y,label\n0,1.0,abc,0\n")
    with pytest.raises(ValueError):
        read_labels_csv(p)


def test_labels_csv_empty(tmp_path):
    p = tmp_path / "e.csv"
    p.write_text("")
    pts, labels = read_labels_csv(p)
    assert pts.shape == (0, 2) and labels.shape == (0,)
