import numpy as np
import pytest

from bril.behavior_space import descriptors, fit_pca, project
from bril.demo_store import DemoSet, Schema
from bril.errors import ContractError
from bril.evaluation import (centroid_distances, localize, mean_behavior, nearest_centroid, play,
                             policy_controller, summarize, summary_csv)
from bril.microbuild_env import EnvConfig, EpisodeResult
from bril.policy_net import init_policy
from conftest import make_demo


def _res(*counts):
    return [EpisodeResult("loss", tuple(c), []) for c in counts]


def _demos(counts, ids=None):
    schema = Schema(4, 3, ("a", "b", "c"))
    demos = [make_demo(i, counts=c) for i, c in enumerate(counts)]
    if ids:
        for d, i in zip(demos, ids):
            d.id = i
    return DemoSet(demos, schema)


def test_mean_behavior_examples():
    np.testing.assert_allclose(mean_behavior(_res((1, 0), (0, 1))), [0.5, 0.5])
    np.testing.assert_array_equal(mean_behavior(_res((0, 0), (0, 0))), [0, 0])
    with pytest.raises(ContractError):
        mean_behavior([])


def test_mean_behavior_two_pass_oracle():
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 6, size=(50, 4))
    got = mean_behavior(_res(*counts))
    rows = []
    for c in counts:
        s = sum(c)
        rows.append([v / s if s else 0.0 for v in c])
    direct = [sum(r[j] for r in rows) / 50 for j in range(4)]
    np.testing.assert_allclose(got, direct, atol=1e-12)


def test_localize_exact_and_tie():
    ds = _demos([(1, 0, 0), (0, 1, 0), (0, 0, 1)], ids=["z", "b", "a"])
    pca = fit_pca(descriptors(ds), 2)
    est = localize([0, 1, 0], ds, pca)
    assert est.nearest_demo_id == "b" and est.distance == 0.0
    np.testing.assert_allclose(est.coords, project(pca, [0, 1, 0]))
    # equidistant from "z" and "b": lower id wins
    assert localize([0.5, 0.5, 0], ds, pca).nearest_demo_id == "b"


def test_localize_linear_scan_and_permutation():
    rng = np.random.default_rng(1)
    ds = _demos([tuple(rng.integers(0, 9, size=3)) for _ in range(200)])
    D = descriptors(ds)
    pca = fit_pca(D, 2)
    mean = rng.dirichlet(np.ones(3))
    best, best_d = None, np.inf
    for d, row in zip(ds, D):
        dist = np.sqrt(((row - mean) ** 2).sum())
        if dist < best_d or (dist == best_d and d.id < best.id):
            best, best_d = d, dist
    assert localize(mean, ds, pca).nearest_demo_id == best.id
    perm = rng.permutation(200)
    assert localize(mean, ds.subset(perm), pca).nearest_demo_id == best.id


def test_centroid_distances():
    assert centroid_distances([0, 0], {0: [3, 4]}) == {0: 5.0}
    assert centroid_distances([1, 2], {3: [1, 2]})[3] == 0.0
    rng = np.random.default_rng(2)
    c = rng.normal(size=2)
    cents = {k: rng.normal(size=2) for k in range(4)}
    got = centroid_distances(c, cents)
    for k, v in cents.items():
        assert abs(got[k] - ((c[0] - v[0]) ** 2 + (c[1] - v[1]) ** 2) ** 0.5) < 1e-12
    assert nearest_centroid(c, cents) == min(got, key=got.get)


def test_policy_controller_presence_check():
    cfg = EnvConfig()
    il = init_policy(cfg.state_dim, cfg.action_count, 0, hidden=(4,))
    with pytest.raises(ContractError):
        policy_controller(il, behavior=[0.0, 0.0])
    br = init_policy(cfg.state_dim + 2, cfg.action_count, 0, behavior_dim=2, hidden=(4,))
    with pytest.raises(ContractError):
        policy_controller(br)


def test_play_deterministic_and_summary_csv():
    cfg = EnvConfig(max_ticks=60)
    pol = init_policy(cfg.state_dim, cfg.action_count, 0, hidden=(16,))
    a = play(pol, cfg, 6, seed=3)
    b = play(pol, cfg, 6, seed=3)
    assert [r.produced_counts for r in a] == [r.produced_counts for r in b]
    schema5 = Schema(4, 3, tuple(cfg.unit_names))
    ds5 = DemoSet([make_demo(i, counts=c) for i, c in
                   enumerate([(1, 0, 0, 0, 0), (0, 0, 1, 0, 0), (1, 0, 0, 3, 0), (0, 0, 0, 0, 1)])], schema5)
    pca = fit_pca(descriptors(ds5), 2)
    row = summarize("IL", a, ds5, pca, {0: [0.0, 0.0], 1: [1.0, 1.0]})
    text = summary_csv([row], cfg.unit_names, [0, 1])
    lines = text.splitlines()
    assert lines[0] == "# format-version: 1"
    assert lines[1].startswith("method,wins,games,nearest_demo,x,y,dist_c0,dist_c1,rifle_mean,rifle_std")
    assert lines[2].startswith("IL,")
    counts = np.array([r.produced_counts for r in a], dtype=float)
    np.testing.assert_allclose(row.count_std, counts.std(axis=0, ddof=1))
